//! Paced sender + bottleneck link + 60 ms receiver feedback loop.

use serde::{Deserialize, Serialize};

use super::link::{Link, LinkCounters, Packet, PacketKind, DEFAULT_QUEUE_PACKETS, PACKET_BYTES};
use crate::dataset::action::{decode_action, encode_action, MIN_RATE_KBPS};
use crate::dataset::{CapacityTrace, IntervalStats};
use crate::error::{Error, Result};
use crate::eval::percentile;

pub const FEEDBACK_INTERVAL_MS: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateSource {
    Model,
    Fallback,
    Aimd,
    Behavior,
}

impl EstimateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateSource::Model => "model",
            EstimateSource::Fallback => "fallback",
            EstimateSource::Aimd => "aimd",
            EstimateSource::Behavior => "behavior",
        }
    }
}

/// What a controller sees at a decision point.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub now_ms: u64,
    /// Every feedback report so far, oldest first.
    pub reports: &'a [IntervalStats],
    /// Ground truth, for oracle behaviors only.
    pub trace: &'a CapacityTrace,
}

impl DecisionContext<'_> {
    /// Receive rate of the newest report, kbps (0 before any feedback).
    pub fn received_kbps(&self) -> f64 {
        self.reports.last().map_or(0.0, |r| r.receive_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub target_kbps: f64,
    pub source: EstimateSource,
}

/// Maps feedback history to a target send rate, once per interval.
pub trait RateController {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput;
}

impl<C: RateController + ?Sized> RateController for Box<C> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput {
        (**self).decide(ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub duration_ms: u64,
    pub seed: u64,
    pub queue_packets: usize,
    pub packet_bytes: u32,
    /// Every n-th packet carries audio.
    pub audio_every: u64,
}

impl SessionConfig {
    pub fn new(duration_ms: u64, seed: u64) -> Self {
        Self {
            duration_ms,
            seed,
            queue_packets: DEFAULT_QUEUE_PACKETS,
            packet_bytes: PACKET_BYTES,
            audio_every: 20,
        }
    }

    pub fn intervals(&self) -> usize {
        (self.duration_ms / FEEDBACK_INTERVAL_MS) as usize
    }
}

/// The decision applied for one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedDecision {
    /// Rate requested by the controller, kbps.
    pub requested_kbps: f64,
    /// Log-ratio against the newest receive rate, clipped.
    pub action: f64,
    /// Rate actually paced, kbps (the decoded action).
    pub target_kbps: f64,
    pub source: EstimateSource,
}

impl AppliedDecision {
    pub fn new(requested_kbps: f64, received_kbps: f64, source: EstimateSource) -> Self {
        let requested = if requested_kbps.is_finite() && requested_kbps > 0.0 { requested_kbps } else { MIN_RATE_KBPS };
        let action = encode_action(requested, received_kbps).expect("positive finite estimate");
        Self { requested_kbps, action, target_kbps: decode_action(action, received_kbps), source }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub start_ms: u64,
    pub end_ms: u64,
    pub decision: AppliedDecision,
    pub stats: IntervalStats,
    /// Mean trace capacity over the interval, kbps.
    pub capacity_kbps: f64,
    pub video_kbps: f64,
    pub p95_queuing_delay_ms: f64,
    pub queue_len: usize,
    pub sent_packets: u64,
    pub lost_packets: u64,
    pub served_bytes: f64,
    pub capacity_bytes: f64,
    /// Queuing delays of the packets received in this interval, ms.
    pub queuing_delays: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub trace_name: String,
    pub seed: u64,
    pub intervals: Vec<IntervalRecord>,
    pub counters: LinkCounters,
}

impl SessionReport {
    pub fn stats(&self) -> Vec<IntervalStats> {
        self.intervals.iter().map(|r| r.stats).collect()
    }

    pub fn utilization(&self) -> f64 {
        let served: f64 = self.intervals.iter().map(|r| r.served_bytes).sum();
        let capacity: f64 = self.intervals.iter().map(|r| r.capacity_bytes).sum();
        if capacity > 0.0 { served / capacity } else { 0.0 }
    }
}

/// Per-tick view for conservation checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickSnapshot {
    pub now_ms: u64,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued: u64,
    pub in_flight: u64,
    pub min_delivered_one_way_ms: Option<u64>,
}

#[derive(Debug, Default)]
struct IntervalAccumulator {
    sent: u64,
    lost: u64,
    received: u64,
    audio: u64,
    video: u64,
    bytes: f64,
    served: f64,
    capacity: f64,
    queuing: Vec<f64>,
    one_way: Vec<f64>,
    gaps: Vec<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl IntervalAccumulator {
    fn finish(self, decision: &AppliedDecision, start_ms: u64, end_ms: u64, trace: &CapacityTrace, queue_len: usize) -> IntervalRecord {
        let len_s = (end_ms - start_ms) as f64 / 1000.0;
        let received = self.received as f64;
        let (mean_q, _) = mean_std(&self.queuing);
        let (_, jitter) = mean_std(&self.one_way);
        let (mean_gap, std_gap) = mean_std(&self.gaps);
        let total = received + self.lost as f64;
        let receive_rate = self.bytes * 8.0 / 1000.0 / len_s;
        let video_prob = if received > 0.0 { self.video as f64 / received } else { 0.0 };
        let stats = IntervalStats {
            receive_rate,
            recv_packet_count: received,
            recv_bytes: self.bytes,
            mean_queuing_delay: mean_q,
            min_queuing_delay: self.queuing.iter().copied().fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v)))).unwrap_or(0.0),
            delay_jitter: jitter,
            loss_ratio: if total > 0.0 { self.lost as f64 / total } else { 0.0 },
            loss_count: self.lost as f64,
            mean_packet_size: if received > 0.0 { self.bytes / received } else { 0.0 },
            mean_interarrival: mean_gap,
            std_interarrival: std_gap,
            video_packet_prob: video_prob,
            audio_packet_prob: if received > 0.0 { self.audio as f64 / received } else { 0.0 },
            prev_estimate: decision.target_kbps,
            prev_action: decision.action,
        };
        IntervalRecord {
            start_ms,
            end_ms,
            decision: *decision,
            stats,
            capacity_kbps: trace.mean_capacity(start_ms, end_ms),
            video_kbps: receive_rate * video_prob,
            p95_queuing_delay_ms: if self.queuing.is_empty() { 0.0 } else { percentile(&self.queuing, 95.0) },
            queue_len,
            sent_packets: self.sent,
            lost_packets: self.lost,
            served_bytes: self.served,
            capacity_bytes: self.capacity,
            queuing_delays: self.queuing,
        }
    }
}

/// Runs one session: a decision every 60 ms, 1 ms link ticks in between.
pub fn run_session<C: RateController + ?Sized>(trace: &CapacityTrace, controller: &mut C, config: &SessionConfig) -> Result<SessionReport> {
    run_session_observed(trace, controller, config, |_| {})
}

/// [`run_session`] with a callback after every tick.
pub fn run_session_observed<C, O>(trace: &CapacityTrace, controller: &mut C, config: &SessionConfig, mut observer: O) -> Result<SessionReport>
where
    C: RateController + ?Sized,
    O: FnMut(&TickSnapshot),
{
    if trace.duration_ms() < config.duration_ms {
        return Err(Error::Invalid(format!(
            "trace {} covers {} ms, shorter than the {} ms session",
            trace.name,
            trace.duration_ms(),
            config.duration_ms
        )));
    }
    if config.packet_bytes == 0 || config.audio_every == 0 || config.queue_packets == 0 {
        return Err(Error::Config(format!("invalid session configuration {config:?}")));
    }
    let mut link = Link::new(config.queue_packets, config.seed);
    let packet_bytes = config.packet_bytes as f64;
    let mut reports: Vec<IntervalStats> = Vec::with_capacity(config.intervals());
    let mut records = Vec::with_capacity(config.intervals());
    let mut seq = 0u64;
    let mut credit = 0.0f64;
    let mut sent_total = 0u64;
    let mut last_arrival: Option<u64> = None;

    for k in 0..config.intervals() {
        let start = k as u64 * FEEDBACK_INTERVAL_MS;
        let end = start + FEEDBACK_INTERVAL_MS;
        let ctx = DecisionContext { now_ms: start, reports: &reports, trace };
        let out = controller.decide(&ctx);
        let decision = AppliedDecision::new(out.target_kbps, ctx.received_kbps(), out.source);
        let per_tick = decision.target_kbps / 8.0;
        let mut acc = IntervalAccumulator::default();

        for now in start..end {
            credit += per_tick;
            let mut arrivals = Vec::new();
            while credit >= packet_bytes {
                credit -= packet_bytes;
                let kind = if seq % config.audio_every == config.audio_every - 1 { PacketKind::Audio } else { PacketKind::Video };
                arrivals.push(Packet { seq, size: config.packet_bytes, send_time_ms: now, kind });
                seq += 1;
            }
            sent_total += arrivals.len() as u64;
            acc.sent += arrivals.len() as u64;
            let step = link.step(now, trace.at(now), &arrivals);
            acc.served += step.served_bytes;
            acc.capacity += step.capacity_bytes;
            acc.lost += step.lost.len() as u64;
            let mut min_owd = None;
            for d in &step.delivered {
                acc.received += 1;
                acc.bytes += d.packet.size as f64;
                match d.packet.kind {
                    PacketKind::Audio => acc.audio += 1,
                    PacketKind::Video => acc.video += 1,
                    PacketKind::Probe => {}
                }
                acc.queuing.push(d.queuing_delay_ms);
                acc.one_way.push(d.one_way_delay_ms);
                if let Some(prev) = last_arrival {
                    acc.gaps.push((d.arrival_ms - prev) as f64);
                }
                last_arrival = Some(d.arrival_ms);
                let owd = d.arrival_ms - d.packet.send_time_ms;
                min_owd = Some(min_owd.map_or(owd, |m: u64| m.min(owd)));
            }
            let c = link.counters();
            observer(&TickSnapshot {
                now_ms: now,
                sent: sent_total,
                delivered: c.delivered,
                dropped: c.tail_dropped + c.randomly_lost,
                queued: link.queue_len() as u64,
                in_flight: link.in_flight() as u64,
                min_delivered_one_way_ms: min_owd,
            });
        }
        let record = acc.finish(&decision, start, end, trace, link.queue_len());
        reports.push(record.stats);
        records.push(record);
    }
    Ok(SessionReport { trace_name: trace.name.clone(), seed: config.seed, intervals: records, counters: link.counters() })
}
