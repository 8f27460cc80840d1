use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Receiver-side statistics of one 60 ms feedback interval.
///
/// Field order is the per-window feature order of the state vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    /// kbps
    pub receive_rate: f64,
    pub recv_packet_count: f64,
    pub recv_bytes: f64,
    /// ms
    pub mean_queuing_delay: f64,
    /// ms, over received packets; 0 when none arrived.
    pub min_queuing_delay: f64,
    /// Standard deviation of one-way delay, ms.
    pub delay_jitter: f64,
    pub loss_ratio: f64,
    pub loss_count: f64,
    /// bytes
    pub mean_packet_size: f64,
    /// ms
    pub mean_interarrival: f64,
    /// ms
    pub std_interarrival: f64,
    pub video_packet_prob: f64,
    pub audio_packet_prob: f64,
    /// Target rate in force during the interval, kbps.
    pub prev_estimate: f64,
    /// Log-ratio action that produced `prev_estimate`.
    pub prev_action: f64,
}

impl IntervalStats {
    pub const FIELD_COUNT: usize = 15;

    pub const FIELD_NAMES: [&'static str; Self::FIELD_COUNT] = [
        "receive_rate",
        "recv_packet_count",
        "recv_bytes",
        "mean_queuing_delay",
        "min_queuing_delay",
        "delay_jitter",
        "loss_ratio",
        "loss_count",
        "mean_packet_size",
        "mean_interarrival",
        "std_interarrival",
        "video_packet_prob",
        "audio_packet_prob",
        "prev_estimate",
        "prev_action",
    ];

    pub fn to_array(&self) -> [f64; Self::FIELD_COUNT] {
        [
            self.receive_rate,
            self.recv_packet_count,
            self.recv_bytes,
            self.mean_queuing_delay,
            self.min_queuing_delay,
            self.delay_jitter,
            self.loss_ratio,
            self.loss_count,
            self.mean_packet_size,
            self.mean_interarrival,
            self.std_interarrival,
            self.video_packet_prob,
            self.audio_packet_prob,
            self.prev_estimate,
            self.prev_action,
        ]
    }

    /// Rejects non-finite fields, naming the first offender.
    pub fn check_finite(&self) -> Result<()> {
        match self.to_array().iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!(
                "interval statistic {}",
                Self::FIELD_NAMES[i]
            ))),
            None => Ok(()),
        }
    }

    /// Combines consecutive base intervals into one coarser window.
    ///
    /// Rates, sizes, delays and probabilities are averaged (packet-weighted
    /// where a per-packet mean is involved), counts are summed, the minimum
    /// delay is the minimum over intervals that received packets, the two
    /// standard deviations are pooled and the loss ratio is recomputed from
    /// the pooled counts.
    pub fn aggregate(intervals: &[IntervalStats]) -> IntervalStats {
        let n = intervals.len();
        if n == 0 {
            return IntervalStats::default();
        }
        let plain_mean = |f: fn(&IntervalStats) -> f64| intervals.iter().map(f).sum::<f64>() / n as f64;
        let packets: f64 = intervals.iter().map(|s| s.recv_packet_count).sum();
        let losses: f64 = intervals.iter().map(|s| s.loss_count).sum();
        let weighted_mean = |f: fn(&IntervalStats) -> f64| {
            if packets > 0.0 {
                intervals.iter().map(|s| s.recv_packet_count * f(s)).sum::<f64>() / packets
            } else {
                0.0
            }
        };
        // Pooled std: E[X²] − E[X]² across the union of samples, using each
        // interval's mean as its location.
        let pooled_std = |mean: fn(&IntervalStats) -> f64, std: fn(&IntervalStats) -> f64| {
            if packets <= 0.0 {
                return 0.0;
            }
            let grand = intervals.iter().map(|s| s.recv_packet_count * mean(s)).sum::<f64>() / packets;
            let second = intervals
                .iter()
                .map(|s| s.recv_packet_count * (std(s).powi(2) + (mean(s) - grand).powi(2)))
                .sum::<f64>()
                / packets;
            second.max(0.0).sqrt()
        };
        let min_delay = intervals
            .iter()
            .filter(|s| s.recv_packet_count > 0.0)
            .map(|s| s.min_queuing_delay)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
            .unwrap_or(0.0);
        let total = packets + losses;
        IntervalStats {
            receive_rate: plain_mean(|s| s.receive_rate),
            recv_packet_count: packets,
            recv_bytes: intervals.iter().map(|s| s.recv_bytes).sum(),
            mean_queuing_delay: weighted_mean(|s| s.mean_queuing_delay),
            min_queuing_delay: min_delay,
            delay_jitter: pooled_std(|s| s.mean_queuing_delay, |s| s.delay_jitter),
            loss_ratio: if total > 0.0 { losses / total } else { 0.0 },
            loss_count: losses,
            mean_packet_size: weighted_mean(|s| s.mean_packet_size),
            mean_interarrival: weighted_mean(|s| s.mean_interarrival),
            std_interarrival: pooled_std(|s| s.mean_interarrival, |s| s.std_interarrival),
            video_packet_prob: weighted_mean(|s| s.video_packet_prob),
            audio_packet_prob: weighted_mean(|s| s.audio_packet_prob),
            prev_estimate: plain_mean(|s| s.prev_estimate),
            prev_action: plain_mean(|s| s.prev_action),
        }
    }
}
