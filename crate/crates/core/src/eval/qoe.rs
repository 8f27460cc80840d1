//! Session quality scores.

use serde::{Deserialize, Serialize};

use super::percentile::percentile;
use crate::error::{Error, Result};
use crate::sim::{IntervalRecord, SessionReport};

/// Video-quality reference rate at which the proxy saturates, kbps.
pub const VIDEO_REFERENCE_KBPS: f64 = 8000.0;

/// Rate-based stand-in for a perceptual video score:
/// `100·clamp(ln(1 + r) / ln(1 + 8000), 0, 1)` averaged over intervals.
///
/// This is a proxy, not a video-quality model.
pub fn video_proxy(rates_kbps: &[f64]) -> Result<f64> {
    if rates_kbps.is_empty() {
        return Err(Error::Invalid("video proxy of an empty stream".into()));
    }
    let scale = VIDEO_REFERENCE_KBPS.ln_1p();
    let total: f64 = rates_kbps.iter().map(|r| 100.0 * (r.max(0.0).ln_1p() / scale).clamp(0.0, 1.0)).sum();
    Ok(total / rates_kbps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeWeights {
    pub delay: f64,
    pub loss: f64,
    pub rate: f64,
    /// Divide the network score by the weight sum so it spans 0..100.
    pub renormalize: bool,
}

impl Default for QoeWeights {
    fn default() -> Self {
        Self { delay: 0.2, loss: 0.3, rate: 0.2, renormalize: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeScores {
    pub s_rate: f64,
    pub s_delay: f64,
    pub s_loss: f64,
    pub s_network: f64,
    pub s_video: f64,
    pub qoe: f64,
}

impl QoeScores {
    pub const NAMES: [&'static str; 6] = ["s_rate", "s_delay", "s_loss", "s_network", "s_video", "qoe"];

    pub fn to_array(&self) -> [f64; 6] {
        [self.s_rate, self.s_delay, self.s_loss, self.s_network, self.s_video, self.qoe]
    }
}

/// Raw session quantities behind the scores. Counts and byte totals add up
/// across pieces of a session and delay samples pool, so pieces can be
/// scored after [`QoeInput::merge`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QoeInput {
    pub served_bytes: f64,
    pub capacity_bytes: f64,
    pub sent_packets: u64,
    pub lost_packets: u64,
    /// Per-packet queuing delays, ms.
    pub queuing_delays: Vec<f64>,
    /// Received video rate per interval, kbps.
    pub video_kbps: Vec<f64>,
}

impl QoeInput {
    pub fn from_intervals(intervals: &[IntervalRecord]) -> Self {
        let mut out = Self::default();
        for r in intervals {
            out.served_bytes += r.served_bytes;
            out.capacity_bytes += r.capacity_bytes;
            out.sent_packets += r.sent_packets;
            out.lost_packets += r.lost_packets;
            out.queuing_delays.extend_from_slice(&r.queuing_delays);
            out.video_kbps.push(r.video_kbps);
        }
        out
    }

    pub fn from_session(report: &SessionReport) -> Self {
        Self::from_intervals(&report.intervals)
    }

    pub fn merge(&mut self, other: &QoeInput) {
        self.served_bytes += other.served_bytes;
        self.capacity_bytes += other.capacity_bytes;
        self.sent_packets += other.sent_packets;
        self.lost_packets += other.lost_packets;
        self.queuing_delays.extend_from_slice(&other.queuing_delays);
        self.video_kbps.extend_from_slice(&other.video_kbps);
    }
}

/// Applies the score formulas to already-reduced statistics.
///
/// `S_delay` is 100 when `d_max == d_min` (no delay spread).
pub fn scores_from_components(
    utilization: f64,
    loss: f64,
    d_max: f64,
    d_min: f64,
    d_95: f64,
    s_video: f64,
    weights: &QoeWeights,
) -> QoeScores {
    let clamp = |v: f64| v.clamp(0.0, 100.0);
    let s_rate = clamp(100.0 * utilization);
    let s_delay = if d_max > d_min { clamp(100.0 * (d_max - d_95) / (d_max - d_min)) } else { 100.0 };
    let s_loss = clamp(100.0 * (1.0 - loss));
    let mut s_network = weights.delay * s_delay + weights.loss * s_loss + weights.rate * s_rate;
    if weights.renormalize {
        s_network /= weights.delay + weights.loss + weights.rate;
    }
    let s_video = clamp(s_video);
    QoeScores { s_rate, s_delay, s_loss, s_network, s_video, qoe: 0.5 * s_network + 0.5 * s_video }
}

pub fn qoe_scores(input: &QoeInput, weights: &QoeWeights) -> Result<QoeScores> {
    if input.video_kbps.is_empty() || input.capacity_bytes <= 0.0 {
        return Err(Error::Invalid("quality scores of an empty session".into()));
    }
    let utilization = input.served_bytes / input.capacity_bytes;
    let loss = if input.sent_packets > 0 { input.lost_packets as f64 / input.sent_packets as f64 } else { 1.0 };
    let (d_max, d_min, d_95) = if input.queuing_delays.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let max = input.queuing_delays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = input.queuing_delays.iter().copied().fold(f64::INFINITY, f64::min);
        (max, min, percentile(&input.queuing_delays, 95.0))
    };
    let s_video = video_proxy(&input.video_kbps)?;
    Ok(scores_from_components(utilization, loss, d_max, d_min, d_95, s_video, weights))
}
