//! Reward from audio/video opinion scores and the synthetic score surrogate.

use super::interval::IntervalStats;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.8;

/// `(2 − α)·q_audio + α·q_video`.
pub fn compute_reward(q_audio: f64, q_video: f64, alpha: f64) -> Result<f64> {
    for (name, q) in [("audio", q_audio), ("video", q_video)] {
        if !(1.0..=5.0).contains(&q) {
            return Err(Error::Invalid(format!("{name} opinion score {q} outside [1, 5]")));
        }
    }
    Ok((2.0 - alpha) * q_audio + alpha * q_video)
}

/// Rate at which the audio score saturates, kbps.
const AUDIO_SATURATION_KBPS: f64 = 128.0;
const VIDEO_DELAY_SCALE_MS: f64 = 200.0;
const AUDIO_DELAY_SCALE_MS: f64 = 400.0;

fn surrogate(utilization: f64, loss: f64, delay_ms: f64, delay_scale: f64) -> f64 {
    let u = utilization.clamp(0.0, 1.0);
    let penalty = (1.0 - loss.clamp(0.0, 1.0)) * (-delay_ms.max(0.0) / delay_scale).exp();
    (1.0 + 4.0 * u * penalty).clamp(1.0, 5.0)
}

/// Synthetic `(q_audio, q_video)` for one interval: utilization scaled by a
/// loss and queuing-delay penalty, mapped onto `[1, 5]`.
pub fn synthesize_mos(interval: &IntervalStats, true_capacity_kbps: f64) -> Result<(f64, f64)> {
    if !(true_capacity_kbps > 0.0) {
        return Err(Error::Invalid(format!("capacity must be positive, got {true_capacity_kbps}")));
    }
    let rate = interval.receive_rate;
    let loss = interval.loss_ratio;
    let delay = interval.mean_queuing_delay;
    let q_video = surrogate(rate / true_capacity_kbps, loss, delay, VIDEO_DELAY_SCALE_MS);
    let q_audio = surrogate(rate / AUDIO_SATURATION_KBPS, loss, delay, AUDIO_DELAY_SCALE_MS);
    Ok((q_audio, q_video))
}
