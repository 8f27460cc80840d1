//! Log-ratio action encoding `a = ln(E / R)`.

use crate::error::{Error, Result};

/// Received rates below this are treated as this value, kbps.
pub const RECEIVED_FLOOR_KBPS: f64 = 10.0;
pub const MIN_RATE_KBPS: f64 = 10.0;
pub const MAX_RATE_KBPS: f64 = 200_000.0;

/// `ln 50`, the action bound.
pub fn action_bound() -> f64 {
    50f64.ln()
}

pub fn clip_action(a: f64) -> f64 {
    let b = action_bound();
    a.clamp(-b, b)
}

pub fn encode_action(estimate_kbps: f64, received_kbps: f64) -> Result<f64> {
    if !(estimate_kbps > 0.0) || !estimate_kbps.is_finite() {
        return Err(Error::Invalid(format!("estimate must be positive, got {estimate_kbps}")));
    }
    let r = received_kbps.max(RECEIVED_FLOOR_KBPS);
    Ok(clip_action((estimate_kbps / r).ln()))
}

pub fn decode_action(action: f64, received_kbps: f64) -> f64 {
    let r = received_kbps.max(RECEIVED_FLOOR_KBPS);
    (r * action.exp()).clamp(MIN_RATE_KBPS, MAX_RATE_KBPS)
}
