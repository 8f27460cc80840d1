use std::f64::consts::PI;

use crate::stats::inverse_normal_cdf;

/// `Φ⁻¹((N − π/8)/(N − π/4 + 1))`: the multiple of the ensemble spread that,
/// subtracted from the mean, approximates the expected minimum of `N`
/// Gaussian draws.
pub fn penalty_coefficient(members: usize) -> f64 {
    assert!(members >= 1, "an ensemble needs at least one member");
    let n = members as f64;
    if members == 1 {
        // The ratio is exactly one half; skip the rounding in the quotient.
        return 0.0;
    }
    inverse_normal_cdf((n - PI / 8.0) / (n - PI / 4.0 + 1.0))
}
