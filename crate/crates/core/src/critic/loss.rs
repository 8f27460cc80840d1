//! Scalar regression losses and their derivatives in the residual.

/// `|τ − 1(u < 0)| · u²`.
pub fn expectile_loss(u: f64, tau: f64) -> f64 {
    expectile_weight(u, tau) * u * u
}

/// `d/du` of [`expectile_loss`].
pub fn expectile_grad(u: f64, tau: f64) -> f64 {
    2.0 * expectile_weight(u, tau) * u
}

fn expectile_weight(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        1.0 - tau
    } else {
        tau
    }
}

/// Quadratic within `±delta`, linear outside.
pub fn huber_loss(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// `d/dr` of [`huber_loss`].
pub fn huber_grad(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn expectile_examples() {
        assert!((expectile_loss(2.0, 0.7) - 2.8).abs() < 1e-12);
        assert!((expectile_loss(-2.0, 0.7) - 1.2).abs() < 1e-12);
        assert_eq!(expectile_loss(1.5, 0.5), expectile_loss(-1.5, 0.5));
        assert_eq!(expectile_loss(1.5, 0.5), 0.5 * 2.25);
    }

    #[test]
    fn huber_examples() {
        assert_eq!(huber_loss(0.5, 1.0), 0.125);
        assert_eq!(huber_loss(3.0, 1.0), 2.5);
        assert_eq!(huber_loss(-3.0, 1.0), 2.5);
    }

    proptest! {
        #[test]
        fn derivatives_match_differences(u in -20.0f64..20.0, tau in 0.05f64..0.95) {
            prop_assume!(u.abs() > 1e-3 && (u.abs() - 1.0).abs() > 1e-3);
            let h = 1e-6;
            let fd = (expectile_loss(u + h, tau) - expectile_loss(u - h, tau)) / (2.0 * h);
            prop_assert!((fd - expectile_grad(u, tau)).abs() < 1e-5 * (1.0 + fd.abs()));
            let fd = (huber_loss(u + h, 1.0) - huber_loss(u - h, 1.0)) / (2.0 * h);
            prop_assert!((fd - huber_grad(u, 1.0)).abs() < 1e-6);
        }
    }
}
