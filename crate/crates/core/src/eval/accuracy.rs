use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimation accuracy against ground-truth capacity.
///
/// With `ε = (E − C) / C`: `e` is the mean `|ε|`, `e_plus` the mean of `ε`
/// over overestimating steps and `e_minus` the mean of `−ε` over
/// underestimating steps (0 for an empty class). `mse` is in Mbps².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMetrics {
    pub mse: f64,
    pub e: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub steps: usize,
    pub over_steps: usize,
    pub under_steps: usize,
}

pub fn accuracy_metrics<I>(pairs: I) -> Result<AccuracyMetrics>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut n, mut n_plus, mut n_minus) = (0usize, 0usize, 0usize);
    let (mut sq, mut abs, mut plus, mut minus) = (0.0, 0.0, 0.0, 0.0);
    for (estimate, capacity) in pairs {
        if !(capacity > 0.0) || !estimate.is_finite() || !capacity.is_finite() {
            return Err(Error::Invalid(format!("estimate {estimate} / capacity {capacity}")));
        }
        let eps = (estimate - capacity) / capacity;
        n += 1;
        sq += ((estimate - capacity) / 1000.0).powi(2);
        abs += eps.abs();
        if eps > 0.0 {
            n_plus += 1;
            plus += eps;
        } else if eps < 0.0 {
            n_minus += 1;
            minus -= eps;
        }
    }
    if n == 0 {
        return Err(Error::Invalid("accuracy of an empty stream".into()));
    }
    let mean = |s: f64, k: usize| if k > 0 { s / k as f64 } else { 0.0 };
    Ok(AccuracyMetrics {
        mse: sq / n as f64,
        e: abs / n as f64,
        e_plus: mean(plus, n_plus),
        e_minus: mean(minus, n_minus),
        steps: n,
        over_steps: n_plus,
        under_steps: n_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let perfect = accuracy_metrics([(2000.0, 2000.0), (500.0, 500.0)]).unwrap();
        assert_eq!((perfect.mse, perfect.e, perfect.e_plus, perfect.e_minus), (0.0, 0.0, 0.0, 0.0));
        let one = accuracy_metrics([(3000.0, 2000.0)]).unwrap();
        assert_eq!((one.mse, one.e, one.e_plus, one.e_minus), (1.0, 0.5, 0.5, 0.0));
        let two = accuracy_metrics([(3000.0, 2000.0), (1000.0, 2000.0)]).unwrap();
        assert_eq!((two.mse, two.e, two.e_plus, two.e_minus), (1.0, 0.5, 0.5, 0.5));
        assert!(accuracy_metrics(std::iter::empty()).is_err());
        assert!(accuracy_metrics([(1.0, 0.0)]).is_err());
    }

    proptest! {
        #[test]
        fn class_means_recompose_the_overall_error(
            pairs in prop::collection::vec((1.0f64..10_000.0, 1.0f64..10_000.0), 1..60)
        ) {
            let m = accuracy_metrics(pairs.iter().copied()).unwrap();
            let recomposed = (m.over_steps as f64 * m.e_plus + m.under_steps as f64 * m.e_minus) / m.steps as f64;
            prop_assert!((recomposed - m.e).abs() <= 1e-12 * m.e.max(1.0));
            prop_assert!(m.e_plus >= 0.0 && m.e_minus >= 0.0);
            let mut reversed = pairs.clone();
            reversed.reverse();
            let r = accuracy_metrics(reversed).unwrap();
            prop_assert!((r.e - m.e).abs() <= 1e-12 && (r.mse - m.mse).abs() <= 1e-9 * m.mse.max(1.0));
        }
    }
}
