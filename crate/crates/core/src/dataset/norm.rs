use serde::{Deserialize, Serialize};

use super::transition::Transition;
use crate::error::{Error, Result};
use crate::nn::Normalization;

pub const STD_FLOOR: f64 = 1e-6;
pub const MIN_FIT_SAMPLES: usize = 100;

/// Per-feature mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Fits over equally sized rows; requires at least 100 of them.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut count = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        // Welford's update, one feature column at a time.
        for row in rows {
            if count == 0 {
                mean = vec![0.0; row.len()];
                m2 = vec![0.0; row.len()];
            } else if row.len() != mean.len() {
                return Err(Error::Shape(format!("row of width {} among rows of width {}", row.len(), mean.len())));
            }
            count += 1;
            for ((m, s), x) in mean.iter_mut().zip(m2.iter_mut()).zip(row) {
                let d = x - *m;
                *m += d / count as f64;
                *s += d * (x - *m);
            }
        }
        if count < MIN_FIT_SAMPLES {
            return Err(Error::Invalid(format!(
                "normalization needs at least {MIN_FIT_SAMPLES} samples, got {count}"
            )));
        }
        let std = m2.iter().map(|s| (s / count as f64).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn to_layer(&self) -> Normalization {
        Normalization { mean: self.mean.clone(), std: self.std.clone() }
    }

    /// Appends one more feature with the given statistics.
    pub fn extended(&self, mean: f64, std: f64) -> Self {
        let mut out = self.clone();
        out.mean.push(mean);
        out.std.push(std.max(STD_FLOOR));
        out
    }
}

/// Statistics of the state vectors of `transitions`.
pub fn fit_norm_stats(transitions: &[Transition]) -> Result<NormStats> {
    NormStats::fit(transitions.iter().map(|t| t.state.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_feature_hits_the_floor() {
        let rows = vec![vec![3.0, 1.0]; 100];
        let s = NormStats::fit(rows.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(s.mean[0], 3.0);
        assert_eq!(s.std[0], STD_FLOOR);
    }

    #[test]
    fn standard_normal_is_recovered_and_refit_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..100_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                vec![z, 5.0 + 2.0 * z]
            })
            .collect();
        let s = NormStats::fit(rows.iter().map(Vec::as_slice)).unwrap();
        assert!(s.mean[0].abs() < 0.02 && (s.std[0] - 1.0).abs() < 0.02);
        let normalized: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
        let again = NormStats::fit(normalized.iter().map(Vec::as_slice)).unwrap();
        for (m, sd) in again.mean.iter().zip(&again.std) {
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let rows = vec![vec![1.0]; 99];
        assert!(NormStats::fit(rows.iter().map(Vec::as_slice)).is_err());
    }
}
