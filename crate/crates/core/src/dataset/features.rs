use super::interval::IntervalStats;
use crate::error::{Error, Result};

pub const STATE_DIM: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureWindowConfig {
    pub short_interval_ms: u64,
    pub long_interval_ms: u64,
    pub windows_per_scale: usize,
    pub features_per_window: usize,
}

impl Default for FeatureWindowConfig {
    fn default() -> Self {
        Self {
            short_interval_ms: 60,
            long_interval_ms: 600,
            windows_per_scale: 5,
            features_per_window: IntervalStats::FIELD_COUNT,
        }
    }
}

impl FeatureWindowConfig {
    pub fn state_dim(&self) -> usize {
        2 * self.windows_per_scale * self.features_per_window
    }

    /// Base intervals per long window.
    pub fn long_span(&self) -> usize {
        (self.long_interval_ms / self.short_interval_ms) as usize
    }

    /// Base intervals needed to fill every window.
    pub fn history_len(&self) -> usize {
        self.windows_per_scale * self.long_span()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.short_interval_ms > 0
            && self.long_interval_ms % self.short_interval_ms == 0
            && self.long_interval_ms >= self.short_interval_ms
            && self.windows_per_scale > 0
            && self.features_per_window == IntervalStats::FIELD_COUNT;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("unsupported feature windows {self:?}")))
        }
    }
}

/// Builds the state vector from base-interval history (oldest first).
///
/// Layout: short windows 0..5 then long windows 0..5, window 0 being the most
/// recent. Missing history counts as all-zero intervals.
pub fn featurize_state(history: &[IntervalStats]) -> Result<Vec<f64>> {
    featurize_with(&FeatureWindowConfig::default(), history)
}

pub fn featurize_with(config: &FeatureWindowConfig, history: &[IntervalStats]) -> Result<Vec<f64>> {
    config.validate()?;
    let needed = config.history_len();
    let recent = &history[history.len().saturating_sub(needed)..];
    for s in recent {
        s.check_finite()?;
    }
    // Newest first, padded with empty intervals at the old end.
    let zero = IntervalStats::default();
    let newest_first: Vec<IntervalStats> = recent
        .iter()
        .rev()
        .copied()
        .chain(std::iter::repeat(zero))
        .take(needed)
        .collect();

    let mut out = Vec::with_capacity(config.state_dim());
    for w in 0..config.windows_per_scale {
        out.extend_from_slice(&newest_first[w].to_array());
    }
    let span = config.long_span();
    for w in 0..config.windows_per_scale {
        let window = IntervalStats::aggregate(&newest_first[w * span..(w + 1) * span]);
        out.extend_from_slice(&window.to_array());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(rate: f64, packets: f64, losses: f64) -> IntervalStats {
        let total = packets + losses;
        IntervalStats {
            receive_rate: rate,
            recv_packet_count: packets,
            loss_count: losses,
            loss_ratio: if total > 0.0 { losses / total } else { 0.0 },
            ..IntervalStats::default()
        }
    }

    #[test]
    fn empty_and_zero_histories_give_zero_state() {
        assert_eq!(featurize_state(&[]).unwrap(), vec![0.0; STATE_DIM]);
        assert_eq!(featurize_state(&[IntervalStats::default(); 70]).unwrap(), vec![0.0; STATE_DIM]);
    }

    #[test]
    fn constant_rate_fills_feature_zero_of_every_window() {
        let history = vec![stats(1000.0, 10.0, 0.0); 50];
        let s = featurize_state(&history).unwrap();
        for w in 0..10 {
            assert_eq!(s[w * 15], 1000.0);
        }
    }

    #[test]
    fn long_window_loss_ratio_pools_counts() {
        // Oldest 40 intervals are lossless; the newest 10 carry a known table.
        let mut history = vec![stats(500.0, 5.0, 0.0); 40];
        let table = [(10.0, 0.0), (8.0, 2.0), (0.0, 3.0), (12.0, 1.0), (9.0, 0.0), (10.0, 0.0), (7.0, 4.0), (10.0, 0.0), (11.0, 0.0), (6.0, 5.0)];
        history.extend(table.iter().map(|&(p, l)| stats(800.0, p, l)));
        let s = featurize_state(&history).unwrap();
        let received: f64 = table.iter().map(|t| t.0).sum();
        let lost: f64 = table.iter().map(|t| t.1).sum();
        let long0 = 75;
        assert!((s[long0 + 6] - lost / (received + lost)).abs() < 1e-15);
        assert_eq!(s[long0 + 7], lost);
        assert_eq!(s[long0 + 1], received);
        // Short window 0 is the newest interval.
        assert_eq!(s[1], 6.0);
        assert_eq!(s[75 + 15 + 6], 0.0);
    }

    #[test]
    fn short_history_is_padded_at_the_old_end() {
        let history = vec![stats(1000.0, 10.0, 0.0); 3];
        let s = featurize_state(&history).unwrap();
        assert_eq!(s[2 * 15], 1000.0);
        assert_eq!(s[3 * 15], 0.0);
        // The first long window averages 3 real and 7 empty intervals.
        assert!((s[75] - 300.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_field_is_named() {
        let mut bad = IntervalStats::default();
        bad.delay_jitter = f64::NAN;
        let err = featurize_state(&[bad]).unwrap_err();
        assert!(err.to_string().contains("delay_jitter"));
    }
}
