/// Linearly interpolated percentile (`p` in 0..=100) with rank
/// `h = (n − 1)·p / 100`, as in numpy's default. NaN for an empty slice.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * (p.clamp(0.0, 100.0) / 100.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Empirical CDF as sorted `(value, rank / n)` pairs, rank starting at 1.
pub fn cdf_points(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileReport {
    /// `(percentile, value)` rows.
    pub rows: Vec<(f64, f64)>,
    pub cdf: Vec<(f64, f64)>,
}

pub fn percentile_report(values: &[f64], percentiles: &[f64]) -> PercentileReport {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    PercentileReport {
        rows: percentiles.iter().map(|p| (*p, percentile_sorted(&sorted, *p))).collect(),
        cdf: cdf_points(values),
    }
}
