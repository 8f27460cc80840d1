//! One-dimensional Gaussian mixtures over the log-ratio action: density,
//! sampling, mode search and the lower-confidence-bound action.

use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::dataset::{action_bound, clip_action};
use crate::error::{Error, Result};
use crate::lbfgs::{minimize_capped, LbfgsConfig};

/// Smallest admissible component standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Curvatures at or below this are treated as a flat density.
pub const MIN_CURVATURE: f64 = 1e-12;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;
const TIE_TOLERANCE: f64 = 1e-12;
/// Components with less responsibility than this do not limit the step size.
const CAP_RESPONSIBILITY: f64 = 1e-3;

/// Mixture parameters `{p_k, μ_k, σ_k}`.
///
/// Components are stored sorted by `(μ, σ, p)`, so every derived quantity is
/// independent of the order they were supplied in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmmParams {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl GmmParams {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || stds.len() != k {
            return Err(Error::Shape(format!(
                "mixture with {} weights, {} means, {} stds",
                k,
                means.len(),
                stds.len()
            )));
        }
        if weights.iter().chain(&means).chain(&stds).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture parameters".into()));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Invalid(format!("mixture weights {weights:?} do not form a distribution")));
        }
        if let Some(s) = stds.iter().find(|s| **s < SIGMA_FLOOR) {
            return Err(Error::Invalid(format!("component std {s} below {SIGMA_FLOOR}")));
        }
        let bound = action_bound();
        if let Some(m) = means.iter().find(|m| m.abs() > bound + 1e-12) {
            return Err(Error::Invalid(format!("component mean {m} outside ±{bound}")));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| {
            means[i]
                .total_cmp(&means[j])
                .then(stds[i].total_cmp(&stds[j]))
                .then(weights[i].total_cmp(&weights[j]))
        });
        Ok(Self {
            weights: order.iter().map(|&i| weights[i]).collect(),
            means: order.iter().map(|&i| means[i]).collect(),
            stds: order.iter().map(|&i| stds[i]).collect(),
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// `Σ p_k μ_k`.
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(p, m)| p * m).sum()
    }

    /// Per-component `ln p_k + ln N(a; μ_k, σ_k²)`.
    fn component_logs(&self, a: f64) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(move |((p, m), s)| {
                let z = (a - m) / s;
                p.ln() - 0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
            })
    }

    /// `ln Σ_k p_k N(a; μ_k, σ_k²)` via log-sum-exp.
    pub fn log_prob(&self, a: f64) -> f64 {
        let logs: Vec<f64> = self.component_logs(a).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }

    /// Log density with its first and second derivatives in `a`.
    ///
    /// With responsibilities `γ_k` and per-component scores
    /// `g_k = −(a − μ_k)/σ_k²`, the derivatives are `Σ γ_k g_k` and
    /// `Var_γ(g) − Σ γ_k / σ_k²`.
    pub fn log_prob_derivatives(&self, a: f64) -> (f64, f64, f64) {
        let logs: Vec<f64> = self.component_logs(a).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        let (mut d1, mut g2, mut inv_var) = (0.0, 0.0, 0.0);
        for ((l, m), s) in logs.iter().zip(&self.means).zip(&self.stds) {
            let gamma = (l - max).exp() / total;
            let var = s * s;
            let g = -(a - m) / var;
            d1 += gamma * g;
            g2 += gamma * g * g;
            inv_var += gamma / var;
        }
        (max + total.ln(), d1, g2 - d1 * d1 - inv_var)
    }

    fn responsibilities(&self, a: f64) -> Vec<f64> {
        let logs: Vec<f64> = self.component_logs(a).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        logs.iter().map(|l| (l - max).exp() / total).collect()
    }

    /// Ancestral sample, clipped to the action bounds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = WeightedIndex::new(&self.weights)
            .expect("validated weights")
            .sample(rng);
        let a = Normal::new(self.means[k], self.stds[k])
            .expect("validated std")
            .sample(rng);
        clip_action(a)
    }

    /// Multi-start quasi-Newton search for the highest-density action.
    pub fn find_mode(&self) -> ModeResult {
        self.find_mode_with(&LbfgsConfig::default())
    }

    pub fn find_mode_with(&self, config: &LbfgsConfig) -> ModeResult {
        let mut starts = self.means.clone();
        starts.push(self.mean());
        let objective = |x: &[f64], g: &mut [f64]| {
            let (lp, d1, _) = self.log_prob_derivatives(x[0]);
            g[0] = -d1;
            -lp
        };
        let cap = |x: &[f64]| {
            self.responsibilities(x[0])
                .iter()
                .zip(&self.stds)
                .filter(|(r, _)| **r > CAP_RESPONSIBILITY)
                .map(|(_, s)| *s)
                .fold(f64::INFINITY, f64::min)
        };

        let mut best: Option<(f64, f64, bool)> = None;
        for &start in &starts {
            let run = minimize_capped(objective, &[start], config, cap);
            let candidate = (run.x[0], self.log_prob(run.x[0]), run.converged);
            best = Some(match best {
                None => candidate,
                Some(current) if prefer(candidate, current) => candidate,
                Some(current) => current,
            });
        }
        let (a, log_density, converged) = best.expect("at least one start");
        let a_star = clip_action(a);
        let lambda_star = -self.log_prob_derivatives(a_star).2;
        ModeResult {
            a_star,
            log_density_at_mode: self.log_prob(a_star),
            lambda_star,
            sigma_star: SigmaRule::Reciprocal.sigma(lambda_star),
            converged: converged && lambda_star > MIN_CURVATURE && log_density.is_finite(),
            restarts_used: starts.len(),
        }
    }

    /// `−d²/da² ln π` at `a_star`, in closed form.
    pub fn local_curvature(&self, a_star: f64) -> Result<f64> {
        let lambda = -self.log_prob_derivatives(a_star).2;
        if lambda > MIN_CURVATURE {
            Ok(lambda)
        } else {
            Err(Error::DegenerateCurvature(lambda))
        }
    }

    /// `clip(a* − δ·σ*)` at the mixture's mode.
    pub fn conservative_action(&self, delta: f64, rule: SigmaRule) -> Result<Lcb> {
        let mode = self.find_mode();
        if !mode.converged {
            return Err(Error::NoConvergence { restarts: mode.restarts_used });
        }
        let lambda = self.local_curvature(mode.a_star)?;
        let sigma_star = rule.sigma(lambda);
        Ok(Lcb {
            a_star: mode.a_star,
            sigma_star,
            a_chosen: clip_action(mode.a_star - delta * sigma_star),
        })
    }
}

/// Converged beats unconverged, then higher density; near-equal densities
/// resolve toward the smaller action.
fn prefer(candidate: (f64, f64, bool), current: (f64, f64, bool)) -> bool {
    let (a, lp, ok) = candidate;
    let (b, lq, ok_b) = current;
    if ok != ok_b {
        return ok;
    }
    if (lp - lq).abs() <= TIE_TOLERANCE {
        return a < b;
    }
    lp > lq
}

/// How the local spread `σ*` is derived from the curvature `λ*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// `σ* = 1/λ*`.
    #[default]
    Reciprocal,
    /// `σ* = λ*^{−1/2}`, the Laplace-approximation width.
    ReciprocalSqrt,
}

impl SigmaRule {
    pub fn sigma(self, lambda: f64) -> f64 {
        match self {
            SigmaRule::Reciprocal => 1.0 / lambda,
            SigmaRule::ReciprocalSqrt => 1.0 / lambda.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeResult {
    pub a_star: f64,
    pub log_density_at_mode: f64,
    pub lambda_star: f64,
    pub sigma_star: f64,
    pub converged: bool,
    pub restarts_used: usize,
}

/// A lower-confidence-bound action with the quantities it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lcb {
    pub a_star: f64,
    pub sigma_star: f64,
    pub a_chosen: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gmm(p: &[f64], m: &[f64], s: &[f64]) -> GmmParams {
        GmmParams::new(p.to_vec(), m.to_vec(), s.to_vec()).unwrap()
    }

    fn grid_argmax(g: &GmmParams, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n)
            .map(|i| lo + i as f64 * step)
            .map(|a| (a, g.log_prob(a)))
            .fold((f64::NAN, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
    }

    #[test]
    fn standard_normal_peak() {
        let g = gmm(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 2.0, 3.0], &[1.0; 4]);
        assert!((g.log_prob(0.0) + 0.918_938_533_204_672_8).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_at_midpoint() {
        let g = gmm(&[0.5, 0.5], &[-1.0, 1.0], &[1.0, 1.0]);
        let oracle = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((g.log_prob(0.0) - oracle.ln()).abs() < 1e-12);
        assert!((g.log_prob(0.0) + 1.418_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn far_tails_stay_finite() {
        let g = gmm(&[0.5, 0.5], &[-1.0, 1.0], &[1e-3, 1e-3]);
        assert!(g.log_prob(1e6).is_finite());
        assert!(g.log_prob_derivatives(-1e6).2.is_finite());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(GmmParams::new(vec![0.5, 0.4], vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GmmParams::new(vec![1.0], vec![0.0], vec![1e-4]).is_err());
        assert!(GmmParams::new(vec![1.0], vec![5.0], vec![1.0]).is_err());
        assert!(GmmParams::new(vec![1.0], vec![f64::NAN], vec![1.0]).is_err());
        assert!(GmmParams::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let g = gmm(&[0.1, 0.2, 0.3, 0.4], &[-3.9, -0.5, 0.2, 3.9], &[0.01, 0.3, 1.0, 1.2]);
        let (lo, hi) = (-action_bound() - 5.0, action_bound() + 5.0);
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        // Simpson's rule.
        let mut total = g.log_prob(lo).exp() + g.log_prob(hi).exp();
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            total += w * g.log_prob(lo + i as f64 * h).exp();
        }
        total *= h / 3.0;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn narrow_samples_concentrate() {
        let g = gmm(&[1.0, 0.0, 0.0, 0.0], &[0.7, -1.0, 0.0, 1.0], &[1e-3; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = g.sample(&mut rng);
            assert!((a - 0.7).abs() < 6e-3);
        }
    }

    #[test]
    fn sample_mean_matches_mixture_mean() {
        let g = gmm(&[0.1, 0.2, 0.3, 0.4], &[-2.0, -0.5, 0.4, 1.0], &[0.5, 0.3, 1.0, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - g.mean()).abs() < 3.0 * se, "{mean} vs {}", g.mean());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = gmm(&[0.5, 0.5], &[-1.0, 1.0], &[0.3, 0.3]);
        let a = g.sample(&mut ChaCha8Rng::seed_from_u64(9));
        let b = g.sample(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn single_component_mode_is_its_mean() {
        let g = gmm(&[1.0, 0.0, 0.0, 0.0], &[0.3, -2.0, 1.0, 2.0], &[0.4, 1.0, 1.0, 1.0]);
        let m = g.find_mode();
        assert!(m.converged);
        assert!((m.a_star - 0.3).abs() < 1e-6);
    }

    #[test]
    fn separated_pair_breaks_tie_downward() {
        let g = gmm(&[0.5, 0.5], &[-1.0, 1.0], &[0.3, 0.3]);
        let m = g.find_mode();
        let (grid_a, _) = grid_argmax(&g, -1.5, 0.0, 1e-4);
        assert!(m.converged);
        assert!(m.a_star < 0.0);
        assert!((m.a_star - grid_a).abs() < 1e-3, "{} vs {grid_a}", m.a_star);
    }

    #[test]
    fn overlapping_pair_merges_at_midpoint() {
        let g = gmm(&[0.5, 0.5], &[-0.1, 0.1], &[1.0, 1.0]);
        let m = g.find_mode();
        let (grid_a, _) = grid_argmax(&g, -1.0, 1.0, 1e-4);
        assert!(m.converged);
        assert!(m.a_star.abs() < 1e-6 && grid_a.abs() < 1e-4);
    }

    #[test]
    fn gaussian_curvature_is_inverse_variance() {
        let g = gmm(&[1.0], &[0.0], &[0.5]);
        assert!((g.local_curvature(0.0).unwrap() - 4.0).abs() < 1e-12);
        let g = gmm(&[1.0], &[0.0], &[1.0]);
        assert!((g.local_curvature(0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_point_reports_degenerate_curvature() {
        // Between two equal components at ±σ the second derivative vanishes.
        let g = gmm(&[0.5, 0.5], &[-1.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(g.local_curvature(0.0), Err(Error::DegenerateCurvature(_))));
    }

    #[test]
    fn lcb_substitution() {
        // Single Gaussian with λ* = 10 at a* = 0.2.
        let g = gmm(&[1.0], &[0.2], &[(0.1f64).sqrt()]);
        let lcb = g.conservative_action(0.5, SigmaRule::Reciprocal).unwrap();
        assert!((lcb.sigma_star - 0.1).abs() < 1e-9);
        assert!((lcb.a_chosen - 0.15).abs() < 1e-9);
        let sqrt = g.conservative_action(0.5, SigmaRule::ReciprocalSqrt).unwrap();
        assert!((sqrt.a_chosen - (0.2 - 0.5 * 0.1f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn very_sharp_mode_is_kept() {
        let g = gmm(&[1.0], &[-0.4], &[SIGMA_FLOOR]);
        let lcb = g.conservative_action(0.5, SigmaRule::Reciprocal).unwrap();
        assert!((lcb.a_chosen - lcb.a_star).abs() < 1e-6);
    }

    fn mixture() -> impl Strategy<Value = GmmParams> {
        let b = action_bound();
        (
            prop::collection::vec(0.05f64..1.0, 4),
            prop::collection::vec(-b..b, 4),
            prop::collection::vec(0.02f64..2.0, 4),
        )
            .prop_map(|(w, m, s)| {
                let total: f64 = w.iter().sum();
                GmmParams::new(w.iter().map(|v| v / total).collect(), m, s).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn permutation_leaves_results_unchanged(g in mixture(), shift in 0usize..4) {
            let rot = |v: &[f64]| { let mut v = v.to_vec(); v.rotate_left(shift); v };
            let h = GmmParams::new(rot(g.weights()), rot(g.means()), rot(g.stds())).unwrap();
            prop_assert_eq!(g.log_prob(0.37).to_bits(), h.log_prob(0.37).to_bits());
            prop_assert_eq!(g.find_mode(), h.find_mode());
        }

        #[test]
        fn mode_beats_a_coarse_grid(g in mixture()) {
            let m = g.find_mode();
            let b = action_bound();
            let (_, best) = grid_argmax(&g, -b, b, 1e-3);
            prop_assert!(m.log_density_at_mode >= best - 1e-9);
        }

        #[test]
        fn curvature_matches_finite_differences(g in mixture()) {
            let m = g.find_mode();
            let h = 1e-4;
            let a = m.a_star;
            let fd = -(g.log_prob(a + h) - 2.0 * g.log_prob(a) + g.log_prob(a - h)) / (h * h);
            let lambda = -g.log_prob_derivatives(a).2;
            prop_assert!((lambda - fd).abs() <= 1e-3 * lambda.abs().max(fd.abs()), "{lambda} vs {fd}");
        }

        #[test]
        fn lcb_is_monotone_in_delta(g in mixture()) {
            if let Ok(zero) = g.conservative_action(0.0, SigmaRule::Reciprocal) {
                prop_assert_eq!(zero.a_chosen, zero.a_star);
                let mut prev = zero.a_chosen;
                for delta in [0.25, 0.5, 1.0] {
                    let next = g.conservative_action(delta, SigmaRule::Reciprocal).unwrap().a_chosen;
                    prop_assert!(next <= prev);
                    prev = next;
                }
            }
        }
    }
}
