//! Limited-memory BFGS minimization with a weak Wolfe line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Converged once the gradient's infinity norm drops below this.
    pub grad_tolerance: f64,
    /// Converged once an accepted step moves less than this (infinity norm).
    pub step_tolerance: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 6,
            max_iterations: 200,
            grad_tolerance: 1e-8,
            step_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f` from `x0`. `f` writes the gradient into its second argument
/// and returns the objective.
pub fn minimize<F>(f: F, x0: &[f64], config: &LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_capped(f, x0, config, |_| f64::INFINITY)
}

/// Like [`minimize`], but each trial step is shortened so its infinity norm
/// does not exceed `step_cap(x)` at the current iterate.
pub fn minimize_capped<F, C>(mut f: F, x0: &[f64], config: &LbfgsConfig, step_cap: C) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    C: Fn(&[f64]) -> f64,
{
    const ARMIJO: f64 = 1e-4;
    const CURVATURE: f64 = 0.9;
    const MAX_LINE_SEARCH: usize = 80;

    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut trial = vec![0.0; n];
    let mut trial_g = vec![0.0; n];

    for iteration in 0..config.max_iterations {
        if !value.is_finite() {
            return LbfgsResult { x, value, iterations: iteration, converged: false };
        }
        if inf_norm(&g) < config.grad_tolerance {
            return LbfgsResult { x, value, iterations: iteration, converged: true };
        }

        // Two-loop recursion for d = −H·g.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // Not a descent direction: restart from steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let norm = inf_norm(&d);
        let t_max = step_cap(&x) / norm;
        let mut t = t_max.min(1.0);

        // Weak Wolfe search by bracketing: halve on insufficient decrease,
        // expand (up to the cap) while the slope is still steep.
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut best: Option<(f64, f64)> = None;
        let mut last_t = t;
        for _ in 0..MAX_LINE_SEARCH {
            last_t = t;
            for i in 0..n {
                trial[i] = x[i] + t * d[i];
            }
            let trial_value = f(&trial, &mut trial_g);
            if !(trial_value.is_finite() && trial_value <= value + ARMIJO * t * slope) {
                hi = t;
            } else {
                best = Some((t, trial_value));
                if dot(&trial_g, &d) >= CURVATURE * slope || t >= t_max {
                    break;
                }
                lo = t;
            }
            t = if hi.is_finite() { 0.5 * (lo + hi) } else { (2.0 * t).min(t_max) };
        }
        let Some((t, trial_value)) = best else {
            // No representable decrease along a descent direction: the
            // iterate sits at the numerical minimum.
            let converged = norm * last_t < config.step_tolerance || inf_norm(&g) < config.grad_tolerance;
            return LbfgsResult { x, value, iterations: iteration + 1, converged };
        };
        if t != last_t {
            for i in 0..n {
                trial[i] = x[i] + t * d[i];
            }
            f(&trial, &mut trial_g);
        }
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s.clone(), y, 1.0 / sy));
        }
        x.copy_from_slice(&trial);
        g.copy_from_slice(&trial_g);
        value = trial_value;
        if inf_norm(&s) < config.step_tolerance {
            return LbfgsResult { x, value, iterations: iteration + 1, converged: true };
        }
    }
    let converged = inf_norm(&g) < config.grad_tolerance;
    LbfgsResult { x, value, iterations: config.max_iterations, converged }
}
