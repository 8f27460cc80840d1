//! Criteria 1 to 6: gradients, expectiles, the ensemble penalty, mode search,
//! the conservative action and the link simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rbwe::critic::{penalty_coefficient, CriticConfig, EnsembleCritic};
use rbwe::dataset::{synthesize_traces, BehaviorKind, CapacityTrace};
use rbwe::nn::gradcheck::{check_network, Loss};
use rbwe::nn::{Activation, LayerSpec, Matrix, Network};
use rbwe::policy::{GmmParams, SigmaRule};
use rbwe::sim::{run_session, run_session_observed, ControlOutput, DecisionContext, EstimateSource, RateController, SessionConfig};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::Outcome;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

fn smooth_activation(rng: &mut ChaCha8Rng) -> Activation {
    [Activation::Tanh, Activation::Softplus, Activation::Identity][rng.gen_range(0..3)]
}

pub fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let input = rng.gen_range(2..7);
        let hidden = rng.gen_range(3..9);
        let output = rng.gen_range(1..4);
        let recurrent = i % 2 == 1;
        let mut specs = vec![LayerSpec::normalization(input)];
        if recurrent {
            specs.push(LayerSpec::gru(input, hidden));
        } else {
            specs.push(LayerSpec::dense(input, hidden, smooth_activation(&mut rng)));
        }
        specs.push(LayerSpec::dense(hidden, hidden, smooth_activation(&mut rng)));
        let head = if i % 4 == 0 { Activation::Softmax } else { smooth_activation(&mut rng) };
        specs.push(LayerSpec::dense(hidden, output, head));
        let mut net = Network::new(&format!("net{i}"), &specs, &mut rng).unwrap();
        let rows = rng.gen_range(1..5);
        let x = random_matrix(&mut rng, rows, input, 1.5);
        let h = recurrent.then(|| random_matrix(&mut rng, rows, hidden, 0.8));
        let weights: Vec<f64> = (0..output).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let loss = if i % 3 == 0 { Loss::Linear(weights) } else { Loss::WeightedSquares(weights) };
        worst = worst.max(check_network(&mut net, &x, h.as_ref(), &loss).unwrap());
    }
    Outcome::check(worst < 1e-4, format!("max relative error {worst:.2e} over 10 dense and 10 GRU nets"))
}

/// τ-expectile of N(0, 1) from τ·E[(X − e)⁺] = (1 − τ)·E[(e − X)⁺], by bisection.
pub fn normal_expectile(tau: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let excess = |e: f64| {
        let (pdf, cdf) = (n.pdf(e), n.cdf(e));
        tau * (pdf - e * (1.0 - cdf)) - (1.0 - tau) * (e * cdf + pdf)
    };
    let (mut lo, mut hi) = (-6.0, 6.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn expectiles() -> Outcome {
    let mut errors = Vec::new();
    for (i, tau) in [0.5, 0.7, 0.9].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
        let mut critic = EnsembleCritic::new(CriticConfig { state_dim: 3, hidden: 16, members: 2 }, &mut rng).unwrap();
        let batch = 256;
        let state = vec![0.3, -0.2, 0.5];
        let states = Matrix::from_rows(&vec![state.clone(); batch]).unwrap();
        for step in 0..4000 {
            let targets: Vec<f64> = (0..batch).map(|_| StandardNormal.sample(&mut rng)).collect();
            let lr = if step < 3000 { 1e-3 } else { 1e-4 };
            critic.fit_value(&states, &targets, tau, lr).unwrap();
        }
        let learned = critic.value(&Matrix::row_vector(&state)).unwrap()[0];
        errors.push((tau, learned, (learned - normal_expectile(tau)).abs()));
    }
    let worst = errors.iter().map(|e| e.2).fold(0.0, f64::max);
    let detail: Vec<String> = errors.iter().map(|(t, l, e)| format!("tau {t}: {l:.4} (err {e:.4})")).collect();
    Outcome::check(worst < 0.02, detail.join(", "))
}

pub fn penalty() -> Outcome {
    let oracle = |n: f64| {
        Normal::new(0.0, 1.0).unwrap().inverse_cdf((n - std::f64::consts::PI / 8.0) / (n - std::f64::consts::PI / 4.0 + 1.0))
    };
    let c1 = penalty_coefficient(1);
    let c10 = penalty_coefficient(10);
    let mut ok = c1 == 0.0 && (c10 - 1.559).abs() <= 1e-3 && (c10 - oracle(10.0)).abs() <= 1e-3;
    let mut detail = vec![format!("c(1) = {c1}, c(10) = {c10:.5} (oracle {:.5})", oracle(10.0))];

    // Member outputs i.i.d. N(m, σ²) with m = 0 and σ = 1, so m − c(N)σ = −c(N).
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 100_000;
    for n in [2usize, 5, 10] {
        let mut total = 0.0;
        for _ in 0..trials {
            let min = (0..n).map(|_| StandardNormal.sample(&mut rng)).fold(f64::INFINITY, |a: f64, b: f64| a.min(b));
            total += min;
        }
        let expected_min = total / trials as f64;
        let rel = (-penalty_coefficient(n) - expected_min).abs() / expected_min.abs();
        ok &= rel < 0.02;
        detail.push(format!("N={n}: -c(N) = {:.4}, MC E[min] = {expected_min:.4}, rel err {:.2}%", -penalty_coefficient(n), 100.0 * rel));
    }
    Outcome::check(ok, detail.join("; "))
}

fn random_mixture(rng: &mut ChaCha8Rng) -> GmmParams {
    let weights: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    GmmParams::new(
        weights.iter().map(|w| w / total).collect(),
        (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        (0..4).map(|_| rng.gen_range(0.05..1.0)).collect(),
    )
    .unwrap()
}

pub fn mode_search() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let bound = rbwe::dataset::action_bound();
    let grid: Vec<f64> = {
        let n = (2.0 * bound / 1e-4).floor() as usize;
        (0..=n).map(|i| -bound + i as f64 * 1e-4).collect()
    };
    let (mut density_failures, mut worst_curv, mut unconverged) = (0, 0.0f64, 0);
    for _ in 0..1000 {
        let g = random_mixture(&mut rng);
        let mode = g.find_mode();
        unconverged += usize::from(!mode.converged);
        let grid_best = grid.iter().map(|&a| g.log_prob(a)).fold(f64::NEG_INFINITY, f64::max).exp();
        if mode.log_density_at_mode.exp() < grid_best - 1e-9 {
            density_failures += 1;
        }
        let lambda = g.local_curvature(mode.a_star).unwrap_or(f64::NAN);
        let h = 1e-3 * g.stds().iter().cloned().fold(f64::INFINITY, f64::min);
        let a = mode.a_star;
        let fd = -(g.log_prob(a + h) - 2.0 * g.log_prob(a) + g.log_prob(a - h)) / (h * h);
        let rel = (lambda - fd).abs() / fd.abs().max(1e-12);
        worst_curv = if rel.is_nan() { f64::INFINITY } else { worst_curv.max(rel) };
    }
    Outcome::check(
        density_failures == 0 && worst_curv < 1e-3 && unconverged == 0,
        format!(
            "{density_failures}/1000 below grid density, {unconverged} unconverged, max curvature rel err {worst_curv:.2e}"
        ),
    )
}

pub fn conservative_action() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let deltas = [0.0, 0.25, 0.5, 1.0];
    let (mut not_mode, mut not_monotone, mut errors) = (0, 0, 0);
    for i in 0..1000 {
        let g = random_mixture(&mut rng);
        let rule = if i % 2 == 0 { SigmaRule::Reciprocal } else { SigmaRule::ReciprocalSqrt };
        let actions: Result<Vec<f64>, _> = deltas.iter().map(|d| g.conservative_action(*d, rule).map(|l| l.a_chosen)).collect();
        let Ok(actions) = actions else {
            errors += 1;
            continue;
        };
        not_mode += usize::from(actions[0] != g.find_mode().a_star);
        not_monotone += usize::from(actions.windows(2).any(|w| w[1] > w[0]));
    }
    Outcome::check(
        not_mode == 0 && not_monotone == 0 && errors == 0,
        format!("1000 mixtures: {not_mode} with a(0) != a*, {not_monotone} non-monotone, {errors} errors"),
    )
}

struct CapacityMultiple(f64);

impl RateController for CapacityMultiple {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput {
        ControlOutput { target_kbps: self.0 * ctx.trace.capacity_at(ctx.now_ms), source: EstimateSource::Behavior }
    }
}

pub fn simulator() -> Outcome {
    let traces = synthesize_traces(100, 10_000, 77).unwrap();
    let (mut conservation, mut early) = (0usize, 0usize);
    let mut ticks = 0usize;
    for (i, trace) in traces.iter().enumerate() {
        let owd = trace.at(0).owd_ms as u64;
        let mut controller = BehaviorKind::ALL[i % 3].controller(i as u64);
        run_session_observed(trace, &mut controller, &SessionConfig::new(10_000, i as u64), |t| {
            ticks += 1;
            conservation += usize::from(t.sent != t.delivered + t.dropped + t.queued + t.in_flight);
            early += usize::from(t.min_delivered_one_way_ms.is_some_and(|d| d < owd));
        })
        .unwrap();
    }
    let trace = CapacityTrace::constant("overload", 2000.0, 20.0, 0.0, 20_000).unwrap();
    let report = run_session(&trace, &mut CapacityMultiple(2.0), &SessionConfig::new(10_000, 1)).unwrap();
    let late: Vec<f64> = report.intervals[50..].iter().map(|r| r.stats.mean_queuing_delay).collect();
    let delay = late.iter().sum::<f64>() / late.len() as f64;
    Outcome::check(
        conservation == 0 && early == 0 && (delay - 240.0).abs() <= 24.0,
        format!(
            "{ticks} ticks over 100 sessions: {conservation} conservation violations, {early} early deliveries; overload delay {delay:.1} ms (expected 240)"
        ),
    )
}
