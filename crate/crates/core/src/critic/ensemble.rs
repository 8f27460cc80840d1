//! The Q-ensemble with lagged targets and the state-value network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{expectile_grad, expectile_loss, huber_grad, huber_loss};
use super::penalty::penalty_coefficient;
use crate::dataset::{NormStats, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::{polyak_update, Activation, Adam, LayerSpec, Matrix, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticConfig {
    pub state_dim: usize,
    pub hidden: usize,
    pub members: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self { state_dim: STATE_DIM, hidden: 256, members: 10 }
    }
}

/// Per-sample ensemble summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticBatchStats {
    pub mean: Vec<f64>,
    /// Population standard deviation across members.
    pub std: Vec<f64>,
    /// `mean − c(N)·std`.
    pub penalized: Vec<f64>,
}

/// Source of per-member Q-values.
pub trait QEnsemble {
    fn members(&self) -> usize;

    /// Member outputs for each `(state, action)` row, one column per member.
    fn member_values(&self, states: &Matrix, actions: &[f64], use_targets: bool) -> Result<Matrix>;
}

/// Mean, population std and penalized value of each row of `values`.
pub fn ensemble_stats(values: &Matrix) -> CriticBatchStats {
    let n = values.cols();
    let c = penalty_coefficient(n);
    let mut out = CriticBatchStats {
        mean: Vec::with_capacity(values.rows()),
        std: Vec::with_capacity(values.rows()),
        penalized: Vec::with_capacity(values.rows()),
    };
    for i in 0..values.rows() {
        let row = values.row(i);
        let m = row.iter().sum::<f64>() / n as f64;
        let s = (row.iter().map(|q| (q - m) * (q - m)).sum::<f64>() / n as f64).sqrt();
        out.mean.push(m);
        out.std.push(s);
        out.penalized.push(if s > 0.0 { m - c * s } else { m });
    }
    out
}

pub fn ensemble_eval<Q: QEnsemble + ?Sized>(
    critic: &Q,
    states: &Matrix,
    actions: &[f64],
    use_targets: bool,
) -> Result<CriticBatchStats> {
    Ok(ensemble_stats(&critic.member_values(states, actions, use_targets)?))
}

/// `σ_q / max(|m_q|, ε)` over the online members at one state-action pair.
pub fn relative_uncertainty<Q: QEnsemble + ?Sized>(critic: &Q, state: &[f64], action: f64, epsilon: f64) -> Result<f64> {
    let stats = ensemble_eval(critic, &Matrix::row_vector(state), &[action], false)?;
    Ok(stats.std[0] / stats.mean[0].abs().max(epsilon))
}

/// A minibatch of transitions in matrix form.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleCritic {
    config: CriticConfig,
    q: Vec<Network>,
    q_target: Vec<Network>,
    v: Network,
    adam: Adam,
}

fn body(input: usize, hidden: usize) -> [LayerSpec; 4] {
    [
        LayerSpec::normalization(input),
        LayerSpec::dense(input, hidden, Activation::Relu),
        LayerSpec::dense(hidden, hidden, Activation::Relu),
        LayerSpec::dense(hidden, 1, Activation::Identity),
    ]
}

fn with_action(states: &Matrix, actions: &[f64]) -> Result<Matrix> {
    if states.rows() != actions.len() {
        return Err(Error::Shape(format!("{} states but {} actions", states.rows(), actions.len())));
    }
    states.hconcat(&Matrix::from_vec(actions.len(), 1, actions.to_vec())?)
}

fn output_bias(net: &mut Network) -> &mut [f64] {
    let name = format!("{}.{}.bias", net.seq.name(), net.seq.specs().len() - 1);
    let id = net.store.find(&name).expect("every body ends in a dense layer");
    net.store.value_mut(id)
}

fn column(values: Matrix, member: &str) -> Result<Vec<f64>> {
    if !values.is_finite() {
        return Err(Error::NonFinite(format!("output of {member}")));
    }
    Ok(values.into_vec())
}

impl EnsembleCritic {
    pub fn new<R: Rng + ?Sized>(config: CriticConfig, rng: &mut R) -> Result<Self> {
        if config.members == 0 || config.hidden == 0 || config.state_dim == 0 {
            return Err(Error::Config(format!("degenerate critic configuration {config:?}")));
        }
        let q_specs = body(config.state_dim + 1, config.hidden);
        let mut q = Vec::with_capacity(config.members);
        let mut q_target = Vec::with_capacity(config.members);
        for i in 0..config.members {
            let online = Network::new(&format!("q_{i}"), &q_specs, rng)?;
            let target = online.renamed(&format!("q_tgt_{i}"))?;
            q.push(online);
            q_target.push(target);
        }
        let v = Network::new("v", &body(config.state_dim, config.hidden), rng)?;
        Ok(Self { config, q, q_target, v, adam: Adam::default() })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    pub fn penalty(&self) -> f64 {
        penalty_coefficient(self.config.members)
    }

    /// Installs input statistics; Q-networks also normalize the action.
    pub fn set_normalization(&mut self, states: &NormStats, action_mean: f64, action_std: f64) -> Result<()> {
        let with_action = states.extended(action_mean, action_std).to_layer();
        for net in self.q.iter_mut().chain(&mut self.q_target) {
            net.seq.set_normalization(0, with_action.clone())?;
        }
        self.v.seq.set_normalization(0, states.to_layer())
    }

    /// Sets the output bias of every network, e.g. to the expected return,
    /// so regression starts on the right scale.
    pub fn set_output_bias(&mut self, value: f64) {
        for net in self.q.iter_mut().chain(&mut self.q_target).chain(std::iter::once(&mut self.v)) {
            output_bias(net)[0] = value;
        }
    }

    /// Every network with its parameters: online members, targets, value.
    pub fn networks(&self) -> impl Iterator<Item = &Network> {
        self.q.iter().chain(&self.q_target).chain(std::iter::once(&self.v))
    }

    pub(crate) fn networks_mut(&mut self) -> impl Iterator<Item = &mut Network> {
        self.q.iter_mut().chain(&mut self.q_target).chain(std::iter::once(&mut self.v))
    }

    pub fn value(&self, states: &Matrix) -> Result<Vec<f64>> {
        column(self.v.infer(states, None)?.0, "v")
    }

    /// One expectile-regression step of `V(s)` toward `targets`; returns the
    /// mean loss before the step.
    pub fn fit_value(&mut self, states: &Matrix, targets: &[f64], tau: f64, learning_rate: f64) -> Result<f64> {
        let n = states.rows();
        if n == 0 || targets.len() != n {
            return Err(Error::Shape(format!("{n} states but {} targets", targets.len())));
        }
        self.v.store.zero_grad();
        let (v, _) = self.v.forward(states, None)?;
        let mut grad = Matrix::zeros(n, 1);
        let mut loss = 0.0;
        for i in 0..n {
            let u = targets[i] - v.get(i, 0);
            loss += expectile_loss(u, tau);
            grad.set(i, 0, -expectile_grad(u, tau) / n as f64);
        }
        self.v.backward(&grad)?;
        self.adam.step(&mut self.v.store, learning_rate)?;
        Ok(loss / n as f64)
    }

    /// Expectile step of `V` toward the penalized target-ensemble value.
    pub fn value_update(&mut self, states: &Matrix, actions: &[f64], tau: f64, learning_rate: f64) -> Result<f64> {
        let targets = ensemble_eval(self, states, actions, true)?.penalized;
        self.fit_value(states, &targets, tau, learning_rate)
    }

    /// Huber TD step of every online member toward `r + γ(1 − done)V(s′)`;
    /// returns the loss averaged over samples and members.
    pub fn q_update(&mut self, batch: &Batch, gamma: f64, huber_delta: f64, learning_rate: f64) -> Result<f64> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::Invalid("empty batch".into()));
        }
        let next_v = self.value(&batch.next_states)?;
        let y: Vec<f64> = (0..n)
            .map(|i| batch.rewards[i] + if batch.dones[i] { 0.0 } else { gamma * next_v[i] })
            .collect();
        let input = with_action(&batch.states, &batch.actions)?;
        let mut total = 0.0;
        for net in &mut self.q {
            net.store.zero_grad();
            let (q, _) = net.forward(&input, None)?;
            let mut grad = Matrix::zeros(n, 1);
            for i in 0..n {
                let r = y[i] - q.get(i, 0);
                total += huber_loss(r, huber_delta);
                grad.set(i, 0, -huber_grad(r, huber_delta) / n as f64);
            }
            net.backward(&grad)?;
            self.adam.step(&mut net.store, learning_rate)?;
        }
        Ok(total / (n * self.q.len()) as f64)
    }

    /// Moves every target member toward its online twin.
    pub fn update_targets(&mut self, rate: f64) -> Result<()> {
        for (target, online) in self.q_target.iter_mut().zip(&self.q) {
            polyak_update(&mut target.store, &online.store, rate)?;
        }
        Ok(())
    }

    /// Largest parameter distance between online members and their targets.
    pub fn target_distance(&self) -> Result<f64> {
        self.q_target
            .iter()
            .zip(&self.q)
            .map(|(t, o)| t.store.max_abs_diff(&o.store))
            .try_fold(0.0f64, |m, d| Ok(m.max(d?)))
    }

    /// `penalized online Q(s, a) − V(s)`.
    pub fn advantages(&self, states: &Matrix, actions: &[f64]) -> Result<Vec<f64>> {
        let q = ensemble_eval(self, states, actions, false)?.penalized;
        let v = self.value(states)?;
        Ok(q.iter().zip(&v).map(|(q, v)| q - v).collect())
    }
}

impl QEnsemble for EnsembleCritic {
    fn members(&self) -> usize {
        self.q.len()
    }

    fn member_values(&self, states: &Matrix, actions: &[f64], use_targets: bool) -> Result<Matrix> {
        let input = with_action(states, actions)?;
        let nets = if use_targets { &self.q_target } else { &self.q };
        let mut out = Matrix::zeros(states.rows(), nets.len());
        for (j, net) in nets.iter().enumerate() {
            let q = net
                .infer(&input, None)
                .and_then(|(q, _)| column(q, net.seq.name()))
                .map_err(|e| match e {
                    Error::NonFinite(m) => Error::NonFinite(format!("member {j}: {m}")),
                    e => e,
                })?;
            for (i, v) in q.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }
}
