//! Mixture-density policy network: a normalized recurrent trunk feeding
//! mean, spread and weight branches.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gmm::{GmmParams, SIGMA_FLOOR};
use crate::dataset::{action_bound, NormStats, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::{log_softmax, Activation, LayerSpec, Matrix, ParamStore, Sequential, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub state_dim: usize,
    pub hidden: usize,
    pub components: usize,
    pub residual_blocks: usize,
    /// Multiplier applied to the initial weights of the mean head.
    pub mean_init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            state_dim: STATE_DIM,
            hidden: 256,
            components: 4,
            residual_blocks: 2,
            mean_init_scale: 0.01,
        }
    }
}

/// Anything that maps a state (and recurrent state) to mixture parameters.
pub trait MixturePolicy {
    /// Returns the mixture and the next recurrent state (`None` when the
    /// policy is stateless). A missing input state means a fresh session.
    fn mixture(&self, state: &[f64], recurrent: Option<&[f64]>) -> Result<(GmmParams, Option<Vec<f64>>)>;
}

/// Raw branch outputs for a batch, one row per sample.
#[derive(Debug, Clone)]
pub struct MixtureBatch {
    pub logits: Matrix,
    pub means: Matrix,
    pub stds: Matrix,
}

impl MixtureBatch {
    pub fn params(&self, row: usize) -> Result<GmmParams> {
        let mut weights = self.logits.row(row).to_vec();
        crate::nn::softmax_in_place(&mut weights);
        GmmParams::new(weights, self.means.row(row).to_vec(), self.stds.row(row).to_vec())
    }
}

/// Gradients of a scalar loss with respect to the branch outputs.
#[derive(Debug, Clone)]
pub struct MixtureGrad {
    pub logits: Matrix,
    pub means: Matrix,
    pub stds: Matrix,
}

struct BranchTape {
    blocks: Vec<Tape>,
    head: Tape,
}

pub struct PolicyTape {
    trunk: Tape,
    mean: BranchTape,
    std: BranchTape,
    weight: Tape,
}

#[derive(Debug, Clone)]
struct Branch {
    blocks: Vec<Sequential>,
    head: Sequential,
}

impl Branch {
    fn new<R: Rng + ?Sized>(
        name: &str,
        cfg: &PolicyConfig,
        head: Activation,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        let h = cfg.hidden;
        let blocks = (0..cfg.residual_blocks)
            .map(|i| {
                let specs = [LayerSpec::dense(h, h, Activation::Relu), LayerSpec::dense(h, h, Activation::Relu)];
                Sequential::new(&format!("{name}.block{i}"), &specs, store, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let head = Sequential::new(
            &format!("{name}.head"),
            &[LayerSpec::dense(h, cfg.components, head)],
            store,
            rng,
        )?;
        Ok(Self { blocks, head })
    }

    fn run(&self, store: &ParamStore, x: &Matrix, record: bool) -> Result<(Matrix, Option<BranchTape>)> {
        let mut current = x.clone();
        let mut tapes = Vec::new();
        for block in &self.blocks {
            let (y, tape) = if record {
                let (y, _, tape) = block.forward_batch(store, &current, None)?;
                (y, Some(tape))
            } else {
                (block.infer_batch(store, &current, None)?.0, None)
            };
            tapes.extend(tape);
            current.add_assign(&y);
        }
        if record {
            let (y, _, head) = self.head.forward_batch(store, &current, None)?;
            Ok((y, Some(BranchTape { blocks: tapes, head })))
        } else {
            Ok((self.head.infer_batch(store, &current, None)?.0, None))
        }
    }

    fn backward(&self, store: &mut ParamStore, tape: &BranchTape, d_out: &Matrix) -> Result<Matrix> {
        let mut grad = self.head.backward(store, &tape.head, d_out)?.input;
        for (block, t) in self.blocks.iter().zip(&tape.blocks).rev() {
            let through = block.backward(store, t, &grad)?.input;
            grad.add_assign(&through);
        }
        Ok(grad)
    }

    fn sequentials(&self) -> impl Iterator<Item = &Sequential> {
        self.blocks.iter().chain(std::iter::once(&self.head))
    }
}

#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub store: ParamStore,
    config: PolicyConfig,
    trunk: Sequential,
    mean: Branch,
    std: Branch,
    weight: Sequential,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(config: PolicyConfig, rng: &mut R) -> Result<Self> {
        if config.components == 0 || config.hidden == 0 || config.state_dim == 0 {
            return Err(Error::Config(format!("degenerate policy configuration {config:?}")));
        }
        let mut store = ParamStore::new();
        let h = config.hidden;
        let trunk = Sequential::new(
            "policy.trunk",
            &[
                LayerSpec::normalization(config.state_dim),
                LayerSpec::dense(config.state_dim, h, Activation::Relu),
                LayerSpec::gru(h, h),
            ],
            &mut store,
            rng,
        )?;
        let mean = Branch::new("policy.mean", &config, Activation::Tanh, &mut store, rng)?;
        let std = Branch::new("policy.std", &config, Activation::Softplus, &mut store, rng)?;
        let weight = Sequential::new(
            "policy.weight",
            &[LayerSpec::dense(h, config.components, Activation::Identity)],
            &mut store,
            rng,
        )?;
        mean.head.scale_weights(&mut store, 0, config.mean_init_scale)?;
        Ok(Self { store, config, trunk, mean, std, weight })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn set_normalization(&mut self, stats: &NormStats) -> Result<()> {
        self.trunk.set_normalization(0, stats.to_layer())
    }

    pub fn normalization(&self) -> &crate::nn::Normalization {
        self.trunk.normalization(0).expect("trunk starts with normalization")
    }

    pub fn recurrent_width(&self) -> usize {
        self.config.hidden
    }

    /// Every sub-network, in a fixed order.
    pub fn sequentials(&self) -> Vec<&Sequential> {
        let mut out = vec![&self.trunk];
        out.extend(self.mean.sequentials());
        out.extend(self.std.sequentials());
        out.push(&self.weight);
        out
    }

    pub(crate) fn sequentials_mut(&mut self) -> Vec<&mut Sequential> {
        let mut out = vec![&mut self.trunk];
        out.extend(self.mean.blocks.iter_mut());
        out.push(&mut self.mean.head);
        out.extend(self.std.blocks.iter_mut());
        out.push(&mut self.std.head);
        out.push(&mut self.weight);
        out
    }

    fn run(
        &self,
        x: &Matrix,
        h0: Option<&Matrix>,
        record: bool,
    ) -> Result<(MixtureBatch, Matrix, Option<PolicyTape>)> {
        let (h, trunk_tape) = if record {
            let (y, _, tape) = self.trunk.forward_batch(&self.store, x, h0)?;
            (y, Some(tape))
        } else {
            (self.trunk.infer_batch(&self.store, x, h0)?.0, None)
        };
        let (mut means, mean_tape) = self.mean.run(&self.store, &h, record)?;
        means.scale(action_bound());
        let (mut stds, std_tape) = self.std.run(&self.store, &h, record)?;
        stds.data_mut().iter_mut().for_each(|s| *s += SIGMA_FLOOR);
        let (logits, weight_tape) = if record {
            let (y, _, tape) = self.weight.forward_batch(&self.store, &h, None)?;
            (y, Some(tape))
        } else {
            (self.weight.infer_batch(&self.store, &h, None)?.0, None)
        };
        let tape = match (trunk_tape, mean_tape, std_tape, weight_tape) {
            (Some(trunk), Some(mean), Some(std), Some(weight)) => Some(PolicyTape { trunk, mean, std, weight }),
            _ => None,
        };
        Ok((MixtureBatch { logits, means, stds }, h, tape))
    }

    /// Batched forward pass recording a tape for [`PolicyNet::backward`].
    /// Returns the branch outputs and the new recurrent state.
    pub fn forward_batch(&self, x: &Matrix, h0: Option<&Matrix>) -> Result<(MixtureBatch, Matrix, PolicyTape)> {
        let (out, h, tape) = self.run(x, h0, true)?;
        Ok((out, h, tape.expect("recording pass yields a tape")))
    }

    pub fn infer_batch(&self, x: &Matrix, h0: Option<&Matrix>) -> Result<(MixtureBatch, Matrix)> {
        let (out, h, _) = self.run(x, h0, false)?;
        Ok((out, h))
    }

    /// Accumulates parameter gradients for the branch-output gradients `d`.
    pub fn backward(&mut self, tape: &PolicyTape, d: &MixtureGrad) -> Result<()> {
        let mut d_means = d.means.clone();
        d_means.scale(action_bound());
        let mut dh = self.mean.backward(&mut self.store, &tape.mean, &d_means)?;
        dh.add_assign(&self.std.backward(&mut self.store, &tape.std, &d.stds)?);
        dh.add_assign(&self.weight.backward(&mut self.store, &tape.weight, &d.logits)?.input);
        self.trunk.backward(&mut self.store, &tape.trunk, &dh)?;
        Ok(())
    }
}

impl MixturePolicy for PolicyNet {
    fn mixture(&self, state: &[f64], recurrent: Option<&[f64]>) -> Result<(GmmParams, Option<Vec<f64>>)> {
        let x = Matrix::row_vector(state);
        let h0 = recurrent.map(Matrix::row_vector);
        let (out, h) = self.infer_batch(&x, h0.as_ref())?;
        Ok((out.params(0)?, Some(h.into_vec())))
    }
}

/// Mean over the batch of `−w_i · ln π(a_i | s_i)` and its gradient with
/// respect to the branch outputs.
pub fn weighted_nll(batch: &MixtureBatch, actions: &[f64], weights: &[f64]) -> Result<(f64, MixtureGrad)> {
    let (n, k) = (batch.logits.rows(), batch.logits.cols());
    if actions.len() != n || weights.len() != n {
        return Err(Error::Shape(format!(
            "{n} mixtures but {} actions and {} weights",
            actions.len(),
            weights.len()
        )));
    }
    let mut grad = MixtureGrad {
        logits: Matrix::zeros(n, k),
        means: Matrix::zeros(n, k),
        stds: Matrix::zeros(n, k),
    };
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for i in 0..n {
        let a = actions[i];
        let log_p = log_softmax(batch.logits.row(i));
        let (mu, sigma) = (batch.means.row(i), batch.stds.row(i));
        let joint: Vec<f64> = (0..k)
            .map(|j| {
                let z = (a - mu[j]) / sigma[j];
                log_p[j] - 0.5 * z * z - sigma[j].ln() - half_ln_2pi
            })
            .collect();
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + joint.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total -= weights[i] * lse;
        // d(−w·lse)/d· scaled by 1/n.
        let c = -weights[i] / n as f64;
        for j in 0..k {
            let gamma = (joint[j] - lse).exp();
            let d = a - mu[j];
            let var = sigma[j] * sigma[j];
            grad.logits.set(i, j, c * (gamma - log_p[j].exp()));
            grad.means.set(i, j, c * gamma * d / var);
            grad.stds.set(i, j, c * gamma * (d * d / (var * sigma[j]) - 1.0 / sigma[j]));
        }
    }
    Ok((total / n as f64, grad))
}
