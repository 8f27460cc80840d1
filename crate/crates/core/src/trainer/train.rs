//! The offline training loop: expectile value step, Huber TD step, target
//! tracking and advantage-weighted policy extraction per minibatch.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::model::Model;
use crate::critic::{Batch, EnsembleCritic};
use crate::dataset::{fit_norm_stats, NormStats, Transition, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::{Adam, Matrix};
use crate::policy::{weighted_nll, MixturePolicy, PolicyNet};

const ABORT_AFTER: usize = 3;
const VALIDATION_STATES: usize = 256;

/// One logged gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub v_loss: f64,
    pub q_loss: f64,
    pub pi_loss: f64,
    pub mean_adv: f64,
    pub mean_weight: f64,
    /// Mean and std of the conservative action on the validation states,
    /// present on validation steps.
    pub validation: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,v_loss,q_loss,pi_loss,mean_adv,mean_weight,val_action_mean,val_action_std")?;
        for r in &self.records {
            let (vm, vs) = r
                .validation
                .map_or((String::new(), String::new()), |(m, s)| (m.to_string(), s.to_string()));
            writeln!(
                w,
                "{},{},{},{},{},{},{vm},{vs}",
                r.step, r.v_loss, r.q_loss, r.pi_loss, r.mean_adv, r.mean_weight
            )?;
        }
        Ok(())
    }
}

/// Summary of one policy step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwrStats {
    pub loss: f64,
    pub mean_advantage: f64,
    pub mean_weight: f64,
}

/// Weighted maximum-likelihood step on the dataset actions with weights
/// `min(exp(β·A), clip)` for precomputed advantages `A`.
pub fn awr_step(
    policy: &mut PolicyNet,
    adam: &Adam,
    states: &Matrix,
    actions: &[f64],
    advantages: &[f64],
    beta: f64,
    weight_clip: f64,
    learning_rate: f64,
) -> Result<AwrStats> {
    let n = actions.len();
    if n == 0 || advantages.len() != n {
        return Err(Error::Shape(format!("{n} actions but {} advantages", advantages.len())));
    }
    let weights: Vec<f64> = advantages.iter().map(|a| (beta * a).exp().min(weight_clip)).collect();
    policy.store.zero_grad();
    let (out, _, tape) = policy.forward_batch(states, None)?;
    let (loss, grad) = weighted_nll(&out, actions, &weights)?;
    policy.backward(&tape, &grad)?;
    adam.step(&mut policy.store, learning_rate)?;
    Ok(AwrStats {
        loss,
        mean_advantage: advantages.iter().sum::<f64>() / n as f64,
        mean_weight: weights.iter().sum::<f64>() / n as f64,
    })
}

/// [`awr_step`] with advantages from the critic's online ensemble.
pub fn awr_policy_update(
    policy: &mut PolicyNet,
    critic: &EnsembleCritic,
    adam: &Adam,
    states: &Matrix,
    actions: &[f64],
    config: &TrainConfig,
) -> Result<AwrStats> {
    let advantages = critic.advantages(states, actions)?;
    awr_step(policy, adam, states, actions, &advantages, config.beta, config.awr_weight_clip, config.learning_rate)
}

/// Transitions laid out for fast minibatch gathering.
struct Columns {
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
}

impl Columns {
    fn new(transitions: &[Transition]) -> Result<Self> {
        let mut c = Columns {
            states: Vec::with_capacity(transitions.len() * STATE_DIM),
            next_states: Vec::with_capacity(transitions.len() * STATE_DIM),
            actions: Vec::with_capacity(transitions.len()),
            rewards: Vec::with_capacity(transitions.len()),
            dones: Vec::with_capacity(transitions.len()),
        };
        for t in transitions {
            t.validate()?;
            c.states.extend_from_slice(&t.state);
            c.next_states.extend_from_slice(&t.next_state);
            c.actions.push(t.action);
            c.rewards.push(t.reward);
            c.dones.push(t.done);
        }
        Ok(c)
    }

    fn len(&self) -> usize {
        self.actions.len()
    }

    fn gather(&self, idx: &[usize]) -> Batch {
        let rows = |src: &[f64]| {
            let mut data = Vec::with_capacity(idx.len() * STATE_DIM);
            for &i in idx {
                data.extend_from_slice(&src[i * STATE_DIM..(i + 1) * STATE_DIM]);
            }
            Matrix::from_vec(idx.len(), STATE_DIM, data).expect("rows of state width")
        };
        Batch {
            states: rows(&self.states),
            next_states: rows(&self.next_states),
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            dones: idx.iter().map(|&i| self.dones[i]).collect(),
        }
    }
}

/// Tracks consecutive non-finite results of one loss channel.
struct Channel {
    name: &'static str,
    bad_streak: usize,
}

impl Channel {
    /// Non-finite outcomes (a NaN loss or a rejected non-finite step) are
    /// tolerated up to the abort limit; other errors propagate.
    fn observe(&mut self, step: usize, outcome: Result<f64>) -> Result<f64> {
        let value = match outcome {
            Ok(v) if v.is_finite() => {
                self.bad_streak = 0;
                return Ok(v);
            }
            Ok(v) => v,
            Err(Error::NonFinite(what)) => {
                log::warn!("step {step}: {} update rejected: non-finite {what}", self.name);
                f64::NAN
            }
            Err(e) => return Err(e),
        };
        self.bad_streak += 1;
        if self.bad_streak >= ABORT_AFTER {
            return Err(Error::TrainingAborted { step, channel: self.name });
        }
        Ok(value)
    }
}

pub struct Trainer {
    model: Model,
    data: Columns,
    rng: ChaCha8Rng,
    adam: Adam,
    validation: Matrix,
    step: usize,
    channels: [Channel; 3],
}

impl Trainer {
    /// Fits input statistics, seeds the value scale from the mean reward and
    /// prepares minibatch sampling.
    pub fn new(transitions: &[Transition], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if transitions.len() < config.batch_size {
            return Err(Error::Config(format!(
                "{} transitions cannot fill a batch of {}",
                transitions.len(),
                config.batch_size
            )));
        }
        let data = Columns::new(transitions)?;
        let norm = fit_norm_stats(transitions)?;
        let (action_mean, action_std) = moments(&data.actions);
        let mean_reward = data.rewards.iter().sum::<f64>() / data.len() as f64;

        let mut model = Model::new(config.clone())?;
        model.policy.set_normalization(&norm)?;
        model.critic.set_normalization(&norm, action_mean, action_std)?;
        model.critic.set_output_bias(mean_reward / (1.0 - config.gamma));

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c);
        let picks: Vec<usize> = (0..VALIDATION_STATES.min(data.len()))
            .map(|_| rng.gen_range(0..data.len()))
            .collect();
        let validation = data.gather(&picks).states;
        Ok(Self {
            model,
            data,
            rng,
            adam: Adam::default(),
            validation,
            step: 0,
            channels: [
                Channel { name: "value", bad_streak: 0 },
                Channel { name: "td", bad_streak: 0 },
                Channel { name: "policy", bad_streak: 0 },
            ],
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Input statistics the model was fitted with.
    pub fn norm_stats(&self) -> NormStats {
        let n = self.model.policy.normalization();
        NormStats { mean: n.mean.clone(), std: n.std.clone() }
    }

    pub fn step(&mut self) -> Result<TrainRecord> {
        let cfg = self.model.config.clone();
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| self.rng.gen_range(0..self.data.len())).collect();
        let batch = self.data.gather(&idx);
        let step = self.step;

        let critic = &mut self.model.critic;
        let v = critic.value_update(&batch.states, &batch.actions, cfg.tau, cfg.learning_rate);
        let v_loss = self.channels[0].observe(step, v)?;
        let q = critic.q_update(&batch, cfg.gamma, cfg.huber_delta, cfg.learning_rate);
        let q_loss = self.channels[1].observe(step, q)?;
        critic.update_targets(cfg.polyak)?;
        let awr = awr_policy_update(
            &mut self.model.policy,
            &self.model.critic,
            &self.adam,
            &batch.states,
            &batch.actions,
            &cfg,
        );
        let (awr, pi_loss) = match awr {
            Ok(stats) => {
                let loss = self.channels[2].observe(step, Ok(stats.loss))?;
                (Some(stats), loss)
            }
            Err(e) => (None, self.channels[2].observe(step, Err(e))?),
        };

        self.step += 1;
        let validation = (cfg.validation_every > 0 && self.step % cfg.validation_every == 0)
            .then(|| self.validation_actions())
            .flatten();
        let record = TrainRecord {
            step: self.step,
            v_loss,
            q_loss,
            pi_loss,
            mean_adv: awr.map_or(f64::NAN, |a| a.mean_advantage),
            mean_weight: awr.map_or(f64::NAN, |a| a.mean_weight),
            validation,
        };
        if self.step % 500 == 0 {
            log::info!(
                "step {}: v {:.4} q {:.4} pi {:.4} adv {:.4} w {:.3}",
                record.step,
                v_loss,
                q_loss,
                pi_loss,
                record.mean_adv,
                record.mean_weight
            );
        }
        Ok(record)
    }

    fn validation_actions(&self) -> Option<(f64, f64)> {
        let cfg = &self.model.config;
        let actions: Vec<f64> = (0..self.validation.rows())
            .filter_map(|i| {
                let (gmm, _) = self.model.policy.mixture(self.validation.row(i), None).ok()?;
                gmm.conservative_action(cfg.delta, cfg.sigma_rule).ok().map(|l| l.a_chosen)
            })
            .collect();
        (!actions.is_empty()).then(|| moments(&actions))
    }

    /// Runs the configured number of steps. `on_checkpoint` is called every
    /// `checkpoint_every` steps (0 disables it).
    pub fn run<F>(mut self, checkpoint_every: usize, mut on_checkpoint: F) -> Result<(Model, TrainLog)>
    where
        F: FnMut(usize, &Model) -> Result<()>,
    {
        let mut log = TrainLog::default();
        while self.step < self.model.config.gradient_steps {
            log.records.push(self.step()?);
            if checkpoint_every > 0 && self.step % checkpoint_every == 0 && self.step < self.model.config.gradient_steps {
                on_checkpoint(self.step, &self.model)?;
            }
        }
        let mut model = self.model;
        model.quantize();
        Ok((model, log))
    }
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains on `transitions`; the returned model is rounded to checkpoint
/// precision.
pub fn train(transitions: &[Transition], config: &TrainConfig) -> Result<(Model, TrainLog)> {
    Trainer::new(transitions, config.clone())?.run(0, |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyConfig;

    #[test]
    fn channel_aborts_on_third_consecutive_failure() {
        let mut c = Channel { name: "td", bad_streak: 0 };
        assert!(c.observe(0, Ok(f64::NAN)).is_ok());
        assert!(c.observe(1, Err(Error::NonFinite("x".into()))).is_ok());
        assert_eq!(c.observe(2, Ok(1.0)).unwrap(), 1.0);
        c.observe(3, Ok(f64::INFINITY)).unwrap();
        c.observe(4, Ok(f64::NAN)).unwrap();
        match c.observe(5, Ok(f64::NAN)) {
            Err(Error::TrainingAborted { step: 5, channel: "td" }) => {}
            other => panic!("{other:?}"),
        }
        assert!(c.observe(6, Err(Error::Config("x".into()))).is_err());
    }

    #[test]
    fn weight_clip_engages() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = PolicyConfig { state_dim: 2, hidden: 4, components: 2, ..PolicyConfig::default() };
        let mut policy = PolicyNet::new(cfg, &mut rng).unwrap();
        let states = Matrix::zeros(2, 2);
        let stats = awr_step(&mut policy, &Adam::default(), &states, &[0.1, 0.2], &[2.0, 0.0], 3.0, 100.0, 1e-3).unwrap();
        assert!((stats.mean_weight - (100.0 + 1.0) / 2.0).abs() < 1e-12);
        let stats = awr_step(&mut policy, &Adam::default(), &states, &[0.1, 0.2], &[2.0, -1.0], 0.0, 100.0, 1e-3).unwrap();
        assert_eq!(stats.mean_weight, 1.0);
    }

    #[test]
    fn positive_advantage_action_gains_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = PolicyConfig { state_dim: 2, hidden: 8, components: 2, ..PolicyConfig::default() };
        let mut policy = PolicyNet::new(cfg, &mut rng).unwrap();
        let states = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        let adam = Adam::default();
        for _ in 0..400 {
            awr_step(&mut policy, &adam, &states, &[0.8, -0.8], &[1.0, -1.0], 3.0, 100.0, 3e-3).unwrap();
        }
        let (gmm, _) = policy.mixture(&[1.0, 0.0], None).unwrap();
        assert!(gmm.log_prob(0.8) > gmm.log_prob(-0.8));
    }
}
