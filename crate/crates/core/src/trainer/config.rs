use serde::{Deserialize, Serialize};

use crate::critic::CriticConfig;
use crate::dataset::STATE_DIM;
use crate::error::{Error, Result};
use crate::policy::{PolicyConfig, SigmaRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub tau: f64,
    pub gamma: f64,
    pub beta: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub polyak: f64,
    pub gradient_steps: usize,
    pub seed: u64,
    pub awr_weight_clip: f64,
    pub huber_delta: f64,
    /// Q-ensemble size.
    pub members: usize,
    /// Mixture components.
    pub components: usize,
    pub delta: f64,
    pub tau_u: f64,
    pub epsilon_u: f64,
    pub hidden: usize,
    pub sigma_rule: SigmaRule,
    /// Validation-action statistics are logged every this many steps
    /// (0 disables them).
    pub validation_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tau: 0.7,
            gamma: 0.99,
            beta: 3.0,
            batch_size: 512,
            learning_rate: 3e-4,
            polyak: 0.005,
            gradient_steps: 10_000,
            seed: 0,
            awr_weight_clip: 100.0,
            huber_delta: 1.0,
            members: 10,
            components: 4,
            delta: 0.5,
            tau_u: 0.4,
            epsilon_u: 1e-6,
            hidden: 256,
            sigma_rule: SigmaRule::Reciprocal,
            validation_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta", self.beta),
            ("learning_rate", self.learning_rate),
            ("polyak", self.polyak),
            ("awr_weight_clip", self.awr_weight_clip),
            ("huber_delta", self.huber_delta),
            ("delta", self.delta),
            ("tau_u", self.tau_u),
            ("epsilon_u", self.epsilon_u),
        ];
        // β = 0 (pure behavior cloning) and δ = 0 (plain mode) are legitimate.
        for (name, v) in positive {
            let ok = if matches!(name, "beta" | "delta") { v >= 0.0 } else { v > 0.0 };
            if !v.is_finite() || !ok {
                return Err(Error::Config(format!("{name} = {v} must be positive and finite")));
            }
        }
        for (name, v) in [("tau", self.tau), ("gamma", self.gamma)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if self.polyak > 1.0 {
            return Err(Error::Config(format!("polyak = {} exceeds 1", self.polyak)));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("members", self.members),
            ("components", self.components),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            state_dim: STATE_DIM,
            hidden: self.hidden,
            components: self.components,
            ..PolicyConfig::default()
        }
    }

    pub fn critic_config(&self) -> CriticConfig {
        CriticConfig { state_dim: STATE_DIM, hidden: self.hidden, members: self.members }
    }
}
