//! Behavior policies used to log synthetic sessions.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{AimdController, ControlOutput, DecisionContext, EstimateSource, RateController};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    Aimd,
    NoisyOracle,
    StaleOracle,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 3] = [BehaviorKind::Aimd, BehaviorKind::NoisyOracle, BehaviorKind::StaleOracle];

    pub fn tag(self) -> &'static str {
        match self {
            BehaviorKind::Aimd => "aimd",
            BehaviorKind::NoisyOracle => "noisy_oracle",
            BehaviorKind::StaleOracle => "stale_oracle",
        }
    }

    pub fn controller(self, seed: u64) -> Box<dyn RateController + Send> {
        match self {
            BehaviorKind::Aimd => Box::new(BehaviorAimd(AimdController::default())),
            BehaviorKind::NoisyOracle => Box::new(NoisyOracle::new(seed)),
            BehaviorKind::StaleOracle => Box::new(StaleOracle::default()),
        }
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BehaviorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BehaviorKind::ALL
            .into_iter()
            .find(|b| b.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown behavior {s:?} (expected aimd, noisy_oracle or stale_oracle)")))
    }
}

struct BehaviorAimd(AimdController);

impl RateController for BehaviorAimd {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput {
        ControlOutput { source: EstimateSource::Behavior, ..self.0.decide(ctx) }
    }
}

/// True capacity seen with a reaction lag, times log-normal noise.
pub struct NoisyOracle {
    pub lag_ms: u64,
    noise: LogNormal<f64>,
    rng: ChaCha8Rng,
}

impl NoisyOracle {
    pub fn new(seed: u64) -> Self {
        Self::with_params(seed, 120, 0.3)
    }

    pub fn with_params(seed: u64, lag_ms: u64, sigma: f64) -> Self {
        Self {
            lag_ms,
            noise: LogNormal::new(0.0, sigma).expect("sigma is finite and positive"),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl RateController for NoisyOracle {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput {
        let seen = ctx.trace.capacity_at(ctx.now_ms.saturating_sub(self.lag_ms));
        ControlOutput { target_kbps: seen * self.noise.sample(&mut self.rng), source: EstimateSource::Behavior }
    }
}

/// True capacity sampled at the start of each hold period and kept until the next.
pub struct StaleOracle {
    pub hold_ms: u64,
}

impl Default for StaleOracle {
    fn default() -> Self {
        Self { hold_ms: 1000 }
    }
}

impl RateController for StaleOracle {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput {
        let sampled_at = ctx.now_ms / self.hold_ms * self.hold_ms;
        ControlOutput { target_kbps: ctx.trace.capacity_at(sampled_at), source: EstimateSource::Behavior }
    }
}
