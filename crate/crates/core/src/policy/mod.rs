//! Gaussian-mixture policy: the mixture math and the network that emits it.

mod gmm;
mod net;

pub use gmm::{GmmParams, Lcb, ModeResult, SigmaRule, MIN_CURVATURE, SIGMA_FLOOR};
pub use net::{weighted_nll, MixtureBatch, MixtureGrad, MixturePolicy, PolicyConfig, PolicyNet, PolicyTape};
