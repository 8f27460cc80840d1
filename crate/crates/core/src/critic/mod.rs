//! Value network, Q-ensemble and their regression losses.

mod ensemble;
mod loss;
mod penalty;

pub use ensemble::{
    ensemble_eval, ensemble_stats, relative_uncertainty, Batch, CriticBatchStats, CriticConfig, EnsembleCritic,
    QEnsemble,
};
pub use loss::{expectile_grad, expectile_loss, huber_grad, huber_loss};
pub use penalty::penalty_coefficient;
