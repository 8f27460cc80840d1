//! Offline training, the checkpointed model and offline replay.

mod config;
mod model;
mod offline;
mod train;

pub use config::TrainConfig;
pub use model::Model;
pub use offline::{evaluate_offline, replay_behavior, write_offline_csv, OfflineConfig, OfflineStep, RecurrentMode};
pub use train::{awr_policy_update, awr_step, train, AwrStats, TrainLog, TrainRecord, Trainer};
