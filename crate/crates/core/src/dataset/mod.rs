//! Offline dataset: interval statistics, state featurizer, action and reward
//! encodings, file formats and the synthetic generator.

pub mod action;
pub mod behavior;
pub mod features;
pub mod generate;
pub mod interval;
pub mod norm;
pub mod reward;
pub mod trace;
pub mod transition;

pub use action::{action_bound, clip_action, decode_action, encode_action};
pub use behavior::{BehaviorKind, NoisyOracle, StaleOracle};
pub use features::{featurize_state, featurize_with, FeatureWindowConfig, STATE_DIM};
pub use generate::{generate_session, generate_synthetic_dataset, session_transitions, GenerateConfig};
pub use interval::IntervalStats;
pub use norm::{fit_norm_stats, NormStats};
pub use reward::{compute_reward, synthesize_mos};
pub use trace::{synthesize_trace, synthesize_traces, CapacityTrace, TraceEvent, TraceFamily};
pub use transition::{parse_transition_line, read_transitions, write_transitions, Transition};
