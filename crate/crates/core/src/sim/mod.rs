//! Packet-level bottleneck simulator, AIMD baseline and session loop.

pub mod aimd;
pub mod link;
pub mod session;

pub use aimd::{AimdConfig, AimdController, AimdPhase, AimdState};
pub use link::{Delivered, Link, LinkCounters, LossCause, Packet, PacketKind, StepOutcome};
pub use session::{
    run_session, run_session_observed, AppliedDecision, ControlOutput, DecisionContext, EstimateSource,
    IntervalRecord, RateController, SessionConfig, SessionReport, TickSnapshot, FEEDBACK_INTERVAL_MS,
};
