//! The deployed decision path: conservative mixture action, ensemble
//! uncertainty gate and AIMD fallback.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::critic::{relative_uncertainty, QEnsemble};
use crate::dataset::{decode_action, featurize_state};
use crate::error::Result;
use crate::policy::{MixturePolicy, SigmaRule};
use crate::sim::{AimdConfig, AimdState, ControlOutput, DecisionContext, EstimateSource, RateController};
use crate::trainer::{Model, RecurrentMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub tau_u: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma_rule: SigmaRule,
    pub recurrent: RecurrentMode,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            tau_u: 0.4,
            epsilon: 1e-6,
            delta: 0.5,
            sigma_rule: SigmaRule::Reciprocal,
            recurrent: RecurrentMode::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionSource {
    Model,
    Fallback,
}

impl DecisionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionSource::Model => "model",
            DecisionSource::Fallback => "fallback",
        }
    }
}

/// Why the gate routed to the fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    PolicyError,
    ModeNotConverged,
    DegenerateCurvature,
    CriticError,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub target_kbps: f64,
    pub source: DecisionSource,
    pub fallback_reason: Option<FallbackReason>,
    pub u_q: Option<f64>,
    pub a_star: Option<f64>,
    pub sigma_star: Option<f64>,
    pub a_chosen: Option<f64>,
}

impl Decision {
    fn fallback(aimd_kbps: f64, reason: FallbackReason) -> Self {
        Self {
            target_kbps: aimd_kbps,
            source: DecisionSource::Fallback,
            fallback_reason: Some(reason),
            u_q: None,
            a_star: None,
            sigma_star: None,
            a_chosen: None,
        }
    }
}

/// One gated decision. Never fails: every error path yields the AIMD rate.
///
/// `recurrent` is the session's policy state; it advances whenever the policy
/// forward pass succeeds.
pub fn decide<P, Q>(
    policy: &P,
    critic: &Q,
    state: &[f64],
    received_kbps: f64,
    recurrent: &mut Option<Vec<f64>>,
    aimd: &AimdState,
    cfg: &GateConfig,
) -> Decision
where
    P: MixturePolicy + ?Sized,
    Q: QEnsemble + ?Sized,
{
    let aimd_kbps = aimd.rate_kbps;
    let state_in = match cfg.recurrent {
        RecurrentMode::Threaded => recurrent.as_deref(),
        RecurrentMode::Reset => None,
    };
    let gmm = match policy.mixture(state, state_in) {
        Ok((gmm, next)) => {
            *recurrent = next;
            gmm
        }
        Err(e) => {
            log::debug!("policy failed: {e}");
            return Decision::fallback(aimd_kbps, FallbackReason::PolicyError);
        }
    };
    let mode = gmm.find_mode();
    if !mode.converged {
        return Decision { a_star: Some(mode.a_star), ..Decision::fallback(aimd_kbps, FallbackReason::ModeNotConverged) };
    }
    let Ok(lambda) = gmm.local_curvature(mode.a_star) else {
        return Decision { a_star: Some(mode.a_star), ..Decision::fallback(aimd_kbps, FallbackReason::DegenerateCurvature) };
    };
    let sigma_star = cfg.sigma_rule.sigma(lambda);
    let a_chosen = crate::dataset::clip_action(mode.a_star - cfg.delta * sigma_star);
    let partial = Decision {
        a_star: Some(mode.a_star),
        sigma_star: Some(sigma_star),
        a_chosen: Some(a_chosen),
        ..Decision::fallback(aimd_kbps, FallbackReason::CriticError)
    };
    let u_q = match relative_uncertainty(critic, state, a_chosen, cfg.epsilon) {
        Ok(u) if u.is_finite() => u,
        _ => return partial,
    };
    if u_q > cfg.tau_u {
        return Decision { u_q: Some(u_q), fallback_reason: Some(FallbackReason::Uncertain), ..partial };
    }
    Decision {
        target_kbps: decode_action(a_chosen, received_kbps),
        source: DecisionSource::Model,
        fallback_reason: None,
        u_q: Some(u_q),
        ..partial
    }
}

/// One row of the per-session decision log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub time_ms: u64,
    pub decision: Decision,
}

pub fn write_decision_csv<W: Write>(mut w: W, records: &[DecisionRecord]) -> Result<()> {
    writeln!(w, "time_ms,source,U_q,a_star,sigma_star,a_chosen,target_kbps")?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for r in records {
        let d = &r.decision;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.time_ms,
            d.source.as_str(),
            opt(d.u_q),
            opt(d.a_star),
            opt(d.sigma_star),
            opt(d.a_chosen),
            d.target_kbps
        )?;
    }
    Ok(())
}

/// Session controller running the gate every interval over a shared model,
/// with an AIMD instance kept live as the fallback.
pub struct HybridController {
    model: Arc<Model>,
    gate: GateConfig,
    aimd: AimdState,
    recurrent: Option<Vec<f64>>,
    log: Vec<DecisionRecord>,
}

impl HybridController {
    pub fn new(model: Arc<Model>, gate: GateConfig, aimd: AimdConfig) -> Self {
        Self { model, gate, aimd: AimdState::new(aimd), recurrent: None, log: Vec::new() }
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.log
    }

    pub fn into_decisions(self) -> Vec<DecisionRecord> {
        self.log
    }

    pub fn aimd(&self) -> &AimdState {
        &self.aimd
    }
}

impl RateController for HybridController {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput {
        if let Some(report) = ctx.reports.last() {
            self.aimd.update(report);
        }
        let decision = match featurize_state(ctx.reports) {
            Ok(state) => decide(
                &self.model.policy,
                &self.model.critic,
                &state,
                ctx.received_kbps(),
                &mut self.recurrent,
                &self.aimd,
                &self.gate,
            ),
            Err(_) => Decision::fallback(self.aimd.rate_kbps, FallbackReason::PolicyError),
        };
        self.log.push(DecisionRecord { time_ms: ctx.now_ms, decision });
        let source = match decision.source {
            DecisionSource::Model => EstimateSource::Model,
            DecisionSource::Fallback => EstimateSource::Fallback,
        };
        ControlOutput { target_kbps: decision.target_kbps, source }
    }
}
