//! Replays logged states through a policy and reports per-step estimates.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{decode_action, Transition};
use crate::error::Result;
use crate::policy::{MixturePolicy, SigmaRule};

/// What happens to the recurrent state between steps of one call.
///
/// Training always starts the recurrent layer from a zero state, so `Reset`
/// matches what the networks were fitted on and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentMode {
    /// Carried from step to step within a call.
    Threaded,
    /// Zero at every step.
    #[default]
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineConfig {
    pub delta: f64,
    pub sigma_rule: SigmaRule,
    pub recurrent: RecurrentMode,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self { delta: 0.5, sigma_rule: SigmaRule::Reciprocal, recurrent: RecurrentMode::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineStep {
    pub call_id: String,
    pub step: u64,
    pub received_kbps: f64,
    /// The logged behavior's estimate, recovered from its action.
    pub behavior_kbps: f64,
    pub estimate_kbps: f64,
    /// False when the mode search failed and the best iterate was used.
    pub converged: bool,
}

/// Behavior estimates only: every step reports the logged action.
pub fn replay_behavior(transitions: &[Transition]) -> Vec<OfflineStep> {
    transitions
        .iter()
        .map(|t| {
            let behavior = decode_action(t.action, t.received_kbps());
            OfflineStep {
                call_id: t.call_id.clone(),
                step: t.step,
                received_kbps: t.received_kbps(),
                behavior_kbps: behavior,
                estimate_kbps: behavior,
                converged: true,
            }
        })
        .collect()
}

/// Model estimates `decode(clip(a* − δσ*), R)` for every transition, in order.
/// The recurrent state restarts whenever the call changes or the previous
/// step ended its call.
pub fn evaluate_offline<P: MixturePolicy + ?Sized>(
    policy: &P,
    transitions: &[Transition],
    config: &OfflineConfig,
) -> Result<Vec<OfflineStep>> {
    let mut out = Vec::with_capacity(transitions.len());
    let mut hidden: Option<Vec<f64>> = None;
    let mut previous: Option<&Transition> = None;
    for t in transitions {
        if previous.is_some_and(|p| p.done || p.call_id != t.call_id) {
            hidden = None;
        }
        let state_in = match config.recurrent {
            RecurrentMode::Threaded => hidden.as_deref(),
            RecurrentMode::Reset => None,
        };
        let (gmm, next) = policy.mixture(&t.state, state_in)?;
        hidden = next;
        let (action, converged) = match gmm.conservative_action(config.delta, config.sigma_rule) {
            Ok(lcb) => (lcb.a_chosen, true),
            Err(_) => (gmm.find_mode().a_star, false),
        };
        let received = t.received_kbps();
        out.push(OfflineStep {
            call_id: t.call_id.clone(),
            step: t.step,
            received_kbps: received,
            behavior_kbps: decode_action(t.action, received),
            estimate_kbps: decode_action(action, received),
            converged,
        });
        previous = Some(t);
    }
    Ok(out)
}

pub fn write_offline_csv<W: Write>(mut w: W, steps: &[OfflineStep], capacities: Option<&[f64]>) -> Result<()> {
    writeln!(w, "call_id,step,received_kbps,behavior_kbps,estimate_kbps,capacity_kbps,converged")?;
    for (i, s) in steps.iter().enumerate() {
        let cap = capacities.map_or(String::new(), |c| c[i].to_string());
        writeln!(
            w,
            "{},{},{},{},{},{cap},{}",
            s.call_id, s.step, s.received_kbps, s.behavior_kbps, s.estimate_kbps, s.converged
        )?;
    }
    Ok(())
}
