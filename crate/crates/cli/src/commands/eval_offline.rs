use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;
use rbwe::dataset::{CapacityTrace, Transition};
use rbwe::eval::{accuracy_metrics, AccuracyMetrics};
use rbwe::policy::SigmaRule;
use rbwe::sim::FEEDBACK_INTERVAL_MS;
use rbwe::trainer::{evaluate_offline, replay_behavior, write_offline_csv, Model, OfflineConfig, OfflineStep, RecurrentMode};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files;
use crate::manifest::{manifest_for_file, Recorder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    /// The trained policy's conservative action.
    Model,
    /// The logged behavior action (pass-through).
    Behavior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRuleArg {
    Reciprocal,
    ReciprocalSqrt,
}

impl From<SigmaRuleArg> for SigmaRule {
    fn from(r: SigmaRuleArg) -> Self {
        match r {
            SigmaRuleArg::Reciprocal => SigmaRule::Reciprocal,
            SigmaRuleArg::ReciprocalSqrt => SigmaRule::ReciprocalSqrt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentArg {
    Threaded,
    Reset,
}

impl From<RecurrentArg> for RecurrentMode {
    fn from(r: RecurrentArg) -> Self {
        match r {
            RecurrentArg::Threaded => RecurrentMode::Threaded,
            RecurrentArg::Reset => RecurrentMode::Reset,
        }
    }
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct Args {
    /// Transitions file (JSON Lines).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicySource::Model)]
    pub policy: PolicySource,
    /// Checkpoint, required with `--policy model`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Trace directory; enables capacity columns and accuracy metrics.
    /// Calls are matched to traces by the part of the call id before the last `/`.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Only evaluate transitions logged by this behavior tag.
    #[arg(long)]
    pub behavior_tag: Option<String>,
    /// Risk multiple of the lower confidence bound.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Local spread rule at the mode.
    #[arg(long, value_enum, default_value_t = SigmaRuleArg::Reciprocal)]
    pub sigma_rule: SigmaRuleArg,
    /// Recurrent state handling within a call.
    #[arg(long, value_enum, default_value_t = RecurrentArg::Reset)]
    pub recurrent: RecurrentArg,
    /// Per-step CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Accuracy metrics JSON (default: `<out>.metrics.json`; needs `--traces`).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Calls evaluated in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Serialize)]
struct MetricsFile {
    policy: PolicySource,
    steps: usize,
    nonconverged_steps: usize,
    estimate: AccuracyMetrics,
    behavior: AccuracyMetrics,
}

/// Mean trace capacity over each transition's decision interval.
fn capacities(transitions: &[Transition], traces: &[CapacityTrace]) -> CliResult<Vec<f64>> {
    let by_name: HashMap<&str, &CapacityTrace> = traces.iter().map(|t| (t.name.as_str(), t)).collect();
    transitions
        .iter()
        .map(|t| {
            let name = t.call_id.rsplit_once('/').map_or(t.call_id.as_str(), |(trace, _)| trace);
            let trace = by_name
                .get(name)
                .ok_or_else(|| CliError::Usage(format!("call {} has no trace named {name:?}", t.call_id)))?;
            let start = t.step * FEEDBACK_INTERVAL_MS;
            Ok(trace.mean_capacity(start, start + FEEDBACK_INTERVAL_MS))
        })
        .collect()
}

/// Contiguous runs of one call.
fn calls(transitions: &[Transition]) -> Vec<&[Transition]> {
    transitions.chunk_by(|a, b| a.call_id == b.call_id && !a.done).collect()
}

pub fn run(args: Args, argv: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("eval-offline", argv);
    rec.config(&args)?;
    rec.input(&args.data);
    let mut transitions = files::load_transitions(&args.data)?;
    if let Some(tag) = &args.behavior_tag {
        transitions.retain(|t| &t.behavior_tag == tag);
        if transitions.is_empty() {
            return Err(CliError::Usage(format!("no transitions with behavior tag {tag:?}")));
        }
    }
    let caps = match &args.traces {
        Some(dir) => {
            let (trace_files, traces) = files::load_traces(dir)?;
            trace_files.iter().for_each(|f| rec.input(f));
            Some(capacities(&transitions, &traces)?)
        }
        None => None,
    };

    let steps: Vec<OfflineStep> = match args.policy {
        PolicySource::Behavior => replay_behavior(&transitions),
        PolicySource::Model => {
            let path = args.model.as_ref().ok_or_else(|| CliError::Usage("--policy model needs --model".into()))?;
            rec.input(path);
            let model = Model::load(path).map_err(|e| CliError::input(path, e))?;
            let cfg = OfflineConfig { delta: args.delta, sigma_rule: args.sigma_rule.into(), recurrent: args.recurrent.into() };
            let parts = files::thread_pool(args.jobs)?.install(|| {
                calls(&transitions)
                    .par_iter()
                    .map(|call| evaluate_offline(&model.policy, call, &cfg))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            parts.into_iter().flatten().collect()
        }
    };

    let mut w = files::create(&args.out)?;
    write_offline_csv(&mut w, &steps, caps.as_deref())?;
    files::finish(w, &args.out)?;
    rec.output(&args.out);

    if let Some(caps) = &caps {
        let metrics = MetricsFile {
            policy: args.policy,
            steps: steps.len(),
            nonconverged_steps: steps.iter().filter(|s| !s.converged).count(),
            estimate: accuracy_metrics(steps.iter().zip(caps).map(|(s, &c)| (s.estimate_kbps, c)))?,
            behavior: accuracy_metrics(steps.iter().zip(caps).map(|(s, &c)| (s.behavior_kbps, c)))?,
        };
        log::info!(
            "e {:.4} e+ {:.4} e- {:.4} (behavior e {:.4} e+ {:.4} e- {:.4})",
            metrics.estimate.e,
            metrics.estimate.e_plus,
            metrics.estimate.e_minus,
            metrics.behavior.e,
            metrics.behavior.e_plus,
            metrics.behavior.e_minus
        );
        let path = args.metrics.clone().unwrap_or_else(|| files::sibling(&args.out, ".metrics.json"));
        let text = serde_json::to_string_pretty(&metrics).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::output(&path, e))?;
        rec.output(&path);
    } else if args.metrics.is_some() {
        return Err(CliError::Usage("--metrics needs --traces for ground-truth capacity".into()));
    }
    rec.finish(&manifest_for_file(&args.out))?;
    Ok(())
}
