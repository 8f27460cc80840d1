use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use rbwe::controller::{write_decision_csv, GateConfig, HybridController};
use rbwe::dataset::{BehaviorKind, CapacityTrace};
use rbwe::eval::report::{write_session_csv, SessionScore};
use rbwe::eval::{qoe_scores, QoeInput, QoeWeights};
use rbwe::seed::{derive_seed, label_hash};
use rbwe::sim::{run_session, AimdConfig, AimdController, SessionConfig};
use rbwe::trainer::Model;
use serde::Serialize;

use super::eval_offline::{RecurrentArg, SigmaRuleArg};
use crate::error::{CliError, CliResult};
use crate::files;
use crate::manifest::{Recorder, MANIFEST_FILE};

pub const SCORES_FILE: &str = "scores.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Delay-gradient AIMD baseline.
    Aimd,
    /// Mixture policy behind the uncertainty gate, AIMD fallback.
    Hybrid,
    NoisyOracle,
    StaleOracle,
}

impl ControllerKind {
    fn tag(self) -> &'static str {
        match self {
            ControllerKind::Aimd => "aimd",
            ControllerKind::Hybrid => "hybrid",
            ControllerKind::NoisyOracle => "noisy_oracle",
            ControllerKind::StaleOracle => "stale_oracle",
        }
    }
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct Args {
    /// Directory of trace JSON files.
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long, value_enum)]
    pub controller: ControllerKind,
    /// Checkpoint, required with `--controller hybrid`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Gate configuration JSON; the flags below override its fields.
    #[arg(long)]
    pub gate: Option<PathBuf>,
    /// Relative-uncertainty threshold above which the fallback takes over.
    #[arg(long)]
    pub tau_u: Option<f64>,
    /// Risk multiple of the lower confidence bound.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub sigma_rule: Option<SigmaRuleArg>,
    #[arg(long, value_enum)]
    pub recurrent: Option<RecurrentArg>,
    /// Session length, ms.
    #[arg(long, default_value_t = 30_000)]
    pub duration_ms: u64,
    /// Base seed; each trace's link seed derives from it and the trace name,
    /// so controllers compared under one seed see identical link randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Divide the network score by its weight sum.
    #[arg(long)]
    pub renormalize: bool,
    /// Output directory: `sessions/`, `decisions/` (hybrid), `scores.jsonl`, `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Sessions run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl Args {
    fn gate(&self) -> CliResult<GateConfig> {
        let mut gate = match &self.gate {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?
            }
            None => GateConfig::default(),
        };
        if let Some(v) = self.tau_u {
            gate.tau_u = v;
        }
        if let Some(v) = self.delta {
            gate.delta = v;
        }
        if let Some(v) = self.sigma_rule {
            gate.sigma_rule = v.into();
        }
        if let Some(v) = self.recurrent {
            gate.recurrent = v.into();
        }
        if !(gate.tau_u > 0.0 && gate.epsilon > 0.0 && gate.delta >= 0.0) {
            return Err(CliError::Usage(format!("invalid gate configuration {gate:?}")));
        }
        Ok(gate)
    }
}

#[derive(Debug, Serialize)]
struct Snapshot<'a> {
    args: &'a Args,
    gate: Option<GateConfig>,
    aimd: AimdConfig,
}

struct SessionOutput {
    score: SessionScore,
    stream: Vec<u8>,
    decisions: Option<Vec<u8>>,
}

fn simulate_one(
    trace: &CapacityTrace,
    kind: ControllerKind,
    model: Option<&(Arc<Model>, GateConfig)>,
    args: &Args,
    weights: &QoeWeights,
) -> CliResult<SessionOutput> {
    let config = SessionConfig::new(args.duration_ms, derive_seed(args.seed, &[label_hash(&trace.name)]));
    let (report, decisions) = match (kind, model) {
        (ControllerKind::Hybrid, Some((model, gate))) => {
            let mut c = HybridController::new(model.clone(), *gate, AimdConfig::default());
            let report = run_session(trace, &mut c, &config)?;
            let mut log = Vec::new();
            write_decision_csv(&mut log, c.decisions())?;
            (report, Some(log))
        }
        (ControllerKind::Hybrid, None) => return Err(CliError::Usage("--controller hybrid needs --model".into())),
        (ControllerKind::Aimd, _) => (run_session(trace, &mut AimdController::new(AimdConfig::default()), &config)?, None),
        (ControllerKind::NoisyOracle, _) => (run_session(trace, &mut BehaviorKind::NoisyOracle.controller(config.seed), &config)?, None),
        (ControllerKind::StaleOracle, _) => (run_session(trace, &mut BehaviorKind::StaleOracle.controller(config.seed), &config)?, None),
    };
    let mut stream = Vec::new();
    write_session_csv(&mut stream, &report)?;
    let score = SessionScore {
        session_id: format!("{}/{}", trace.name, kind.tag()),
        controller: kind.tag().to_owned(),
        trace: trace.name.clone(),
        scores: qoe_scores(&QoeInput::from_session(&report), weights)?,
    };
    Ok(SessionOutput { score, stream, decisions })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::output(path, e))
}

pub fn run(args: Args, argv: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("simulate", argv);
    let gate = (args.controller == ControllerKind::Hybrid).then(|| args.gate()).transpose()?;
    rec.config(&Snapshot { args: &args, gate, aimd: AimdConfig::default() })?;
    if let Some(path) = &args.gate {
        rec.input(path);
    }
    let (trace_files, traces) = files::load_traces(&args.traces)?;
    trace_files.iter().for_each(|f| rec.input(f));
    let model = match (gate, &args.model) {
        (Some(gate), Some(path)) => {
            rec.input(path);
            Some((Arc::new(Model::load(path).map_err(|e| CliError::input(path, e))?), gate))
        }
        (Some(_), None) => return Err(CliError::Usage("--controller hybrid needs --model".into())),
        (None, _) => None,
    };
    let weights = QoeWeights { renormalize: args.renormalize, ..QoeWeights::default() };

    let mut outputs = files::thread_pool(args.jobs)?.install(|| {
        traces
            .par_iter()
            .map(|t| simulate_one(t, args.controller, model.as_ref(), &args, &weights))
            .collect::<CliResult<Vec<_>>>()
    })?;
    outputs.sort_by(|a, b| a.score.session_id.cmp(&b.score.session_id));

    let sessions_dir = args.out.join("sessions");
    files::create_dir(&sessions_dir)?;
    let decisions_dir = args.out.join("decisions");
    if model.is_some() {
        files::create_dir(&decisions_dir)?;
    }
    let mut scores = Vec::new();
    for out in &outputs {
        let path = sessions_dir.join(format!("{}.csv", out.score.trace));
        write_bytes(&path, &out.stream)?;
        rec.output(&path);
        if let Some(log) = &out.decisions {
            let path = decisions_dir.join(format!("{}.csv", out.score.trace));
            write_bytes(&path, log)?;
            rec.output(&path);
        }
        scores.extend(serde_json::to_vec(&out.score).map_err(|e| CliError::Runtime(e.to_string()))?);
        scores.push(b'\n');
    }
    let scores_path = args.out.join(SCORES_FILE);
    write_bytes(&scores_path, &scores)?;
    rec.output(&scores_path);
    rec.finish(&args.out.join(MANIFEST_FILE))?;
    Ok(())
}
