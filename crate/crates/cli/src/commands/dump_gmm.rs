use std::path::PathBuf;

use rbwe::controller::{decide, GateConfig};
use rbwe::policy::MixturePolicy;
use rbwe::sim::{AimdConfig, AimdState};
use rbwe::trainer::Model;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub model: PathBuf,
    /// Transitions file (JSON Lines).
    #[arg(long)]
    pub data: PathBuf,
    /// Zero-based transition index.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Multiply the state by this factor first (out-of-distribution probes).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Serialize)]
struct Dump {
    call_id: String,
    step: u64,
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
    a_star: f64,
    converged: bool,
    lambda_star: f64,
    decision: rbwe::controller::Decision,
}

/// Evaluated with a zero recurrent state; prints JSON to stdout.
pub fn run(args: Args) -> CliResult<()> {
    let model = Model::load(&args.model).map_err(|e| CliError::input(&args.model, e))?;
    let transitions = files::load_transitions(&args.data)?;
    let t = transitions.get(args.index).ok_or_else(|| {
        CliError::Usage(format!("index {} out of range ({} transitions)", args.index, transitions.len()))
    })?;
    let state: Vec<f64> = t.state.iter().map(|v| v * args.scale).collect();
    let (gmm, _) = model.policy.mixture(&state, None)?;
    let mode = gmm.find_mode();
    let gate = GateConfig {
        tau_u: model.config.tau_u,
        epsilon: model.config.epsilon_u,
        delta: model.config.delta,
        sigma_rule: model.config.sigma_rule,
        ..GateConfig::default()
    };
    let aimd = AimdState::new(AimdConfig::default());
    let decision = decide(&model.policy, &model.critic, &state, t.received_kbps(), &mut None, &aimd, &gate);
    let dump = Dump {
        call_id: t.call_id.clone(),
        step: t.step,
        weights: gmm.weights().to_vec(),
        means: gmm.means().to_vec(),
        stds: gmm.stds().to_vec(),
        a_star: mode.a_star,
        converged: mode.converged,
        lambda_star: mode.lambda_star,
        decision,
    };
    let text = serde_json::to_string_pretty(&dump).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}
