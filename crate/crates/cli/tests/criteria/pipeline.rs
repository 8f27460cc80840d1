//! Criteria 7 to 11, run through the `rbwe` binary on a synthetic suite:
//! 34 training traces (about 51k transitions) and 50 held-out traces.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rbwe::controller::{decide, DecisionSource, GateConfig};
use rbwe::dataset::{read_transitions, Transition};
use rbwe::sim::{AimdConfig, AimdState};
use rbwe::trainer::Model;

use super::Outcome;

const DURATION_MS: &str = "30000";
const DEFAULT_STEPS: usize = 10_000;
const PIPELINE_BUDGET: Duration = Duration::from_secs(45 * 60);

fn rbwe(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rbwe"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("rbwe {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub struct Suite {
    _dir: tempfile::TempDir,
    root: PathBuf,
    steps: usize,
    /// Wall time of generate + train + offline evaluation.
    pipeline_time: Duration,
    model: Arc<Model>,
    held_out: Vec<Transition>,
}

impl Suite {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// Training steps; `RBWE_ACCEPTANCE_STEPS` shortens the run for local iteration.
fn train_steps() -> usize {
    std::env::var("RBWE_ACCEPTANCE_STEPS").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_STEPS)
}

pub fn build() -> Result<Suite, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_owned();
    let p = |name: &str| root.join(name);
    let steps = train_steps();

    rbwe(&["traces", "--out", s(&p("train")), "--count", "34", "--duration-ms", DURATION_MS, "--seed", "1", "--prefix", "train"])?;
    rbwe(&["traces", "--out", s(&p("held")), "--count", "50", "--duration-ms", DURATION_MS, "--seed", "2", "--prefix", "held"])?;

    let started = Instant::now();
    rbwe(&["generate", "--traces", s(&p("train")), "--duration-ms", DURATION_MS, "--seed", "11", "--out", s(&p("train.jsonl"))])?;
    rbwe(&["generate", "--traces", s(&p("held")), "--duration-ms", DURATION_MS, "--seed", "22", "--out", s(&p("held.jsonl"))])?;
    let generated = started.elapsed();
    rbwe(&[
        "train", "--data", s(&p("train.jsonl")), "--out", s(&p("model.rbwe")), "--steps", &steps.to_string(),
        "--batch-size", "256", "--seed", "0",
    ])?;
    let trained = started.elapsed();
    for (policy, out) in [("model", "estimate.csv"), ("behavior", "behavior.csv")] {
        rbwe(&[
            "eval-offline", "--data", s(&p("held.jsonl")), "--policy", policy, "--model", s(&p("model.rbwe")),
            "--traces", s(&p("held")), "--behavior-tag", "noisy_oracle", "--out", s(&p(out)),
        ])?;
    }
    let pipeline_time = started.elapsed();
    eprintln!(
        "pipeline: generate {:.0} s, train {:.0} s ({steps} steps), evaluate {:.0} s",
        generated.as_secs_f64(),
        (trained - generated).as_secs_f64(),
        (pipeline_time - trained).as_secs_f64()
    );

    for controller in ["aimd", "hybrid"] {
        rbwe(&[
            "simulate", "--traces", s(&p("held")), "--controller", controller, "--model", s(&p("model.rbwe")),
            "--duration-ms", DURATION_MS, "--seed", "5", "--out", s(&p(controller)),
        ])?;
    }
    rbwe(&["report", "--inputs", s(&p("aimd")), s(&p("hybrid")), "--out", s(&p("report"))])?;

    let model = Model::load(&p("model.rbwe")).map_err(|e| e.to_string())?;
    let file = std::fs::File::open(p("held.jsonl")).map_err(|e| e.to_string())?;
    let held_out = read_transitions(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    Ok(Suite { _dir: dir, root, steps, pipeline_time, model: Arc::new(model), held_out })
}

fn aimd_state() -> AimdState {
    AimdState::new(AimdConfig::default())
}

pub fn ood_gate(suite: &Suite) -> Outcome {
    let gate = GateConfig::default();
    let aimd = aimd_state();
    let probes: Vec<&Transition> = suite.held_out.iter().step_by(25).collect();
    let fallback_rate = |scale: f64| {
        let fallbacks = probes
            .iter()
            .filter(|t| {
                let state: Vec<f64> = t.state.iter().map(|v| v * scale).collect();
                let d = decide(&suite.model.policy, &suite.model.critic, &state, t.received_kbps(), &mut None, &aimd, &gate);
                d.source == DecisionSource::Fallback
            })
            .count();
        fallbacks as f64 / probes.len() as f64
    };
    let (inside, outside) = (fallback_rate(1.0), fallback_rate(10.0));
    Outcome::check(
        outside >= 0.9 && inside <= 0.2,
        format!(
            "{} probes: fallback {:.1}% on x10 states (need >= 90%), {:.1}% in distribution (need <= 20%)",
            probes.len(),
            100.0 * outside,
            100.0 * inside
        ),
    )
}

fn metric(v: &serde_json::Value, policy: &str, name: &str) -> f64 {
    v[policy][name].as_f64().unwrap_or(f64::NAN)
}

pub fn accuracy(suite: &Suite) -> Outcome {
    let read = |name: &str| -> Result<serde_json::Value, String> {
        let text = std::fs::read_to_string(suite.path(name)).map_err(|e| e.to_string())?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    let metrics = match read("estimate.csv.metrics.json") {
        Ok(m) => m,
        Err(e) => return Outcome::check(false, e),
    };
    let (model_plus, model_e) = (metric(&metrics, "estimate", "e_plus"), metric(&metrics, "estimate", "e"));
    let (behavior_plus, behavior_e) = (metric(&metrics, "behavior", "e_plus"), metric(&metrics, "behavior", "e"));
    let reduction = 1.0 - model_plus / behavior_plus;
    let in_budget = suite.pipeline_time < PIPELINE_BUDGET && suite.steps >= DEFAULT_STEPS;
    Outcome::check(
        reduction >= 0.1 && model_e <= behavior_e + 0.05 && in_budget,
        format!(
            "e+ {model_plus:.4} vs behavior {behavior_plus:.4} ({:.1}% lower, need >= 10%); e {model_e:.4} vs {behavior_e:.4}; pipeline {:.1} min with {} steps",
            100.0 * reduction,
            suite.pipeline_time.as_secs_f64() / 60.0,
            suite.steps
        ),
    )
}

/// `(p10 QoE, mean S_rate)` of one controller from the report summary.
fn summary(suite: &Suite, controller: &str) -> Result<(f64, f64), String> {
    let text = std::fs::read_to_string(suite.path("report/summary.csv")).map_err(|e| e.to_string())?;
    let field = |metric: &str, column: usize| -> Result<f64, String> {
        text.lines()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|c| c[0] == controller && c[1] == metric)
            .and_then(|c| c[column].parse().ok())
            .ok_or_else(|| format!("{controller} {metric} missing from summary"))
    };
    Ok((field("qoe", 4)?, field("s_rate", 2)?))
}

fn model_share(suite: &Suite) -> Result<f64, String> {
    let (mut model, mut total) = (0usize, 0usize);
    for entry in std::fs::read_dir(suite.path("hybrid/decisions")).map_err(|e| e.to_string())? {
        let text = std::fs::read_to_string(entry.map_err(|e| e.to_string())?.path()).map_err(|e| e.to_string())?;
        for line in text.lines().skip(1) {
            total += 1;
            model += usize::from(line.split(',').nth(1) == Some("model"));
        }
    }
    Ok(model as f64 / total.max(1) as f64)
}

pub fn qoe(suite: &Suite) -> Outcome {
    let scores = summary(suite, "hybrid").and_then(|h| Ok((h, summary(suite, "aimd")?, model_share(suite)?)));
    match scores {
        Ok(((hybrid_p10, hybrid_rate), (aimd_p10, aimd_rate), share)) => Outcome::check(
            hybrid_p10 > aimd_p10 && hybrid_rate > aimd_rate,
            format!(
                "p10 QoE hybrid {hybrid_p10:.2} vs AIMD {aimd_p10:.2}; mean S_rate {hybrid_rate:.2} vs {aimd_rate:.2}; model decisions {:.1}%",
                100.0 * share
            ),
        ),
        Err(e) => Outcome::check(false, e),
    }
}

pub fn latency(suite: &Suite) -> Outcome {
    let gate = GateConfig::default();
    let aimd = aimd_state();
    let call = &suite.held_out[0].call_id;
    let session: Vec<&Transition> = suite.held_out.iter().filter(|t| &t.call_id == call).collect();
    let mut recurrent = None;
    let started = Instant::now();
    for t in &session {
        decide(&suite.model.policy, &suite.model.critic, &t.state, t.received_kbps(), &mut recurrent, &aimd, &gate);
    }
    let mean = started.elapsed().as_secs_f64() * 1e3 / session.len() as f64;
    Outcome::check(mean < 5.0, format!("mean decide() {mean:.3} ms over {} intervals", session.len()))
}

pub fn reproducibility(suite: &Suite) -> Outcome {
    // Re-training the full model would double the run time; a short training
    // run covers the train command instead.
    let small = rbwe(&[
        "train", "--data", s(&suite.path("train.jsonl")), "--out", s(&suite.path("small.rbwe")), "--steps", "20",
        "--batch-size", "64", "--seed", "9",
    ]);
    if let Err(e) = small {
        return Outcome::check(false, e);
    }
    let manifests = [
        "train/manifest.json",
        "held/manifest.json",
        "train.jsonl.manifest.json",
        "held.jsonl.manifest.json",
        "small.rbwe.manifest.json",
        "estimate.csv.manifest.json",
        "behavior.csv.manifest.json",
        "aimd/manifest.json",
        "hybrid/manifest.json",
        "report/manifest.json",
    ];
    let failures: Vec<String> = manifests
        .iter()
        .filter_map(|m| rbwe(&["rerun", "--manifest", s(&suite.path(m))]).err().map(|e| format!("{m}: {e}")))
        .collect();
    Outcome::check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} manifests reproduced hash-identical outputs", manifests.len())
        } else {
            failures.join("; ")
        },
    )
}
