use std::path::PathBuf;

use rbwe::trainer::{TrainConfig, Trainer};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files;
use crate::manifest::{manifest_for_file, Recorder};

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct Args {
    /// Transitions file (JSON Lines).
    #[arg(long)]
    pub data: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Training configuration JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gradient steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Expectile of the value regression.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Discount factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Advantage temperature of the policy extraction.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Q-ensemble size.
    #[arg(long)]
    pub members: Option<usize>,
    /// Hidden width of every network.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Training log CSV (default: `<out>.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Also write `<out>.step<N>` every this many steps (0: only at the end).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
}

impl Args {
    fn resolve(&self) -> CliResult<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?
            }
            None => TrainConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident <- $flag:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        apply!(gradient_steps <- steps, seed <- seed, batch_size <- batch_size, tau <- tau, gamma <- gamma,
            beta <- beta, learning_rate <- learning_rate, members <- members, hidden <- hidden);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(args: Args, argv: &[String]) -> CliResult<()> {
    let config = args.resolve()?;
    let mut rec = Recorder::new("train", argv);
    rec.config(&config)?;
    if let Some(path) = &args.config {
        rec.input(path);
    }
    rec.input(&args.data);
    let transitions = files::load_transitions(&args.data)?;
    log::info!("training on {} transitions for {} steps", transitions.len(), config.gradient_steps);

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        files::create_dir(parent)?;
    }
    let trainer = Trainer::new(&transitions, config)?;
    let mut intermediate = Vec::new();
    let (model, train_log) = trainer.run(args.checkpoint_every, |step, model| {
        let mut m = model.clone();
        m.quantize();
        let path = files::sibling(&args.out, &format!(".step{step}"));
        m.save(&path)?;
        intermediate.push(path);
        Ok(())
    })?;
    model.save(&args.out)?;
    let log_path = args.log.clone().unwrap_or_else(|| files::sibling(&args.out, ".log.csv"));
    let mut w = files::create(&log_path)?;
    train_log.write_csv(&mut w)?;
    files::finish(w, &log_path)?;

    for path in intermediate.iter().chain([&args.out, &log_path]) {
        rec.output(path);
    }
    rec.finish(&manifest_for_file(&args.out))?;
    Ok(())
}
