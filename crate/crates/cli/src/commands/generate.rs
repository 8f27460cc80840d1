use std::path::PathBuf;

use rayon::prelude::*;
use rbwe::dataset::generate::check_inputs;
use rbwe::dataset::{generate_session, write_transitions, BehaviorKind, GenerateConfig};
use serde::Serialize;

use crate::error::CliResult;
use crate::files;
use crate::manifest::{manifest_for_file, Recorder};

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct Args {
    /// Directory of trace JSON files.
    #[arg(long)]
    pub traces: PathBuf,
    /// Behavior policies to log (aimd, noisy_oracle, stale_oracle).
    #[arg(long, value_delimiter = ',', default_value = "aimd,noisy_oracle,stale_oracle")]
    pub behaviors: Vec<BehaviorKind>,
    /// Session length, ms; every trace must be at least this long.
    #[arg(long, default_value_t = 30_000)]
    pub duration_ms: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output transitions file (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Sessions run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

pub fn run(args: Args, argv: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("generate", argv);
    rec.config(&args)?;
    let (trace_files, traces) = files::load_traces(&args.traces)?;
    trace_files.iter().for_each(|f| rec.input(f));
    check_inputs(&traces, &args.behaviors)?;

    let config = GenerateConfig::new(args.duration_ms, args.seed);
    let jobs: Vec<_> = traces.iter().flat_map(|t| args.behaviors.iter().map(move |&b| (t, b))).collect();
    let sessions = files::thread_pool(args.jobs)?
        .install(|| jobs.par_iter().map(|&(t, b)| generate_session(t, b, &config)).collect::<Result<Vec<_>, _>>())?;

    let mut w = files::create(&args.out)?;
    write_transitions(&mut w, sessions.iter().flatten())?;
    files::finish(w, &args.out)?;
    log::info!("{} transitions from {} sessions", sessions.iter().map(Vec::len).sum::<usize>(), sessions.len());
    rec.output(&args.out);
    rec.finish(&manifest_for_file(&args.out))?;
    Ok(())
}
