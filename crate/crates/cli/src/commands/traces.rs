use std::path::PathBuf;

use rbwe::dataset::synthesize_traces;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files;
use crate::manifest::{Recorder, MANIFEST_FILE};

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct Args {
    /// Output directory; one `<name>.json` per trace plus `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of traces (families cycle: constant, steps, random walk, outages).
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Length of every trace, ms.
    #[arg(long, default_value_t = 30_000)]
    pub duration_ms: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trace name prefix; names are `<prefix>-000`, `<prefix>-001`, ….
    #[arg(long, default_value = "trace")]
    pub prefix: String,
}

pub fn run(args: Args, argv: &[String]) -> CliResult<()> {
    if args.count == 0 || args.duration_ms == 0 {
        return Err(CliError::Usage("--count and --duration-ms must be positive".into()));
    }
    if args.prefix.is_empty() || args.prefix.contains(['/', '\\']) {
        return Err(CliError::Usage(format!("invalid trace prefix {:?}", args.prefix)));
    }
    let mut rec = Recorder::new("traces", argv);
    rec.config(&args)?;
    files::create_dir(&args.out)?;
    for (i, mut trace) in synthesize_traces(args.count, args.duration_ms, args.seed)?.into_iter().enumerate() {
        trace.name = format!("{}-{i:03}", args.prefix);
        let path = args.out.join(format!("{}.json", trace.name));
        let text = trace.to_json()?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::output(&path, e))?;
        rec.output(&path);
    }
    rec.finish(&args.out.join(MANIFEST_FILE))?;
    Ok(())
}
