use std::io::BufRead;
use std::path::PathBuf;

use rbwe::eval::report::{write_cdf_csv, write_report_csv, write_summary_csv, SessionScore};
use rbwe::eval::QoeScores;
use serde::Serialize;

use super::simulate::SCORES_FILE;
use crate::error::{CliError, CliResult};
use crate::files;
use crate::manifest::{Recorder, MANIFEST_FILE};

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct Args {
    /// Simulation output directories (each holding `scores.jsonl`).
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Output directory: `report.csv`, `summary.csv`, `cdf_<metric>.csv`, `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: Args, argv: &[String]) -> CliResult<()> {
    let mut rec = Recorder::new("report", argv);
    rec.config(&args)?;
    let mut sessions: Vec<SessionScore> = Vec::new();
    for dir in &args.inputs {
        let path = dir.join(SCORES_FILE);
        let file = std::fs::File::open(&path).map_err(|e| CliError::input(&path, e))?;
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| CliError::input(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let score = serde_json::from_str(&line).map_err(|e| {
                CliError::input(&path, rbwe::Error::Parse { line: i + 1, message: e.to_string() })
            })?;
            sessions.push(score);
        }
        rec.input(&path);
    }
    if sessions.is_empty() {
        return Err(CliError::Usage("no sessions in the given inputs".into()));
    }
    sessions.sort_by(|a, b| (&a.controller, &a.session_id).cmp(&(&b.controller, &b.session_id)));
    if let Some(w) = sessions.windows(2).find(|w| w[0].session_id == w[1].session_id) {
        return Err(CliError::Usage(format!("session {} appears twice", w[0].session_id)));
    }

    files::create_dir(&args.out)?;
    let path = args.out.join("report.csv");
    let mut w = files::create(&path)?;
    write_report_csv(&mut w, &sessions)?;
    files::finish(w, &path)?;
    rec.output(&path);

    let path = args.out.join("summary.csv");
    let mut w = files::create(&path)?;
    write_summary_csv(&mut w, &sessions)?;
    files::finish(w, &path)?;
    rec.output(&path);

    for (metric, name) in QoeScores::NAMES.iter().enumerate() {
        let path = args.out.join(format!("cdf_{name}.csv"));
        let mut w = files::create(&path)?;
        write_cdf_csv(&mut w, &sessions, metric)?;
        files::finish(w, &path)?;
        rec.output(&path);
    }
    rec.finish(&args.out.join(MANIFEST_FILE))?;
    Ok(())
}
