use std::path::PathBuf;

use crate::error::{CliError, CliResult};
use crate::manifest::{ExperimentManifest, FileHash};

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Manifest written by an earlier command. Relative paths inside it
    /// resolve against the current directory.
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Checks input hashes, re-runs the command in place and compares every
/// output hash with the recorded one.
pub fn run(args: Args) -> CliResult<()> {
    let recorded = ExperimentManifest::load(&args.manifest)?;
    if recorded.command == "rerun" {
        return Err(CliError::Usage("a rerun manifest cannot be re-run".into()));
    }
    for input in &recorded.inputs {
        let now = FileHash::of(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Usage(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    crate::run(&recorded.args)?;

    let mut mismatched = Vec::new();
    for output in &recorded.outputs {
        let now = FileHash::of(&output.path)?;
        if now.sha256 != output.sha256 {
            mismatched.push(output.path.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Runtime(format!("outputs differ from the manifest: {}", mismatched.join(", "))));
    }
    println!("{} outputs reproduced identically", recorded.outputs.len());
    Ok(())
}
