//! Reading experiment inputs and creating outputs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rbwe::dataset::{read_transitions, CapacityTrace, Transition};

use crate::error::{CliError, CliResult};
use crate::manifest::MANIFEST_FILE;

/// Every `*.json` trace in `dir` except the manifest, sorted by file name.
pub fn trace_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::input(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::input(dir, e))?.path();
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json && path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no trace files (*.json) in {}", dir.display())));
    }
    Ok(files)
}

pub fn load_trace(path: &Path) -> CliResult<CapacityTrace> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    CapacityTrace::from_json(&text).map_err(|e| CliError::input(path, e))
}

/// Loads the traces of `dir`; names must be unique.
pub fn load_traces(dir: &Path) -> CliResult<(Vec<PathBuf>, Vec<CapacityTrace>)> {
    let files = trace_files(dir)?;
    let traces = files.iter().map(|f| load_trace(f)).collect::<CliResult<Vec<_>>>()?;
    let mut names: Vec<&str> = traces.iter().map(|t| t.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Usage(format!("duplicate trace name {:?} in {}", w[0], dir.display())));
    }
    Ok((files, traces))
}

pub fn load_transitions(path: &Path) -> CliResult<Vec<Transition>> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    let transitions = read_transitions(BufReader::new(file)).map_err(|e| CliError::input(path, e))?;
    if transitions.is_empty() {
        return Err(CliError::Usage(format!("{} holds no transitions", path.display())));
    }
    Ok(transitions)
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::output(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::output(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::output(path, e))
}

/// Flushes a writer, attributing failures to `path`.
pub fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    use std::io::Write;
    w.flush().map_err(|e| CliError::output(path, e))
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}
