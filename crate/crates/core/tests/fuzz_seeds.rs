//! Replays the checked-in fuzz corpus through the same checks as the fuzz
//! targets, so regressions surface without a fuzzing toolchain.

use std::path::PathBuf;

use rbwe::controller::GateConfig;
use rbwe::dataset::{parse_transition_line, read_transitions, CapacityTrace};
use rbwe::nn::Checkpoint;
use rbwe::trainer::{Model, TrainConfig};

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    assert!(!entries.is_empty(), "empty corpus {}", dir.display());
    entries.into_iter().map(|p| (p.clone(), std::fs::read(&p).unwrap())).collect()
}

#[test]
fn checkpoint_seeds() {
    let mut decoded = 0;
    for (path, bytes) in corpus("checkpoint_decode") {
        if let Ok(ckpt) = Checkpoint::decode(&bytes) {
            let again = ckpt.encode().unwrap();
            assert_eq!(again, bytes, "{}", path.display());
            Model::from_checkpoint(&ckpt).unwrap();
            decoded += 1;
        }
    }
    assert_eq!(decoded, 1);
}

#[test]
fn transition_seeds() {
    let mut parsed = 0;
    for (_, bytes) in corpus("transition_line") {
        let text = String::from_utf8(bytes.clone()).unwrap();
        if let Ok(t) = parse_transition_line(text.trim_end()) {
            t.validate().unwrap();
            parsed += 1;
        }
        let _ = read_transitions(bytes.as_slice());
    }
    assert_eq!(parsed, 2);
}

#[test]
fn trace_seeds() {
    let mut parsed = 0;
    for (path, bytes) in corpus("trace_json") {
        if let Ok(trace) = CapacityTrace::from_json(std::str::from_utf8(&bytes).unwrap()) {
            assert_eq!(CapacityTrace::from_json(&trace.to_json().unwrap()).unwrap(), trace, "{}", path.display());
            parsed += 1;
        }
    }
    assert_eq!(parsed, 4);
}

#[test]
fn config_seeds() {
    let mut valid = 0;
    for (_, bytes) in corpus("config_json") {
        if serde_json::from_slice::<TrainConfig>(&bytes).is_ok_and(|c| c.validate().is_ok()) {
            valid += 1;
        }
        let _ = serde_json::from_slice::<GateConfig>(&bytes);
    }
    assert_eq!(valid, 2);
}
