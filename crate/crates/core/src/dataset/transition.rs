use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::action::action_bound;
use super::features::STATE_DIM;
use crate::error::{Error, Result};

/// One logged `(s, a, r, s′, done)` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub call_id: String,
    pub step: u64,
    pub state: Vec<f64>,
    pub action: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub behavior_tag: String,
}

impl Transition {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("state", &self.state), ("next_state", &self.next_state)] {
            if v.len() != STATE_DIM {
                return Err(Error::Shape(format!("{name} has {} entries, expected {STATE_DIM}", v.len())));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{name}[{i}]")));
            }
        }
        if !self.reward.is_finite() || !(0.0..=10.0).contains(&self.reward) {
            return Err(Error::Invalid(format!("reward {} outside [0, 10]", self.reward)));
        }
        if !self.action.is_finite() || self.action.abs() > action_bound() {
            return Err(Error::Invalid(format!("action {} outside ±ln 50", self.action)));
        }
        Ok(())
    }

    /// Received rate feature of the state (newest short window), kbps.
    pub fn received_kbps(&self) -> f64 {
        self.state[0]
    }
}

/// Parses and validates one JSON Lines record.
pub fn parse_transition_line(line: &str) -> Result<Transition> {
    let t: Transition = serde_json::from_str(line)?;
    t.validate()?;
    Ok(t)
}

/// Reads a whole JSON Lines stream; blank lines are skipped.
pub fn read_transitions<R: BufRead>(reader: R) -> Result<Vec<Transition>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = parse_transition_line(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_transitions<'a, W, I>(mut writer: W, transitions: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Transition>,
{
    for t in transitions {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
