//! Piecewise-constant capacity/delay/loss schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub time_ms: u64,
    pub capacity_kbps: f64,
    pub owd_ms: f64,
    pub loss_rate: f64,
}

/// Each event holds until the next one. The trace covers `[0, last.time_ms]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityTrace {
    pub name: String,
    pub events: Vec<TraceEvent>,
}

impl CapacityTrace {
    pub fn new(name: impl Into<String>, events: Vec<TraceEvent>) -> Result<Self> {
        let trace = Self { name: name.into(), events };
        trace.validate()?;
        Ok(trace)
    }

    pub fn constant(name: impl Into<String>, capacity_kbps: f64, owd_ms: f64, loss_rate: f64, duration_ms: u64) -> Result<Self> {
        let event = |time_ms| TraceEvent { time_ms, capacity_kbps, owd_ms, loss_rate };
        Self::new(name, vec![event(0), event(duration_ms)])
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .events
            .first()
            .ok_or_else(|| Error::Invalid(format!("trace {} has no events", self.name)))?;
        if first.time_ms != 0 {
            return Err(Error::Invalid(format!("trace {} must start at time 0", self.name)));
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.capacity_kbps > 0.0 && e.capacity_kbps.is_finite()) {
                return Err(Error::Invalid(format!("trace {} event {i}: capacity must be positive", self.name)));
            }
            if !(e.owd_ms >= 0.0 && e.owd_ms.is_finite()) {
                return Err(Error::Invalid(format!("trace {} event {i}: delay must be non-negative", self.name)));
            }
            if !(0.0..1.0).contains(&e.loss_rate) {
                return Err(Error::Invalid(format!("trace {} event {i}: loss rate must be in [0, 1)", self.name)));
            }
        }
        if self.events.windows(2).any(|w| w[1].time_ms <= w[0].time_ms) {
            return Err(Error::Invalid(format!("trace {} events must be strictly increasing in time", self.name)));
        }
        Ok(())
    }

    /// Parses `trace.json` text; errors carry the offending line.
    pub fn from_json(text: &str) -> Result<Self> {
        let trace: CapacityTrace = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        trace.validate().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        Ok(trace)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn duration_ms(&self) -> u64 {
        self.events.last().map_or(0, |e| e.time_ms)
    }

    /// Event in force at `t_ms`.
    pub fn at(&self, t_ms: u64) -> &TraceEvent {
        let idx = self.events.partition_point(|e| e.time_ms <= t_ms);
        &self.events[idx.saturating_sub(1)]
    }

    pub fn capacity_at(&self, t_ms: u64) -> f64 {
        self.at(t_ms).capacity_kbps
    }

    /// Mean capacity over the 1 ms ticks in `[start_ms, end_ms)`.
    pub fn mean_capacity(&self, start_ms: u64, end_ms: u64) -> f64 {
        if end_ms <= start_ms {
            return self.capacity_at(start_ms);
        }
        (start_ms..end_ms).map(|t| self.capacity_at(t)).sum::<f64>() / (end_ms - start_ms) as f64
    }

    /// Copy with every capacity multiplied by `k`.
    pub fn scaled_capacity(&self, k: f64) -> Result<Self> {
        let events = self.events.iter().map(|e| TraceEvent { capacity_kbps: e.capacity_kbps * k, ..*e }).collect();
        Self::new(self.name.clone(), events)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFamily {
    Constant,
    Steps,
    RandomWalk,
    Outages,
}

impl TraceFamily {
    pub const ALL: [TraceFamily; 4] = [TraceFamily::Constant, TraceFamily::Steps, TraceFamily::RandomWalk, TraceFamily::Outages];
}

/// One synthetic trace of the given family.
pub fn synthesize_trace(name: &str, family: TraceFamily, duration_ms: u64, seed: u64) -> Result<CapacityTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owd = rng.gen_range(10.0..80.0f64).round();
    let loss = if rng.gen_bool(0.3) { rng.gen_range(0.0..0.02) } else { 0.0 };
    let base: f64 = rng.gen_range(600.0..5000.0f64).round();
    let mut events = Vec::new();
    let mut push = |t: u64, c: f64| events.push(TraceEvent { time_ms: t, capacity_kbps: c.clamp(200.0, 10_000.0).round(), owd_ms: owd, loss_rate: loss });
    match family {
        TraceFamily::Constant => push(0, base),
        TraceFamily::Steps => {
            let mut t = 0;
            while t < duration_ms {
                push(t, base * rng.gen_range(0.3..1.6));
                t += rng.gen_range(4_000..10_000);
            }
        }
        TraceFamily::RandomWalk => {
            let step = LogNormal::new(0.0, 0.2).expect("valid lognormal");
            let mut c = base;
            for t in (0..duration_ms).step_by(1000) {
                push(t, c);
                c = (c * step.sample(&mut rng)).clamp(300.0, 8000.0);
            }
        }
        TraceFamily::Outages => {
            let mut t = 0;
            while t < duration_ms {
                push(t, base);
                t += rng.gen_range(3_000..8_000);
                if t >= duration_ms {
                    break;
                }
                push(t, base * rng.gen_range(0.15..0.4));
                t += rng.gen_range(1_000..3_000);
            }
        }
    }
    let last = *events.last().expect("at least one event");
    if last.time_ms < duration_ms {
        events.push(TraceEvent { time_ms: duration_ms, ..last });
    }
    events.truncate(events.partition_point(|e| e.time_ms <= duration_ms));
    CapacityTrace::new(name, events)
}

/// `count` traces cycling through all families, named `trace-000`, ….
pub fn synthesize_traces(count: usize, duration_ms: u64, seed: u64) -> Result<Vec<CapacityTrace>> {
    (0..count)
        .map(|i| {
            let family = TraceFamily::ALL[i % TraceFamily::ALL.len()];
            synthesize_trace(&format!("trace-{i:03}"), family, duration_ms, derive_seed(seed, &[i as u64]))
        })
        .collect()
}
