//! CSV emitters for session streams and score tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::percentile::{cdf_points, percentile};
use super::qoe::QoeScores;
use crate::error::Result;
use crate::sim::SessionReport;

/// Per-interval session stream.
pub fn write_session_csv<W: Write>(mut w: W, report: &SessionReport) -> Result<()> {
    writeln!(w, "time_ms,target_kbps,estimate_source,receive_kbps,capacity_kbps,p95_delay_ms_window,loss_ratio,queue_len")?;
    for r in &report.intervals {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.end_ms,
            r.decision.target_kbps,
            r.decision.source.as_str(),
            r.stats.receive_rate,
            r.capacity_kbps,
            r.p95_queuing_delay_ms,
            r.stats.loss_ratio,
            r.queue_len
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub session_id: String,
    pub controller: String,
    pub trace: String,
    pub scores: QoeScores,
}

pub fn write_report_csv<W: Write>(mut w: W, sessions: &[SessionScore]) -> Result<()> {
    writeln!(w, "session_id,controller,trace,{}", QoeScores::NAMES.join(","))?;
    for s in sessions {
        let values: Vec<String> = s.scores.to_array().iter().map(f64::to_string).collect();
        writeln!(w, "{},{},{},{}", s.session_id, s.controller, s.trace, values.join(","))?;
    }
    Ok(())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean, standard deviation and 10th percentile of every score, per controller.
pub fn write_summary_csv<W: Write>(mut w: W, sessions: &[SessionScore]) -> Result<()> {
    let mut groups: BTreeMap<&str, Vec<&QoeScores>> = BTreeMap::new();
    for s in sessions {
        groups.entry(s.controller.as_str()).or_default().push(&s.scores);
    }
    writeln!(w, "controller,metric,mean,std,p10,sessions")?;
    for (controller, scores) in groups {
        for (i, name) in QoeScores::NAMES.iter().enumerate() {
            let values: Vec<f64> = scores.iter().map(|s| s.to_array()[i]).collect();
            let (mean, std) = mean_std(&values);
            writeln!(w, "{controller},{name},{mean},{std},{},{}", percentile(&values, 10.0), values.len())?;
        }
    }
    Ok(())
}

/// Empirical CDF of one metric, per controller.
pub fn write_cdf_csv<W: Write>(mut w: W, sessions: &[SessionScore], metric: usize) -> Result<()> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in sessions {
        groups.entry(s.controller.as_str()).or_default().push(s.scores.to_array()[metric]);
    }
    writeln!(w, "controller,value,cdf")?;
    for (controller, values) in groups {
        for (v, p) in cdf_points(&values) {
            writeln!(w, "{controller},{v},{p}")?;
        }
    }
    Ok(())
}
