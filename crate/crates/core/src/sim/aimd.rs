//! Delay-gradient AIMD rate controller used as the heuristic baseline.

use serde::{Deserialize, Serialize};

use super::session::{ControlOutput, DecisionContext, EstimateSource, RateController};
use crate::dataset::action::{MAX_RATE_KBPS, MIN_RATE_KBPS};
use crate::dataset::IntervalStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AimdConfig {
    pub start_kbps: f64,
    pub decrease_factor: f64,
    pub increase_factor: f64,
    /// Largest additive increase per interval, kbps.
    pub max_increase_kbps: f64,
    /// Smoothed gradient above which the link is considered overused, ms/interval.
    pub overuse_gradient_ms: f64,
    /// Smoothed gradient below which the queue is draining, ms/interval.
    pub underuse_gradient_ms: f64,
    pub loss_threshold: f64,
    /// Weight of the newest raw gradient in the moving average.
    pub smoothing: f64,
}

impl Default for AimdConfig {
    fn default() -> Self {
        Self {
            start_kbps: 300.0,
            decrease_factor: 0.85,
            increase_factor: 1.05,
            max_increase_kbps: 300.0,
            overuse_gradient_ms: 2.0,
            underuse_gradient_ms: -0.5,
            loss_threshold: 0.1,
            smoothing: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AimdPhase {
    Increase,
    Decrease,
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AimdState {
    pub config: AimdConfig,
    pub rate_kbps: f64,
    pub smoothed_gradient: f64,
    pub phase: AimdPhase,
    last_delay_ms: Option<f64>,
}

impl AimdState {
    pub fn new(config: AimdConfig) -> Self {
        Self {
            rate_kbps: config.start_kbps.clamp(MIN_RATE_KBPS, MAX_RATE_KBPS),
            config,
            smoothed_gradient: 0.0,
            phase: AimdPhase::Hold,
            last_delay_ms: None,
        }
    }

    /// Consumes one feedback report and returns the new target rate.
    pub fn update(&mut self, report: &IntervalStats) -> f64 {
        let c = &self.config;
        let raw = if report.recv_packet_count > 0.0 {
            let delay = report.mean_queuing_delay;
            let g = self.last_delay_ms.map_or(0.0, |prev| delay - prev);
            self.last_delay_ms = Some(delay);
            g
        } else {
            0.0
        };
        self.smoothed_gradient = (1.0 - c.smoothing) * self.smoothed_gradient + c.smoothing * raw;
        let g = self.smoothed_gradient;
        let loss = report.loss_ratio;
        self.phase = if g > c.overuse_gradient_ms || loss > c.loss_threshold {
            AimdPhase::Decrease
        } else if g < c.underuse_gradient_ms || (g.abs() <= -c.underuse_gradient_ms && loss == 0.0) {
            AimdPhase::Increase
        } else {
            AimdPhase::Hold
        };
        let rate = match self.phase {
            AimdPhase::Decrease => self.rate_kbps * c.decrease_factor,
            AimdPhase::Increase => (self.rate_kbps * c.increase_factor).min(self.rate_kbps + c.max_increase_kbps),
            AimdPhase::Hold => self.rate_kbps,
        };
        self.rate_kbps = rate.clamp(MIN_RATE_KBPS, MAX_RATE_KBPS);
        self.rate_kbps
    }
}

impl Default for AimdState {
    fn default() -> Self {
        Self::new(AimdConfig::default())
    }
}

/// AIMD as a session controller: one update per feedback report.
#[derive(Debug, Clone, Default)]
pub struct AimdController {
    pub state: AimdState,
}

impl AimdController {
    pub fn new(config: AimdConfig) -> Self {
        Self { state: AimdState::new(config) }
    }
}

impl RateController for AimdController {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ControlOutput {
        if let Some(report) = ctx.reports.last() {
            self.state.update(report);
        }
        ControlOutput { target_kbps: self.state.rate_kbps, source: EstimateSource::Aimd }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(delay: f64, loss: f64) -> IntervalStats {
        IntervalStats { recv_packet_count: 10.0, mean_queuing_delay: delay, loss_ratio: loss, ..Default::default() }
    }

    #[test]
    fn clear_channel_increases_by_five_percent() {
        let mut s = AimdState::new(AimdConfig { start_kbps: 1000.0, ..Default::default() });
        assert!((s.update(&report(0.0, 0.0)) - 1050.0).abs() < 1e-9);
        assert_eq!(s.phase, AimdPhase::Increase);
    }

    #[test]
    fn additive_cap_limits_large_rates() {
        let mut s = AimdState::new(AimdConfig { start_kbps: 10_000.0, ..Default::default() });
        assert!((s.update(&report(0.0, 0.0)) - 10_300.0).abs() < 1e-9);
    }

    #[test]
    fn heavy_loss_decreases() {
        let mut s = AimdState::new(AimdConfig { start_kbps: 1000.0, ..Default::default() });
        assert!((s.update(&report(0.0, 0.2)) - 850.0).abs() < 1e-9);
        assert_eq!(s.phase, AimdPhase::Decrease);
    }

    #[test]
    fn rising_delay_decreases_and_moderate_loss_holds() {
        let mut s = AimdState::new(AimdConfig { start_kbps: 1000.0, ..Default::default() });
        s.update(&report(10.0, 0.0));
        s.update(&report(20.0, 0.0));
        assert_eq!(s.phase, AimdPhase::Decrease);
        let mut s = AimdState::new(AimdConfig { start_kbps: 1000.0, ..Default::default() });
        s.update(&report(10.0, 0.05));
        assert_eq!(s.phase, AimdPhase::Hold);
        assert_eq!(s.rate_kbps, 1000.0);
    }
}
