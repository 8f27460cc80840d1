//! Accuracy metrics, quality scores, percentiles and CSV reports.

pub mod accuracy;
pub mod percentile;
pub mod qoe;
pub mod report;

pub use accuracy::{accuracy_metrics, AccuracyMetrics};
pub use percentile::{cdf_points, percentile, percentile_report, percentile_sorted, PercentileReport};
pub use qoe::{qoe_scores, scores_from_components, video_proxy, QoeInput, QoeScores, QoeWeights};
