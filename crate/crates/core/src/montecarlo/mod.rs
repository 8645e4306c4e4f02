//! Importance-sampled estimates of the performance density and the Bayes risk.

mod batch;
mod estimate;
mod grid;

pub use batch::{draw_batch, SampleBatch, SamplePlan};
pub use estimate::{
    estimate_performance, estimate_risk, run_batch, run_plan, Outcome, Request, RiskAccumulator, RiskEstimate,
    RiskMethod, WeightScheme,
};
pub use grid::{
    risk_from_grid, Axis, GridRisk, GridSpec, HistogramAccumulator, NormalizationReport, PerformanceGrid,
    DEFAULT_DECISION_BINS, DEFAULT_OBJECT_BINS,
};
