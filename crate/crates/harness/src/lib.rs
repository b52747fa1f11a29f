//! Experiment harness: configuration grid execution, learning-time and
//! learning-performance metrics, Welch significance tests, and CSV / table
//! / SVG emission.

pub mod experiment;
pub mod metrics;
pub mod report;
pub mod stats;

pub use experiment::{
    full_grid, run_experiment, run_one, summarize, ExperimentConfig, MetricSummary,
    OptimizerConfig, RunRecord,
};
pub use metrics::{learning_performance, learning_time};
pub use report::{emit_results, ExperimentResult, OutputFormat};
pub use stats::welch_t_test;
