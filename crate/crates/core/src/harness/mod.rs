//! Synthetic data, metrics and the experiment runner.

mod config;
mod metrics;
mod report;
mod runner;
mod synthetic;

pub use config::{Algorithm, DataSource, ExperimentConfig, Metric, SweepAxis};
pub use metrics::{mnlp, rmse, rmse_between};
pub use report::{summarize_results, write_summary, SummaryRow};
pub use runner::{run_experiment, run_instances, sweep, write_results_to, InstanceMetrics, MetricsReport, TIMED_PHASES};
pub use synthetic::{generate_synthetic, PriorSampler, MAX_DENSE_SAMPLE};
