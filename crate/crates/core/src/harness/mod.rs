//! Multi-seed experiment orchestration, metrics and result files.

mod config;
mod metrics;
mod output;
mod run;

pub(crate) use config::schema_error;
pub use config::ExperimentConfig;
pub use metrics::{
    fairness_spread, quantile, running_average, social_welfare, MetricsLog, PeriodRecord, Spread, RUNNING_WINDOW,
};
pub use output::{
    run_stem, write_agent_csv, write_checkpoints, write_period_csv, write_results, write_summary_csv, SummaryRow,
};
pub use run::{density_squared_error, learner_names, run_experiment, run_experiment_saving, run_seed, train_seed};
