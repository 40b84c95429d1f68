use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::metrics::MetricsLog;
use crate::error::{Error, Result};
use crate::learners::Learner;
use crate::numkit::checkpoint;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run_stem(config: &ExperimentConfig, log: &MetricsLog) -> String {
    format!("{}_{}_seed{}", config.name, log.learner, log.seed)
}

/// Per-period CSV: period, welfare, running_avg, density_mse, entropy_mean,
/// epsilon, density_loss. Absent values are empty fields.
pub fn write_period_csv(path: &Path, log: &MetricsLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "period",
        "welfare",
        "running_avg",
        "density_mse",
        "entropy_mean",
        "epsilon",
        "density_loss",
    ])?;
    for p in &log.periods {
        w.write_record([
            p.period.to_string(),
            p.welfare.to_string(),
            p.running_avg.to_string(),
            opt(p.density_mse),
            opt(p.entropy_mean),
            opt(p.epsilon),
            opt(p.density_loss_mean),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-agent mean revenue per period over the evaluation window.
pub fn write_agent_csv(path: &Path, log: &MetricsLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["agent", "revenue"])?;
    for (i, r) in log.final_revenues.iter().enumerate() {
        w.write_record([i.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write each learner's networks as `{stem}_learner{i}_{net}.json`.
pub fn write_checkpoints(dir: &Path, stem: &str, learners: &[Box<dyn Learner>]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (i, learner) in learners.iter().enumerate() {
        for (net_name, net) in learner.networks() {
            let path = dir.join(format!("{stem}_learner{i}_{net_name}.json"));
            checkpoint::save(net, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// One summary row per (scenario, learner) over its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub learner: String,
    pub seeds: usize,
    pub welfare_mean: f64,
    pub welfare_std: f64,
    pub fairness_std_mean: f64,
}

impl SummaryRow {
    pub fn from_logs(scenario: &str, logs: &[MetricsLog]) -> SummaryRow {
        let w: Vec<f64> = logs.iter().map(MetricsLog::converged_welfare).collect();
        let n = w.len().max(1) as f64;
        let mean = w.iter().sum::<f64>() / n;
        let std = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        SummaryRow {
            scenario: scenario.into(),
            learner: logs.first().map(|l| l.learner.clone()).unwrap_or_default(),
            seeds: logs.len(),
            welfare_mean: mean,
            welfare_std: std,
            fairness_std_mean: logs.iter().map(|l| l.fairness().std).sum::<f64>() / n,
        }
    }
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario",
        "learner",
        "seeds",
        "welfare_mean",
        "welfare_std",
        "fairness_std_mean",
    ])?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.learner.clone(),
            r.seeds.to_string(),
            r.welfare_mean.to_string(),
            r.welfare_std.to_string(),
            r.fairness_std_mean.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write run CSVs, a summary row and a manifest for one experiment.
/// Returns the paths written.
pub fn write_results(config: &ExperimentConfig, logs: &[MetricsLog], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for log in logs {
        let stem = run_stem(config, log);
        let periods = dir.join(format!("{stem}_periods.csv"));
        write_period_csv(&periods, log)?;
        let agents = dir.join(format!("{stem}_agents.csv"));
        write_agent_csv(&agents, log)?;
        written.extend([periods, agents]);
    }
    let label = format!("{}_{}", config.name, config.learner);
    let summary = dir.join(format!("{label}_summary.csv"));
    write_summary_csv(&summary, &[SummaryRow::from_logs(&config.name, logs)])?;
    written.push(summary);
    let manifest = dir.join(format!("{label}_manifest.toml"));
    fs::write(&manifest, config.to_toml_string()?).map_err(|e| Error::io(&manifest, e))?;
    written.push(manifest);
    Ok(written)
}
