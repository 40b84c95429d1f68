//! Command-line front end: `run`, `sweep`, `gradcheck` and `oracle`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::{
    run_experiment_saving, schema_error, write_results, write_summary_csv, ExperimentConfig, SummaryRow,
};
use crate::verify::{gradient_checks, oracle_checks, Check};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING_FILE: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_UNKNOWN_LEARNER: i32 = 5;
pub const EXIT_RUNTIME: i32 = 6;
pub const EXIT_VERIFICATION: i32 = 7;

#[derive(Debug, Parser)]
#[command(
    name = "matchlab",
    version,
    about = "Independent learners on a simulated matching market"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate one configuration over its seeds.
    Run(RunArgs),
    /// Run every learner of a sweep file on every scenario it lists.
    Sweep(RunArgs),
    /// Finite-difference check of every training loss.
    Gradcheck {
        /// Accepted draws per loss.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Value-iteration, bandit and simulator-statistics oracles.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (run) or sweep file (sweep), in TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set env.dar=0.4` or `--set learner=dedqn`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Seeds run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Comma-separated seeds replacing those in the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Also write every trained network as a JSON checkpoint to this directory.
    #[arg(long, value_name = "DIR")]
    checkpoints: Option<PathBuf>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingFile { .. } => EXIT_MISSING_FILE,
        Error::Schema { .. } | Error::Config(_) => EXIT_SCHEMA,
        Error::UnknownLearner(_) => EXIT_UNKNOWN_LEARNER,
        Error::Verification(_) => EXIT_VERIFICATION,
        _ => EXIT_RUNTIME,
    }
}

/// Parse `args` (program name first), dispatch, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run_command(&a),
        Command::Sweep(a) => sweep_command(&a),
        Command::Gradcheck { trials, seed } => report_checks(gradient_checks(trials, seed)),
        Command::Oracle { seed } => report_checks(oracle_checks(seed)),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn report_checks(checks: Result<Vec<Check>>) -> Result<()> {
    let checks = checks?;
    for c in &checks {
        println!("{c}");
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(failed.join("; ")))
    }
}

fn read_table(path: &Path) -> Result<toml::Table> {
    if !path.exists() {
        return Err(Error::MissingFile { path: path.into() });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<toml::Table>().map_err(schema_error)
}

/// Value text as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, path: &[&str], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("path is non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Schema {
            key: path.join("."),
            message: format!("`{p}` is not a section"),
        })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn deserialize(table: &toml::Table) -> Result<ExperimentConfig> {
    table.clone().try_into::<ExperimentConfig>().map_err(schema_error)
}

/// Apply one `key=value` override. Bare keys that are not top-level fields
/// are looked up in the `env` and then the `hyper` section.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| Error::Schema {
        key: spec.into(),
        message: "override must have the form key=value".into(),
    })?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Schema {
            key: key.into(),
            message: "empty key".into(),
        });
    }
    let value = parse_value(raw.trim());
    let candidates: Vec<String> = if key.contains('.') {
        vec![key.to_string()]
    } else {
        vec![key.to_string(), format!("env.{key}"), format!("hyper.{key}")]
    };
    let mut last_err = None;
    for path in &candidates {
        let mut trial = table.clone();
        let parts: Vec<&str> = path.split('.').collect();
        set_path(&mut trial, &parts, value.clone())?;
        match deserialize(&trial) {
            Ok(_) => {
                *table = trial;
                return Ok(());
            }
            Err(Error::Schema { key: k, message }) => {
                let unknown = message.starts_with("unknown field");
                if unknown && parts.last().is_some_and(|p| *p == k) {
                    last_err = Some(Error::Schema {
                        key: key.into(),
                        message: format!("unknown config key `{key}`"),
                    });
                    continue;
                }
                return Err(Error::Schema {
                    key: path.clone(),
                    message,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one candidate was tried"))
}

/// Load `path` (or defaults), apply overrides and seeds, and validate.
pub fn resolve_config(path: Option<&Path>, overrides: &[String], seeds: Option<&[u64]>) -> Result<ExperimentConfig> {
    let mut table = match path {
        Some(p) => read_table(p)?,
        None => toml::Table::new(),
    };
    deserialize(&table)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut cfg = deserialize(&table)?;
    if let Some(seeds) = seeds {
        cfg.seeds = seeds.to_vec();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_logs(cfg: &ExperimentConfig, logs: &[crate::harness::MetricsLog]) {
    for log in logs {
        println!(
            "{} {} seed {}: welfare {:.4} fairness std {:.4} ({:.1}s)",
            cfg.name,
            log.learner,
            log.seed,
            log.converged_welfare(),
            log.fairness().std,
            log.wall_clock_secs
        );
    }
}

fn run_command(a: &RunArgs) -> Result<()> {
    let cfg = resolve_config(a.config.as_deref(), &a.overrides, a.seeds.as_deref())?;
    let logs = run_experiment_saving(&cfg, a.jobs, a.checkpoints.as_deref())?;
    print_logs(&cfg, &logs);
    for p in write_results(&cfg, &logs, &a.out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Sweep file: learners crossed with scenarios, each scenario a config file
/// (relative to the sweep file) plus optional overrides.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    name: String,
    learners: Vec<String>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(rename = "scenario")]
    scenarios: Vec<Scenario>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Scenario {
    name: String,
    config: PathBuf,
    #[serde(default)]
    set: Vec<String>,
}

fn sweep_command(a: &RunArgs) -> Result<()> {
    let path = a.config.as_deref().ok_or_else(|| Error::Schema {
        key: "config".into(),
        message: "sweep needs --config pointing at a sweep file".into(),
    })?;
    let sweep: SweepFile = read_table(path)?.try_into().map_err(schema_error)?;
    if sweep.learners.is_empty() || sweep.scenarios.is_empty() {
        return Err(Error::Schema {
            key: "learners".into(),
            message: "a sweep needs at least one learner and one scenario".into(),
        });
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let seeds = a.seeds.clone().or(sweep.seeds.clone());

    // Resolve everything first so configuration errors surface before any run.
    let mut jobs = Vec::new();
    for sc in &sweep.scenarios {
        for learner in &sweep.learners {
            let mut overrides = sc.set.clone();
            overrides.extend(a.overrides.iter().cloned());
            overrides.push(format!("learner=\"{learner}\""));
            overrides.push(format!("name=\"{}\"", sc.name));
            jobs.push(resolve_config(
                Some(&base.join(&sc.config)),
                &overrides,
                seeds.as_deref(),
            )?);
        }
    }

    let mut rows = Vec::new();
    let mut first_error = None;
    for cfg in &jobs {
        match run_experiment_saving(cfg, a.jobs, a.checkpoints.as_deref()).and_then(|logs| {
            print_logs(cfg, &logs);
            write_results(cfg, &logs, &a.out)?;
            Ok(SummaryRow::from_logs(&cfg.name, &logs))
        }) {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("error: {} {}: {e}", cfg.name, cfg.learner);
                first_error.get_or_insert(e);
            }
        }
    }
    let summary = a.out.join(format!("{}_summary.csv", sweep.name));
    write_summary_csv(&summary, &rows)?;
    println!("wrote {}", summary.display());
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> toml::Table {
        text.parse().unwrap()
    }

    #[test]
    fn bare_keys_resolve_into_sections() {
        let mut t = table("");
        apply_override(&mut t, "learner=dedqn").unwrap();
        apply_override(&mut t, "dar=0.4").unwrap();
        apply_override(&mut t, "gamma=0.5").unwrap();
        apply_override(&mut t, "hyper.hidden=[4, 4]").unwrap();
        let cfg = deserialize(&t).unwrap();
        assert_eq!(cfg.learner, "dedqn");
        assert_eq!(cfg.env.dar, Some(0.4));
        assert_eq!(cfg.hyper.gamma, 0.5);
        assert_eq!(cfg.hyper.hidden, vec![4, 4]);
    }

    #[test]
    fn bad_overrides_name_the_key() {
        let mut t = table("");
        match apply_override(&mut t, "dar=abc") {
            Err(Error::Schema { key, .. }) => assert_eq!(key, "env.dar"),
            other => panic!("{other:?}"),
        }
        match apply_override(&mut t, "nonsense=1") {
            Err(Error::Schema { key, .. }) => assert_eq!(key, "nonsense"),
            other => panic!("{other:?}"),
        }
        assert!(apply_override(&mut t, "novalue").is_err());
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            exit_code(&Error::MissingFile { path: "x".into() }),
            exit_code(&Error::Schema {
                key: "k".into(),
                message: String::new(),
            }),
            exit_code(&Error::UnknownLearner("ppo".into())),
            exit_code(&Error::NonFinite("loss".into())),
            exit_code(&Error::Verification("x".into())),
        ];
        let mut sorted = codes.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), codes.len());
        assert!(!codes.contains(&EXIT_OK) && !codes.contains(&EXIT_USAGE));
    }
}
