use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{running_average, social_welfare, MetricsLog, PeriodRecord, RUNNING_WINDOW};
use super::output::{run_stem, write_checkpoints};
use crate::error::{Error, Result};
use crate::learners::{build_learner, derive_seed, Context, Learner, LearnerKind, LearnerSpec, MeanActionTable};
use crate::matchenv::{Action, WorldState};
use crate::numkit::entropy;

/// Full-vector squared error between a predicted and a realized density.
pub fn density_squared_error(predicted: &[f64], truth: &[f64]) -> f64 {
    predicted.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum()
}

#[derive(Default)]
struct PeriodAccumulator {
    mse_sum: f64,
    entropy_sum: f64,
    scored: u64,
    loss_sum: f64,
    density_loss_sum: f64,
    updates: u64,
}

/// Train and evaluate one seed.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<MetricsLog> {
    train_seed(config, seed).map(|(log, _)| log)
}

/// Like [`run_seed`], also returning the trained learners (one per agent,
/// or a single one when parameters are shared).
pub fn train_seed(config: &ExperimentConfig, seed: u64) -> Result<(MetricsLog, Vec<Box<dyn Learner>>)> {
    config.validate()?;
    let started = Instant::now();
    let kind = config.kind()?;
    let env_cfg = &config.env;
    let mut world = WorldState::reset(env_cfg, derive_seed(seed, &[100]))?;
    let num_agents = world.num_agents();
    let num_zones = world.num_zones();
    let spec = LearnerSpec {
        kind,
        hyper: config.hyper.clone(),
        num_zones,
        num_agents,
        training_steps: config.train_steps,
    };
    let shared = config.hyper.share_parameters;
    let mut learners: Vec<Box<dyn Learner>> = (0..if shared { 1 } else { num_agents })
        .map(|i| build_learner(&spec, derive_seed(seed, &[200, i as u64])))
        .collect::<Result<_>>()?;
    let owner = |agent: usize| if shared { 0 } else { agent };

    let mut table = MeanActionTable::uniform(num_zones);
    let track_density = kind.uses_density();
    let mut periods = Vec::new();
    let mut welfare_history = Vec::new();
    let mut acc = PeriodAccumulator::default();
    let mut experience_count: u64 = 0;
    let mut actions = Vec::with_capacity(num_agents);

    for step in 0..config.total_steps() {
        let training = step < config.train_steps;
        if step == config.train_steps {
            let ctx = Context {
                step,
                mean_actions: None,
            };
            for l in &mut learners {
                if let Some(s) = l.end_period(&ctx)? {
                    check_stats(&s, step)?;
                }
                l.set_training(false);
            }
        }
        let before = track_density.then(|| world.population_distribution().normalized());

        let eligible = world.begin_step()?;
        let ctx = Context {
            step,
            mean_actions: kind.uses_mean_actions().then_some(&table),
        };
        actions.clear();
        for obs in &eligible {
            let target = learners[owner(obs.agent)].act(obs, &ctx)?;
            actions.push(Action {
                agent: obs.agent,
                target,
            });
        }
        let report = world.finish_step(&actions)?;
        if !report.revenue.is_finite() {
            return Err(Error::NonFinite(format!("revenue at step {step}")));
        }

        for e in &report.experiences {
            experience_count += 1;
            let learner = &mut learners[owner(e.agent)];
            if let Some(Some(truth)) = &before {
                if experience_count.is_multiple_of(config.density_sample_every) {
                    if let Some(pred) = learner.predicted_density(e.zone, e.local_density, e.action) {
                        let pred = pred?;
                        acc.mse_sum += density_squared_error(&pred, truth);
                        acc.entropy_sum += entropy(&pred)?;
                        acc.scored += 1;
                    }
                }
            }
            if let Some(s) = learner.learn(e, &ctx)? {
                check_stats(&s, step)?;
                acc.loss_sum += s.main_loss + config.hyper.lambda * s.density_loss + s.policy_loss;
                acc.density_loss_sum += s.density_loss;
                acc.updates += 1;
            }
        }

        if kind.uses_mean_actions() {
            table = MeanActionTable::from_actions(
                num_zones,
                eligible.iter().zip(&actions).map(|(o, a)| (o.zone, a.target)),
            )?;
        }

        if (step + 1) % config.period_length == 0 {
            if training {
                let ctx = Context {
                    step,
                    mean_actions: None,
                };
                for l in &mut learners {
                    if let Some(s) = l.end_period(&ctx)? {
                        check_stats(&s, step)?;
                    }
                }
            }
            let revenues: Vec<f64> = world.agents().iter().map(|a| a.episode_revenue).collect();
            world.reset_episode_revenue();
            let welfare = social_welfare(&revenues);
            welfare_history.push(welfare);
            let running = *running_average(&welfare_history, RUNNING_WINDOW)
                .last()
                .expect("history is non-empty");
            let scored = acc.scored as f64;
            periods.push(PeriodRecord {
                period: (step + 1) / config.period_length,
                training,
                welfare,
                running_avg: running,
                density_mse: (acc.scored > 0).then(|| acc.mse_sum / scored),
                entropy_mean: (acc.scored > 0).then(|| acc.entropy_sum / scored),
                epsilon: learners[0].epsilon(step),
                loss_mean: (acc.updates > 0).then(|| acc.loss_sum / acc.updates as f64),
                density_loss_mean: (track_density && acc.updates > 0)
                    .then(|| acc.density_loss_sum / acc.updates as f64),
                agent_revenues: revenues,
            });
            acc = PeriodAccumulator::default();
        }
    }

    let eval: Vec<&PeriodRecord> = periods.iter().filter(|p| !p.training).collect();
    let final_revenues = (0..num_agents)
        .map(|i| {
            if eval.is_empty() {
                0.0
            } else {
                eval.iter().map(|p| p.agent_revenues[i]).sum::<f64>() / eval.len() as f64
            }
        })
        .collect();
    let log = MetricsLog {
        learner: kind.to_string(),
        seed,
        periods,
        final_revenues,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((log, learners))
}

fn check_stats(s: &crate::learners::UpdateStats, step: u64) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("training loss at step {step}")))
    }
}

/// Run every seed of `config`, `jobs` at a time.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<MetricsLog>> {
    run_experiment_saving(config, jobs, None)
}

/// Like [`run_experiment`], writing every trained network to
/// `checkpoints` as each seed finishes.
pub fn run_experiment_saving(
    config: &ExperimentConfig,
    jobs: usize,
    checkpoints: Option<&Path>,
) -> Result<Vec<MetricsLog>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let job = |seed: u64| -> Result<MetricsLog> {
        let (log, learners) = train_seed(config, seed)?;
        if let Some(dir) = checkpoints {
            write_checkpoints(dir, &run_stem(config, &log), &learners)?;
        }
        Ok(log)
    };
    pool.install(|| config.seeds.par_iter().map(|&s| job(s)).collect())
}

/// Learner kind names accepted in configs.
pub fn learner_names() -> Vec<&'static str> {
    LearnerKind::ALL.iter().map(|k| k.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::HyperParams;

    fn tiny(learner: &str) -> ExperimentConfig {
        ExperimentConfig {
            learner: learner.into(),
            train_steps: 600,
            period_length: 100,
            eval_periods: 2,
            seeds: vec![1, 2],
            hyper: HyperParams {
                hidden: vec![8],
                batch_size: 4,
                min_replay: 8,
                replay_capacity: 100,
                target_sync: 10,
                ..HyperParams::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn density_error_examples() {
        let uniform = [0.25; 4];
        assert_eq!(density_squared_error(&uniform, &uniform), 0.0);
        let one_hot = [1.0, 0.0, 0.0, 0.0];
        assert!((density_squared_error(&uniform, &one_hot) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn seeds_give_same_shapes() {
        for name in learner_names() {
            let logs = run_experiment(&tiny(name), 1).unwrap();
            assert_eq!(logs.len(), 2);
            assert_eq!(logs[0].periods.len(), logs[1].periods.len());
            assert_eq!(logs[0].periods.len(), 8);
            assert_eq!(logs[0].eval_periods().count(), 2);
            assert!(logs[0]
                .periods
                .iter()
                .all(|p| p.agent_revenues.len() == 20 && p.welfare >= 0.0));
            assert_eq!(
                logs[0].periods[0].density_mse.is_some(),
                name == "dedqn" || name == "dea2c",
                "{name}"
            );
        }
    }

    #[test]
    fn zero_demand_gives_zero_welfare() {
        let mut cfg = tiny("dqn");
        cfg.env.dar = Some(0.0);
        let log = run_seed(&cfg, 3).unwrap();
        assert!(log.periods.iter().all(|p| p.welfare == 0.0));
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = tiny("dedqn");
        let mut a = run_seed(&cfg, 5).unwrap();
        let mut b = run_seed(&cfg, 5).unwrap();
        a.wall_clock_secs = 0.0;
        b.wall_clock_secs = 0.0;
        assert_eq!(a, b);
    }
}
