//! Verification suites shared by the `gradcheck` and `oracle` subcommands and
//! the acceptance tests: finite-difference gradient checks of every training
//! loss, small-instance learning oracles and simulator statistics.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learners::losses::{
    policy_loss, q_loss, value_loss, DensityItem, DensityTarget, PolicyItem, QItem, ValueItem, DENSITY_HEAD, PI_HEAD,
    Q_HEAD, V_HEAD,
};
use crate::learners::{
    derive_seed, A2cLearner, A2cVariant, Context, HyperParams, Learner, LearnerKind, LearnerSpec, TabularQ, Transition,
};
use crate::matchenv::{dar, Action, ArrivalSchedule, EnvConfig, Observation, RateProfile, TripPattern, WorldState};
use crate::numkit::{check_gradients, Gradients, HeadSpec, Mlp, Mode, DEFAULT_STEP};

/// One named measurement with its pass condition already evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, requirement: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            measured,
            requirement: requirement.into(),
            passed,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.6e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.requirement
        )
    }
}

// ---------------------------------------------------------------------------
// Gradient suite

/// Zones used by the miniature gradient-check nets.
pub const GRAD_ZONES: usize = 3;
/// Hidden widths of the miniature gradient-check nets.
pub const GRAD_HIDDEN: [usize; 2] = [6, 8];
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Trials whose hidden pre-activations come this close to zero are redrawn.
pub const KINK_MARGIN: f64 = 1e-2;
const GRAD_BATCH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Q,
    Density,
    Combined,
    Value,
    Policy,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Q,
        LossKind::Density,
        LossKind::Combined,
        LossKind::Value,
        LossKind::Policy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Q => "q",
            LossKind::Density => "density",
            LossKind::Combined => "combined",
            LossKind::Value => "value",
            LossKind::Policy => "policy",
        }
    }

    fn heads(self) -> HeadSpec {
        let z = GRAD_ZONES;
        match self {
            LossKind::Q => HeadSpec::single(Q_HEAD, z),
            LossKind::Combined => HeadSpec::new([(Q_HEAD, z), (DENSITY_HEAD, z * z)]),
            LossKind::Density | LossKind::Value => HeadSpec::new([(V_HEAD, 1), (DENSITY_HEAD, z * z)]),
            LossKind::Policy => HeadSpec::single(PI_HEAD, z),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradientReport {
    pub loss: LossKind,
    pub trials: usize,
    pub rejected: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub losses: Vec<LossGradientReport>,
    pub seconds: f64,
}

impl GradientReport {
    pub fn trials(&self) -> usize {
        self.losses.iter().map(|l| l.trials).sum()
    }

    pub fn max_relative_error(&self) -> f64 {
        self.losses.iter().map(|l| l.max_relative_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_relative_error() < GRAD_TOLERANCE
    }
}

/// Randomized sample of one loss: inputs, actions and regression targets.
struct Sample {
    inputs: Vec<Vec<f64>>,
    actions: Vec<usize>,
    targets: Vec<f64>,
    density: Vec<DensityTarget>,
    modes: Vec<Mode>,
}

impl Sample {
    fn draw(rng: &mut ChaCha8Rng) -> Sample {
        let z = GRAD_ZONES;
        let inputs = (0..GRAD_BATCH)
            .map(|_| {
                let mut x = vec![0.0; z + 1];
                x[rng.gen_range(0..z)] = 1.0;
                x[z] = rng.gen::<f64>();
                x
            })
            .collect();
        Sample {
            inputs,
            actions: (0..GRAD_BATCH).map(|_| rng.gen_range(0..z)).collect(),
            targets: (0..GRAD_BATCH).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            density: (0..GRAD_BATCH)
                .map(|_| DensityTarget {
                    zone: rng.gen_range(0..z),
                    observed: rng.gen::<f64>(),
                })
                .collect(),
            modes: (0..GRAD_BATCH).map(|_| Mode::Train { seed: rng.gen() }).collect(),
        }
    }

    fn near_kink(&self, net: &Mlp) -> Result<bool> {
        for (x, &mode) in self.inputs.iter().zip(&self.modes) {
            let t = net.trace(x, mode, None)?;
            if t.hidden_preactivations()
                .iter()
                .flatten()
                .any(|v| v.abs() < KINK_MARGIN)
            {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn loss(&self, kind: LossKind, net: &Mlp, grads: Option<&mut Gradients>) -> Result<f64> {
        let n = self.inputs.len();
        let lambda = 0.7;
        let q_items = |with_density: bool| -> Vec<QItem> {
            (0..n)
                .map(|i| QItem {
                    input: &self.inputs[i],
                    action: self.actions[i],
                    target: self.targets[i],
                    density: with_density.then_some(self.density[i]),
                    mode: self.modes[i],
                })
                .collect()
        };
        let density_items: Vec<DensityItem> = (0..n)
            .map(|i| DensityItem {
                input: &self.inputs[i],
                action: self.actions[i],
                target: self.density[i],
                mode: self.modes[i],
            })
            .collect();
        let value_items: Vec<ValueItem> = (0..n)
            .map(|i| ValueItem {
                input: &self.inputs[i],
                target: self.targets[i],
                mode: self.modes[i],
            })
            .collect();
        Ok(match kind {
            LossKind::Q => q_loss(net, &q_items(false), 0.0, grads)?.total,
            LossKind::Combined => q_loss(net, &q_items(true), lambda, grads)?.total,
            LossKind::Density => value_loss(net, &[], &density_items, 1.0, grads)?.total,
            LossKind::Value => value_loss(net, &value_items, &density_items, lambda, grads)?.total,
            LossKind::Policy => {
                let items: Vec<PolicyItem> = (0..n)
                    .map(|i| PolicyItem {
                        input: &self.inputs[i],
                        action: self.actions[i],
                        advantage: self.targets[i],
                        mode: self.modes[i],
                    })
                    .collect();
                policy_loss(net, &items, grads)?
            }
        })
    }
}

fn check_one(kind: LossKind, trials: usize, rng: &mut ChaCha8Rng) -> Result<LossGradientReport> {
    let z = GRAD_ZONES;
    let heads = kind.heads();
    let sizes = [z + 1, GRAD_HIDDEN[0], GRAD_HIDDEN[1], heads.total()];
    let mut report = LossGradientReport {
        loss: kind,
        trials: 0,
        rejected: 0,
        max_relative_error: 0.0,
    };
    while report.trials < trials {
        if report.rejected > 50 * trials {
            return Err(Error::Verification(format!(
                "{} gradient check rejected {} draws near rectifier kinks",
                kind.name(),
                report.rejected
            )));
        }
        let mut net = Mlp::init(&sizes, heads.clone(), 0.5, rng.gen())?;
        for l in 0..net.num_layers() {
            for b in net.biases_mut(l) {
                *b = rng.gen_range(-0.5..0.5);
            }
        }
        let sample = Sample::draw(rng);
        if sample.near_kink(&net)? {
            report.rejected += 1;
            continue;
        }
        let mut grads = Gradients::zeros_like(&net);
        sample.loss(kind, &net, Some(&mut grads))?;
        let err = check_gradients(
            &net,
            &grads,
            |m| sample.loss(kind, m, None).unwrap_or(f64::NAN),
            DEFAULT_STEP,
        );
        let err = if err.is_nan() { f64::INFINITY } else { err };
        report.max_relative_error = report.max_relative_error.max(err);
        report.trials += 1;
    }
    Ok(report)
}

/// Central-difference check of every training loss on miniature nets with
/// dropout active, `trials` accepted draws per loss.
pub fn gradient_suite(trials: usize, seed: u64) -> Result<GradientReport> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let losses = LossKind::ALL
        .iter()
        .map(|&k| check_one(k, trials, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientReport {
        losses,
        seconds: started.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Tabular Q against value iteration

pub const VI_TOLERANCE: f64 = 1e-3;

/// Deterministic two-zone, one-agent market. Both zones receive many jobs on
/// even steps and none on odd steps, jobs live one step, and every trip
/// ends in zone 1. Moving between zones takes two steps, so the agent only
/// ever decides on odd steps and each decision has a fixed outcome.
pub fn two_zone_config() -> EnvConfig {
    EnvConfig {
        grid_width: 2,
        grid_height: 1,
        num_agents: 1,
        dar: None,
        rates: Some(vec![20.0, 20.0]),
        ttl: 1,
        arrival: ArrivalSchedule::Alternating,
        destinations: Some(vec![vec![0.0, 1.0], vec![0.0, 1.0]]),
        kappa_t: 2.0,
        rho0: 1.0,
        rho1: 1.0,
        ..EnvConfig::default()
    }
}

/// Outcome of deciding `action` in `zone` on the two-zone market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub reward: f64,
    pub next_zone: usize,
    pub elapsed: u64,
}

/// Hand-derived transition model of [`two_zone_config`], indexed `[zone][action]`.
///
/// Staying takes one step, after which the agent is matched on the even
/// step. From zone 0 it earns 2 over a two-step trip, arrives in zone 1 on
/// the next even step and is matched again for 1 more, deciding four steps
/// after it started. From zone 1 it earns 1 over a one-step trip. Moving
/// takes two steps and lands on an odd step with no jobs, earning nothing.
pub fn two_zone_model() -> [[Outcome; 2]; 2] {
    let o = |reward, next_zone, elapsed| Outcome {
        reward,
        next_zone,
        elapsed,
    };
    [[o(3.0, 1, 4), o(0.0, 1, 2)], [o(0.0, 0, 2), o(1.0, 1, 2)]]
}

/// Q fixed point of `model` under duration discounting.
pub fn value_iteration(model: &[[Outcome; 2]; 2], gamma: f64) -> [[f64; 2]; 2] {
    let mut q = [[0.0f64; 2]; 2];
    loop {
        let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
        let mut next = [[0.0; 2]; 2];
        let mut delta = 0.0f64;
        for z in 0..2 {
            for a in 0..2 {
                let o = model[z][a];
                next[z][a] = o.reward + gamma.powi(o.elapsed as i32) * v[o.next_zone];
                delta = delta.max((next[z][a] - q[z][a]).abs());
            }
        }
        q = next;
        if delta < 1e-13 {
            return q;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularOracleReport {
    pub learned: [[f64; 2]; 2],
    pub value_iteration: [[f64; 2]; 2],
    pub experiences: usize,
    /// Experiences whose outcome differed from the hand-derived model.
    pub model_mismatches: usize,
}

impl TabularOracleReport {
    pub fn max_gap(&self) -> f64 {
        (0..2)
            .flat_map(|z| (0..2).map(move |a| (z, a)))
            .map(|(z, a)| (self.learned[z][a] - self.value_iteration[z][a]).abs())
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.model_mismatches == 0 && self.max_gap() < VI_TOLERANCE
    }
}

/// Train tabular Q with uniform exploration on the two-zone market and
/// compare it with value iteration on the hand-derived model.
pub fn tabular_oracle(steps: u64, seed: u64) -> Result<TabularOracleReport> {
    let cfg = two_zone_config();
    let hyper = HyperParams {
        gamma: 0.9,
        alpha: 0.1,
        epsilon_start: 1.0,
        epsilon_floor: 1.0,
        ..HyperParams::default()
    };
    let spec = LearnerSpec {
        kind: LearnerKind::Tabq,
        hyper: hyper.clone(),
        num_zones: 2,
        num_agents: 1,
        training_steps: steps,
    };
    let mut learner = TabularQ::new(&spec, derive_seed(seed, &[1]))?;
    let mut world = WorldState::reset_with_positions(&cfg, derive_seed(seed, &[2]), &[0])?;
    let model = two_zone_model();
    let mut experiences = 0;
    let mut mismatches = 0;
    for step in 0..steps {
        let ctx = Context {
            step,
            mean_actions: None,
        };
        let eligible = world.begin_step()?;
        let actions = eligible
            .iter()
            .map(|o| learner.act(o, &ctx).map(|target| Action { agent: o.agent, target }))
            .collect::<Result<Vec<_>>>()?;
        let report = world.finish_step(&actions)?;
        for e in &report.experiences {
            let expected = model[e.zone][e.action];
            let seen = Outcome {
                reward: e.reward,
                next_zone: e.next_zone,
                elapsed: e.next_decision_at - e.decided_at,
            };
            if seen != expected {
                mismatches += 1;
            }
            learner.update(e)?;
            experiences += 1;
        }
    }
    let mut learned = [[0.0; 2]; 2];
    for (z, row) in learned.iter_mut().enumerate() {
        for (a, q) in row.iter_mut().enumerate() {
            *q = learner.value(z, 1.0, a);
        }
    }
    Ok(TabularOracleReport {
        learned,
        value_iteration: value_iteration(&model, hyper.gamma),
        experiences,
        model_mismatches: mismatches,
    })
}

// ---------------------------------------------------------------------------
// Two-armed bandit

#[derive(Debug, Clone, PartialEq)]
pub struct BanditReport {
    /// Final probability of the rewarded arm, one entry per seed.
    pub final_probs: Vec<f64>,
}

impl BanditReport {
    pub fn wins(&self) -> usize {
        self.final_probs.iter().filter(|&&p| p > 0.95).count()
    }

    pub fn passed(&self) -> bool {
        self.wins() * 10 >= self.final_probs.len() * 9
    }
}

/// A2C on a single-state bandit paying 1 for arm 1 and 0 for arm 0.
pub fn bandit_oracle(seeds: u64, updates: usize) -> Result<BanditReport> {
    let mut final_probs = Vec::new();
    for seed in 0..seeds {
        let hyper = HyperParams {
            hidden: vec![8, 8],
            dropout: 0.0,
            rollout_k: 1,
            gamma: 0.0,
            lr_policy: 1e-3,
            lr_value: 1e-3,
            ..HyperParams::default()
        };
        let spec = LearnerSpec {
            kind: LearnerKind::A2c,
            hyper,
            num_zones: 2,
            num_agents: 1,
            training_steps: updates as u64,
        };
        let mut learner = A2cLearner::new(&spec, A2cVariant::Plain, seed)?;
        let obs = Observation {
            agent: 0,
            zone: 0,
            local_count: 1,
            local_density: 1.0,
            time: 0,
        };
        let ctx = Context {
            step: 0,
            mean_actions: None,
        };
        for _ in 0..updates {
            let action = learner.act(&obs, &ctx)?;
            learner.update(&[Transition {
                zone: 0,
                density: 1.0,
                action,
                reward: if action == 1 { 1.0 } else { 0.0 },
                next_zone: 0,
                next_density: 1.0,
                elapsed: 1,
                mean_row: None,
                next_mean_row: None,
            }])?;
        }
        final_probs.push(learner.policy_probs(0, 1.0)?[1]);
    }
    Ok(BanditReport { final_probs })
}

// ---------------------------------------------------------------------------
// Simulator statistics

/// Per-agent match frequency when three idle agents share a zone with two
/// waiting jobs.
pub fn anonymity_frequencies(trials: u64, seed: u64) -> Result<[f64; 3]> {
    let cfg = EnvConfig {
        grid_width: 2,
        grid_height: 1,
        num_agents: 3,
        dar: Some(0.0),
        ..EnvConfig::default()
    };
    let mut hits = [0u64; 3];
    for trial in 0..trials {
        let mut world = WorldState::reset_with_positions(&cfg, derive_seed(seed, &[trial]), &[0, 0, 0])?;
        world.inject_job(0, 1)?;
        world.inject_job(0, 1)?;
        world.begin_step()?;
        for (h, agent) in hits.iter_mut().zip(world.agents()) {
            if !agent.is_idle() {
                *h += 1;
            }
        }
    }
    Ok(hits.map(|h| h as f64 / trials as f64))
}

/// Jobs generated per step per agent over `steps` steps of a random policy.
pub fn realized_dar(cfg: &EnvConfig, steps: u64, seed: u64) -> Result<f64> {
    let mut world = WorldState::reset(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let zones = world.num_zones();
    let mut generated = 0usize;
    for _ in 0..steps {
        generated += world.step_with(|_| rng.gen_range(0..zones))?.jobs_generated;
    }
    Ok(generated as f64 / (steps as f64 * cfg.num_agents as f64))
}

/// Configured DAR alongside the realized one.
pub fn dar_check(cfg: &EnvConfig, steps: u64, seed: u64) -> Result<(f64, f64)> {
    Ok((dar(cfg)?, realized_dar(cfg, steps, seed)?))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuzzReport {
    pub steps: u64,
    pub jobs_generated: usize,
    pub jobs_served: usize,
    pub jobs_expired: usize,
    /// First violations found, at most ten.
    pub violations: Vec<String>,
    pub violation_count: usize,
}

impl FuzzReport {
    fn flag(&mut self, msg: String) {
        self.violation_count += 1;
        if self.violations.len() < 10 {
            self.violations.push(msg);
        }
    }
}

/// Market used by the fuzz run: hotspots, long trips, oscillating arrivals
/// and a three-step TTL.
pub fn fuzz_config() -> EnvConfig {
    EnvConfig {
        grid_width: 4,
        grid_height: 3,
        num_agents: 15,
        dar: Some(0.8),
        rate_profile: RateProfile::Hotspot,
        hotspot_zones: vec![1, 6],
        ttl: 3,
        trip_pattern: TripPattern::NonUniform,
        long_trip_zones: vec![0, 11],
        arrival: ArrivalSchedule::Sinusoidal,
        arrival_period: 50,
        ..EnvConfig::default()
    }
}

/// Random-policy run checking agent and job conservation and TTL bounds on
/// every step.
pub fn fuzz(cfg: &EnvConfig, steps: u64, seed: u64) -> Result<FuzzReport> {
    let mut world = WorldState::reset(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let zones = world.num_zones();
    let n = world.num_agents();
    let ttl = cfg.ttl as u64;
    let max_travel = (0..zones)
        .flat_map(|a| (0..zones).map(move |b| (a, b)))
        .map(|(a, b)| world.zones().travel_time(a, b))
        .max()
        .unwrap_or(1);
    let mut report = FuzzReport {
        steps,
        ..FuzzReport::default()
    };
    for _ in 0..steps {
        let t = world.time();
        let waiting_before = world.waiting_jobs().count();
        let r = world.step_with(|_| rng.gen_range(0..zones))?;
        report.jobs_generated += r.jobs_generated;
        report.jobs_served += r.jobs_served;
        report.jobs_expired += r.jobs_expired;
        let waiting_after = world.waiting_jobs().count();
        if waiting_before + r.jobs_generated != r.jobs_served + r.jobs_expired + waiting_after {
            report.flag(format!("step {t}: job count not conserved"));
        }
        if world.agents().len() != n
            || world.population_distribution().total() as usize != world.agents().iter().filter(|a| a.is_idle()).count()
        {
            report.flag(format!("step {t}: agent count not conserved"));
        }
        if world
            .agents()
            .iter()
            .any(|a| a.zone >= zones || a.busy_remaining > max_travel)
        {
            report.flag(format!("step {t}: agent outside the grid or overlong trip"));
        }
        if !(r.revenue.is_finite() && r.revenue >= 0.0) {
            report.flag(format!("step {t}: revenue {}", r.revenue));
        }
        let now = world.time();
        for job in world.waiting_jobs() {
            let age = now - job.created_at;
            if job.remaining_ttl == 0 || age >= ttl || job.remaining_ttl as u64 != ttl - age {
                report.flag(format!(
                    "step {t}: job from step {} has ttl {}",
                    job.created_at, job.remaining_ttl
                ));
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Suites

pub const ANONYMITY_TOLERANCE: f64 = 0.02;
pub const DAR_TOLERANCE: f64 = 0.025;

/// Gradient suite summarized as checks.
pub fn gradient_checks(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let report = gradient_suite(trials, seed)?;
    let mut checks: Vec<Check> = report
        .losses
        .iter()
        .map(|l| {
            Check::new(
                format!("gradient {} ({} trials)", l.loss.name(), l.trials),
                l.max_relative_error,
                format!("< {GRAD_TOLERANCE:e}"),
                l.max_relative_error < GRAD_TOLERANCE,
            )
        })
        .collect();
    checks.push(Check::new(
        "gradient suite seconds",
        report.seconds,
        "< 60",
        report.seconds < 60.0,
    ));
    Ok(checks)
}

/// Small-instance oracles and simulator statistics.
pub fn oracle_checks(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let tab = tabular_oracle(50_000, seed)?;
    checks.push(Check::new(
        "tabular Q vs value iteration max gap",
        tab.max_gap(),
        format!("< {VI_TOLERANCE:e}"),
        tab.max_gap() < VI_TOLERANCE,
    ));
    checks.push(Check::new(
        "two-zone transitions off the derived model",
        tab.model_mismatches as f64,
        "= 0",
        tab.model_mismatches == 0,
    ));
    let bandit = bandit_oracle(10, 5_000)?;
    checks.push(Check::new(
        "bandit seeds preferring the paying arm",
        bandit.wins() as f64,
        ">= 9 of 10",
        bandit.passed(),
    ));
    let freq = anonymity_frequencies(10_000, seed)?;
    let worst = freq.iter().map(|f| (f - 2.0 / 3.0).abs()).fold(0.0, f64::max);
    checks.push(Check::new(
        "anonymity max deviation from 2/3",
        worst,
        format!("<= {ANONYMITY_TOLERANCE}"),
        worst <= ANONYMITY_TOLERANCE,
    ));
    let (configured, realized) = dar_check(&EnvConfig::default(), 10_000, seed)?;
    let rel = (realized / configured - 1.0).abs();
    checks.push(Check::new(
        format!("realized DAR relative error (configured {configured:.3})"),
        rel,
        format!("<= {DAR_TOLERANCE}"),
        rel <= DAR_TOLERANCE,
    ));
    let f = fuzz(&fuzz_config(), 100_000, seed)?;
    checks.push(Check::new(
        "fuzz invariant violations over 1e5 steps",
        f.violation_count as f64,
        "= 0",
        f.violation_count == 0,
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_iteration_matches_closed_form() {
        // Staying in zone 1 forever is optimal there; zone 0 takes the long trip once.
        let q = value_iteration(&two_zone_model(), 0.9);
        let v1 = 1.0 / (1.0 - 0.81);
        assert!((q[1][1] - v1).abs() < 1e-10);
        assert!((q[0][0] - (3.0 + 0.6561 * v1)).abs() < 1e-10);
        assert!((q[0][1] - 0.81 * v1).abs() < 1e-10);
        assert!((q[1][0] - 0.81 * q[0][0]).abs() < 1e-10);
    }

    #[test]
    fn two_zone_config_is_valid() {
        two_zone_config().validate().unwrap();
        fuzz_config().validate().unwrap();
    }

    #[test]
    fn short_fuzz_is_clean() {
        let r = fuzz(&fuzz_config(), 2_000, 4).unwrap();
        assert_eq!(r.violation_count, 0, "{:?}", r.violations);
        assert!(r.jobs_served > 0 && r.jobs_expired > 0);
    }

    #[test]
    fn gradient_suite_small() {
        let r = gradient_suite(5, 1).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.trials(), 25);
    }
}
