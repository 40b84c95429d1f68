use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learner hyperparameters. Network sizes and learning rates default to the
/// full-scale setting; the shipped desk configs shrink them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    pub gamma: f64,
    /// Discount by `gamma^elapsed_steps` between decisions instead of one
    /// `gamma` per decision.
    pub duration_discount: bool,
    /// Tabular learning rate.
    pub alpha: f64,
    /// Adam learning rate for Q networks.
    pub lr_q: f64,
    /// RMSprop learning rate for the policy network.
    pub lr_policy: f64,
    /// RMSprop learning rate for the value network.
    pub lr_value: f64,
    /// Weight of the density entropy in value targets.
    pub beta: f64,
    /// Weight of the density-prediction loss.
    pub lambda: f64,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    /// Steps for epsilon to decay from start to floor; derived from the
    /// training budget when absent.
    pub epsilon_decay_steps: Option<u64>,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub min_replay: usize,
    /// Gradient steps between target-network syncs.
    pub target_sync: u64,
    /// Experiences between gradient steps.
    pub train_every: u64,
    pub rollout_k: usize,
    pub density_buckets: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// One learner for all agents instead of one per agent.
    pub share_parameters: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 0.9,
            duration_discount: true,
            alpha: 0.1,
            lr_q: 1e-4,
            lr_policy: 1e-5,
            lr_value: 1e-4,
            beta: 1e-2,
            lambda: 1e-2,
            epsilon_start: 1.0,
            epsilon_floor: 0.05,
            epsilon_decay_steps: None,
            replay_capacity: 50_000,
            batch_size: 32,
            min_replay: 1_000,
            target_sync: 1_000,
            train_every: 1,
            rollout_k: 5,
            density_buckets: 5,
            hidden: vec![256, 256],
            dropout: 0.5,
            share_parameters: false,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("learner.{msg}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        for (name, v) in [
            ("lr_q", self.lr_q),
            ("lr_policy", self.lr_policy),
            ("lr_value", self.lr_value),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("learner.{name} must be positive")));
            }
        }
        if !(self.beta >= 0.0 && self.lambda >= 0.0) {
            return bad("beta and lambda must be nonnegative");
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return bad("epsilon must satisfy 0 < floor <= start <= 1");
        }
        if self.epsilon_decay_steps == Some(0) {
            return bad("epsilon_decay_steps must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("batch_size must be positive and fit in the replay memory");
        }
        if self.target_sync == 0 || self.train_every == 0 || self.rollout_k == 0 || self.density_buckets == 0 {
            return bad("target_sync, train_every, rollout_k and density_buckets must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden must list positive layer widths");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    /// Discount applied across a decision that lasted `elapsed` steps.
    pub fn discount(&self, elapsed: u64) -> f64 {
        if self.duration_discount {
            self.gamma.powi(elapsed.min(i32::MAX as u64) as i32)
        } else {
            self.gamma
        }
    }

    pub fn epsilon_schedule(&self, training_steps: u64) -> EpsilonSchedule {
        let span = self.epsilon_decay_steps.unwrap_or(training_steps).max(1);
        EpsilonSchedule::reaching_floor_at(self.epsilon_start, self.epsilon_floor, span)
    }
}

/// `eps(step) = max(floor, start * exp(-step / tau))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub floor: f64,
    pub tau: f64,
}

impl EpsilonSchedule {
    /// Choose `tau` so that the floor is reached exactly at `steps`.
    pub fn reaching_floor_at(start: f64, floor: f64, steps: u64) -> Self {
        let ratio = (start / floor).ln();
        let tau = if ratio > 0.0 {
            steps as f64 / ratio
        } else {
            f64::INFINITY
        };
        EpsilonSchedule { start, floor, tau }
    }

    pub fn at(&self, step: u64) -> f64 {
        (self.start * (-(step as f64) / self.tau).exp()).max(self.floor)
    }
}
