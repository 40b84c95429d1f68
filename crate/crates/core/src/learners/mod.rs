//! Independent learners over local `(zone, density)` observations.

mod a2c;
mod dqn;
mod encoding;
mod hyper;
pub mod losses;
mod replay;
mod tabular;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matchenv::{Experience, Observation};
use crate::numkit::Mlp;

pub use a2c::{A2cLearner, A2cVariant, Rollout};
pub use dqn::{DqnLearner, DqnVariant, Transition};
pub use encoding::{encode_observation, encode_state, MeanActionTable};
pub use hyper::{EpsilonSchedule, HyperParams};
pub use replay::ReplayMemory;
pub use tabular::{bucket, TabularQ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Tabq,
    Dqn,
    A2c,
    Dedqn,
    Dea2c,
    Mmfq,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::Tabq,
        LearnerKind::Dqn,
        LearnerKind::A2c,
        LearnerKind::Dedqn,
        LearnerKind::Dea2c,
        LearnerKind::Mmfq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Tabq => "tabq",
            LearnerKind::Dqn => "dqn",
            LearnerKind::A2c => "a2c",
            LearnerKind::Dedqn => "dedqn",
            LearnerKind::Dea2c => "dea2c",
            LearnerKind::Mmfq => "mmfq",
        }
    }

    pub fn uses_density(self) -> bool {
        matches!(self, LearnerKind::Dedqn | LearnerKind::Dea2c)
    }

    pub fn uses_epsilon(self) -> bool {
        matches!(
            self,
            LearnerKind::Tabq | LearnerKind::Dqn | LearnerKind::Dedqn | LearnerKind::Mmfq
        )
    }

    pub fn uses_mean_actions(self) -> bool {
        self == LearnerKind::Mmfq
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownLearner(s.to_string()))
    }
}

/// Shared per-call information supplied by the driver loop.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    /// Global environment step, used for exploration schedules.
    pub step: u64,
    /// Mean actions of the previous iteration; only read by the mean-field learner.
    pub mean_actions: Option<&'a MeanActionTable>,
}

/// Losses from one gradient update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub main_loss: f64,
    pub density_loss: f64,
    pub policy_loss: f64,
}

impl UpdateStats {
    pub fn is_finite(&self) -> bool {
        self.main_loss.is_finite() && self.density_loss.is_finite() && self.policy_loss.is_finite()
    }
}

pub trait Learner: Send {
    fn kind(&self) -> LearnerKind;

    fn act(&mut self, obs: &Observation, ctx: &Context) -> Result<usize>;

    /// Consume one experience; returns losses when a gradient step ran.
    fn learn(&mut self, exp: &Experience, ctx: &Context) -> Result<Option<UpdateStats>>;

    /// Flush partial rollouts at an evaluation-period boundary.
    fn end_period(&mut self, _ctx: &Context) -> Result<Option<UpdateStats>> {
        Ok(None)
    }

    /// Switch between training and frozen evaluation.
    fn set_training(&mut self, training: bool);

    /// Current exploration rate, for learners that explore with epsilon.
    fn epsilon(&self, _step: u64) -> Option<f64> {
        None
    }

    /// Predicted next-step density over zones for density-aware learners.
    fn predicted_density(&self, _zone: usize, _density: f64, _action: usize) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Named networks for checkpointing.
    fn networks(&self) -> Vec<(&'static str, &Mlp)> {
        Vec::new()
    }
}

/// Everything needed to instantiate a learner for one agent.
#[derive(Debug, Clone)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub hyper: HyperParams,
    pub num_zones: usize,
    pub num_agents: usize,
    /// Training steps, used to derive the epsilon schedule.
    pub training_steps: u64,
}

pub fn build_learner(spec: &LearnerSpec, seed: u64) -> Result<Box<dyn Learner>> {
    spec.hyper.validate()?;
    Ok(match spec.kind {
        LearnerKind::Tabq => Box::new(TabularQ::new(spec, seed)?),
        LearnerKind::Dqn => Box::new(DqnLearner::new(spec, DqnVariant::Plain, seed)?),
        LearnerKind::Dedqn => Box::new(DqnLearner::new(spec, DqnVariant::DensityEntropy, seed)?),
        LearnerKind::Mmfq => Box::new(DqnLearner::new(spec, DqnVariant::MeanField, seed)?),
        LearnerKind::A2c => Box::new(A2cLearner::new(spec, A2cVariant::Plain, seed)?),
        LearnerKind::Dea2c => Box::new(A2cLearner::new(spec, A2cVariant::DensityEntropy, seed)?),
    })
}

/// SplitMix64 finalizer over a base seed and a sequence of stream tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = base;
    for &t in tags {
        h = h.wrapping_add(t.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_by_name() {
        for k in LearnerKind::ALL {
            assert_eq!(k.name().parse::<LearnerKind>().unwrap(), k);
        }
        assert!(matches!("ppo".parse::<LearnerKind>(), Err(Error::UnknownLearner(_))));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 1.0]), 0);
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(7, &[3, 4]), derive_seed(7, &[3, 4]));
    }
}
