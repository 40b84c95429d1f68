use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hyper::EpsilonSchedule;
use super::{argmax, derive_seed, Context, Learner, LearnerKind, LearnerSpec, UpdateStats};
use crate::error::{Error, Result};
use crate::matchenv::{Experience, Observation};

/// Equal-width bucket of a normalized density in `[0, 1]`.
pub fn bucket(density: f64, buckets: usize) -> usize {
    ((density.clamp(0.0, 1.0) * buckets as f64) as usize).min(buckets - 1)
}

/// Q table keyed by `(zone, density bucket, action)`.
#[derive(Debug, Clone)]
pub struct TabularQ {
    num_zones: usize,
    buckets: usize,
    alpha: f64,
    hyper: super::HyperParams,
    table: Vec<f64>,
    schedule: EpsilonSchedule,
    rng: ChaCha8Rng,
    training: bool,
}

impl TabularQ {
    pub fn new(spec: &LearnerSpec, seed: u64) -> Result<Self> {
        let hp = &spec.hyper;
        Ok(TabularQ {
            num_zones: spec.num_zones,
            buckets: hp.density_buckets,
            alpha: hp.alpha,
            hyper: hp.clone(),
            table: vec![0.0; spec.num_zones * hp.density_buckets * spec.num_zones],
            schedule: hp.epsilon_schedule(spec.training_steps),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0])),
            training: true,
        })
    }

    fn offset(&self, zone: usize, density: f64) -> usize {
        (zone * self.buckets + bucket(density, self.buckets)) * self.num_zones
    }

    pub fn values(&self, zone: usize, density: f64) -> &[f64] {
        let o = self.offset(zone, density);
        &self.table[o..o + self.num_zones]
    }

    pub fn value(&self, zone: usize, density: f64, action: usize) -> f64 {
        self.values(zone, density)[action]
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    /// `Q(s, a) += alpha * (r + gamma * max Q(s', .) - Q(s, a))`.
    pub fn update(&mut self, e: &Experience) -> Result<f64> {
        if e.zone >= self.num_zones || e.next_zone >= self.num_zones || e.action >= self.num_zones {
            return Err(Error::Contract("experience references an unknown zone".into()));
        }
        let next_max = self
            .values(e.next_zone, e.next_density)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let i = self.offset(e.zone, e.local_density) + e.action;
        let td = e.reward + self.hyper.discount(e.next_decision_at - e.decided_at) * next_max - self.table[i];
        self.table[i] += self.alpha * td;
        if !self.table[i].is_finite() {
            return Err(Error::NonFinite("tabular Q value".into()));
        }
        Ok(td)
    }
}

impl Learner for TabularQ {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Tabq
    }

    fn act(&mut self, obs: &Observation, ctx: &Context) -> Result<usize> {
        let eps = self.epsilon(ctx.step).unwrap_or(0.0);
        if self.rng.gen::<f64>() < eps {
            return Ok(self.rng.gen_range(0..self.num_zones));
        }
        Ok(argmax(self.values(obs.zone, obs.local_density)))
    }

    fn learn(&mut self, exp: &Experience, _ctx: &Context) -> Result<Option<UpdateStats>> {
        if !self.training {
            return Ok(None);
        }
        let td = self.update(exp)?;
        Ok(Some(UpdateStats {
            main_loss: td * td,
            ..UpdateStats::default()
        }))
    }

    fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    fn epsilon(&self, step: u64) -> Option<f64> {
        Some(if self.training {
            self.schedule.at(step)
        } else {
            self.schedule.floor
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::HyperParams;

    fn learner(alpha: f64, gamma: f64) -> TabularQ {
        let spec = LearnerSpec {
            kind: LearnerKind::Tabq,
            hyper: HyperParams {
                alpha,
                gamma,
                ..HyperParams::default()
            },
            num_zones: 2,
            num_agents: 1,
            training_steps: 100,
        };
        TabularQ::new(&spec, 0).unwrap()
    }

    fn exp(reward: f64) -> Experience {
        Experience {
            agent: 0,
            zone: 0,
            local_count: 1,
            local_density: 1.0,
            action: 1,
            reward,
            next_zone: 1,
            next_count: 1,
            next_density: 1.0,
            decided_at: 0,
            next_decision_at: 1,
        }
    }

    #[test]
    fn update_examples() {
        let mut q = learner(0.1, 0.9);
        q.update(&exp(1.0)).unwrap();
        assert!((q.value(0, 1.0, 1) - 0.1).abs() < 1e-15);

        let mut frozen = learner(0.0, 0.9);
        frozen.update(&exp(1.0)).unwrap();
        assert_eq!(frozen.value(0, 1.0, 1), 0.0);
    }

    #[test]
    fn buckets_cover_unit_interval() {
        assert_eq!(bucket(0.0, 5), 0);
        assert_eq!(bucket(0.19, 5), 0);
        assert_eq!(bucket(0.2, 5), 1);
        assert_eq!(bucket(1.0, 5), 4);
    }

    #[test]
    fn epsilon_one_is_uniform_and_zero_is_greedy() {
        let mut q = learner(0.1, 0.9);
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
        let mut counts = [0u32; 2];
        for _ in 0..10_000 {
            counts[q.act(&obs, &ctx).unwrap()] += 1;
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 5000.0).powi(2) / 5000.0).sum();
        assert!(chi2 < 6.635, "{counts:?}");

        q.update(&exp(1.0)).unwrap();
        q.set_training(false);
        let greedy = (0..1000).filter(|_| q.act(&obs, &ctx).unwrap() == 1).count();
        assert!(greedy > 900);
    }
}
