use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encoding::{encode_state, MeanActionTable};
use super::hyper::{EpsilonSchedule, HyperParams};
use super::losses::{predicted_density, q_loss, DensityTarget, QItem, DENSITY_HEAD, Q_HEAD};
use super::replay::ReplayMemory;
use super::{argmax, derive_seed, Context, Learner, LearnerKind, LearnerSpec, UpdateStats};
use crate::error::{Error, Result};
use crate::matchenv::{Experience, Observation};
use crate::numkit::{entropy, Gradients, HeadSpec, Mlp, Mode, OptimizerKind, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqnVariant {
    Plain,
    /// Density head plus an entropy bonus in the target.
    DensityEntropy,
    /// Per-zone mean actions appended to the input.
    MeanField,
}

/// Replay entry. Mean-action rows are present only for the mean-field variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub zone: usize,
    pub density: f64,
    pub action: usize,
    pub reward: f64,
    pub next_zone: usize,
    pub next_density: f64,
    /// Environment steps between the decision and the next one.
    pub elapsed: u64,
    pub mean_row: Option<Box<[f64]>>,
    pub next_mean_row: Option<Box<[f64]>>,
}

impl Transition {
    pub fn from_experience(e: &Experience) -> Self {
        Transition {
            zone: e.zone,
            density: e.local_density,
            action: e.action,
            reward: e.reward,
            next_zone: e.next_zone,
            next_density: e.next_density,
            elapsed: e.next_decision_at - e.decided_at,
            mean_row: None,
            next_mean_row: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DqnLearner {
    variant: DqnVariant,
    num_zones: usize,
    online: Mlp,
    target: Mlp,
    optimizer: OptimizerState,
    replay: ReplayMemory<Transition>,
    hyper: HyperParams,
    schedule: EpsilonSchedule,
    seed: u64,
    act_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    experiences: u64,
    train_steps: u64,
    training: bool,
    /// Mean-action rows seen at each agent's previous and latest decision.
    rows: Vec<[Option<Box<[f64]>>; 2]>,
}

impl DqnLearner {
    pub fn new(spec: &LearnerSpec, variant: DqnVariant, seed: u64) -> Result<Self> {
        let hp = spec.hyper.clone();
        hp.validate()?;
        let z = spec.num_zones;
        let input = match variant {
            DqnVariant::MeanField => 2 * z + 1,
            _ => z + 1,
        };
        let heads = match variant {
            DqnVariant::DensityEntropy => HeadSpec::new([(Q_HEAD, z), (DENSITY_HEAD, z * z)]),
            _ => HeadSpec::single(Q_HEAD, z),
        };
        let mut sizes = vec![input];
        sizes.extend(&hp.hidden);
        sizes.push(heads.total());
        let online = Mlp::init(&sizes, heads, hp.dropout, derive_seed(seed, &[1]))?;
        let optimizer = OptimizerState::new(OptimizerKind::adam(), hp.lr_q, &online)?;
        Ok(DqnLearner {
            variant,
            num_zones: z,
            target: online.clone(),
            online,
            optimizer,
            replay: ReplayMemory::new(hp.replay_capacity),
            schedule: hp.epsilon_schedule(spec.training_steps),
            hyper: hp,
            seed,
            act_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2])),
            sample_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3])),
            experiences: 0,
            train_steps: 0,
            training: true,
            rows: Vec::new(),
        })
    }

    pub fn variant(&self) -> DqnVariant {
        self.variant
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    pub fn target_net(&self) -> &Mlp {
        &self.target
    }

    pub fn target_net_mut(&mut self) -> &mut Mlp {
        &mut self.target
    }

    pub fn replay(&self) -> &ReplayMemory<Transition> {
        &self.replay
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn push(&mut self, t: Transition) {
        self.replay.push(t);
    }

    fn input(&self, zone: usize, density: f64, row: Option<&[f64]>) -> Vec<f64> {
        match self.variant {
            DqnVariant::MeanField => {
                let uniform = vec![1.0 / self.num_zones as f64; self.num_zones];
                encode_state(zone, density, self.num_zones, Some(row.unwrap_or(&uniform)))
            }
            _ => encode_state(zone, density, self.num_zones, None),
        }
    }

    pub fn q_values(&self, net: &Mlp, zone: usize, density: f64, row: Option<&[f64]>) -> Result<Vec<f64>> {
        let q = net.head_range(Q_HEAD)?;
        let trace = net.trace(
            &self.input(zone, density, row),
            Mode::Eval,
            Some(std::slice::from_ref(&q)),
        )?;
        Ok(trace.output()[q].to_vec())
    }

    /// Entropy of the target network's density prediction at `(z, d, a)`.
    pub fn target_entropy(&self, t: &Transition) -> Result<f64> {
        let x = self.input(t.zone, t.density, t.mean_row.as_deref());
        entropy(&predicted_density(&self.target, &x, t.action, self.num_zones)?)
    }

    /// `r + beta * H + gamma * max_a' Q_target(s', a')`; the entropy term is
    /// present only for the density variant.
    pub fn target_value(&self, t: &Transition) -> Result<f64> {
        let next = self.q_values(&self.target, t.next_zone, t.next_density, t.next_mean_row.as_deref())?;
        let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bonus = match self.variant {
            DqnVariant::DensityEntropy => self.hyper.beta * self.target_entropy(t)?,
            _ => 0.0,
        };
        Ok(t.reward + bonus + self.hyper.discount(t.elapsed) * best)
    }

    /// One optimizer step on the combined loss over `batch`.
    pub fn train_batch(&mut self, batch: &[Transition]) -> Result<UpdateStats> {
        let inputs: Vec<Vec<f64>> = batch
            .iter()
            .map(|t| self.input(t.zone, t.density, t.mean_row.as_deref()))
            .collect();
        let targets = batch
            .iter()
            .map(|t| self.target_value(t))
            .collect::<Result<Vec<f64>>>()?;
        let with_density = self.variant == DqnVariant::DensityEntropy;
        let items: Vec<QItem> = batch
            .iter()
            .zip(&inputs)
            .zip(&targets)
            .enumerate()
            .map(|(b, ((t, x), &y))| QItem {
                input: x,
                action: t.action,
                target: y,
                density: with_density.then_some(DensityTarget {
                    zone: t.next_zone,
                    observed: t.next_density,
                }),
                mode: Mode::Train {
                    seed: derive_seed(self.seed, &[4, self.train_steps, b as u64]),
                },
            })
            .collect();
        let lambda = if with_density { self.hyper.lambda } else { 0.0 };
        let mut grads = Gradients::zeros_like(&self.online);
        let parts = q_loss(&self.online, &items, lambda, Some(&mut grads))?;
        if !parts.total.is_finite() {
            return Err(Error::NonFinite(format!("Q loss at train step {}", self.train_steps)));
        }
        self.optimizer.step(&mut self.online, &grads)?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.hyper.target_sync) {
            self.target.copy_params_from(&self.online)?;
        }
        Ok(UpdateStats {
            main_loss: parts.main,
            density_loss: parts.density,
            policy_loss: 0.0,
        })
    }

    fn remember_row(&mut self, agent: usize, row: Option<Box<[f64]>>) {
        if self.rows.len() <= agent {
            self.rows.resize(agent + 1, [None, None]);
        }
        let slot = &mut self.rows[agent];
        slot[0] = slot[1].take();
        slot[1] = row;
    }
}

impl Learner for DqnLearner {
    fn kind(&self) -> LearnerKind {
        match self.variant {
            DqnVariant::Plain => LearnerKind::Dqn,
            DqnVariant::DensityEntropy => LearnerKind::Dedqn,
            DqnVariant::MeanField => LearnerKind::Mmfq,
        }
    }

    fn act(&mut self, obs: &Observation, ctx: &Context) -> Result<usize> {
        let row: Option<Box<[f64]>> = match self.variant {
            DqnVariant::MeanField => Some(
                ctx.mean_actions
                    .map(|t: &MeanActionTable| t.row(obs.zone).into())
                    .unwrap_or_else(|| vec![1.0 / self.num_zones as f64; self.num_zones].into()),
            ),
            _ => None,
        };
        let eps = self.epsilon(ctx.step).unwrap_or(0.0);
        let action = if self.act_rng.gen::<f64>() < eps {
            self.act_rng.gen_range(0..self.num_zones)
        } else {
            argmax(&self.q_values(&self.online, obs.zone, obs.local_density, row.as_deref())?)
        };
        if self.variant == DqnVariant::MeanField {
            self.remember_row(obs.agent, row);
        }
        Ok(action)
    }

    fn learn(&mut self, exp: &Experience, _ctx: &Context) -> Result<Option<UpdateStats>> {
        if !self.training {
            return Ok(None);
        }
        let mut t = Transition::from_experience(exp);
        if self.variant == DqnVariant::MeanField {
            let slot = self.rows.get(exp.agent).cloned().unwrap_or([None, None]);
            let [prev, next] = slot;
            t.mean_row = prev;
            t.next_mean_row = next;
        }
        self.replay.push(t);
        self.experiences += 1;
        if !self.experiences.is_multiple_of(self.hyper.train_every) {
            return Ok(None);
        }
        let batch: Vec<Transition> =
            match self
                .replay
                .sample(self.hyper.batch_size, self.hyper.min_replay, &mut self.sample_rng)
            {
                Some(b) => b.into_iter().cloned().collect(),
                None => return Ok(None),
            };
        self.train_batch(&batch).map(Some)
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

    fn predicted_density(&self, zone: usize, density: f64, action: usize) -> Option<Result<Vec<f64>>> {
        (self.variant == DqnVariant::DensityEntropy).then(|| {
            let x = self.input(zone, density, None);
            predicted_density(&self.online, &x, action, self.num_zones)
        })
    }

    fn networks(&self) -> Vec<(&'static str, &Mlp)> {
        vec![("online", &self.online), ("target", &self.target)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(zones: usize, hyper: HyperParams) -> LearnerSpec {
        LearnerSpec {
            kind: LearnerKind::Dqn,
            hyper,
            num_zones: zones,
            num_agents: 4,
            training_steps: 1000,
        }
    }

    fn small() -> HyperParams {
        HyperParams {
            hidden: vec![8, 8],
            dropout: 0.0,
            batch_size: 4,
            min_replay: 4,
            ..HyperParams::default()
        }
    }

    fn zeroed(mut l: DqnLearner) -> DqnLearner {
        for s in l.online_mut().param_slices_mut() {
            s.fill(0.0);
        }
        for s in l.target_net_mut().param_slices_mut() {
            s.fill(0.0);
        }
        l
    }

    fn transition(reward: f64) -> Transition {
        Transition {
            zone: 0,
            density: 0.25,
            action: 2,
            reward,
            next_zone: 1,
            next_density: 0.5,
            elapsed: 1,
            mean_row: None,
            next_mean_row: None,
        }
    }

    #[test]
    fn zero_target_net_gives_reward() {
        let l = zeroed(DqnLearner::new(&spec(3, small()), DqnVariant::Plain, 0).unwrap());
        assert_eq!(l.target_value(&transition(2.0)).unwrap(), 2.0);
        let hp = HyperParams { gamma: 0.0, ..small() };
        let l = DqnLearner::new(&spec(3, hp), DqnVariant::Plain, 0).unwrap();
        assert_eq!(l.target_value(&transition(2.0)).unwrap(), 2.0);
    }

    #[test]
    fn target_arithmetic() {
        let hp = HyperParams { gamma: 0.99, ..small() };
        let mut l = zeroed(DqnLearner::new(&spec(3, hp), DqnVariant::Plain, 0).unwrap());
        let last = l.target_net().num_layers() - 1;
        l.target_net_mut().biases_mut(last)[1] = 10.0;
        assert!((l.target_value(&transition(2.0)).unwrap() - 11.9).abs() < 1e-12);
    }

    #[test]
    fn entropy_target_with_uniform_density() {
        let zones = 10;
        let hp = HyperParams { gamma: 0.5, ..small() };
        let mut l = zeroed(DqnLearner::new(&spec(zones, hp), DqnVariant::DensityEntropy, 0).unwrap());
        let last = l.target_net().num_layers() - 1;
        for b in &mut l.target_net_mut().biases_mut(last)[..zones] {
            *b = 10.0;
        }
        let y = l.target_value(&transition(1.0)).unwrap();
        assert!((y - 6.023026).abs() < 1e-6, "{y}");
        assert!((l.target_entropy(&transition(1.0)).unwrap() - (zones as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_matches_plain_target() {
        let hp = HyperParams { beta: 0.0, ..small() };
        let plain = DqnLearner::new(&spec(4, hp.clone()), DqnVariant::Plain, 5).unwrap();
        let de = DqnLearner::new(&spec(4, hp), DqnVariant::DensityEntropy, 5).unwrap();
        let t = transition(0.7);
        assert_eq!(plain.target_value(&t).unwrap(), de.target_value(&t).unwrap());
    }

    #[test]
    fn target_net_frozen_between_syncs() {
        let hp = HyperParams {
            target_sync: 5,
            ..small()
        };
        let mut l = DqnLearner::new(&spec(3, hp), DqnVariant::Plain, 1).unwrap();
        let batch = vec![transition(1.0); 4];
        let before = l.q_values(l.target_net(), 1, 0.5, None).unwrap();
        for _ in 0..4 {
            l.train_batch(&batch).unwrap();
            assert_eq!(l.q_values(l.target_net(), 1, 0.5, None).unwrap(), before);
        }
        l.train_batch(&batch).unwrap();
        assert_eq!(l.target_net(), l.online());
    }

    #[test]
    fn greedy_action_is_argmax() {
        let mut l = zeroed(DqnLearner::new(&spec(3, small()), DqnVariant::Plain, 0).unwrap());
        let last = l.online().num_layers() - 1;
        l.online_mut().biases_mut(last).copy_from_slice(&[1.0, 3.0, 2.0]);
        l.set_training(false);
        let obs = Observation {
            agent: 0,
            zone: 0,
            local_count: 1,
            local_density: 0.25,
            time: 0,
        };
        let ctx = Context {
            step: 0,
            mean_actions: None,
        };
        let picks = (0..2000).filter(|_| l.act(&obs, &ctx).unwrap() == 1).count();
        // Greedy with probability 0.95 + 0.05 / 3.
        assert!((picks as f64 / 2000.0 - (0.95 + 0.05 / 3.0)).abs() < 0.02);
    }

    #[test]
    fn mean_actions_change_mean_field_q_values() {
        let zones = 4;
        let mut sensitive = 0;
        for seed in 0..100 {
            let l = DqnLearner::new(&spec(zones, small()), DqnVariant::MeanField, seed).unwrap();
            let a = l.q_values(l.online(), 1, 0.3, Some(&[0.25; 4])).unwrap();
            let b = l.q_values(l.online(), 1, 0.3, Some(&[1.0, 0.0, 0.0, 0.0])).unwrap();
            if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 0.0) {
                sensitive += 1;
            }
        }
        assert!(sensitive >= 99);
    }

    #[test]
    fn overfitting_one_sample_drives_losses_down() {
        let mut good = 0;
        for seed in 0..100 {
            let hp = HyperParams {
                lambda: 1.0,
                target_sync: 1_000_000,
                ..small()
            };
            let mut l = DqnLearner::new(&spec(3, hp), DqnVariant::DensityEntropy, seed).unwrap();
            let batch = vec![transition(1.0)];
            let first = l.train_batch(&batch).unwrap();
            let mut last = first;
            let mut monotone = true;
            for _ in 0..100 {
                let s = l.train_batch(&batch).unwrap();
                monotone &= s.main_loss <= last.main_loss + 1e-12 && s.density_loss <= last.density_loss + 1e-12;
                last = s;
            }
            if monotone && last.main_loss < first.main_loss && last.density_loss < first.density_loss {
                good += 1;
            }
        }
        assert!(good >= 95, "{good}/100");
    }
}
