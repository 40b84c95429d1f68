use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dqn::Transition;
use super::encoding::encode_state;
use super::hyper::HyperParams;
use super::losses::{
    policy_loss, predicted_density, value_loss, DensityItem, DensityTarget, PolicyItem, ValueItem, DENSITY_HEAD,
    PI_HEAD, V_HEAD,
};
use super::replay::ReplayMemory;
use super::{derive_seed, Context, Learner, LearnerKind, LearnerSpec, UpdateStats};
use crate::error::{Error, Result};
use crate::matchenv::{Experience, Observation};
use crate::numkit::{entropy, softmax, Gradients, HeadSpec, Mlp, Mode, OptimizerKind, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A2cVariant {
    Plain,
    /// Density head on the value net and an entropy bonus in the return.
    DensityEntropy,
}

/// Consecutive decisions of one agent, oldest first.
pub type Rollout = Vec<Transition>;

#[derive(Debug, Clone)]
pub struct A2cLearner {
    variant: A2cVariant,
    num_zones: usize,
    policy: Mlp,
    value: Mlp,
    policy_opt: OptimizerState,
    value_opt: OptimizerState,
    replay: ReplayMemory<Transition>,
    hyper: HyperParams,
    seed: u64,
    act_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    updates: u64,
    rollouts: Vec<Rollout>,
    training: bool,
}

impl A2cLearner {
    pub fn new(spec: &LearnerSpec, variant: A2cVariant, seed: u64) -> Result<Self> {
        let hp = spec.hyper.clone();
        hp.validate()?;
        let z = spec.num_zones;
        let layers = |out: usize| -> Vec<usize> {
            let mut s = vec![z + 1];
            s.extend(&hp.hidden);
            s.push(out);
            s
        };
        let policy = Mlp::init(
            &layers(z),
            HeadSpec::single(PI_HEAD, z),
            hp.dropout,
            derive_seed(seed, &[1]),
        )?;
        let value_heads = match variant {
            A2cVariant::Plain => HeadSpec::single(V_HEAD, 1),
            A2cVariant::DensityEntropy => HeadSpec::new([(V_HEAD, 1), (DENSITY_HEAD, z * z)]),
        };
        let value = Mlp::init(
            &layers(value_heads.total()),
            value_heads,
            hp.dropout,
            derive_seed(seed, &[5]),
        )?;
        Ok(A2cLearner {
            variant,
            num_zones: z,
            policy_opt: OptimizerState::new(OptimizerKind::rmsprop(), hp.lr_policy, &policy)?,
            value_opt: OptimizerState::new(OptimizerKind::rmsprop(), hp.lr_value, &value)?,
            policy,
            value,
            replay: ReplayMemory::new(hp.replay_capacity),
            hyper: hp,
            seed,
            act_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2])),
            sample_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3])),
            updates: 0,
            rollouts: Vec::new(),
            training: true,
        })
    }

    pub fn policy_net(&self) -> &Mlp {
        &self.policy
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value
    }

    pub fn value_net_mut(&mut self) -> &mut Mlp {
        &mut self.value
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn input(&self, zone: usize, density: f64) -> Vec<f64> {
        encode_state(zone, density, self.num_zones, None)
    }

    pub fn policy_probs(&self, zone: usize, density: f64) -> Result<Vec<f64>> {
        Ok(softmax(&self.policy.forward(&self.input(zone, density), Mode::Eval)?))
    }

    pub fn state_value(&self, zone: usize, density: f64) -> Result<f64> {
        let v = self.value.head_range(V_HEAD)?.start;
        let trace = self
            .value
            .trace(&self.input(zone, density), Mode::Eval, Some(&[v..v + 1]))?;
        Ok(trace.output()[v])
    }

    /// `beta * H` of the value net's density prediction, zero for the plain variant.
    pub fn entropy_bonus(&self, t: &Transition) -> Result<f64> {
        match self.variant {
            A2cVariant::Plain => Ok(0.0),
            A2cVariant::DensityEntropy => {
                let d = predicted_density(&self.value, &self.input(t.zone, t.density), t.action, self.num_zones)?;
                Ok(self.hyper.beta * entropy(&d)?)
            }
        }
    }

    /// k-step returns `R_t = sum_j gamma^j r_{t+j} + gamma^k V(s_{t+k})`.
    pub fn returns(&self, rollout: &[Transition]) -> Result<Vec<f64>> {
        let last = rollout.last().ok_or_else(|| Error::Contract("empty rollout".into()))?;
        let mut r = self.state_value(last.next_zone, last.next_density)?;
        let mut out = vec![0.0; rollout.len()];
        for (slot, t) in out.iter_mut().zip(rollout).rev() {
            r = t.reward + self.hyper.discount(t.elapsed) * r;
            *slot = r;
        }
        Ok(out)
    }

    /// One policy step and one value step on a rollout.
    pub fn update(&mut self, rollout: &[Transition]) -> Result<UpdateStats> {
        let returns = self.returns(rollout)?;
        let inputs: Vec<Vec<f64>> = rollout.iter().map(|t| self.input(t.zone, t.density)).collect();
        let mut targets = Vec::with_capacity(rollout.len());
        let mut advantages = Vec::with_capacity(rollout.len());
        for (t, r) in rollout.iter().zip(&returns) {
            let target = r + self.entropy_bonus(t)?;
            advantages.push(target - self.state_value(t.zone, t.density)?);
            targets.push(target);
        }

        let density_batch: Vec<Transition> = match self.variant {
            A2cVariant::DensityEntropy => self
                .replay
                .sample(self.hyper.batch_size, self.hyper.min_replay, &mut self.sample_rng)
                .map(|b| b.into_iter().cloned().collect())
                .unwrap_or_default(),
            A2cVariant::Plain => Vec::new(),
        };
        let density_inputs: Vec<Vec<f64>> = density_batch.iter().map(|t| self.input(t.zone, t.density)).collect();

        let u = self.updates;
        let mode = |stream: u64, j: usize| Mode::Train {
            seed: derive_seed(self.seed, &[stream, u, j as u64]),
        };
        let value_items: Vec<ValueItem> = inputs
            .iter()
            .zip(&targets)
            .enumerate()
            .map(|(j, (x, &target))| ValueItem {
                input: x,
                target,
                mode: mode(6, j),
            })
            .collect();
        let density_items: Vec<DensityItem> = density_batch
            .iter()
            .zip(&density_inputs)
            .enumerate()
            .map(|(b, (t, x))| DensityItem {
                input: x,
                action: t.action,
                target: DensityTarget {
                    zone: t.next_zone,
                    observed: t.next_density,
                },
                mode: mode(7, b),
            })
            .collect();
        let policy_items: Vec<PolicyItem> = inputs
            .iter()
            .zip(rollout)
            .zip(&advantages)
            .enumerate()
            .map(|(j, ((x, t), &advantage))| PolicyItem {
                input: x,
                action: t.action,
                advantage,
                mode: mode(8, j),
            })
            .collect();

        let lambda = match self.variant {
            A2cVariant::DensityEntropy => self.hyper.lambda,
            A2cVariant::Plain => 0.0,
        };
        let mut value_grads = Gradients::zeros_like(&self.value);
        let parts = value_loss(
            &self.value,
            &value_items,
            &density_items,
            lambda,
            Some(&mut value_grads),
        )?;
        let mut policy_grads = Gradients::zeros_like(&self.policy);
        let pl = policy_loss(&self.policy, &policy_items, Some(&mut policy_grads))?;
        if !(parts.total.is_finite() && pl.is_finite()) {
            return Err(Error::NonFinite(format!("actor-critic loss at update {u}")));
        }
        self.value_opt.step(&mut self.value, &value_grads)?;
        self.policy_opt.step(&mut self.policy, &policy_grads)?;
        self.updates += 1;
        Ok(UpdateStats {
            main_loss: parts.main,
            density_loss: parts.density,
            policy_loss: pl,
        })
    }

    fn flush(&mut self, agent: usize) -> Result<Option<UpdateStats>> {
        let rollout = std::mem::take(&mut self.rollouts[agent]);
        if rollout.is_empty() {
            return Ok(None);
        }
        self.update(&rollout).map(Some)
    }
}

impl Learner for A2cLearner {
    fn kind(&self) -> LearnerKind {
        match self.variant {
            A2cVariant::Plain => LearnerKind::A2c,
            A2cVariant::DensityEntropy => LearnerKind::Dea2c,
        }
    }

    fn act(&mut self, obs: &Observation, _ctx: &Context) -> Result<usize> {
        let p = self.policy_probs(obs.zone, obs.local_density)?;
        let u: f64 = self.act_rng.gen();
        let mut acc = 0.0;
        for (a, pa) in p.iter().enumerate() {
            acc += pa;
            if u < acc {
                return Ok(a);
            }
        }
        Ok(p.len() - 1)
    }

    fn learn(&mut self, exp: &Experience, _ctx: &Context) -> Result<Option<UpdateStats>> {
        if !self.training {
            return Ok(None);
        }
        let t = Transition::from_experience(exp);
        if self.variant == A2cVariant::DensityEntropy {
            self.replay.push(t.clone());
        }
        if self.rollouts.len() <= exp.agent {
            self.rollouts.resize(exp.agent + 1, Vec::new());
        }
        self.rollouts[exp.agent].push(t);
        if self.rollouts[exp.agent].len() >= self.hyper.rollout_k {
            return self.flush(exp.agent);
        }
        Ok(None)
    }

    fn end_period(&mut self, _ctx: &Context) -> Result<Option<UpdateStats>> {
        let mut last = None;
        for agent in 0..self.rollouts.len() {
            if let Some(s) = self.flush(agent)? {
                last = Some(s);
            }
        }
        Ok(last)
    }

    fn set_training(&mut self, training: bool) {
        if !training {
            self.rollouts.iter_mut().for_each(Vec::clear);
        }
        self.training = training;
    }

    fn predicted_density(&self, zone: usize, density: f64, action: usize) -> Option<Result<Vec<f64>>> {
        (self.variant == A2cVariant::DensityEntropy)
            .then(|| predicted_density(&self.value, &self.input(zone, density), action, self.num_zones))
    }

    fn networks(&self) -> Vec<(&'static str, &Mlp)> {
        vec![("policy", &self.policy), ("value", &self.value)]
    }
}
