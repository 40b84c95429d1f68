use std::collections::VecDeque;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::EnvConfig;
use super::demand::{DemandModel, Job};
use super::zones::ZoneMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    /// Current zone while idle, destination zone while in transit.
    pub zone: usize,
    pub busy_remaining: u32,
    pub cumulative_revenue: f64,
    pub episode_revenue: f64,
    in_flight_revenue: f64,
    banked_since_decision: f64,
}

impl AgentState {
    pub fn is_idle(&self) -> bool {
        self.busy_remaining == 0
    }
}

/// Idle-agent counts per zone.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationDistribution {
    pub counts: Vec<u32>,
}

impl PopulationDistribution {
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn normalized(&self) -> Option<Vec<f64>> {
        let total = self.total();
        (total > 0).then(|| self.counts.iter().map(|&c| c as f64 / total as f64).collect())
    }
}

/// What an agent sees at a decision point: its zone and the idle count there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub agent: usize,
    pub zone: usize,
    pub local_count: u32,
    /// `local_count / num_agents`.
    pub local_density: f64,
    pub time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub agent: usize,
    pub zone: usize,
    pub local_count: u32,
    pub local_density: f64,
    pub action: usize,
    pub reward: f64,
    pub next_zone: usize,
    pub next_count: u32,
    pub next_density: f64,
    pub decided_at: u64,
    pub next_decision_at: u64,
}

impl Experience {
    pub fn next_observation(&self) -> Observation {
        Observation {
            agent: self.agent,
            zone: self.next_zone,
            local_count: self.next_count,
            local_density: self.next_density,
            time: self.next_decision_at,
        }
    }
}

/// A move chosen by an eligible agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub agent: usize,
    pub target: usize,
}

/// Aggregate outcome of one time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub experiences: Vec<Experience>,
    pub revenue: f64,
    pub jobs_generated: usize,
    pub jobs_served: usize,
    pub jobs_expired: usize,
    pub decisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct OpenDecision {
    zone: usize,
    count: u32,
    action: usize,
    at: u64,
}

#[derive(Debug, Clone)]
enum Phase {
    Ready,
    AwaitingActions {
        eligible: Vec<Observation>,
        generated: usize,
        served: usize,
    },
}

#[derive(Debug, Clone)]
pub struct WorldState {
    config: EnvConfig,
    zones: ZoneMap,
    demand: DemandModel,
    rng: ChaCha8Rng,
    time: u64,
    agents: Vec<AgentState>,
    queues: Vec<VecDeque<Job>>,
    snapshot: Vec<u32>,
    open: Vec<Option<OpenDecision>>,
    phase: Phase,
}

impl WorldState {
    /// Place agents uniformly at random over zones.
    pub fn reset(config: &EnvConfig, seed: u64) -> Result<WorldState> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.num_zones();
        let positions: Vec<usize> = (0..config.num_agents).map(|_| rng.gen_range(0..n)).collect();
        WorldState::build(config, rng, &positions)
    }

    pub fn reset_with_positions(config: &EnvConfig, seed: u64, positions: &[usize]) -> Result<WorldState> {
        config.validate()?;
        if positions.len() != config.num_agents {
            return Err(Error::Dimension {
                what: "agent positions",
                expected: config.num_agents,
                got: positions.len(),
            });
        }
        if let Some(z) = positions.iter().find(|&&z| z >= config.num_zones()) {
            return Err(Error::Config(format!("initial zone {z} is outside the grid")));
        }
        WorldState::build(config, ChaCha8Rng::seed_from_u64(seed), positions)
    }

    fn build(config: &EnvConfig, rng: ChaCha8Rng, positions: &[usize]) -> Result<WorldState> {
        let zones = ZoneMap::from_config(config);
        let demand = DemandModel::from_config(config, &zones)?;
        let agents = positions
            .iter()
            .enumerate()
            .map(|(id, &zone)| AgentState {
                id,
                zone,
                busy_remaining: 0,
                cumulative_revenue: 0.0,
                episode_revenue: 0.0,
                in_flight_revenue: 0.0,
                banked_since_decision: 0.0,
            })
            .collect();
        let mut world = WorldState {
            config: config.clone(),
            zones,
            demand,
            rng,
            time: 0,
            agents,
            queues: vec![VecDeque::new(); config.num_zones()],
            snapshot: Vec::new(),
            open: vec![None; positions.len()],
            phase: Phase::Ready,
        };
        world.snapshot = world.population_distribution().counts;
        Ok(world)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn zones(&self) -> &ZoneMap {
        &self.zones
    }

    pub fn demand(&self) -> &DemandModel {
        &self.demand
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_zones(&self) -> usize {
        self.zones.num_zones()
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn waiting_jobs(&self) -> impl Iterator<Item = &Job> {
        self.queues.iter().flatten()
    }

    pub fn reset_episode_revenue(&mut self) {
        for a in &mut self.agents {
            a.episode_revenue = 0.0;
        }
    }

    /// Queue a job at `origin` with a full TTL, outside the arrival process.
    pub fn inject_job(&mut self, origin: usize, destination: usize) -> Result<()> {
        let n = self.num_zones();
        if origin >= n || destination >= n {
            return Err(Error::Contract(format!(
                "job {origin}->{destination} references an unknown zone"
            )));
        }
        self.queues[origin].push_back(Job {
            origin,
            destination,
            revenue: self.zones.base_revenue(origin, destination),
            remaining_ttl: self.demand.ttl(),
            created_at: self.time,
        });
        Ok(())
    }

    /// Exact idle counts per zone. Not part of the learner-facing interface.
    pub fn population_distribution(&self) -> PopulationDistribution {
        let mut counts = vec![0u32; self.num_zones()];
        for a in self.agents.iter().filter(|a| a.is_idle()) {
            counts[a.zone] += 1;
        }
        PopulationDistribution { counts }
    }

    pub fn observe(&self, agent: usize) -> Result<Observation> {
        let state = self
            .agents
            .get(agent)
            .ok_or_else(|| Error::Contract(format!("unknown agent {agent}")))?;
        if !state.is_idle() {
            return Err(Error::Contract(format!("agent {agent} is busy and cannot observe")));
        }
        Ok(self.observation_of(state))
    }

    fn observation_of(&self, state: &AgentState) -> Observation {
        let count = self.snapshot[state.zone];
        Observation {
            agent: state.id,
            zone: state.zone,
            local_count: count,
            local_density: count as f64 / self.agents.len() as f64,
            time: self.time,
        }
    }

    /// Generate demand, assign jobs and return the agents that must act.
    pub fn begin_step(&mut self) -> Result<Vec<Observation>> {
        if !matches!(self.phase, Phase::Ready) {
            return Err(Error::Contract("begin_step called twice without finish_step".into()));
        }
        let t = self.time;
        let new_jobs = self.demand.generate(t, &self.zones, &mut self.rng);
        let generated = new_jobs.len();
        for job in new_jobs {
            self.queues[job.origin].push_back(job);
        }

        let mut idle_by_zone: Vec<Vec<usize>> = vec![Vec::new(); self.num_zones()];
        for a in self.agents.iter().filter(|a| a.is_idle()) {
            idle_by_zone[a.zone].push(a.id);
        }
        let mut served = 0;
        for (z, idle) in idle_by_zone.iter().enumerate() {
            let m = idle.len().min(self.queues[z].len());
            if m == 0 {
                continue;
            }
            for pick in index::sample(&mut self.rng, idle.len(), m).iter() {
                let job = self.queues[z].pop_front().expect("queue holds at least m jobs");
                let agent = &mut self.agents[idle[pick]];
                agent.busy_remaining = self.zones.travel_time(z, job.destination);
                agent.zone = job.destination;
                agent.in_flight_revenue = job.revenue;
                served += 1;
            }
        }

        let eligible: Vec<Observation> = self
            .agents
            .iter()
            .filter(|a| a.is_idle())
            .map(|a| self.observation_of(a))
            .collect();
        self.phase = Phase::AwaitingActions {
            eligible: eligible.clone(),
            generated,
            served,
        };
        Ok(eligible)
    }

    /// Apply moves, expire jobs, advance transit and emit completed experiences.
    pub fn finish_step(&mut self, actions: &[Action]) -> Result<StepReport> {
        let (eligible, generated, served) = match &self.phase {
            Phase::AwaitingActions {
                eligible,
                generated,
                served,
            } => (eligible.clone(), *generated, *served),
            Phase::Ready => return Err(Error::Contract("finish_step called before begin_step".into())),
        };
        let chosen = self.match_actions(&eligible, actions)?;

        let mut report = StepReport {
            jobs_generated: generated,
            jobs_served: served,
            decisions: eligible.len(),
            ..StepReport::default()
        };

        let population = self.agents.len() as f64;
        for (obs, target) in eligible.iter().zip(chosen) {
            let agent = &mut self.agents[obs.agent];
            if let Some(prev) = self.open[obs.agent].take() {
                report.experiences.push(Experience {
                    agent: obs.agent,
                    zone: prev.zone,
                    local_count: prev.count,
                    local_density: prev.count as f64 / population,
                    action: prev.action,
                    reward: agent.banked_since_decision,
                    next_zone: obs.zone,
                    next_count: obs.local_count,
                    next_density: obs.local_density,
                    decided_at: prev.at,
                    next_decision_at: obs.time,
                });
            }
            agent.banked_since_decision = 0.0;
            agent.busy_remaining = self.zones.travel_time(obs.zone, target);
            agent.zone = target;
            self.open[obs.agent] = Some(OpenDecision {
                zone: obs.zone,
                count: obs.local_count,
                action: target,
                at: obs.time,
            });
        }

        for queue in &mut self.queues {
            for job in queue.iter_mut() {
                job.remaining_ttl -= 1;
            }
            let before = queue.len();
            queue.retain(|j| j.remaining_ttl > 0);
            report.jobs_expired += before - queue.len();
        }

        for agent in &mut self.agents {
            if agent.busy_remaining > 0 {
                agent.busy_remaining -= 1;
                if agent.busy_remaining == 0 {
                    let r = std::mem::take(&mut agent.in_flight_revenue);
                    agent.banked_since_decision += r;
                    agent.cumulative_revenue += r;
                    agent.episode_revenue += r;
                    report.revenue += r;
                }
            }
        }

        self.snapshot = self.population_distribution().counts;
        self.time += 1;
        self.phase = Phase::Ready;
        Ok(report)
    }

    fn match_actions(&self, eligible: &[Observation], actions: &[Action]) -> Result<Vec<usize>> {
        let n = self.num_zones();
        let mut slot: Vec<Option<usize>> = vec![None; self.agents.len()];
        for (k, obs) in eligible.iter().enumerate() {
            slot[obs.agent] = Some(k);
        }
        let mut chosen: Vec<Option<usize>> = vec![None; eligible.len()];
        for act in actions {
            let k = match slot.get(act.agent) {
                Some(Some(k)) => *k,
                Some(None) => return Err(Error::Contract(format!("agent {} is not eligible to act", act.agent))),
                None => return Err(Error::Contract(format!("unknown agent {}", act.agent))),
            };
            if act.target >= n {
                return Err(Error::Contract(format!("action targets unknown zone {}", act.target)));
            }
            if chosen[k].replace(act.target).is_some() {
                return Err(Error::Contract(format!("agent {} acted twice", act.agent)));
            }
        }
        chosen
            .into_iter()
            .zip(eligible)
            .map(|(c, obs)| c.ok_or_else(|| Error::Contract(format!("agent {} needs an action", obs.agent))))
            .collect()
    }

    /// Run one full step, asking `policy` for each eligible agent's target.
    pub fn step_with<F>(&mut self, mut policy: F) -> Result<StepReport>
    where
        F: FnMut(&Observation) -> usize,
    {
        let eligible = self.begin_step()?;
        let actions: Vec<Action> = eligible
            .iter()
            .map(|obs| Action {
                agent: obs.agent,
                target: policy(obs),
            })
            .collect();
        self.finish_step(&actions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchenv::config::TripPattern;
    use rand::Rng;

    fn quiet(agents: usize, zones_w: usize) -> EnvConfig {
        EnvConfig {
            grid_width: zones_w,
            grid_height: 1,
            num_agents: agents,
            dar: Some(0.0),
            ..EnvConfig::default()
        }
    }

    #[test]
    fn reset_is_seeded_and_conserves_agents() {
        let cfg = EnvConfig::default();
        let a = WorldState::reset(&cfg, 9).unwrap();
        let b = WorldState::reset(&cfg, 9).unwrap();
        assert_eq!(a.agents(), b.agents());
        assert_eq!(a.population_distribution().total(), 20);
        assert_eq!(a.time(), 0);
        assert_eq!(a.waiting_jobs().count(), 0);
    }

    #[test]
    fn observation_reports_local_count() {
        let cfg = quiet(20, 10);
        let mut pos = vec![1; 13];
        pos.extend([0; 7]);
        let w = WorldState::reset_with_positions(&cfg, 0, &pos).unwrap();
        let o = w.observe(19).unwrap();
        assert_eq!(o.local_count, 7);
        assert!((o.local_density - 0.35).abs() < 1e-12);

        let mut pos = vec![1; 19];
        pos.push(4);
        let w = WorldState::reset_with_positions(&cfg, 0, &pos).unwrap();
        assert_eq!(w.observe(19).unwrap().local_count, 1);
    }

    #[test]
    fn busy_agent_cannot_observe_or_act() {
        let cfg = quiet(2, 5);
        let mut w = WorldState::reset_with_positions(&cfg, 0, &[0, 0]).unwrap();
        w.step_with(|o| if o.agent == 0 { 4 } else { 0 }).unwrap();
        assert!(w.observe(0).is_err());
        let eligible = w.begin_step().unwrap();
        assert_eq!(eligible.len(), 1);
        let bad = [Action { agent: 0, target: 1 }, Action { agent: 1, target: 1 }];
        assert!(matches!(w.finish_step(&bad), Err(Error::Contract(_))));
        let unknown = [Action { agent: 1, target: 99 }];
        assert!(w.finish_step(&unknown).is_err());
        assert!(w.finish_step(&[]).is_err());
        w.finish_step(&[Action { agent: 1, target: 1 }]).unwrap();
    }

    #[test]
    fn reposition_experience_arrives_after_travel_time() {
        let cfg = quiet(1, 5);
        let mut w = WorldState::reset_with_positions(&cfg, 0, &[0]).unwrap();
        assert_eq!(w.zones().travel_time(0, 3), 3);
        let first = w.step_with(|_| 3).unwrap();
        assert!(first.experiences.is_empty());
        for _ in 0..2 {
            let r = w.step_with(|_| unreachable!()).unwrap();
            assert_eq!(r.decisions, 0);
            assert!(r.experiences.is_empty());
        }
        let r = w.step_with(|_| 3).unwrap();
        assert_eq!(r.experiences.len(), 1);
        let e = r.experiences[0];
        assert_eq!((e.zone, e.action, e.next_zone, e.reward), (0, 3, 3, 0.0));
        assert_eq!(e.next_decision_at - e.decided_at, 3);
    }

    #[test]
    fn served_revenue_is_reported_at_next_decision() {
        let cfg = EnvConfig {
            rho0: 0.5,
            rho1: 1.0,
            ..quiet(1, 5)
        };
        let mut w = WorldState::reset_with_positions(&cfg, 0, &[0]).unwrap();
        w.step_with(|_| 0).unwrap();
        w.inject_job(0, 2).unwrap();
        let eligible = w.begin_step().unwrap();
        assert!(eligible.is_empty());
        w.finish_step(&[]).unwrap();
        w.step_with(|_| unreachable!()).unwrap();
        let r = w.step_with(|_| 2).unwrap();
        assert_eq!(r.experiences.len(), 1);
        assert_eq!(r.experiences[0].reward, 2.5);
        assert_eq!(r.experiences[0].next_zone, 2);
        assert_eq!(w.agents()[0].cumulative_revenue, 2.5);
    }

    #[test]
    fn all_busy_needs_no_actions() {
        let cfg = quiet(3, 5);
        let mut w = WorldState::reset_with_positions(&cfg, 0, &[0, 0, 0]).unwrap();
        w.step_with(|_| 4).unwrap();
        let r = w.step_with(|_| unreachable!()).unwrap();
        assert_eq!(r.decisions, 0);
        assert!(r.experiences.is_empty());
    }

    #[test]
    fn full_supply_serves_every_job() {
        let cfg = quiet(5, 5);
        let mut w = WorldState::reset_with_positions(&cfg, 0, &[2; 5]).unwrap();
        for _ in 0..5 {
            w.inject_job(2, 0).unwrap();
        }
        assert!(w.begin_step().unwrap().is_empty());
        let r = w.finish_step(&[]).unwrap();
        assert_eq!(r.jobs_served, 5);
    }

    #[test]
    fn no_jobs_means_everyone_decides() {
        let cfg = quiet(4, 5);
        let mut w = WorldState::reset(&cfg, 3).unwrap();
        assert_eq!(w.begin_step().unwrap().len(), 4);
    }

    #[test]
    fn unserved_job_lives_exactly_ttl_steps() {
        for ttl in 1..5u32 {
            let cfg = EnvConfig { ttl, ..quiet(1, 5) };
            let mut w = WorldState::reset_with_positions(&cfg, 0, &[0]).unwrap();
            w.inject_job(3, 1).unwrap();
            for k in 0..ttl {
                assert_eq!(w.waiting_jobs().count(), 1, "ttl {ttl} step {k}");
                let r = w.step_with(|o| o.zone).unwrap();
                assert_eq!(r.jobs_expired, usize::from(k + 1 == ttl));
            }
            assert_eq!(w.waiting_jobs().count(), 0);
        }
    }

    #[test]
    fn experience_chain_matches_next_observation() {
        let cfg = EnvConfig {
            trip_pattern: TripPattern::Uniform,
            dar: Some(0.8),
            ..EnvConfig::default()
        };
        let mut w = WorldState::reset(&cfg, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut last_obs: Vec<Option<Observation>> = vec![None; 20];
        let mut log: Vec<Vec<Experience>> = vec![Vec::new(); 20];
        for _ in 0..2000 {
            let eligible = w.begin_step().unwrap();
            let acts: Vec<Action> = eligible
                .iter()
                .map(|o| Action {
                    agent: o.agent,
                    target: rng.gen_range(0..10),
                })
                .collect();
            let r = w.finish_step(&acts).unwrap();
            for e in &r.experiences {
                let prev = last_obs[e.agent].expect("experience without a prior decision");
                assert_eq!(
                    (prev.zone, prev.local_count, prev.time),
                    (e.zone, e.local_count, e.decided_at)
                );
                log[e.agent].push(*e);
            }
            for o in eligible {
                last_obs[o.agent] = Some(o);
            }
        }
        for chain in &log {
            assert!(chain.len() > 10);
            for pair in chain.windows(2) {
                assert_eq!(pair[0].next_observation().zone, pair[1].zone);
                assert_eq!(pair[0].next_count, pair[1].local_count);
                assert_eq!(pair[0].next_decision_at, pair[1].decided_at);
            }
        }
    }
}
