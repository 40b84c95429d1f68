//! Stochastic, TTL-bounded demand generation.

use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Poisson;

use super::config::{ArrivalSchedule, EnvConfig, TripPattern};
use super::zones::ZoneMap;
use crate::error::{Error, Result};

/// A unit of demand waiting in its origin zone.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub origin: usize,
    pub destination: usize,
    pub revenue: f64,
    pub remaining_ttl: u32,
    pub created_at: u64,
}

#[derive(Debug, Clone)]
pub struct DemandModel {
    base_rates: Vec<f64>,
    schedule: ArrivalSchedule,
    period: u64,
    amplitude: f64,
    ttl: u32,
    destinations: Vec<Vec<f64>>,
    samplers: Vec<WeightedIndex<f64>>,
    static_poisson: Vec<Option<Poisson<f64>>>,
}

impl DemandModel {
    pub fn from_config(cfg: &EnvConfig, zones: &ZoneMap) -> Result<DemandModel> {
        let base_rates = cfg.mean_rates()?;
        let destinations = match &cfg.destinations {
            Some(rows) => rows
                .iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|p| p / s).collect()
                })
                .collect(),
            None => trip_pattern_destinations(zones, cfg.trip_pattern, cfg.mean_trip_distance, &cfg.long_trip_zones)?,
        };
        let samplers = destinations
            .iter()
            .map(|row: &Vec<f64>| WeightedIndex::new(row).map_err(|e| Error::Config(format!("destination row: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let static_poisson = base_rates
            .iter()
            .map(|&r| if r > 0.0 { Poisson::new(r).ok() } else { None })
            .collect();
        Ok(DemandModel {
            base_rates,
            schedule: cfg.arrival,
            period: cfg.arrival_period,
            amplitude: cfg.arrival_amplitude,
            ttl: cfg.ttl,
            destinations,
            samplers,
            static_poisson,
        })
    }

    pub fn ttl(&self) -> u32 {
        self.ttl
    }

    pub fn num_zones(&self) -> usize {
        self.base_rates.len()
    }

    /// Arrival rate of zone `z` at time `t`.
    pub fn rate(&self, z: usize, t: u64) -> f64 {
        let base = self.base_rates[z];
        match self.schedule {
            ArrivalSchedule::Static => base,
            ArrivalSchedule::Alternating => {
                if t.is_multiple_of(2) {
                    2.0 * base
                } else {
                    0.0
                }
            }
            ArrivalSchedule::Sinusoidal => {
                let phase = 2.0 * PI * z as f64 / self.num_zones() as f64;
                let angle = 2.0 * PI * (t % self.period) as f64 / self.period as f64 + phase;
                (base * (1.0 + self.amplitude * angle.sin())).max(0.0)
            }
        }
    }

    pub fn mean_rate(&self, z: usize) -> f64 {
        self.base_rates[z]
    }

    pub fn destination_distribution(&self, origin: usize) -> &[f64] {
        &self.destinations[origin]
    }

    pub fn expected_trip_distance(&self, origin: usize, zones: &ZoneMap) -> f64 {
        self.destinations[origin]
            .iter()
            .enumerate()
            .map(|(d, p)| p * zones.distance(origin, d) as f64)
            .sum()
    }

    /// Draw the jobs arriving at time `t`, zone by zone.
    pub fn generate<R: Rng>(&self, t: u64, zones: &ZoneMap, rng: &mut R) -> Vec<Job> {
        let mut jobs = Vec::new();
        for z in 0..self.num_zones() {
            let count = match self.schedule {
                ArrivalSchedule::Static => match &self.static_poisson[z] {
                    Some(p) => p.sample(rng) as u64,
                    None => 0,
                },
                _ => {
                    let rate = self.rate(z, t);
                    if rate > 0.0 {
                        Poisson::new(rate).map(|p| p.sample(rng) as u64).unwrap_or(0)
                    } else {
                        0
                    }
                }
            };
            for _ in 0..count {
                let destination = self.samplers[z].sample(rng);
                jobs.push(Job {
                    origin: z,
                    destination,
                    revenue: zones.base_revenue(z, destination),
                    remaining_ttl: self.ttl,
                    created_at: t,
                });
            }
        }
        jobs
    }
}

/// Destination distributions `p(d | o) ∝ exp(eta_o * dist(o, d))` with `eta_o`
/// solved per origin so the expected trip distance hits a target. Under the
/// uniform pattern every origin targets `mean_distance` (capped so that every
/// origin can reach it); under the non-uniform pattern the long-trip origins
/// target 2.2 times that.
pub fn trip_pattern_destinations(
    zones: &ZoneMap,
    pattern: TripPattern,
    mean_distance: f64,
    long_trip_zones: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let n = zones.num_zones();
    let min_reach = (0..n).map(|o| zones.max_distance_from(o)).min().unwrap_or(1) as f64;
    let short = mean_distance.min(0.9 * min_reach);

    let targets: Vec<f64> = match pattern {
        TripPattern::Uniform => vec![short; n],
        TripPattern::NonUniform => (0..n)
            .map(|o| {
                if long_trip_zones.contains(&o) {
                    (2.2 * short).min(0.95 * zones.max_distance_from(o) as f64)
                } else {
                    short
                }
            })
            .collect(),
    };

    let rows: Vec<Vec<f64>> = (0..n).map(|o| tilted_row(zones, o, targets[o])).collect();

    if pattern == TripPattern::NonUniform {
        let mean = |o: usize| -> f64 {
            rows[o]
                .iter()
                .enumerate()
                .map(|(d, p)| p * zones.distance(o, d) as f64)
                .sum()
        };
        let longest_short = (0..n)
            .filter(|o| !long_trip_zones.contains(o))
            .map(mean)
            .fold(0.0, f64::max);
        for &o in long_trip_zones {
            if mean(o) < 2.0 * longest_short {
                return Err(Error::Config(format!(
                    "zone {o} cannot reach twice the short-trip distance on this grid"
                )));
            }
        }
    }
    Ok(rows)
}

fn tilted_row(zones: &ZoneMap, origin: usize, target: f64) -> Vec<f64> {
    let n = zones.num_zones();
    let dist: Vec<f64> = (0..n).map(|d| zones.distance(origin, d) as f64).collect();
    let row_for = |eta: f64| -> Vec<f64> {
        let max = dist.iter().map(|d| eta * d).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = dist.iter().map(|d| (eta * d - max).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    let mean_for = |eta: f64| -> f64 { row_for(eta).iter().zip(&dist).map(|(p, d)| p * d).sum() };
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_for(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    row_for(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(cfg: &EnvConfig) -> (ZoneMap, DemandModel) {
        let zones = ZoneMap::from_config(cfg);
        let demand = DemandModel::from_config(cfg, &zones).unwrap();
        (zones, demand)
    }

    #[test]
    fn uniform_pattern_equalizes_trip_distance() {
        for (w, h) in [(5, 2), (4, 4), (3, 5)] {
            let cfg = EnvConfig {
                grid_width: w,
                grid_height: h,
                ..EnvConfig::default()
            };
            let (zones, demand) = model(&cfg);
            let means: Vec<f64> = (0..zones.num_zones())
                .map(|o| demand.expected_trip_distance(o, &zones))
                .collect();
            let avg = means.iter().sum::<f64>() / means.len() as f64;
            for m in &means {
                assert!((m - avg).abs() <= 0.05 * avg, "{means:?}");
            }
            for o in 0..zones.num_zones() {
                let s: f64 = demand.destination_distribution(o).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_uniform_pattern_doubles_long_trip_distance() {
        let cfg = EnvConfig {
            grid_width: 5,
            grid_height: 3,
            trip_pattern: TripPattern::NonUniform,
            long_trip_zones: vec![0, 14],
            ..EnvConfig::default()
        };
        let (zones, demand) = model(&cfg);
        let short = (1..14)
            .map(|o| demand.expected_trip_distance(o, &zones))
            .fold(0.0, f64::max);
        for o in [0, 14] {
            assert!(demand.expected_trip_distance(o, &zones) >= 2.0 * short);
        }
    }

    #[test]
    fn zero_rates_generate_nothing() {
        let cfg = EnvConfig {
            dar: Some(0.0),
            ..EnvConfig::default()
        };
        let (zones, demand) = model(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..1000 {
            assert!(demand.generate(t, &zones, &mut rng).is_empty());
        }
    }

    #[test]
    fn alternating_schedule_is_silent_on_odd_steps() {
        let cfg = EnvConfig {
            arrival: ArrivalSchedule::Alternating,
            dar: Some(2.0),
            ..EnvConfig::default()
        };
        let (zones, demand) = model(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut even = 0;
        for t in 0..400 {
            let jobs = demand.generate(t, &zones, &mut rng);
            if t % 2 == 1 {
                assert!(jobs.is_empty());
            } else {
                even += jobs.len();
            }
        }
        assert!(even > 0);
    }

    #[test]
    fn sinusoidal_rates_average_to_base() {
        let cfg = EnvConfig {
            arrival: ArrivalSchedule::Sinusoidal,
            arrival_period: 50,
            ..EnvConfig::default()
        };
        let (_, demand) = model(&cfg);
        for z in 0..10 {
            let mean: f64 = (0..50).map(|t| demand.rate(z, t)).sum::<f64>() / 50.0;
            assert!((mean - demand.mean_rate(z)).abs() < 1e-9);
        }
    }

    #[test]
    fn jobs_carry_distance_revenue_and_full_ttl() {
        let cfg = EnvConfig {
            ttl: 4,
            ..EnvConfig::default()
        };
        let (zones, demand) = model(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let jobs = demand.generate(7, &zones, &mut rng);
        assert!(!jobs.is_empty());
        for j in jobs {
            assert_eq!(j.remaining_ttl, 4);
            assert_eq!(j.created_at, 7);
            assert_eq!(j.revenue, zones.base_revenue(j.origin, j.destination));
        }
    }
}
