use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripPattern {
    /// Every origin has the same expected trip distance.
    Uniform,
    /// Designated long-trip origins get at least twice the expected distance.
    NonUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateProfile {
    Uniform,
    /// `hotspot_zones` receive `hotspot_weight` times the rate of other zones.
    Hotspot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalSchedule {
    Static,
    /// Twice the base rate on even steps, nothing on odd steps.
    Alternating,
    /// `base * (1 + amplitude * sin(2 pi t / period + 2 pi z / |Z|))`.
    Sinusoidal,
}

/// Environment section of an experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub num_agents: usize,
    /// Demand-to-agent ratio; the aggregate arrival rate is `dar * num_agents`.
    pub dar: Option<f64>,
    /// Explicit per-zone mean arrival rates (overrides `dar`).
    pub rates: Option<Vec<f64>>,
    pub rate_profile: RateProfile,
    pub hotspot_zones: Vec<usize>,
    pub hotspot_weight: f64,
    pub ttl: u32,
    pub trip_pattern: TripPattern,
    /// Target expected trip distance: for every origin under the uniform
    /// pattern, for the short-trip origins under the non-uniform pattern.
    pub mean_trip_distance: f64,
    pub long_trip_zones: Vec<usize>,
    /// Explicit per-origin destination distributions (overrides `trip_pattern`).
    pub destinations: Option<Vec<Vec<f64>>>,
    pub arrival: ArrivalSchedule,
    pub arrival_period: u64,
    pub arrival_amplitude: f64,
    pub kappa_t: f64,
    pub rho0: f64,
    pub rho1: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            grid_width: 5,
            grid_height: 2,
            num_agents: 20,
            dar: Some(0.6),
            rates: None,
            rate_profile: RateProfile::Uniform,
            hotspot_zones: Vec::new(),
            hotspot_weight: 3.0,
            ttl: 2,
            trip_pattern: TripPattern::Uniform,
            mean_trip_distance: 1.0,
            long_trip_zones: vec![0],
            destinations: None,
            arrival: ArrivalSchedule::Static,
            arrival_period: 100,
            arrival_amplitude: 0.8,
            kappa_t: 1.0,
            rho0: 1.0,
            rho1: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn num_zones(&self) -> usize {
        self.grid_width * self.grid_height
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_agents == 0 {
            return bad("env.num_agents must be at least 1".into());
        }
        if self.grid_width == 0 || self.grid_height == 0 || self.num_zones() < 2 {
            return bad(format!(
                "env grid {}x{} must contain at least 2 zones",
                self.grid_width, self.grid_height
            ));
        }
        if self.ttl == 0 {
            return bad("env.ttl must be positive".into());
        }
        let n = self.num_zones();
        match (&self.rates, self.dar) {
            (Some(rates), _) => {
                if rates.len() != n {
                    return bad(format!("env.rates has {} entries for {} zones", rates.len(), n));
                }
                if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
                    return bad("env.rates must be finite and nonnegative".into());
                }
            }
            (None, Some(dar)) => {
                if !dar.is_finite() || dar < 0.0 {
                    return bad(format!("env.dar must be nonnegative, got {dar}"));
                }
            }
            (None, None) => return bad("one of env.dar or env.rates is required".into()),
        }
        if self.rate_profile == RateProfile::Hotspot {
            if self.hotspot_zones.is_empty() {
                return bad("env.hotspot_zones must be non-empty for the hotspot profile".into());
            }
            if !(self.hotspot_weight > 0.0 && self.hotspot_weight.is_finite()) {
                return bad("env.hotspot_weight must be positive".into());
            }
        }
        if let Some(z) = self
            .hotspot_zones
            .iter()
            .chain(&self.long_trip_zones)
            .find(|&&z| z >= n)
        {
            return bad(format!("zone {z} is outside the {n}-zone grid"));
        }
        if let Some(rows) = &self.destinations {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return bad(format!("env.destinations must be a {n}x{n} matrix"));
            }
            for row in rows {
                let s: f64 = row.iter().sum();
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) || s <= 0.0 {
                    return bad("env.destinations rows must be nonnegative with positive sum".into());
                }
            }
        }
        if !(self.mean_trip_distance > 0.0 && self.mean_trip_distance.is_finite()) {
            return bad("env.mean_trip_distance must be positive".into());
        }
        if self.trip_pattern == TripPattern::NonUniform
            && self.destinations.is_none()
            && (self.long_trip_zones.is_empty() || self.long_trip_zones.len() >= n)
        {
            return bad("env.long_trip_zones must name some but not all zones".into());
        }
        if self.arrival == ArrivalSchedule::Sinusoidal {
            if self.arrival_period < 2 {
                return bad("env.arrival_period must be at least 2".into());
            }
            if !(0.0..=1.0).contains(&self.arrival_amplitude) {
                return bad("env.arrival_amplitude must lie in [0, 1]".into());
            }
        }
        if !(self.kappa_t > 0.0) || !(self.rho0 > 0.0) || !(self.rho1 > 0.0) {
            return bad("env.kappa_t, env.rho0 and env.rho1 must be positive".into());
        }
        Ok(())
    }

    /// Time-averaged mean arrival rate per zone.
    pub fn mean_rates(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some(rates) = &self.rates {
            return Ok(rates.clone());
        }
        let total = self.dar.unwrap_or(0.0) * self.num_agents as f64;
        let n = self.num_zones();
        let weights: Vec<f64> = (0..n)
            .map(|z| match self.rate_profile {
                RateProfile::Uniform => 1.0,
                RateProfile::Hotspot if self.hotspot_zones.contains(&z) => self.hotspot_weight,
                RateProfile::Hotspot => 1.0,
            })
            .collect();
        let wsum: f64 = weights.iter().sum();
        Ok(weights.iter().map(|w| total * w / wsum).collect())
    }
}

/// Demand-to-agent ratio: total time-averaged arrival rate per agent.
pub fn dar(config: &EnvConfig) -> Result<f64> {
    if config.num_agents == 0 {
        return Err(Error::Config("DAR is undefined without agents".into()));
    }
    let total: f64 = config.mean_rates()?.iter().sum();
    Ok(total / config.num_agents as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_rates(total: f64, agents: usize) -> EnvConfig {
        EnvConfig {
            num_agents: agents,
            dar: None,
            rates: Some(vec![total / 10.0; 10]),
            ..EnvConfig::default()
        }
    }

    #[test]
    fn dar_examples() {
        assert!((dar(&with_rates(20.0, 50)).unwrap() - 0.4).abs() < 1e-12);
        assert!((dar(&with_rates(12.5, 50)).unwrap() - 0.25).abs() < 1e-12);
        assert!((dar(&with_rates(15.0, 20)).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn dar_round_trips_through_profile() {
        let cfg = EnvConfig {
            rate_profile: RateProfile::Hotspot,
            hotspot_zones: vec![2, 7],
            dar: Some(0.6),
            ..EnvConfig::default()
        };
        assert!((dar(&cfg).unwrap() - 0.6).abs() < 1e-12);
        let rates = cfg.mean_rates().unwrap();
        assert!((rates[2] / rates[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_agents_is_rejected() {
        let cfg = EnvConfig {
            num_agents: 0,
            ..EnvConfig::default()
        };
        assert!(dar(&cfg).is_err());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_zone_grid_is_rejected() {
        let cfg = EnvConfig {
            grid_width: 1,
            grid_height: 1,
            ..EnvConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
