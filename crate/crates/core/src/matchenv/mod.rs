//! Anonymous multi-agent matching simulator.

pub mod config;
mod demand;
mod world;
mod zones;

pub use config::{dar, ArrivalSchedule, EnvConfig, RateProfile, TripPattern};
pub use demand::{trip_pattern_destinations, DemandModel, Job};
pub use world::{Action, AgentState, Experience, Observation, PopulationDistribution, StepReport, WorldState};
pub use zones::ZoneMap;
