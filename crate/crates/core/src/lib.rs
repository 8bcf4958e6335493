//! Simulator for a network of habitats that share migrating agents and evolve
//! agent sequences in response to user requests.

pub mod config;
pub mod ecosystem;
pub mod error;
pub mod evolution;
pub mod habitat;
pub mod instance;
pub mod metrics;
pub mod model;

pub use config::SimConfig;
pub use error::{ConfigError, EvolutionError, HabitatError, InstanceError, ModelError, SimError};
