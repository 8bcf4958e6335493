use thiserror::Error;

use crate::model::{AgentId, HabitatId, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("semantic description must contain at least one token")]
    EmptyDescription,
    #[error("token {token} is outside the attribute alphabet (size {alphabet_size})")]
    TokenOutOfRange { token: Token, alphabet_size: u32 },
    #[error("agent sequence must contain at least one agent")]
    EmptySequence,
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("cannot seed a population from an empty agent pool")]
    EmptyPool,
    #[error("oracle guard: pool of {pool} agents with length bound {l_bound} exceeds the limit of 8 agents and length 4")]
    OracleTooLarge { pool: usize, l_bound: usize },
    #[error("invalid GA configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HabitatError {
    #[error("unknown habitat {0}")]
    UnknownHabitat(HabitatId),
    #[error("cannot clone connections into an empty ecosystem")]
    EmptyEcosystem,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Error loading a configuration file; carries the dotted key path when the
/// problem is with a specific field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{path}: {reason}")]
    Field { path: String, reason: String },
    #[error("{path}: unknown configuration key")]
    UnknownKey { path: String },
}

impl ConfigError {
    pub fn field(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Dotted key path of the offending field, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Field { path, .. } | ConfigError::UnknownKey { path } => Some(path),
            ConfigError::Syntax { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Habitat(#[from] HabitatError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("{what} {index}: {reason}")]
    Syntax {
        what: &'static str,
        index: usize,
        reason: String,
    },
    #[error("pool must contain at least one agent")]
    EmptyPool,
    #[error(transparent)]
    Model(#[from] ModelError),
}
