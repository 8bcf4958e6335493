//! Simulation configuration and its flat `key = value` text format.
//!
//! ```text
//! # comments run to end of line
//! ga.population_size = 50
//! workload.request_rate = 0.3
//! habitat.p_min = 0.05
//! ```
//!
//! Keys are grouped under `ga.`, `habitat.`, `workload.` and `ecosystem.`;
//! every key is optional and falls back to its default.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, EvolutionError};
use crate::evolution::GaConfig;
use crate::habitat::HabitatParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub alphabet_size: u32,
    pub communities: u32,
    pub users_per_community: u32,
    /// Tokens in each community's (disjoint) token pool.
    pub community_pool_size: u32,
    pub agents_per_user: u32,
    pub description_size_min: u32,
    pub description_size_max: u32,
    /// Probability that a user submits a request in a round.
    pub request_rate: f64,
    pub request_size_min: u32,
    pub request_size_max: u32,
    /// Probability that a request token is drawn from outside the community
    /// pool.
    pub noise_rate: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            alphabet_size: 64,
            communities: 3,
            users_per_community: 5,
            community_pool_size: 6,
            agents_per_user: 3,
            description_size_min: 1,
            description_size_max: 3,
            request_rate: 0.3,
            request_size_min: 2,
            request_size_max: 5,
            noise_rate: 0.1,
        }
    }
}

impl WorkloadConfig {
    pub fn user_count(&self) -> u32 {
        self.communities * self.users_per_community
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcosystemConfig {
    /// Inter-habitat transfer of agents and sequences, link creation and
    /// Hebbian updates. Off isolates every habitat.
    pub migration_enabled: bool,
    /// Fitness a best sequence needs to be executed; defaults to the GA
    /// early-stop threshold.
    pub execution_threshold: Option<f64>,
}

impl Default for EcosystemConfig {
    fn default() -> Self {
        Self {
            migration_enabled: true,
            execution_threshold: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub ga: GaConfig,
    pub habitat: HabitatParams,
    pub workload: WorkloadConfig,
    pub ecosystem: EcosystemConfig,
}

fn parse_value<T: FromStr>(path: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse()
        .map_err(|_| ConfigError::field(path, format!("cannot parse {raw:?} as {}", std::any::type_name::<T>())))
}

fn parse_bool(path: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::field(path, format!("cannot parse {raw:?} as a boolean"))),
    }
}

impl SimConfig {
    pub fn execution_threshold(&self) -> f64 {
        self.ecosystem.execution_threshold.unwrap_or(self.ga.fitness_threshold)
    }

    /// Parses the text format. Later duplicates of a key are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    reason: format!("expected `key = value`, found {line:?}"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    reason: "missing key".into(),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::field(key, "missing value"));
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::field(key, format!("duplicate key on line {line_no}")));
            }
            seen.push(key.to_string());
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, crate::SimError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text)?)
    }

    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let ga = &mut self.ga;
        let hb = &mut self.habitat;
        let wl = &mut self.workload;
        match key {
            "ga.population_size" => ga.population_size = parse_value(key, v)?,
            "ga.generations_max" => ga.generations_max = parse_value(key, v)?,
            "ga.fitness_threshold" => ga.fitness_threshold = parse_value(key, v)?,
            "ga.tournament_size" => ga.tournament_size = parse_value(key, v)?,
            "ga.crossover_rate" => ga.crossover_rate = parse_value(key, v)?,
            "ga.mutation_insert_rate" => ga.mutation_insert_rate = parse_value(key, v)?,
            "ga.mutation_delete_rate" => ga.mutation_delete_rate = parse_value(key, v)?,
            "ga.mutation_replace_rate" => ga.mutation_replace_rate = parse_value(key, v)?,
            "ga.max_length" => ga.max_length = parse_value(key, v)?,
            "ga.parsimony" => ga.parsimony = parse_value(key, v)?,
            "ga.eval_probability" => ga.eval_probability = parse_value(key, v)?,
            "ga.usage_halfsat" => ga.usage_halfsat = parse_value(key, v)?,
            "ga.usage_weight_max" => ga.usage_weight_max = parse_value(key, v)?,
            "habitat.p_min" => hb.p_min = parse_value(key, v)?,
            "habitat.eta" => hb.eta = parse_value(key, v)?,
            "habitat.p0" => hb.p0 = parse_value(key, v)?,
            "habitat.join_degree" => hb.join_degree = parse_value(key, v)?,
            "habitat.unused_threshold" => hb.unused_threshold = parse_value(key, v)?,
            "habitat.escape_min" => hb.escape_min = parse_value(key, v)?,
            "workload.alphabet_size" => wl.alphabet_size = parse_value(key, v)?,
            "workload.communities" => wl.communities = parse_value(key, v)?,
            "workload.users_per_community" => wl.users_per_community = parse_value(key, v)?,
            "workload.community_pool_size" => wl.community_pool_size = parse_value(key, v)?,
            "workload.agents_per_user" => wl.agents_per_user = parse_value(key, v)?,
            "workload.description_size_min" => wl.description_size_min = parse_value(key, v)?,
            "workload.description_size_max" => wl.description_size_max = parse_value(key, v)?,
            "workload.request_rate" => wl.request_rate = parse_value(key, v)?,
            "workload.request_size_min" => wl.request_size_min = parse_value(key, v)?,
            "workload.request_size_max" => wl.request_size_max = parse_value(key, v)?,
            "workload.noise_rate" => wl.noise_rate = parse_value(key, v)?,
            "ecosystem.migration_enabled" => self.ecosystem.migration_enabled = parse_bool(key, v)?,
            "ecosystem.execution_threshold" => self.ecosystem.execution_threshold = Some(parse_value(key, v)?),
            _ => return Err(ConfigError::UnknownKey { path: key.to_string() }),
        }
        Ok(())
    }

    /// Checks every range constraint; errors name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ga.validate().map_err(|e| match e {
            EvolutionError::InvalidConfig { field, reason } => ConfigError::field(format!("ga.{field}"), reason),
            other => ConfigError::field("ga", other.to_string()),
        })?;

        let hb = &self.habitat;
        let unit_open = |path: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(ConfigError::field(path, format!("{v} is outside (0, 1)")))
            }
        };
        let unit = |path: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::field(path, format!("{v} is outside [0, 1]")))
            }
        };
        unit("habitat.p_min", hb.p_min)?;
        unit_open("habitat.eta", hb.eta)?;
        unit("habitat.p0", hb.p0)?;
        if hb.p0 < hb.p_min {
            return Err(ConfigError::field("habitat.p0", "must be at least habitat.p_min"));
        }
        if hb.unused_threshold == 0 {
            return Err(ConfigError::field("habitat.unused_threshold", "must be positive"));
        }
        if hb.escape_min == 0 {
            return Err(ConfigError::field("habitat.escape_min", "must be positive"));
        }

        let wl = &self.workload;
        if wl.alphabet_size == 0 {
            return Err(ConfigError::field("workload.alphabet_size", "must be positive"));
        }
        if wl.communities == 0 {
            return Err(ConfigError::field("workload.communities", "must be positive"));
        }
        if wl.users_per_community == 0 {
            return Err(ConfigError::field("workload.users_per_community", "must be positive"));
        }
        if wl.community_pool_size == 0 {
            return Err(ConfigError::field("workload.community_pool_size", "must be positive"));
        }
        if u64::from(wl.communities) * u64::from(wl.community_pool_size) > u64::from(wl.alphabet_size) {
            return Err(ConfigError::field(
                "workload.community_pool_size",
                format!(
                    "{} communities of {} tokens do not fit in an alphabet of {}",
                    wl.communities, wl.community_pool_size, wl.alphabet_size
                ),
            ));
        }
        if wl.description_size_min == 0 || wl.description_size_min > wl.description_size_max {
            return Err(ConfigError::field(
                "workload.description_size_min",
                "must be positive and at most workload.description_size_max",
            ));
        }
        if wl.description_size_max > wl.community_pool_size {
            return Err(ConfigError::field(
                "workload.description_size_max",
                "cannot exceed workload.community_pool_size",
            ));
        }
        unit("workload.request_rate", wl.request_rate)?;
        if wl.request_size_min == 0 || wl.request_size_min > wl.request_size_max {
            return Err(ConfigError::field(
                "workload.request_size_min",
                "must be positive and at most workload.request_size_max",
            ));
        }
        if wl.request_size_max > wl.alphabet_size {
            return Err(ConfigError::field(
                "workload.request_size_max",
                "cannot exceed workload.alphabet_size",
            ));
        }
        unit("workload.noise_rate", wl.noise_rate)?;
        if wl.noise_rate > 0.0 && wl.community_pool_size >= wl.alphabet_size {
            return Err(ConfigError::field(
                "workload.noise_rate",
                "noise needs tokens outside the community pool",
            ));
        }
        if let Some(t) = self.ecosystem.execution_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(ConfigError::field(
                    "ecosystem.execution_threshold",
                    format!("{t} is outside (0, 1]"),
                ));
            }
        }
        Ok(())
    }

    /// Renders every key in the text format; `parse` reads it back exactly.
    pub fn to_text(&self) -> String {
        let ga = &self.ga;
        let hb = &self.habitat;
        let wl = &self.workload;
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("ga.population_size", &ga.population_size);
        kv("ga.generations_max", &ga.generations_max);
        kv("ga.fitness_threshold", &ga.fitness_threshold);
        kv("ga.tournament_size", &ga.tournament_size);
        kv("ga.crossover_rate", &ga.crossover_rate);
        kv("ga.mutation_insert_rate", &ga.mutation_insert_rate);
        kv("ga.mutation_delete_rate", &ga.mutation_delete_rate);
        kv("ga.mutation_replace_rate", &ga.mutation_replace_rate);
        kv("ga.max_length", &ga.max_length);
        kv("ga.parsimony", &ga.parsimony);
        kv("ga.eval_probability", &ga.eval_probability);
        kv("ga.usage_halfsat", &ga.usage_halfsat);
        kv("ga.usage_weight_max", &ga.usage_weight_max);
        kv("habitat.p_min", &hb.p_min);
        kv("habitat.eta", &hb.eta);
        kv("habitat.p0", &hb.p0);
        kv("habitat.join_degree", &hb.join_degree);
        kv("habitat.unused_threshold", &hb.unused_threshold);
        kv("habitat.escape_min", &hb.escape_min);
        kv("workload.alphabet_size", &wl.alphabet_size);
        kv("workload.communities", &wl.communities);
        kv("workload.users_per_community", &wl.users_per_community);
        kv("workload.community_pool_size", &wl.community_pool_size);
        kv("workload.agents_per_user", &wl.agents_per_user);
        kv("workload.description_size_min", &wl.description_size_min);
        kv("workload.description_size_max", &wl.description_size_max);
        kv("workload.request_rate", &wl.request_rate);
        kv("workload.request_size_min", &wl.request_size_min);
        kv("workload.request_size_max", &wl.request_size_max);
        kv("workload.noise_rate", &wl.noise_rate);
        kv("ecosystem.migration_enabled", &self.ecosystem.migration_enabled);
        if let Some(t) = self.ecosystem.execution_threshold {
            kv("ecosystem.execution_threshold", &t);
        }
        out
    }
}
