use serde::{Deserialize, Serialize};

use crate::error::EvolutionError;

/// Parameters of the per-request genetic algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations_max: u32,
    /// Early-stop fitness level (θ).
    pub fitness_threshold: f64,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_insert_rate: f64,
    pub mutation_delete_rate: f64,
    pub mutation_replace_rate: f64,
    /// Hard cap on sequence length.
    pub max_length: usize,
    /// Fitness penalty per agent beyond the parsimony baseline.
    pub parsimony: f64,
    /// Probability that an individual longer than the generation mean is
    /// evaluated at all; 1.0 disables the mechanism.
    pub eval_probability: f64,
    /// Usage count at which the usage ramp reaches half of its maximum weight.
    pub usage_halfsat: u32,
    pub usage_weight_max: f64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations_max: 100,
            fitness_threshold: 0.95,
            tournament_size: 2,
            crossover_rate: 0.7,
            mutation_insert_rate: 0.1,
            mutation_delete_rate: 0.1,
            mutation_replace_rate: 0.1,
            max_length: 16,
            parsimony: 0.02,
            eval_probability: 1.0,
            usage_halfsat: 5,
            usage_weight_max: 0.3,
            rng_seed: 0,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> EvolutionError {
    EvolutionError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn unit(field: &'static str, v: f64) -> Result<(), EvolutionError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} is outside [0, 1]")))
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.population_size == 0 {
            return Err(invalid("population_size", "must be positive"));
        }
        if self.generations_max == 0 {
            return Err(invalid("generations_max", "must be positive"));
        }
        if !(self.fitness_threshold > 0.0 && self.fitness_threshold <= 1.0) {
            return Err(invalid(
                "fitness_threshold",
                format!("{} is outside (0, 1]", self.fitness_threshold),
            ));
        }
        if self.tournament_size < 2 {
            return Err(invalid("tournament_size", "must be at least 2"));
        }
        unit("crossover_rate", self.crossover_rate)?;
        unit("mutation_insert_rate", self.mutation_insert_rate)?;
        unit("mutation_delete_rate", self.mutation_delete_rate)?;
        unit("mutation_replace_rate", self.mutation_replace_rate)?;
        if self.max_length == 0 {
            return Err(invalid("max_length", "must be positive"));
        }
        if !(self.parsimony >= 0.0 && self.parsimony.is_finite()) {
            return Err(invalid("parsimony", "must be a finite non-negative number"));
        }
        if !(self.eval_probability > 0.0 && self.eval_probability <= 1.0) {
            return Err(invalid(
                "eval_probability",
                format!("{} is outside (0, 1]", self.eval_probability),
            ));
        }
        if self.usage_halfsat == 0 {
            return Err(invalid("usage_halfsat", "must be positive"));
        }
        if !(self.usage_weight_max >= 0.0 && self.usage_weight_max < 1.0) {
            return Err(invalid(
                "usage_weight_max",
                format!("{} is outside [0, 1)", self.usage_weight_max),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        GaConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let bad = [
            GaConfig {
                population_size: 0,
                ..Default::default()
            },
            GaConfig {
                fitness_threshold: 0.0,
                ..Default::default()
            },
            GaConfig {
                tournament_size: 1,
                ..Default::default()
            },
            GaConfig {
                crossover_rate: 1.5,
                ..Default::default()
            },
            GaConfig {
                eval_probability: 0.0,
                ..Default::default()
            },
            GaConfig {
                usage_weight_max: 1.0,
                ..Default::default()
            },
            GaConfig {
                parsimony: f64::NAN,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
