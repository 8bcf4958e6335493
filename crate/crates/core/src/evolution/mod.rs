//! Per-request genetic algorithm over variable-length agent sequences.

mod config;
pub mod fitness;
pub mod operators;
pub mod oracle;
pub mod population;

pub use config::GaConfig;
pub use fitness::{
    dominates, evaluate_fitness, pareto_front, score_sequence, EvaluatedIndividual, FitnessContext, NoUsage,
    ObjectiveVector, UsageLookup,
};
pub use operators::{crossover, crossover_at, mutate, tournament_select};
pub use oracle::{brute_force_oracle, OracleResult, ORACLE_MAX_LENGTH, ORACLE_MAX_POOL};
pub use population::{
    evolve_generation, run_evolution, seed_population, EvolutionOutcome, GenerationStats, PoolSnapshot, Population,
};
