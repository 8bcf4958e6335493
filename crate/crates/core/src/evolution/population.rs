//! A Population evolving agent sequences for a single request.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fitness::{evaluate_fitness, pareto_front, FitnessContext, UsageLookup};
use super::operators::{best_index, crossover, mutate, tournament_index};
use super::{EvaluatedIndividual, GaConfig};
use crate::error::EvolutionError;
use crate::model::{coverage, AgentId, AgentSequence, DescriptionLookup, SemanticDescription};

/// Longest fresh random sequence created at seeding time.
const SEED_LENGTH_MAX: usize = 4;

/// Read-only view of a habitat's Agent-pool taken before evolution starts.
#[derive(Clone, Copy)]
pub struct PoolSnapshot<'a> {
    /// Locally resident agents, the material for fresh sequences and mutation.
    pub agents: &'a [AgentId],
    /// Registered sequences; members may live in other habitats.
    pub sequences: &'a [AgentSequence],
    pub descriptions: &'a (dyn DescriptionLookup + Sync),
    pub usage: &'a (dyn UsageLookup + Sync),
}

impl PoolSnapshot<'_> {
    /// Mean description size over the resident agents, 0 for an empty pool.
    pub fn mean_description_size(&self) -> Result<f64, EvolutionError> {
        if self.agents.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0usize;
        for &id in self.agents {
            total += self.descriptions.resolve(id)?.len();
        }
        Ok(total as f64 / self.agents.len() as f64)
    }

    fn context<'b>(
        &'b self,
        request: &'b SemanticDescription,
        cfg: &'b GaConfig,
        mean_description_size: f64,
    ) -> FitnessContext<'b> {
        FitnessContext {
            request,
            descriptions: self.descriptions,
            usage: self.usage,
            mean_description_size,
            cfg,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Population {
    pub request: SemanticDescription,
    pub individuals: Vec<EvaluatedIndividual>,
    pub generation: u32,
    mean_description_size: f64,
    #[serde(skip, default = "unseeded")]
    rng: ChaCha8Rng,
}

fn unseeded() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl Population {
    pub fn best(&self) -> &EvaluatedIndividual {
        &self.individuals[best_index(&self.individuals).expect("population is never empty")]
    }

    pub fn mean_length(&self) -> f64 {
        mean_length(self.individuals.iter().map(|i| &i.seq))
    }

    pub fn pareto_front(&self) -> Vec<usize> {
        pareto_front(&self.individuals)
    }
}

fn mean_length<'a>(seqs: impl Iterator<Item = &'a AgentSequence>) -> f64 {
    let (n, total) = seqs.fold((0usize, 0usize), |(n, t), s| (n + 1, t + s.len()));
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

fn evaluate_all(
    seqs: Vec<AgentSequence>,
    ctx: &FitnessContext<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EvaluatedIndividual>, EvolutionError> {
    let gen_mean = mean_length(seqs.iter());
    seqs.into_iter()
        .map(|s| evaluate_fitness(s, ctx, gen_mean, rng).map_err(EvolutionError::from))
        .collect()
}

/// Builds and evaluates generation 0 from the pool.
///
/// Each individual is, with equal probability, a registered sequence relevant
/// to the request (when any exists) or a fresh random sequence of 1 to 4
/// resident agents.
pub fn seed_population(
    pool: &PoolSnapshot<'_>,
    request: &SemanticDescription,
    cfg: &GaConfig,
) -> Result<Population, EvolutionError> {
    if pool.agents.is_empty() {
        return Err(EvolutionError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut relevant = Vec::new();
    for s in pool.sequences {
        match coverage(&s.agents, request, pool.descriptions) {
            Ok(c) if c > 0 => {
                let mut s = s.clone();
                s.agents.truncate(cfg.max_length);
                relevant.push(s);
            }
            Ok(_) => {}
            Err(e) => return Err(e.into()),
        }
    }

    let max_seed_len = SEED_LENGTH_MAX.min(cfg.max_length);
    let mut seqs = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        if !relevant.is_empty() && rng.random_bool(0.5) {
            seqs.push(relevant[rng.random_range(0..relevant.len())].clone());
        } else {
            let len = rng.random_range(1..=max_seed_len);
            let agents = (0..len)
                .map(|_| pool.agents[rng.random_range(0..pool.agents.len())])
                .collect();
            seqs.push(AgentSequence::new(agents)?);
        }
    }

    let mean_description_size = pool.mean_description_size()?;
    let ctx = pool.context(request, cfg, mean_description_size);
    let individuals = evaluate_all(seqs, &ctx, &mut rng)?;
    Ok(Population {
        request: request.clone(),
        individuals,
        generation: 0,
        mean_description_size,
        rng,
    })
}

/// Replaces the population with the next generation: one elite carried over
/// unchanged, the rest bred by tournament selection, crossover and mutation.
pub fn evolve_generation(
    pop: &mut Population,
    pool: &PoolSnapshot<'_>,
    cfg: &GaConfig,
) -> Result<(), EvolutionError> {
    if pool.agents.is_empty() {
        return Err(EvolutionError::EmptyPool);
    }
    let rng = &mut pop.rng;
    let elite = pop.individuals[best_index(&pop.individuals).expect("population is never empty")].clone();

    let mut children = Vec::with_capacity(pop.individuals.len().saturating_sub(1));
    for _ in 1..pop.individuals.len() {
        let p1 = &pop.individuals[tournament_index(&pop.individuals, cfg.tournament_size, rng)].seq;
        let child = if rng.random_bool(cfg.crossover_rate) {
            let p2 = &pop.individuals[tournament_index(&pop.individuals, cfg.tournament_size, rng)].seq;
            crossover(p1, p2, cfg.max_length, rng)
        } else {
            p1.clone()
        };
        children.push(mutate(child, pool.agents, cfg, rng));
    }

    let ctx = pool.context(&pop.request, cfg, pop.mean_description_size);
    let gen_mean = mean_length(std::iter::once(&elite.seq).chain(children.iter()));
    let mut next = Vec::with_capacity(pop.individuals.len());
    next.push(elite);
    for s in children {
        next.push(evaluate_fitness(s, &ctx, gen_mean, rng)?);
    }
    pop.individuals = next;
    pop.generation += 1;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_length: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolutionOutcome {
    /// Best individual seen over the whole run.
    pub best: EvaluatedIndividual,
    /// Generation at which the run stopped (0 when the seeded population
    /// already met the threshold).
    pub generations_used: u32,
    pub trajectory: Vec<GenerationStats>,
    pub final_mean_length: f64,
    pub pareto_front_size: usize,
    /// Longest sequence present in any generation of the run.
    pub max_length_seen: usize,
}

impl EvolutionOutcome {
    pub fn reached_threshold(&self, threshold: f64) -> bool {
        self.best.fitness >= threshold
    }
}

/// Evolves until the best fitness reaches the threshold or the generation
/// budget runs out.
pub fn run_evolution(
    pool: &PoolSnapshot<'_>,
    request: &SemanticDescription,
    cfg: &GaConfig,
) -> Result<EvolutionOutcome, EvolutionError> {
    let mut pop = seed_population(pool, request, cfg)?;
    let mut best = pop.best().clone();
    let mut max_length_seen = pop.individuals.iter().map(|i| i.len()).max().unwrap_or(0);
    let mut trajectory = vec![GenerationStats {
        generation: 0,
        best_fitness: best.fitness,
        mean_length: pop.mean_length(),
    }];

    while best.fitness < cfg.fitness_threshold && pop.generation < cfg.generations_max {
        evolve_generation(&mut pop, pool, cfg)?;
        let current = pop.best();
        if current.rank_cmp(&best).is_lt() {
            best = current.clone();
        }
        max_length_seen = max_length_seen.max(pop.individuals.iter().map(|i| i.len()).max().unwrap_or(0));
        trajectory.push(GenerationStats {
            generation: pop.generation,
            best_fitness: best.fitness,
            mean_length: pop.mean_length(),
        });
    }

    Ok(EvolutionOutcome {
        best,
        generations_used: pop.generation,
        trajectory,
        final_mean_length: pop.mean_length(),
        pareto_front_size: pop.pareto_front().len(),
        max_length_seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::NoUsage;
    use crate::model::Token;
    use std::collections::BTreeMap;

    fn desc(t: &[Token]) -> SemanticDescription {
        SemanticDescription::new(t.iter().copied(), 64).unwrap()
    }

    fn table(entries: &[&[Token]]) -> BTreeMap<AgentId, SemanticDescription> {
        entries
            .iter()
            .enumerate()
            .map(|(i, t)| (AgentId(i as u64), desc(t)))
            .collect()
    }

    fn ids(n: usize) -> Vec<AgentId> {
        (0..n as u64).map(AgentId).collect()
    }

    #[test]
    fn empty_pool_is_rejected() {
        let t = table(&[&[1]]);
        let pool = PoolSnapshot {
            agents: &[],
            sequences: &[],
            descriptions: &t,
            usage: &NoUsage,
        };
        let err = seed_population(&pool, &desc(&[1]), &GaConfig::default()).unwrap_err();
        assert_eq!(err, EvolutionError::EmptyPool);
    }

    #[test]
    fn fresh_seeds_have_lengths_one_to_four() {
        let t = table(&[&[1], &[2], &[3]]);
        let agents = ids(3);
        let pool = PoolSnapshot {
            agents: &agents,
            sequences: &[],
            descriptions: &t,
            usage: &NoUsage,
        };
        let pop = seed_population(&pool, &desc(&[1, 2]), &GaConfig::default()).unwrap();
        assert_eq!(pop.individuals.len(), 50);
        let lens: Vec<usize> = pop.individuals.iter().map(|i| i.len()).collect();
        assert!(lens.iter().all(|&l| (1..=4).contains(&l)));
        // All four lengths show up in a population of 50.
        for l in 1..=4 {
            assert!(lens.contains(&l), "length {l} missing from {lens:?}");
        }
        assert!(pop
            .individuals
            .iter()
            .flat_map(|i| &i.seq.agents)
            .all(|a| agents.contains(a)));
    }

    #[test]
    fn population_of_one() {
        let t = table(&[&[1]]);
        let agents = ids(1);
        let pool = PoolSnapshot {
            agents: &agents,
            sequences: &[],
            descriptions: &t,
            usage: &NoUsage,
        };
        let cfg = GaConfig {
            population_size: 1,
            ..Default::default()
        };
        let mut pop = seed_population(&pool, &desc(&[1]), &cfg).unwrap();
        assert_eq!(pop.individuals.len(), 1);
        evolve_generation(&mut pop, &pool, &cfg).unwrap();
        assert_eq!(pop.individuals.len(), 1);
    }

    #[test]
    fn registered_full_cover_is_seeded_in_expectation() {
        let t = table(&[&[1], &[2], &[3], &[1, 2, 3, 4]]);
        let agents = ids(3);
        let registered = vec![AgentSequence::new(vec![AgentId(3)]).unwrap()];
        let pool = PoolSnapshot {
            agents: &agents,
            sequences: &registered,
            descriptions: &t,
            usage: &NoUsage,
        };
        let req = desc(&[1, 2, 3, 4]);
        let mut total = 0usize;
        for seed in 0..100 {
            let cfg = GaConfig {
                rng_seed: seed,
                ..Default::default()
            };
            let pop = seed_population(&pool, &req, &cfg).unwrap();
            let n = pop.individuals.iter().filter(|i| i.seq.agents == [AgentId(3)]).count();
            assert!(n >= 1, "seed {seed}");
            total += n;
        }
        // Half of each population of 50 in expectation.
        let mean = total as f64 / 100.0;
        assert!((mean - 25.0).abs() < 2.0, "mean {mean}");
    }

    #[test]
    fn clones_of_the_optimum_are_a_fixed_point() {
        let t = table(&[&[1, 2], &[3]]);
        let agents = ids(2);
        let registered = vec![AgentSequence::new(vec![AgentId(0)]).unwrap()];
        let pool = PoolSnapshot {
            agents: &agents,
            sequences: &registered,
            descriptions: &t,
            usage: &NoUsage,
        };
        let cfg = GaConfig {
            crossover_rate: 0.0,
            mutation_insert_rate: 0.0,
            mutation_delete_rate: 0.0,
            mutation_replace_rate: 0.0,
            ..Default::default()
        };
        let mut pop = seed_population(&pool, &desc(&[1, 2]), &cfg).unwrap();
        for ind in &mut pop.individuals {
            ind.seq = registered[0].clone();
            ind.fitness = 1.0;
            ind.semantic_score = 1.0;
        }
        let before = pop.individuals.clone();
        evolve_generation(&mut pop, &pool, &cfg).unwrap();
        assert_eq!(pop.individuals, before);
        assert_eq!(pop.generation, 1);
    }

    #[test]
    fn next_generation_is_reproducible() {
        let t = table(&[&[1], &[2], &[3], &[4, 5], &[6]]);
        let agents = ids(5);
        let pool = PoolSnapshot {
            agents: &agents,
            sequences: &[],
            descriptions: &t,
            usage: &NoUsage,
        };
        let req = desc(&[1, 2, 5, 6]);
        let run = || {
            let cfg = GaConfig {
                rng_seed: 77,
                ..Default::default()
            };
            let mut pop = seed_population(&pool, &req, &cfg).unwrap();
            evolve_generation(&mut pop, &pool, &cfg).unwrap();
            serde_json::to_vec(&pop).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn exact_single_agent_converges_at_generation_zero() {
        let t = table(&[&[7]]);
        let agents = ids(1);
        let pool = PoolSnapshot {
            agents: &agents,
            sequences: &[],
            descriptions: &t,
            usage: &NoUsage,
        };
        let out = run_evolution(&pool, &desc(&[7]), &GaConfig::default()).unwrap();
        assert_eq!(out.generations_used, 0);
        assert_eq!(out.best.fitness, 1.0);
        assert_eq!(out.trajectory.len(), 1);
    }

    #[test]
    fn best_ever_is_non_decreasing() {
        let t = table(&[&[1], &[2], &[3], &[4], &[5, 6], &[9]]);
        let agents = ids(6);
        let pool = PoolSnapshot {
            agents: &agents,
            sequences: &[],
            descriptions: &t,
            usage: &NoUsage,
        };
        for seed in 0..10 {
            let cfg = GaConfig {
                rng_seed: seed,
                fitness_threshold: 1.0,
                generations_max: 30,
                eval_probability: 0.5,
                ..Default::default()
            };
            let out = run_evolution(&pool, &desc(&[1, 2, 3, 4, 5, 6, 7]), &cfg).unwrap();
            assert_eq!(out.generations_used, 30);
            for w in out.trajectory.windows(2) {
                assert!(w[1].best_fitness >= w[0].best_fitness);
            }
            assert!(out.best.fitness < 1.0);
            assert!(out.max_length_seen <= cfg.max_length);
        }
    }
}
