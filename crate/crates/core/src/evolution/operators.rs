//! Variation and selection operators over agent sequences.

use rand::Rng;

use super::{EvaluatedIndividual, GaConfig};
use crate::model::{AgentId, AgentSequence};

/// One-point crossover with explicit cut points: `p1[..c1] ++ p2[c2..]`.
///
/// An empty child falls back to the first agent of `p1`; a child longer than
/// `max_length` is truncated.
pub fn crossover_at(
    p1: &AgentSequence,
    p2: &AgentSequence,
    c1: usize,
    c2: usize,
    max_length: usize,
) -> AgentSequence {
    let c1 = c1.min(p1.len());
    let c2 = c2.min(p2.len());
    let mut agents: Vec<AgentId> = p1.agents[..c1].iter().chain(&p2.agents[c2..]).copied().collect();
    let mut provenance = Vec::new();
    if agents.is_empty() {
        agents.push(p1.agents[0]);
        provenance.extend_from_slice(&p1.provenance);
    } else {
        if c1 > 0 {
            provenance.extend_from_slice(&p1.provenance);
        }
        if c2 < p2.len() {
            provenance.extend_from_slice(&p2.provenance);
        }
    }
    agents.truncate(max_length);
    AgentSequence {
        agents,
        provenance: Vec::new(),
    }
    .with_provenance(provenance)
}

pub fn crossover<R: Rng + ?Sized>(
    p1: &AgentSequence,
    p2: &AgentSequence,
    max_length: usize,
    rng: &mut R,
) -> AgentSequence {
    let c1 = rng.random_range(0..=p1.len());
    let c2 = rng.random_range(0..=p2.len());
    crossover_at(p1, p2, c1, c2, max_length)
}

/// Inserts `agent` before position `pos`; no-op at the length cap.
pub fn insert_at(seq: &mut AgentSequence, pos: usize, agent: AgentId, max_length: usize) {
    if seq.len() < max_length {
        seq.agents.insert(pos.min(seq.len()), agent);
    }
}

/// Removes position `pos`; never empties the sequence.
pub fn delete_at(seq: &mut AgentSequence, pos: usize) {
    if seq.len() > 1 && pos < seq.len() {
        seq.agents.remove(pos);
    }
}

pub fn replace_at(seq: &mut AgentSequence, pos: usize, agent: AgentId) {
    if let Some(slot) = seq.agents.get_mut(pos) {
        *slot = agent;
    }
}

/// Applies insert, delete and replace mutations, each independently with its
/// configured probability. `pool` must be non-empty.
pub fn mutate<R: Rng + ?Sized>(
    mut seq: AgentSequence,
    pool: &[AgentId],
    cfg: &GaConfig,
    rng: &mut R,
) -> AgentSequence {
    debug_assert!(!pool.is_empty());
    if rng.random_bool(cfg.mutation_insert_rate) && seq.len() < cfg.max_length {
        let pos = rng.random_range(0..=seq.len());
        let agent = pool[rng.random_range(0..pool.len())];
        insert_at(&mut seq, pos, agent, cfg.max_length);
    }
    if rng.random_bool(cfg.mutation_delete_rate) && seq.len() > 1 {
        let pos = rng.random_range(0..seq.len());
        delete_at(&mut seq, pos);
    }
    if rng.random_bool(cfg.mutation_replace_rate) {
        let pos = rng.random_range(0..seq.len());
        let agent = pool[rng.random_range(0..pool.len())];
        replace_at(&mut seq, pos, agent);
    }
    seq
}

/// Index of the best individual: highest fitness, then shortest, then earliest.
pub fn best_index(individuals: &[EvaluatedIndividual]) -> Option<usize> {
    (0..individuals.len()).min_by(|&a, &b| {
        individuals[a]
            .rank_cmp(&individuals[b])
            .then_with(|| a.cmp(&b))
    })
}

/// Draws `tournament_size` contestants uniformly with replacement and returns
/// the index of the winner.
pub fn tournament_index<R: Rng + ?Sized>(
    individuals: &[EvaluatedIndividual],
    tournament_size: usize,
    rng: &mut R,
) -> usize {
    let mut winner = rng.random_range(0..individuals.len());
    for _ in 1..tournament_size {
        let c = rng.random_range(0..individuals.len());
        let ord = individuals[c]
            .rank_cmp(&individuals[winner])
            .then_with(|| c.cmp(&winner));
        if ord.is_lt() {
            winner = c;
        }
    }
    winner
}

pub fn tournament_select<'a, R: Rng + ?Sized>(
    individuals: &'a [EvaluatedIndividual],
    cfg: &GaConfig,
    rng: &mut R,
) -> &'a AgentSequence {
    &individuals[tournament_index(individuals, cfg.tournament_size, rng)].seq
}
