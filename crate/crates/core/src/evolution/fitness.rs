//! Scalar fitness of an agent sequence against a request.
//!
//! The score starts out purely semantic (coverage of the requested tokens)
//! and shifts weight onto observed usage as every member of the sequence
//! accumulates executions. A parsimony term charges for length beyond the
//! shortest plausible covering length, and oversized individuals may be left
//! unevaluated for a generation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GaConfig;
use crate::error::ModelError;
use crate::model::{coverage, AgentId, AgentSequence, DescriptionLookup, SemanticDescription};

/// Global execution counts per agent id.
pub trait UsageLookup {
    fn uses(&self, id: AgentId) -> u64;
}

impl UsageLookup for BTreeMap<AgentId, u64> {
    fn uses(&self, id: AgentId) -> u64 {
        self.get(&id).copied().unwrap_or(0)
    }
}

impl UsageLookup for HashMap<AgentId, u64> {
    fn uses(&self, id: AgentId) -> u64 {
        self.get(&id).copied().unwrap_or(0)
    }
}

/// Every agent unused.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoUsage;

impl UsageLookup for NoUsage {
    fn uses(&self, _: AgentId) -> u64 {
        0
    }
}

/// Everything fitness needs besides the sequence itself.
#[derive(Clone, Copy)]
pub struct FitnessContext<'a> {
    pub request: &'a SemanticDescription,
    pub descriptions: &'a (dyn DescriptionLookup + Sync),
    pub usage: &'a (dyn UsageLookup + Sync),
    /// Mean description size over the pool the population draws from.
    pub mean_description_size: f64,
    pub cfg: &'a GaConfig,
}

impl FitnessContext<'_> {
    /// Shortest length that could plausibly cover the request.
    pub fn parsimony_baseline(&self) -> usize {
        let d = if self.mean_description_size > 0.0 {
            self.mean_description_size
        } else {
            1.0
        };
        (self.request.len() as f64 / d).ceil() as usize
    }
}

/// (semantic score, usage score, negated length); larger is better in every
/// component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector(pub [f64; 3]);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedIndividual {
    pub seq: AgentSequence,
    pub semantic_score: f64,
    pub usage_score: f64,
    pub fitness: f64,
    pub skipped: bool,
}

impl EvaluatedIndividual {
    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn objectives(&self) -> ObjectiveVector {
        ObjectiveVector([self.semantic_score, self.usage_score, -(self.seq.len() as f64)])
    }

    /// Selection order: higher fitness first, then shorter sequence.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .fitness
            .total_cmp(&self.fitness)
            .then_with(|| self.seq.len().cmp(&other.seq.len()))
    }
}

/// Semantic score, usage score and fitness of `agents`, with no evaluation
/// skipping.
pub fn score_sequence(agents: &[AgentId], ctx: &FitnessContext<'_>) -> Result<(f64, f64, f64), ModelError> {
    let cfg = ctx.cfg;
    let covered = coverage(agents, ctx.request, ctx.descriptions)?;
    let semantic = covered as f64 / ctx.request.len() as f64;

    let k = cfg.usage_halfsat as f64;
    let mut min_uses = u64::MAX;
    let mut usage_sum = 0.0;
    for &id in agents {
        let u = ctx.usage.uses(id);
        min_uses = min_uses.min(u);
        usage_sum += u as f64 / (u as f64 + k);
    }
    let usage = usage_sum / agents.len() as f64;
    let min_uses = min_uses as f64;
    let w_eff = cfg.usage_weight_max * min_uses / (min_uses + k);

    let raw = (1.0 - w_eff) * semantic + w_eff * usage;
    let excess = agents.len().saturating_sub(ctx.parsimony_baseline());
    let fitness = (raw - cfg.parsimony * excess as f64).max(0.0);
    Ok((semantic, usage, fitness))
}

/// Evaluates one individual of a generation whose mean length is
/// `gen_mean_length`. Randomness is consumed only when the reduced-probability
/// mechanism applies to this individual.
pub fn evaluate_fitness<R: Rng + ?Sized>(
    seq: AgentSequence,
    ctx: &FitnessContext<'_>,
    gen_mean_length: f64,
    rng: &mut R,
) -> Result<EvaluatedIndividual, ModelError> {
    let q = ctx.cfg.eval_probability;
    if q < 1.0 && seq.len() as f64 > gen_mean_length && !rng.random_bool(q) {
        // Still surface lookup errors for skipped individuals.
        for &id in &seq.agents {
            ctx.descriptions.resolve(id)?;
        }
        return Ok(EvaluatedIndividual {
            seq,
            semantic_score: 0.0,
            usage_score: 0.0,
            fitness: 0.0,
            skipped: true,
        });
    }
    let (semantic_score, usage_score, fitness) = score_sequence(&seq.agents, ctx)?;
    Ok(EvaluatedIndividual {
        seq,
        semantic_score,
        usage_score,
        fitness,
        skipped: false,
    })
}

/// Pareto dominance: `a` is no worse in every objective and strictly better in
/// at least one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let mut strictly = false;
    for (x, y) in a.0.iter().zip(b.0.iter()) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the non-dominated individuals, in population order.
pub fn pareto_front(individuals: &[EvaluatedIndividual]) -> Vec<usize> {
    let objs: Vec<ObjectiveVector> = individuals.iter().map(|i| i.objectives()).collect();
    (0..objs.len())
        .filter(|&i| !objs.iter().any(|o| dominates(o, &objs[i])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Token;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desc(t: &[Token]) -> SemanticDescription {
        SemanticDescription::new(t.iter().copied(), 64).unwrap()
    }

    fn seq(ids: &[u64]) -> AgentSequence {
        AgentSequence::new(ids.iter().map(|&i| AgentId(i)).collect()).unwrap()
    }

    struct Fixture {
        table: BTreeMap<AgentId, SemanticDescription>,
        usage: BTreeMap<AgentId, u64>,
        request: SemanticDescription,
        cfg: GaConfig,
        mean: f64,
    }

    impl Fixture {
        fn ctx(&self) -> FitnessContext<'_> {
            FitnessContext {
                request: &self.request,
                descriptions: &self.table,
                usage: &self.usage,
                mean_description_size: self.mean,
                cfg: &self.cfg,
            }
        }
    }

    fn fixture(parsimony: f64) -> Fixture {
        let table: BTreeMap<_, _> = [(0, desc(&[1])), (1, desc(&[2])), (2, desc(&[1, 2, 3])), (3, desc(&[40]))]
            .into_iter()
            .map(|(i, d)| (AgentId(i), d))
            .collect();
        Fixture {
            table,
            usage: BTreeMap::new(),
            request: desc(&[1, 2, 3]),
            cfg: GaConfig {
                parsimony,
                ..Default::default()
            },
            mean: 1.5,
        }
    }

    fn eval(f: &Fixture, s: AgentSequence) -> EvaluatedIndividual {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        evaluate_fitness(s, &f.ctx(), 1.0, &mut rng).unwrap()
    }

    #[test]
    fn partial_cover_without_usage_is_pure_semantic() {
        let f = fixture(0.0);
        let e = eval(&f, seq(&[0, 1]));
        assert_eq!(e.semantic_score, 2.0 / 3.0);
        assert_eq!(e.fitness, 2.0 / 3.0);
    }

    #[test]
    fn exact_cover_at_baseline_length_scores_one() {
        let mut f = fixture(0.7);
        f.mean = 3.0;
        assert_eq!(f.ctx().parsimony_baseline(), 1);
        assert_eq!(eval(&f, seq(&[2])).fitness, 1.0);
    }

    #[test]
    fn empty_coverage_scores_zero() {
        let f = fixture(0.02);
        assert_eq!(eval(&f, seq(&[3])).fitness, 0.0);
    }

    #[test]
    fn parsimony_charges_only_excess_length() {
        let f = fixture(0.1);
        // baseline = ceil(3 / 1.5) = 2; length 4 is two over.
        let e = eval(&f, seq(&[2, 0, 1, 3]));
        assert!((e.fitness - 0.8).abs() < 1e-12);
        let e = eval(&f, seq(&[2, 3]));
        assert_eq!(e.fitness, 1.0);
    }

    #[test]
    fn usage_ramp_uses_minimum_member_usage() {
        let mut f = fixture(0.0);
        f.usage.insert(AgentId(2), 5);
        // One member unused: weight stays zero.
        let e = eval(&f, seq(&[2, 0]));
        assert_eq!(e.fitness, 1.0);
        assert_eq!(e.usage_score, 0.25);
        // All members used 5 times (k = 5): w_eff = 0.3 * 0.5, usage = 0.5.
        let e = eval(&f, seq(&[2]));
        let w = 0.15;
        assert!((e.fitness - ((1.0 - w) * 1.0 + w * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn reduced_probability_skips_only_long_individuals() {
        let mut f = fixture(0.0);
        f.cfg.eval_probability = 1e-9;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let long = evaluate_fitness(seq(&[2, 2, 2]), &f.ctx(), 2.0, &mut rng).unwrap();
        assert!(long.skipped);
        assert_eq!(long.fitness, 0.0);
        let short = evaluate_fitness(seq(&[2]), &f.ctx(), 2.0, &mut rng).unwrap();
        assert!(!short.skipped);
        assert_eq!(short.fitness, 1.0);
    }

    #[test]
    fn lookup_errors_propagate() {
        let f = fixture(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = evaluate_fitness(seq(&[99]), &f.ctx(), 1.0, &mut rng).unwrap_err();
        assert_eq!(err, ModelError::UnknownAgent(AgentId(99)));
    }

    #[test]
    fn dominance_examples() {
        let v = |a: f64, b: f64, c: f64| ObjectiveVector([a, b, c]);
        assert!(dominates(&v(0.8, 0.5, -3.0), &v(0.7, 0.5, -3.0)));
        assert!(!dominates(&v(0.8, 0.5, -3.0), &v(0.8, 0.5, -3.0)));
        assert!(!dominates(&v(0.8, 0.4, -3.0), &v(0.7, 0.5, -3.0)));
    }

    #[test]
    fn pareto_front_drops_dominated() {
        let f = fixture(0.0);
        let pop = vec![eval(&f, seq(&[2])), eval(&f, seq(&[0])), eval(&f, seq(&[0, 1]))];
        assert_eq!(pareto_front(&pop), vec![0]);
    }

    fn vector() -> impl Strategy<Value = ObjectiveVector> {
        // Coarse grid so that equal components occur often.
        prop::array::uniform3(0u8..4).prop_map(|a| ObjectiveVector(a.map(|x| x as f64 / 3.0)))
    }

    proptest! {
        #[test]
        fn dominance_is_a_strict_partial_order(a in vector(), b in vector(), c in vector()) {
            prop_assert!(!dominates(&a, &a));
            prop_assert!(!(dominates(&a, &b) && dominates(&b, &a)));
            if dominates(&a, &b) && dominates(&b, &c) {
                prop_assert!(dominates(&a, &c));
            }
        }

        #[test]
        fn fitness_stays_in_unit_interval(
            ids in prop::collection::vec(0u64..4, 1..10),
            uses in prop::collection::vec(0u64..50, 4),
            parsimony in 0.0f64..0.5,
        ) {
            let mut f = fixture(parsimony);
            for (i, u) in uses.into_iter().enumerate() {
                f.usage.insert(AgentId(i as u64), u);
            }
            let e = eval(&f, seq(&ids));
            prop_assert!((0.0..=1.0).contains(&e.fitness));
            prop_assert!((0.0..=1.0).contains(&e.semantic_score));
            prop_assert!((0.0..=1.0).contains(&e.usage_score));
        }
    }
}
