//! Exhaustive search over short sequences, used to check the GA on small
//! instances.

use serde::{Deserialize, Serialize};

use super::fitness::{score_sequence, FitnessContext, UsageLookup};
use super::GaConfig;
use crate::error::EvolutionError;
use crate::model::{AgentId, AgentSequence, DescriptionLookup, SemanticDescription};

pub const ORACLE_MAX_POOL: usize = 8;
pub const ORACLE_MAX_LENGTH: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub fitness: f64,
    pub sequence: AgentSequence,
}

/// Odometer increment with the last position fastest; false after the final
/// state.
fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Enumerates every sequence of length `1..=l_bound` over `pool` (repetition
/// allowed) and returns the maximum fitness together with the
/// lexicographically least sequence attaining it. Evaluation skipping is not
/// applied.
pub fn brute_force_oracle(
    pool: &[AgentId],
    request: &SemanticDescription,
    descriptions: &(dyn DescriptionLookup + Sync),
    usage: &(dyn UsageLookup + Sync),
    cfg: &GaConfig,
    l_bound: usize,
) -> Result<OracleResult, EvolutionError> {
    if pool.len() > ORACLE_MAX_POOL || l_bound > ORACLE_MAX_LENGTH || l_bound == 0 {
        return Err(EvolutionError::OracleTooLarge {
            pool: pool.len(),
            l_bound,
        });
    }
    if pool.is_empty() {
        return Err(EvolutionError::EmptyPool);
    }
    let mut agents: Vec<AgentId> = pool.to_vec();
    agents.sort_unstable();
    agents.dedup();

    let mut total = 0usize;
    for &id in &agents {
        total += descriptions.resolve(id)?.len();
    }
    let ctx = FitnessContext {
        request,
        descriptions,
        usage,
        mean_description_size: total as f64 / agents.len() as f64,
        cfg,
    };

    let mut best: Option<(f64, Vec<AgentId>)> = None;
    let mut digits: Vec<usize> = Vec::with_capacity(l_bound);
    for len in 1..=l_bound {
        digits.clear();
        digits.resize(len, 0);
        loop {
            let candidate: Vec<AgentId> = digits.iter().map(|&d| agents[d]).collect();
            let (_, _, fitness) = score_sequence(&candidate, &ctx)?;
            let better = match &best {
                None => true,
                Some((f, s)) => fitness > *f || (fitness == *f && candidate < *s),
            };
            if better {
                best = Some((fitness, candidate));
            }
            if !advance(&mut digits, agents.len()) {
                break;
            }
        }
    }
    let (fitness, seq) = best.expect("at least one candidate");
    Ok(OracleResult {
        fitness,
        sequence: AgentSequence::new(seq)?,
    })
}
