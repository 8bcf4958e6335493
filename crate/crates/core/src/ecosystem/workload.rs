//! Community workload: which tokens each user cares about and the requests
//! they submit every round.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::WorkloadConfig;
use crate::model::{HabitatId, Request, SemanticDescription, Token};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub id: u32,
    /// Sorted, non-empty slice of the alphabet.
    pub tokens: Vec<Token>,
    pub members: Vec<HabitatId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadModel {
    pub communities: Vec<Community>,
    pub alphabet_size: u32,
    pub request_rate: f64,
    pub request_size: (u32, u32),
    pub description_size: (u32, u32),
    pub noise_rate: f64,
}

impl WorkloadModel {
    /// Community `c` owns tokens `[c * pool, (c + 1) * pool)`; user `i` lives
    /// in habitat `i` and belongs to community `i mod communities`.
    pub fn from_config(cfg: &WorkloadConfig) -> Self {
        let pool = cfg.community_pool_size;
        let communities = (0..cfg.communities)
            .map(|c| Community {
                id: c,
                tokens: (c * pool..(c + 1) * pool).collect(),
                members: (0..cfg.user_count())
                    .filter(|u| u % cfg.communities == c)
                    .map(HabitatId)
                    .collect(),
            })
            .collect();
        Self {
            communities,
            alphabet_size: cfg.alphabet_size,
            request_rate: cfg.request_rate,
            request_size: (cfg.request_size_min, cfg.request_size_max),
            description_size: (cfg.description_size_min, cfg.description_size_max),
            noise_rate: cfg.noise_rate,
        }
    }

    /// Users in ascending habitat order, with their community index.
    pub fn users(&self) -> Vec<(HabitatId, usize)> {
        let mut users: Vec<(HabitatId, usize)> = self
            .communities
            .iter()
            .enumerate()
            .flat_map(|(c, com)| com.members.iter().map(move |&h| (h, c)))
            .collect();
        users.sort_unstable();
        users
    }

    pub fn community_of(&self, h: HabitatId) -> Option<usize> {
        self.communities.iter().position(|c| c.members.contains(&h))
    }

    /// Distinct tokens drawn uniformly from the community pool.
    pub fn sample_description<R: Rng + ?Sized>(&self, community: usize, rng: &mut R) -> SemanticDescription {
        let pool = &self.communities[community].tokens;
        let (lo, hi) = self.description_size;
        let size = (rng.random_range(lo..=hi) as usize).min(pool.len());
        let picked = rand::seq::index::sample(rng, pool.len(), size);
        SemanticDescription::new(picked.into_iter().map(|i| pool[i]), self.alphabet_size)
            .expect("community tokens lie inside the alphabet")
    }

    /// One token per draw: with probability `noise_rate` from outside the
    /// community pool, otherwise from inside it; draws repeat until the
    /// request has the sampled number of distinct tokens.
    pub fn sample_request_tokens<R: Rng + ?Sized>(&self, community: usize, rng: &mut R) -> SemanticDescription {
        let pool = &self.communities[community].tokens;
        let outside_count = self.alphabet_size as usize - pool.len();
        let (lo, hi) = self.request_size;
        let size = (rng.random_range(lo..=hi) as usize).min(self.alphabet_size as usize);
        let mut tokens = BTreeSet::new();
        while tokens.len() < size {
            let t = if outside_count > 0 && rng.random_bool(self.noise_rate) {
                // Index into the alphabet with the community block removed.
                let i = rng.random_range(0..outside_count) as Token;
                if i < pool[0] {
                    i
                } else {
                    i + pool.len() as Token
                }
            } else {
                pool[rng.random_range(0..pool.len())]
            };
            tokens.insert(t);
        }
        SemanticDescription::new(tokens, self.alphabet_size).expect("tokens lie inside the alphabet")
    }

    /// Each user submits a request with probability `request_rate`, in
    /// ascending habitat order.
    pub fn generate_requests<R: Rng + ?Sized>(&self, round: u64, rng: &mut R) -> Vec<Request> {
        let mut out = Vec::new();
        for (h, c) in self.users() {
            if rng.random_bool(self.request_rate) {
                out.push(Request::new(self.sample_request_tokens(c, rng), h, round));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn communities_partition_users() {
        let cfg = WorkloadConfig {
            communities: 2,
            users_per_community: 5,
            ..Default::default()
        };
        let w = WorkloadModel::from_config(&cfg);
        assert_eq!(w.users().len(), 10);
        assert_eq!(w.communities[0].members, [0, 2, 4, 6, 8].map(HabitatId).to_vec());
        assert_eq!(w.communities[1].tokens[0], cfg.community_pool_size);
        assert_eq!(w.community_of(HabitatId(3)), Some(1));
        assert_eq!(w.community_of(HabitatId(10)), None);
    }

    #[test]
    fn requests_stay_in_pool_without_noise() {
        let cfg = WorkloadConfig {
            noise_rate: 0.0,
            request_rate: 1.0,
            ..Default::default()
        };
        let w = WorkloadModel::from_config(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            for r in w.generate_requests(1, &mut rng) {
                let c = w.community_of(r.origin).unwrap();
                assert!(r.tokens.tokens().iter().all(|t| w.communities[c].tokens.contains(t)));
                assert!((2..=5).contains(&r.tokens.len()));
            }
        }
    }

    #[test]
    fn full_noise_stays_outside_pool() {
        let cfg = WorkloadConfig {
            noise_rate: 1.0,
            ..Default::default()
        };
        let w = WorkloadModel::from_config(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for c in 0..w.communities.len() {
            for _ in 0..50 {
                let r = w.sample_request_tokens(c, &mut rng);
                assert!(r.tokens().iter().all(|t| !w.communities[c].tokens.contains(t)));
            }
        }
    }

    #[test]
    fn zero_rate_generates_nothing() {
        let cfg = WorkloadConfig {
            request_rate: 0.0,
            ..Default::default()
        };
        let w = WorkloadModel::from_config(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(w.generate_requests(1, &mut rng).is_empty());
    }
}
