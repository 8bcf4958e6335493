//! Round scheduler.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::events::{Event, EventKind};
use super::workload::WorkloadModel;
use crate::config::SimConfig;
use crate::error::SimError;
use crate::evolution::{run_evolution, EvaluatedIndividual, EvolutionOutcome, PoolSnapshot};
use crate::habitat::{AgentRegistry, EscapeOutcome, HabitatNetwork, JoinStrategy};
use crate::metrics::{self, MetricsRow};
use crate::model::{Agent, AgentId, AgentSequence, HabitatId, Request, SemanticDescription};

const STREAM_TOPOLOGY: u64 = 1;
const STREAM_AGENTS: u64 = 2;
const STREAM_DEPLOY: u64 = 3;
const STREAM_WORKLOAD: u64 = 4;
const STREAM_NETWORK: u64 = 5;
const STREAM_EVOLUTION: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of an independent random stream identified by `parts` under `root`.
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn stream(root: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, parts))
}

pub mod phase {
    pub const BUILD: u8 = 0;
    pub const REQUEST: u8 = 1;
    pub const EVOLVE: u8 = 2;
    pub const APPLY: u8 = 3;
    pub const FEEDBACK: u8 = 4;
    pub const MIGRATE: u8 = 5;
    pub const PRUNE: u8 = 6;
    pub const METRICS: u8 = 7;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub round: u64,
    pub request: Request,
    pub best: EvaluatedIndividual,
    pub generations_used: u32,
    pub executed: bool,
    pub final_mean_length: f64,
    pub max_length_seen: usize,
}

impl ExecutionRecord {
    pub fn habitat(&self) -> HabitatId {
        self.request.origin
    }
}

#[derive(Debug)]
pub struct Ecosystem {
    pub network: HabitatNetwork,
    pub registry: AgentRegistry,
    pub workload: WorkloadModel,
    pub cfg: SimConfig,
    pub seed: u64,
    pub round: u64,
    pub events: Vec<Event>,
    pub metrics: Vec<MetricsRow>,
    /// Every evolved request, in round then habitat order.
    pub history: Vec<ExecutionRecord>,
    /// Requests dropped because the origin pool was empty.
    pub skipped: Vec<Request>,
    threads: Option<Arc<rayon::ThreadPool>>,
}

fn ids_json(ids: &[AgentId]) -> serde_json::Value {
    json!(ids.iter().map(|a| a.0).collect::<Vec<_>>())
}

fn habitats_json(ids: &[HabitatId]) -> serde_json::Value {
    json!(ids.iter().map(|h| h.0).collect::<Vec<_>>())
}

/// Creates one habitat per user, wiring each into the network as a random
/// joiner in id order, then deploys every user's initial agents. Deployment
/// copies along out-connections only when migration is enabled.
pub fn build_ecosystem(cfg: &SimConfig, seed: u64) -> Result<Ecosystem, SimError> {
    cfg.validate()?;
    let workload = WorkloadModel::from_config(&cfg.workload);
    let mut network = HabitatNetwork::new(cfg.habitat.clone());
    let mut registry = AgentRegistry::default();
    let mut events = Vec::new();

    let users = workload.users();
    let mut topo = stream(seed, &[STREAM_TOPOLOGY]);
    for &(h, c) in &users {
        let id = network.join_network(workload.communities[c].id, JoinStrategy::Random, &mut topo)?;
        debug_assert_eq!(id, h);
    }

    let mut descs = stream(seed, &[STREAM_AGENTS]);
    let mut deploy = stream(seed, &[STREAM_DEPLOY]);
    for &(h, c) in &users {
        for _ in 0..cfg.workload.agents_per_user {
            let description = workload.sample_description(c, &mut descs);
            if cfg.ecosystem.migration_enabled {
                let (id, copies) = network.deploy_agent(h, description, &mut registry, &mut deploy)?;
                for to in copies {
                    events.push(Event::new(
                        0,
                        phase::BUILD,
                        EventKind::Migrated,
                        h,
                        json!({"agents": [id.0], "to": to.0}),
                    ));
                }
            } else {
                let escapes = network.escape_range(h);
                let id = registry.register(description.clone(), h);
                network.get_mut(h)?.pool.agents.insert(id, Agent::new(id, description, h, escapes));
            }
        }
    }

    Ok(Ecosystem {
        network,
        registry,
        workload,
        cfg: cfg.clone(),
        seed,
        round: 0,
        events,
        metrics: Vec::new(),
        history: Vec::new(),
        skipped: Vec::new(),
        threads: None,
    })
}

/// Builds and steps `rounds` times. `threads` caps phase-2 parallelism and
/// never changes the output.
pub fn run_simulation(cfg: &SimConfig, seed: u64, rounds: u64, threads: usize) -> Result<Ecosystem, SimError> {
    let mut eco = build_ecosystem(cfg, seed)?.with_threads(threads)?;
    for _ in 0..rounds {
        eco.step_round()?;
    }
    Ok(eco)
}

struct Job<'a> {
    index: usize,
    request: &'a Request,
    agents: Vec<AgentId>,
    sequences: &'a [AgentSequence],
    seed: u64,
}

impl Ecosystem {
    /// Runs phase-2 evolutions on a dedicated pool of `n` threads; 1 keeps
    /// them on the calling thread.
    pub fn with_threads(mut self, n: usize) -> Result<Self, SimError> {
        self.threads = if n > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SimError::Io(std::io::Error::other(e)))?;
            Some(Arc::new(pool))
        } else {
            None
        };
        Ok(self)
    }

    /// Adds an agent to `h` without deployment copies.
    pub fn plant_agent(&mut self, h: HabitatId, description: SemanticDescription) -> Result<AgentId, SimError> {
        let escapes = self.network.escape_range(h);
        self.network.get(h)?;
        let id = self.registry.register(description.clone(), h);
        self.network.get_mut(h)?.pool.agents.insert(id, Agent::new(id, description, h, escapes));
        Ok(id)
    }

    fn log(&mut self, phase: u8, kind: EventKind, habitat: HabitatId, payload: serde_json::Value) {
        self.events.push(Event::new(self.round, phase, kind, habitat, payload));
    }

    pub fn step_round(&mut self) -> Result<(), SimError> {
        self.round += 1;
        let round = self.round;
        let migration = self.cfg.ecosystem.migration_enabled;

        // 1: requests
        let requests = self
            .workload
            .generate_requests(round, &mut stream(self.seed, &[STREAM_WORKLOAD, round]));
        for r in &requests {
            self.log(phase::REQUEST, EventKind::Request, r.origin, json!({"tokens": r.tokens.tokens()}));
        }

        // 2: evolution on immutable snapshots
        let outcomes = self.evolve_all(&requests)?;
        let threshold = self.cfg.execution_threshold();
        let mut records = Vec::with_capacity(outcomes.len());
        for (request, out) in requests.into_iter().zip(outcomes) {
            let Some(out) = out else {
                self.log(
                    phase::EVOLVE,
                    EventKind::Skipped,
                    request.origin,
                    json!({"tokens": request.tokens.tokens()}),
                );
                self.skipped.push(request);
                continue;
            };
            let EvolutionOutcome {
                best,
                generations_used,
                final_mean_length,
                max_length_seen,
                ..
            } = out;
            self.log(
                phase::EVOLVE,
                EventKind::Evolved,
                request.origin,
                json!({
                    "agents": ids_json(&best.seq.agents),
                    "fitness": best.fitness,
                    "semantic": best.semantic_score,
                    "usage": best.usage_score,
                    "generations": generations_used,
                    "final_mean_length": final_mean_length,
                    "max_length_seen": max_length_seen,
                }),
            );
            records.push(ExecutionRecord {
                round,
                executed: best.fitness >= threshold,
                request,
                best,
                generations_used,
                final_mean_length,
                max_length_seen,
            });
        }
        // 3: apply
        for rec in &records {
            self.apply(rec)?;
        }

        if migration {
            // 4: feedback
            for rec in records.iter().filter(|r| r.executed) {
                self.migration_feedback(rec.habitat(), &rec.best.seq, &rec.request.tokens)?;
            }

            // 5: migrate executed sequences
            let mut rng = stream(self.seed, &[STREAM_NETWORK, round, 5]);
            for rec in records.iter().filter(|r| r.executed) {
                let h = rec.habitat();
                let solution = self.relevant_part(&rec.best.seq, &rec.request.tokens);
                let stored = self
                    .network
                    .get(h)?
                    .pool
                    .sequences
                    .iter()
                    .find(|s| s.agents == solution.agents)
                    .cloned()
                    .unwrap_or(solution);
                for to in self.network.migrate_sequence(&stored, h, &mut rng)? {
                    self.log(
                        phase::MIGRATE,
                        EventKind::Migrated,
                        h,
                        json!({"agents": ids_json(&stored.agents), "to": to.0}),
                    );
                }
            }

            // 6: unused agents escape or die
            let mut rng = stream(self.seed, &[STREAM_NETWORK, round, 6]);
            let habitats: Vec<HabitatId> = self.network.habitats.keys().copied().collect();
            for h in habitats {
                for rec in self.network.prune_unused(h, &mut rng)? {
                    match rec.outcome {
                        EscapeOutcome::Moved(to) => {
                            let left = self.network.get(to)?.pool.agents[&rec.agent].escapes_remaining;
                            self.log(
                                phase::PRUNE,
                                EventKind::Escape,
                                h,
                                json!({"agent": rec.agent.0, "to": to.0, "escapes_remaining": left}),
                            );
                        }
                        EscapeOutcome::Deleted { stranded } => {
                            self.log(
                                phase::PRUNE,
                                EventKind::Deleted,
                                h,
                                json!({"agent": rec.agent.0, "stranded": stranded}),
                            );
                        }
                    }
                    if let Some(d) = rec.decay.filter(|d| d.removed) {
                        self.log(
                            phase::PRUNE,
                            EventKind::LinkRemoved,
                            h,
                            json!({"from": d.from.0, "to": d.to.0}),
                        );
                    }
                }
            }

            // 7a: reconnect habitats that lost every link
            if self.network.len() > 1 {
                let mut rng = stream(self.seed, &[STREAM_NETWORK, round, 7]);
                for h in self.network.isolated() {
                    let neighbors = self.network.rejoin_random(h, &mut rng)?;
                    self.log(
                        phase::METRICS,
                        EventKind::Disconnected,
                        h,
                        json!({"rejoined": habitats_json(&neighbors)}),
                    );
                }
            }
        }

        // 7b: metrics
        let row = self.metrics_row(&records);
        self.metrics.push(row);
        self.history.extend(records);
        Ok(())
    }

    /// One outcome per request, in request order; `None` for an empty pool.
    fn evolve_all(&self, requests: &[Request]) -> Result<Vec<Option<EvolutionOutcome>>, SimError> {
        let mut jobs = Vec::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            let habitat = self.network.get(r.origin)?;
            if habitat.pool.agents.is_empty() {
                continue;
            }
            jobs.push(Job {
                index: i,
                request: r,
                agents: habitat.pool.agent_ids(),
                sequences: &habitat.pool.sequences,
                seed: derive_seed(self.seed, &[STREAM_EVOLUTION, u64::from(r.origin.0), r.round]),
            });
        }
        let run = |job: &Job<'_>| -> Result<EvolutionOutcome, SimError> {
            let snapshot = PoolSnapshot {
                agents: &job.agents,
                sequences: job.sequences,
                descriptions: &self.registry,
                usage: &self.registry,
            };
            let mut ga = self.cfg.ga.clone();
            ga.rng_seed = job.seed;
            Ok(run_evolution(&snapshot, &job.request.tokens, &ga)?)
        };
        let results: Vec<Result<EvolutionOutcome, SimError>> = match &self.threads {
            Some(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
            None => jobs.iter().map(run).collect(),
        };
        let mut out: Vec<Option<EvolutionOutcome>> = vec![None; requests.len()];
        for (job, r) in jobs.iter().zip(results) {
            out[job.index] = Some(r?);
        }
        Ok(out)
    }

    /// `seq` without the members whose descriptions share no token with
    /// `request`; `seq` itself if nothing would remain.
    pub fn relevant_part(&self, seq: &AgentSequence, request: &SemanticDescription) -> AgentSequence {
        let agents: Vec<AgentId> = seq
            .agents
            .iter()
            .copied()
            .filter(|m| {
                self.registry
                    .records
                    .get(m)
                    .is_some_and(|r| r.description.overlap(request) > 0)
            })
            .collect();
        if agents.is_empty() {
            return seq.clone();
        }
        AgentSequence {
            agents,
            provenance: seq.provenance.clone(),
        }
    }

    /// Phase 3 for one request. An executed sequence credits every member's
    /// usage and is registered with its non-contributing members dropped;
    /// every other local agent's unused counter advances.
    fn apply(&mut self, rec: &ExecutionRecord) -> Result<(), SimError> {
        let h = rec.habitat();
        let members: BTreeSet<AgentId> = if rec.executed {
            rec.best.seq.agents.iter().copied().collect()
        } else {
            BTreeSet::new()
        };
        if rec.executed {
            for &m in &members {
                self.registry.record_use(m);
            }
            self.log(
                phase::APPLY,
                EventKind::Executed,
                h,
                json!({
                    "agents": ids_json(&rec.best.seq.agents),
                    "fitness": rec.best.fitness,
                    "provenance": habitats_json(&rec.best.seq.provenance),
                }),
            );
            let solution = self.relevant_part(&rec.best.seq, &rec.request.tokens);
            let origins = solution.provenance.clone();
            if self.network.register_sequence(h, &solution, &origins)? {
                let stored = self.network.get(h)?.pool.sequences.last().expect("just registered");
                let payload = json!({
                    "agents": ids_json(&stored.agents),
                    "provenance": habitats_json(&stored.provenance),
                });
                self.log(phase::APPLY, EventKind::Registered, h, payload);
            }
        }
        for agent in self.network.get_mut(h)?.pool.agents.values_mut() {
            if members.contains(&agent.id) {
                agent.requests_seen_unused = 0;
                agent.used_here = true;
            } else {
                agent.requests_seen_unused = agent.requests_seen_unused.saturating_add(1);
            }
        }
        Ok(())
    }

    /// Rewards the habitats an executed sequence at `h` came from. Creation
    /// habitats of its contributing members and its recorded provenance get a
    /// link to `h` (created at `p0` when missing, reinforced otherwise); the
    /// last hop each contributing local member arrived along is reinforced
    /// too. Each link is touched at most once.
    ///
    /// A member contributes when its description shares a token with
    /// `request`; padding agents that cover nothing earn no credit.
    pub fn migration_feedback(
        &mut self,
        h: HabitatId,
        seq: &AgentSequence,
        request: &SemanticDescription,
    ) -> Result<(), SimError> {
        let contributing = self.relevant_part(seq, request).agents;
        let mut origins = BTreeSet::new();
        for &m in &contributing {
            if let Some(o) = self.registry.owner(m) {
                origins.insert(o);
            }
        }
        origins.extend(seq.provenance.iter().copied());
        origins.remove(&h);

        let mut hops = BTreeSet::new();
        let pool = &self.network.get(h)?.pool;
        for m in &contributing {
            if let Some(src) = pool.agents.get(m).and_then(Agent::last_hop_source) {
                if src != h {
                    hops.insert(src);
                }
            }
        }

        let p0 = self.network.params.p0;
        for src in origins.union(&hops).copied().collect::<Vec<_>>() {
            if self.network.update_connection(src, h, true).is_some() {
                continue;
            }
            if origins.contains(&src) && self.network.habitats.contains_key(&src) {
                self.network.set_connection(src, h, p0)?;
                self.log(
                    phase::FEEDBACK,
                    EventKind::LinkCreated,
                    h,
                    json!({"from": src.0, "to": h.0, "p": p0}),
                );
            }
        }
        Ok(())
    }

    fn metrics_row(&self, records: &[ExecutionRecord]) -> MetricsRow {
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        };
        let eff = metrics::effective_graph(&self.network, self.network.params.p_min);
        MetricsRow {
            round: self.round,
            executed_count: records.iter().filter(|r| r.executed).count(),
            mean_best_fitness: mean(&mut records.iter().map(|r| r.best.fitness)),
            mean_generations_to_threshold: mean(
                &mut records.iter().filter(|r| r.executed).map(|r| f64::from(r.generations_used)),
            ),
            clustering_coefficient: metrics::clustering_coefficient(&eff.graph),
            characteristic_path_length: metrics::characteristic_path_length(&eff.graph),
            intra_community_mass: metrics::intra_community_mass(&self.network),
            agent_count: self.network.agent_count(),
            mean_sequence_length: mean(&mut records.iter().map(|r| r.final_mean_length)),
            pool_diversity: metrics::pool_diversity(&self.network),
        }
    }

    pub fn events_jsonl(&self) -> String {
        super::events::to_jsonl(&self.events)
    }

    pub fn metrics_csv(&self) -> String {
        let mut buf = Vec::new();
        metrics::write_csv(&self.metrics, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}
