//! Habitats, their Agent-pools and the directed probabilistic connections
//! between them.
//!
//! Connection probabilities follow a Hebbian rule: a successful exchange moves
//! `p` a fraction `eta` of the way towards 1, a failed one shrinks it by the
//! factor `1 - eta`, and a connection that falls below `p_min` is dropped.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::HabitatError;
use crate::evolution::UsageLookup;
use crate::model::{Agent, AgentId, AgentSequence, DescriptionLookup, HabitatId, SemanticDescription};

/// Topology and life-cycle parameters shared by every habitat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HabitatParams {
    /// Connections whose probability drops below this are removed.
    pub p_min: f64,
    /// Hebbian learning rate.
    pub eta: f64,
    /// Probability given to newly created connections.
    pub p0: f64,
    /// Number of habitats a randomly joining habitat connects to.
    pub join_degree: usize,
    /// Requests an agent may sit unused through before it must escape.
    pub unused_threshold: u32,
    pub escape_min: u32,
}

impl Default for HabitatParams {
    fn default() -> Self {
        Self {
            p_min: 0.05,
            eta: 0.2,
            p0: 0.5,
            join_degree: 2,
            unused_threshold: 10,
            escape_min: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: HabitatId,
    pub to: HabitatId,
    pub p: f64,
}

/// Hebbian update of a single probability.
pub fn hebbian_update(p: f64, success: bool, eta: f64) -> f64 {
    if success {
        p + eta * (1.0 - p)
    } else {
        p * (1.0 - eta)
    }
}

/// Escape budget for an agent in a cluster of `cluster_size` habitats:
/// `max(escape_min, floor(log2(size)) + 1)`.
pub fn escape_range_for(cluster_size: usize, escape_min: u32) -> u32 {
    let log2 = usize::BITS - 1 - cluster_size.max(1).leading_zeros();
    escape_min.max(log2 + 1)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentPool {
    pub agents: BTreeMap<AgentId, Agent>,
    pub sequences: Vec<AgentSequence>,
}

impl AgentPool {
    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.keys().copied().collect()
    }

    pub fn contains_sequence(&self, agents: &[AgentId]) -> bool {
        self.sequences.iter().any(|s| s.agents == agents)
    }

    /// Number of distinct descriptions among resident agents.
    pub fn distinct_descriptions(&self) -> usize {
        self.agents.values().map(|a| a.description.tokens()).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Habitat {
    pub id: HabitatId,
    pub pool: AgentPool,
    /// Outgoing connection probabilities keyed by destination.
    pub out: BTreeMap<HabitatId, f64>,
    /// Community of the habitat's user; workload metadata only.
    pub community: u32,
}

impl Habitat {
    pub fn new(id: HabitatId, community: u32) -> Self {
        Self {
            id,
            pool: AgentPool::default(),
            out: BTreeMap::new(),
            community,
        }
    }

    pub fn connections(&self) -> impl Iterator<Item = Connection> + '_ {
        self.out.iter().map(|(&to, &p)| Connection { from: self.id, to, p })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub description: SemanticDescription,
    pub owner: HabitatId,
    /// Executed solutions this agent id has been part of, anywhere.
    pub uses: u64,
}

/// Global table of every agent id ever deployed. Records are never removed so
/// registered sequences stay resolvable after their members die out.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentRegistry {
    pub records: BTreeMap<AgentId, AgentRecord>,
    next_id: u64,
}

impl AgentRegistry {
    pub fn register(&mut self, description: SemanticDescription, owner: HabitatId) -> AgentId {
        let id = AgentId(self.next_id);
        self.next_id += 1;
        self.records.insert(
            id,
            AgentRecord {
                description,
                owner,
                uses: 0,
            },
        );
        id
    }

    pub fn record_use(&mut self, id: AgentId) {
        if let Some(r) = self.records.get_mut(&id) {
            r.uses += 1;
        }
    }

    pub fn owner(&self, id: AgentId) -> Option<HabitatId> {
        self.records.get(&id).map(|r| r.owner)
    }

    pub fn usage_table(&self) -> BTreeMap<AgentId, u64> {
        self.records.iter().map(|(&id, r)| (id, r.uses)).collect()
    }
}

impl DescriptionLookup for AgentRegistry {
    fn description(&self, id: AgentId) -> Option<&SemanticDescription> {
        self.records.get(&id).map(|r| &r.description)
    }
}

impl UsageLookup for AgentRegistry {
    fn uses(&self, id: AgentId) -> u64 {
        self.records.get(&id).map_or(0, |r| r.uses)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JoinStrategy {
    Random,
    Clone(HabitatId),
}

/// Result of an escape attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EscapeOutcome {
    Moved(HabitatId),
    /// Budget exhausted, or nowhere left to go (`stranded`).
    Deleted { stranded: bool },
}

/// Connection probability change caused by an agent leaving a habitat it was
/// never used in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub from: HabitatId,
    pub to: HabitatId,
    pub p: f64,
    pub removed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub agent: AgentId,
    pub from: HabitatId,
    pub outcome: EscapeOutcome,
    pub decay: Option<Decay>,
}

/// All habitats plus the shared topology parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HabitatNetwork {
    pub habitats: BTreeMap<HabitatId, Habitat>,
    pub params: HabitatParams,
}

impl HabitatNetwork {
    pub fn new(params: HabitatParams) -> Self {
        Self {
            habitats: BTreeMap::new(),
            params,
        }
    }

    pub fn len(&self) -> usize {
        self.habitats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.habitats.is_empty()
    }

    pub fn get(&self, id: HabitatId) -> Result<&Habitat, HabitatError> {
        self.habitats.get(&id).ok_or(HabitatError::UnknownHabitat(id))
    }

    pub fn get_mut(&mut self, id: HabitatId) -> Result<&mut Habitat, HabitatError> {
        self.habitats.get_mut(&id).ok_or(HabitatError::UnknownHabitat(id))
    }

    pub fn add_habitat(&mut self, community: u32) -> HabitatId {
        let id = HabitatId(self.habitats.keys().next_back().map_or(0, |h| h.0 + 1));
        self.habitats.insert(id, Habitat::new(id, community));
        id
    }

    pub fn connection(&self, from: HabitatId, to: HabitatId) -> Option<f64> {
        self.habitats.get(&from).and_then(|h| h.out.get(&to).copied())
    }

    /// Sets or creates `from -> to`. Self-connections are ignored.
    pub fn set_connection(&mut self, from: HabitatId, to: HabitatId, p: f64) -> Result<(), HabitatError> {
        self.get(to)?;
        if from != to {
            self.get_mut(from)?.out.insert(to, p);
        }
        Ok(())
    }

    pub fn connections(&self) -> impl Iterator<Item = Connection> + '_ {
        self.habitats.values().flat_map(|h| h.connections())
    }

    /// Applies a Hebbian update to an existing connection. Returns the new
    /// probability and whether the connection was removed, or `None` when no
    /// such connection exists.
    pub fn update_connection(&mut self, from: HabitatId, to: HabitatId, success: bool) -> Option<(f64, bool)> {
        let eta = self.params.eta;
        let p_min = self.params.p_min;
        let out = &mut self.habitats.get_mut(&from)?.out;
        let p = out.get_mut(&to)?;
        *p = hebbian_update(*p, success, eta);
        let p = *p;
        if p < p_min {
            out.remove(&to);
            Some((p, true))
        } else {
            Some((p, false))
        }
    }

    /// Undirected adjacency over the current connections.
    fn undirected_neighbors(&self) -> BTreeMap<HabitatId, BTreeSet<HabitatId>> {
        let mut adj: BTreeMap<HabitatId, BTreeSet<HabitatId>> =
            self.habitats.keys().map(|&h| (h, BTreeSet::new())).collect();
        let p_min = self.params.p_min;
        for c in self.connections().filter(|c| c.p >= p_min) {
            adj.entry(c.from).or_default().insert(c.to);
            adj.entry(c.to).or_default().insert(c.from);
        }
        adj
    }

    /// Size of the weakly connected component containing `h`.
    pub fn cluster_size(&self, h: HabitatId) -> usize {
        if !self.habitats.contains_key(&h) {
            return 0;
        }
        let adj = self.undirected_neighbors();
        let mut seen = BTreeSet::from([h]);
        let mut queue = VecDeque::from([h]);
        while let Some(n) = queue.pop_front() {
            for &m in &adj[&n] {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        seen.len()
    }

    pub fn escape_range(&self, h: HabitatId) -> u32 {
        escape_range_for(self.cluster_size(h), self.params.escape_min)
    }

    /// Habitats with neither incoming nor outgoing connections.
    pub fn isolated(&self) -> Vec<HabitatId> {
        self.undirected_neighbors()
            .into_iter()
            .filter(|(_, n)| n.is_empty())
            .map(|(h, _)| h)
            .collect()
    }

    /// Places a copy of `agent` (already extended or not) at `dest`, giving it
    /// a fresh unused window and the destination's escape budget. Returns
    /// false when the destination already holds that id.
    fn place_copy(&mut self, agent: &Agent, dest: HabitatId) -> bool {
        let escapes = self.escape_range(dest);
        let Some(habitat) = self.habitats.get_mut(&dest) else {
            return false;
        };
        if habitat.pool.agents.contains_key(&agent.id) {
            return false;
        }
        let mut copy = agent.clone();
        copy.migration_history.push(dest);
        copy.requests_seen_unused = 0;
        copy.used_here = false;
        copy.escapes_remaining = escapes;
        habitat.pool.agents.insert(copy.id, copy);
        true
    }

    /// Creates an agent at `h` and attempts to copy it along every
    /// out-connection. Returns the new id and the habitats that received a
    /// copy.
    pub fn deploy_agent<R: Rng + ?Sized>(
        &mut self,
        h: HabitatId,
        description: SemanticDescription,
        registry: &mut AgentRegistry,
        rng: &mut R,
    ) -> Result<(AgentId, Vec<HabitatId>), HabitatError> {
        self.get(h)?;
        let escapes = self.escape_range(h);
        let id = registry.register(description.clone(), h);
        let agent = Agent::new(id, description, h, escapes);
        self.get_mut(h)?.pool.agents.insert(id, agent);
        let copies = self.migrate_copy(id, h, rng)?;
        Ok((id, copies))
    }

    /// Copies the agent `id` resident at `from` to each out-neighbor with the
    /// connection's probability. One Bernoulli draw is made per connection, in
    /// ascending destination order, whether or not the destination already
    /// holds the id.
    pub fn migrate_copy<R: Rng + ?Sized>(
        &mut self,
        id: AgentId,
        from: HabitatId,
        rng: &mut R,
    ) -> Result<Vec<HabitatId>, HabitatError> {
        let source = self.get(from)?;
        let Some(agent) = source.pool.agents.get(&id).cloned() else {
            return Ok(Vec::new());
        };
        let targets: Vec<(HabitatId, f64)> = source.out.iter().map(|(&t, &p)| (t, p)).collect();
        let mut placed = Vec::new();
        for (to, p) in targets {
            if rng.random_bool(p.clamp(0.0, 1.0)) && self.place_copy(&agent, to) {
                placed.push(to);
            }
        }
        Ok(placed)
    }

    /// Copies a registered sequence, and the members resident at `from`, to
    /// each out-neighbor with the connection's probability. Returns the
    /// destinations that accepted at least the sequence or one agent.
    pub fn migrate_sequence<R: Rng + ?Sized>(
        &mut self,
        seq: &AgentSequence,
        from: HabitatId,
        rng: &mut R,
    ) -> Result<Vec<HabitatId>, HabitatError> {
        let source = self.get(from)?;
        let targets: Vec<(HabitatId, f64)> = source.out.iter().map(|(&t, &p)| (t, p)).collect();
        let mut members: Vec<Agent> = Vec::new();
        for id in &seq.agents {
            if let Some(a) = source.pool.agents.get(id) {
                if !members.iter().any(|m| m.id == *id) {
                    members.push(a.clone());
                }
            }
        }
        let mut reached = Vec::new();
        for (to, p) in targets {
            if !rng.random_bool(p.clamp(0.0, 1.0)) {
                continue;
            }
            let mut any = false;
            for m in &members {
                any |= self.place_copy(m, to);
            }
            let dest = self.get_mut(to)?;
            if !dest.pool.contains_sequence(&seq.agents) {
                dest.pool.sequences.push(seq.clone());
                any = true;
            }
            if any {
                reached.push(to);
            }
        }
        Ok(reached)
    }

    /// Stores `seq` at `h` with `h` and `origins` added to its provenance.
    /// Returns false if an identical agent list is already registered there.
    pub fn register_sequence(
        &mut self,
        h: HabitatId,
        seq: &AgentSequence,
        origins: &[HabitatId],
    ) -> Result<bool, HabitatError> {
        let habitat = self.get_mut(h)?;
        if habitat.pool.contains_sequence(&seq.agents) {
            return Ok(false);
        }
        let stored = seq.clone().with_provenance(origins.iter().copied().chain([h]));
        habitat.pool.sequences.push(stored);
        Ok(true)
    }

    /// Moves an unused agent to a random out-neighbor that does not already
    /// hold a copy, or deletes it when its escape budget is spent or no such
    /// neighbor exists.
    pub fn escape_move<R: Rng + ?Sized>(
        &mut self,
        id: AgentId,
        from: HabitatId,
        rng: &mut R,
    ) -> Result<Option<EscapeOutcome>, HabitatError> {
        let source = self.get(from)?;
        let Some(budget) = source.pool.agents.get(&id).map(|a| a.escapes_remaining) else {
            return Ok(None);
        };
        let candidates: Vec<HabitatId> = source
            .out
            .keys()
            .copied()
            .filter(|to| !self.habitats[to].pool.agents.contains_key(&id))
            .collect();
        let mut agent = self
            .get_mut(from)?
            .pool
            .agents
            .remove(&id)
            .expect("checked above");
        if budget == 0 {
            return Ok(Some(EscapeOutcome::Deleted { stranded: false }));
        }
        if candidates.is_empty() {
            return Ok(Some(EscapeOutcome::Deleted { stranded: true }));
        }
        let to = candidates[rng.random_range(0..candidates.len())];
        agent.escapes_remaining -= 1;
        agent.requests_seen_unused = 0;
        agent.used_here = false;
        agent.migration_history.push(to);
        self.get_mut(to)?.pool.agents.insert(id, agent);
        Ok(Some(EscapeOutcome::Moved(to)))
    }

    /// Sends every agent at `h` that reached the unused threshold through
    /// `escape_move`, in ascending id order. An agent leaving a habitat it
    /// arrived at by migration without ever being used there weakens the
    /// connection it arrived along.
    pub fn prune_unused<R: Rng + ?Sized>(
        &mut self,
        h: HabitatId,
        rng: &mut R,
    ) -> Result<Vec<PruneRecord>, HabitatError> {
        let threshold = self.params.unused_threshold;
        let due: Vec<(AgentId, Option<HabitatId>, bool)> = self
            .get(h)?
            .pool
            .agents
            .values()
            .filter(|a| a.requests_seen_unused >= threshold)
            .map(|a| (a.id, a.last_hop_source(), a.used_here))
            .collect();
        let mut records = Vec::with_capacity(due.len());
        for (id, hop, used_here) in due {
            let Some(outcome) = self.escape_move(id, h, rng)? else {
                continue;
            };
            let decay = match (hop, used_here) {
                (Some(src), false) => self.update_connection(src, h, false).map(|(p, removed)| Decay {
                    from: src,
                    to: h,
                    p,
                    removed,
                }),
                _ => None,
            };
            records.push(PruneRecord {
                agent: id,
                from: h,
                outcome,
                decay,
            });
        }
        Ok(records)
    }

    /// Adds a habitat for a new user and wires it into the network.
    ///
    /// `Random` connects both ways at `p0` to `join_degree` distinct habitats
    /// chosen uniformly. `Clone(h)` copies `h`'s out-connections at their
    /// current probabilities and adds a connection to `h` itself. In both
    /// cases the new pool merges copies of the pools of the habitats it now
    /// points to.
    pub fn join_network<R: Rng + ?Sized>(
        &mut self,
        community: u32,
        strategy: JoinStrategy,
        rng: &mut R,
    ) -> Result<HabitatId, HabitatError> {
        let existing: Vec<HabitatId> = self.habitats.keys().copied().collect();
        let p0 = self.params.p0;
        let outs: Vec<(HabitatId, f64)> = match strategy {
            JoinStrategy::Random => {
                let k = self.params.join_degree.min(existing.len());
                rand::seq::index::sample(rng, existing.len(), k)
                    .into_iter()
                    .map(|i| (existing[i], p0))
                    .collect()
            }
            JoinStrategy::Clone(target) => {
                if existing.is_empty() {
                    return Err(HabitatError::EmptyEcosystem);
                }
                let cloned = self.get(target)?;
                let mut outs: Vec<(HabitatId, f64)> = cloned.out.iter().map(|(&t, &p)| (t, p)).collect();
                outs.push((target, p0));
                outs
            }
        };

        let id = self.add_habitat(community);
        let mut neighbors: Vec<HabitatId> = outs.iter().map(|&(t, _)| t).collect();
        neighbors.sort_unstable();
        for &(to, p) in &outs {
            self.set_connection(id, to, p)?;
            if strategy == JoinStrategy::Random {
                self.set_connection(to, id, p0)?;
            }
        }
        for n in neighbors {
            let pool = self.habitats[&n].pool.clone();
            for agent in pool.agents.values() {
                self.place_copy(agent, id);
            }
            let dest = &mut self.get_mut(id)?.pool;
            for s in pool.sequences {
                if !dest.contains_sequence(&s.agents) {
                    dest.sequences.push(s);
                }
            }
        }
        Ok(id)
    }

    /// Reconnects an existing habitat at random, as a joining user would,
    /// without touching its pool. Returns the new neighbors.
    pub fn rejoin_random<R: Rng + ?Sized>(&mut self, h: HabitatId, rng: &mut R) -> Result<Vec<HabitatId>, HabitatError> {
        self.get(h)?;
        let others: Vec<HabitatId> = self.habitats.keys().copied().filter(|&o| o != h).collect();
        let k = self.params.join_degree.min(others.len());
        let mut picked: Vec<HabitatId> = rand::seq::index::sample(rng, others.len(), k)
            .into_iter()
            .map(|i| others[i])
            .collect();
        picked.sort_unstable();
        let p0 = self.params.p0;
        for &o in &picked {
            self.set_connection(h, o, p0)?;
            self.set_connection(o, h, p0)?;
        }
        Ok(picked)
    }

    pub fn agent_count(&self) -> usize {
        self.habitats.values().map(|h| h.pool.agents.len()).sum()
    }
}
