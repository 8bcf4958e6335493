//! Measurements over the habitat network: small-world statistics of the
//! effective undirected topology, community alignment of connection mass,
//! and the per-round CSV table.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{self, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::habitat::HabitatNetwork;
use crate::model::HabitatId;

/// Simple undirected graph over dense node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![BTreeSet::new(); nodes],
        }
    }

    pub fn from_edges(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::new(nodes);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    /// Adds `{a, b}`; self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, n: usize) -> &BTreeSet<usize> {
        &self.adj[n]
    }

    pub fn degree(&self, n: usize) -> usize {
        self.adj[n].len()
    }

    /// Connected components, each sorted, ordered by their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.adj.len()];
        let mut out = Vec::new();
        for start in 0..self.adj.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(n) = queue.pop_front() {
                for &m in &self.adj[n] {
                    if !seen[m] {
                        seen[m] = true;
                        comp.push(m);
                        queue.push_back(m);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.adj.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(n) = queue.pop_front() {
            let d = dist[n].expect("queued nodes have a distance");
            for &m in &self.adj[n] {
                if dist[m].is_none() {
                    dist[m] = Some(d + 1);
                    queue.push_back(m);
                }
            }
        }
        dist
    }
}

/// Undirected projection of the habitat network together with the habitat id
/// of each node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EffectiveGraph {
    pub nodes: Vec<HabitatId>,
    pub graph: UndirectedGraph,
}

/// Edge `{a, b}` iff the stronger of the two directed probabilities is at
/// least `p_min`.
pub fn effective_graph(network: &HabitatNetwork, p_min: f64) -> EffectiveGraph {
    let nodes: Vec<HabitatId> = network.habitats.keys().copied().collect();
    let index: BTreeMap<HabitatId, usize> = nodes.iter().enumerate().map(|(i, &h)| (h, i)).collect();
    let mut strongest: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in network.connections() {
        let (Some(&a), Some(&b)) = (index.get(&c.from), index.get(&c.to)) else {
            continue;
        };
        let key = (a.min(b), a.max(b));
        let e = strongest.entry(key).or_insert(0.0);
        *e = e.max(c.p);
    }
    let graph = UndirectedGraph::from_edges(
        nodes.len(),
        strongest.into_iter().filter(|&(_, p)| p >= p_min).map(|(k, _)| k),
    );
    EffectiveGraph { nodes, graph }
}

/// Mean local clustering coefficient; nodes of degree below 2 contribute 0.
pub fn clustering_coefficient(g: &UndirectedGraph) -> f64 {
    let n = g.node_count();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for v in 0..n {
        let neigh: Vec<usize> = g.neighbors(v).iter().copied().collect();
        let k = neigh.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in neigh.iter().enumerate() {
            for &b in &neigh[i + 1..] {
                if g.has_edge(a, b) {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// Mean shortest-path length over node pairs of the largest connected
/// component (the one with the smallest node on ties). `None` when that
/// component has a single node or the graph is empty.
pub fn characteristic_path_length(g: &UndirectedGraph) -> Option<f64> {
    let comps = g.components();
    let largest = comps.iter().fold(None::<&Vec<usize>>, |best, c| match best {
        Some(b) if b.len() >= c.len() => Some(b),
        _ => Some(c),
    })?;
    if largest.len() < 2 {
        return None;
    }
    let mut total = 0usize;
    let mut pairs = 0usize;
    for (i, &s) in largest.iter().enumerate() {
        let dist = g.bfs_distances(s);
        for &t in &largest[i + 1..] {
            total += dist[t].expect("same component");
            pairs += 1;
        }
    }
    Some(total as f64 / pairs as f64)
}

/// Share of total connection probability carried by connections whose
/// endpoints belong to the same community; 0 without connections.
pub fn intra_community_mass(network: &HabitatNetwork) -> f64 {
    let mut intra = 0.0;
    let mut total = 0.0;
    for c in network.connections() {
        let same = match (network.habitats.get(&c.from), network.habitats.get(&c.to)) {
            (Some(a), Some(b)) => a.community == b.community,
            _ => false,
        };
        total += c.p;
        if same {
            intra += c.p;
        }
    }
    if total > 0.0 {
        intra / total
    } else {
        0.0
    }
}

/// Uniform random graph with `nodes` nodes and exactly `edges` edges.
pub fn random_graph<R: Rng + ?Sized>(nodes: usize, edges: usize, rng: &mut R) -> UndirectedGraph {
    let all: Vec<(usize, usize)> = (0..nodes)
        .flat_map(|a| (a + 1..nodes).map(move |b| (a, b)))
        .collect();
    let m = edges.min(all.len());
    let picked = rand::seq::index::sample(rng, all.len(), m);
    UndirectedGraph::from_edges(nodes, picked.into_iter().map(|i| all[i]))
}

/// Mean clustering coefficient of `samples` random graphs with the same node
/// and edge count as `g`.
pub fn random_clustering_baseline<R: Rng + ?Sized>(g: &UndirectedGraph, samples: usize, rng: &mut R) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    let (n, m) = (g.node_count(), g.edge_count());
    (0..samples)
        .map(|_| clustering_coefficient(&random_graph(n, m, rng)))
        .sum::<f64>()
        / samples as f64
}

pub const CSV_HEADER: &str = "round,executed_count,mean_best_fitness,mean_generations_to_threshold,\
clustering_coefficient,characteristic_path_length,intra_community_mass,agent_count,\
mean_sequence_length,pool_diversity";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: u64,
    pub executed_count: usize,
    /// Over requests evolved this round; 0 when there were none.
    pub mean_best_fitness: f64,
    /// Over requests executed this round; 0 when there were none.
    pub mean_generations_to_threshold: f64,
    pub clustering_coefficient: f64,
    /// `None` when the largest component is a single habitat.
    pub characteristic_path_length: Option<f64>,
    pub intra_community_mass: f64,
    pub agent_count: usize,
    /// Mean length over the final populations evolved this round.
    pub mean_sequence_length: f64,
    /// Mean number of distinct descriptions per Agent-pool.
    pub pool_diversity: f64,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let path = self
            .characteristic_path_length
            .map(|p| format!("{p:.6}"))
            .unwrap_or_default();
        format!(
            "{},{},{:.6},{:.6},{:.6},{},{:.6},{},{:.6},{:.6}",
            self.round,
            self.executed_count,
            self.mean_best_fitness,
            self.mean_generations_to_threshold,
            self.clustering_coefficient,
            path,
            self.intra_community_mass,
            self.agent_count,
            self.mean_sequence_length,
            self.pool_diversity
        )
    }
}

pub fn write_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv_line())?;
    }
    out.flush()
}

pub fn export_csv(rows: &[MetricsRow], path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, io::BufWriter::new(file))
}

/// Per-pool diversity averaged over habitats.
pub fn pool_diversity(network: &HabitatNetwork) -> f64 {
    if network.is_empty() {
        return 0.0;
    }
    network
        .habitats
        .values()
        .map(|h| h.pool.distinct_descriptions() as f64)
        .sum::<f64>()
        / network.len() as f64
}
