//! Interaction graphs: fixed circulants, per-round random regular graphs and
//! the star used by the stimulus protocol.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Restart bound for the random regular graph sampler.
pub const MAX_SAMPLING_RESTARTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("invalid topology: {0}")]
    Config(String),
    #[error("node {node} out of range for a graph of {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({0}, {1}) appears more than once")]
    DuplicateEdge(usize, usize),
    #[error("no simple {k}-regular graph on {n} nodes found after {restarts} restarts")]
    Sampling { n: usize, k: usize, restarts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyMode {
    /// Circulant graph, identical every round.
    FixedRing,
    /// Fresh random k-regular graph every round.
    WellMixed,
    /// Node 0 connected to `k` leaves that have no other edges.
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub n: usize,
    pub k: usize,
    pub mode: TopologyMode,
}

impl TopologySpec {
    pub fn validate(&self) -> Result<(), TopologyError> {
        match self.mode {
            TopologyMode::FixedRing | TopologyMode::WellMixed => check_regular_params(self.n, self.k),
            TopologyMode::Star => {
                if self.k == 0 || self.n != self.k + 1 {
                    return Err(TopologyError::Config(format!(
                        "a star with {} leaves needs n = {}, got {}",
                        self.k,
                        self.k + 1,
                        self.n
                    )));
                }
                Ok(())
            }
        }
    }

    /// The graph for modes that do not change between rounds.
    pub fn fixed_graph(&self) -> Result<Option<Graph>, TopologyError> {
        match self.mode {
            TopologyMode::FixedRing => circulant(self.n, self.k).map(Some),
            TopologyMode::Star => star(self.k).map(Some),
            TopologyMode::WellMixed => {
                self.validate()?;
                Ok(None)
            }
        }
    }
}

fn check_regular_params(n: usize, k: usize) -> Result<(), TopologyError> {
    if n < 3 {
        return Err(TopologyError::Config(format!("need at least 3 nodes, got {n}")));
    }
    if !k.is_multiple_of(2) {
        return Err(TopologyError::Config(format!("degree must be even, got {k}")));
    }
    if k < 2 || k > n - 1 {
        return Err(TopologyError::Config(format!(
            "degree must lie in [2, {}], got {k}",
            n - 1
        )));
    }
    Ok(())
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list, rejecting self-loops and
    /// repeated edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph, TopologyError> {
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            for node in [a, b] {
                if node >= n {
                    return Err(TopologyError::NodeOutOfRange { node, n });
                }
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a, b));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(TopologyError::DuplicateEdge(a, b));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph { adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Neighbors of `node` in ascending order. Panics if `node` is out of range.
    pub fn neighbors_of(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency
            .get(a)
            .is_some_and(|list| list.binary_search(&b).is_ok())
    }

    /// Each undirected edge once, as `(low, high)`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, list) in self.adjacency.iter().enumerate() {
            for &b in list {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// The common degree, if every node has the same one.
    pub fn regular_degree(&self) -> Option<usize> {
        let first = self.adjacency.first()?.len();
        self.adjacency
            .iter()
            .all(|l| l.len() == first)
            .then_some(first)
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let edges: Vec<_> = self.edges().into_iter().map(|(a, b)| (perm[a], perm[b])).collect();
        Graph::from_edges(self.node_count(), &edges).expect("permutation preserves simplicity")
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    k: Option<usize>,
    edges: Vec<[usize; 2]>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GraphJson {
            n: self.node_count(),
            k: self.regular_degree(),
            edges: self.edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = GraphJson::deserialize(deserializer)?;
        let edges: Vec<_> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = Graph::from_edges(raw.n, &edges).map_err(serde::de::Error::custom)?;
        if raw.k.is_some() && raw.k != graph.regular_degree() {
            return Err(serde::de::Error::custom("declared degree does not match edges"));
        }
        Ok(graph)
    }
}

/// Circulant graph: node `i` is adjacent to `i ± 1, …, i ± k/2 (mod n)`.
pub fn circulant(n: usize, k: usize) -> Result<Graph, TopologyError> {
    check_regular_params(n, k)?;
    let mut edges = Vec::with_capacity(n * k / 2);
    for i in 0..n {
        for d in 1..=k / 2 {
            edges.push((i, (i + d) % n));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Star with node 0 at the center.
pub fn star(leaves: usize) -> Result<Graph, TopologyError> {
    if leaves == 0 {
        return Err(TopologyError::Config("a star needs at least one leaf".into()));
    }
    let edges: Vec<_> = (1..=leaves).map(|leaf| (0, leaf)).collect();
    Graph::from_edges(leaves + 1, &edges)
}

/// Samples a simple `k`-regular graph with the pairing model. Stubs are
/// shuffled and paired; pairs that would form a loop or a repeated edge go
/// back into the pool, and the whole construction restarts when the leftover
/// stubs can no longer be paired legally.
pub fn sample_regular<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Graph, TopologyError> {
    check_regular_params(n, k)?;
    for _ in 0..MAX_SAMPLING_RESTARTS {
        if let Some(edges) = try_pairing(n, k, rng) {
            return Graph::from_edges(n, &edges);
        }
    }
    Err(TopologyError::Sampling {
        n,
        k,
        restarts: MAX_SAMPLING_RESTARTS,
    })
}

fn try_pairing<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut edges = BTreeSet::new();
    let mut stubs: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, k)).collect();
    while !stubs.is_empty() {
        stubs.shuffle(rng);
        let mut leftover = Vec::new();
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a != b && edges.insert((a, b)) {
                continue;
            }
            leftover.push(pair[0]);
            leftover.push(pair[1]);
        }
        if !leftover.is_empty() && !pairable(&leftover, &edges) {
            return None;
        }
        stubs = leftover;
    }
    Some(edges.into_iter().collect())
}

/// Whether at least one legal edge can still be formed from the leftover stubs.
fn pairable(stubs: &[usize], edges: &BTreeSet<(usize, usize)>) -> bool {
    let nodes: BTreeSet<usize> = stubs.iter().copied().collect();
    let nodes: Vec<usize> = nodes.into_iter().collect();
    nodes.iter().enumerate().any(|(i, &a)| {
        nodes[i + 1..]
            .iter()
            .any(|&b| !edges.contains(&(a.min(b), a.max(b))))
    })
}

/// Sorted neighbors of `node`; the order backs the positional neighbor labels.
pub fn neighbors(graph: &Graph, node: usize) -> Result<&[usize], TopologyError> {
    if node >= graph.node_count() {
        return Err(TopologyError::NodeOutOfRange {
            node,
            n: graph.node_count(),
        });
    }
    Ok(graph.neighbors_of(node))
}
