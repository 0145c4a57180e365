//! Graphs, construction sequences and k-systems.
//!
//! Vertex ids are dense and 0-based. A [`ConstructionSequence`] certifies a
//! maximal k-degenerate graph: the first `k` entries form the initial clique
//! (entry `i` lists all earlier initial vertices), and every later entry
//! attaches its vertex to exactly `k` earlier vertices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("construction entry {entry}: {reason}")]
    InvalidEntry { entry: usize, reason: String },
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Graph on `n` isolated vertices.
    pub fn empty(n: usize) -> Self {
        Self { adjacency: vec![Vec::new(); n] }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::DuplicateEdge(u.min(w[0]), u.max(w[0])));
            }
        }
        Ok(Self { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Neighborhood bitmasks; only meaningful for `n <= 64`.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        assert!(self.n() <= 64, "bitmask view needs n <= 64");
        self.adjacency
            .iter()
            .map(|list| list.iter().fold(0u64, |m, &w| m | (1u64 << w)))
            .collect()
    }

    /// Number of connected components of the subgraph induced by `members`.
    pub fn induced_components(&self, members: &[bool]) -> usize {
        let mut seen = vec![false; self.n()];
        let mut stack = Vec::new();
        let mut count = 0;
        for s in 0..self.n() {
            if !members[s] || seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &w in &self.adjacency[u] {
                    if members[w] && !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    pub fn component_count(&self) -> usize {
        self.induced_components(&vec![true; self.n()])
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.component_count() == 1
    }

    /// True when the vertices in `set` are pairwise adjacent.
    pub fn is_clique(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &u)| set[i + 1..].iter().all(|&v| self.has_edge(u, v)))
    }
}

/// Number of components of the subgraph induced by the bitmask `set`.
pub fn mask_components(adj: &[u64], set: u64) -> u32 {
    let mut rest = set;
    let mut count = 0;
    while rest != 0 {
        count += 1;
        let mut frontier = rest & rest.wrapping_neg();
        rest &= !frontier;
        while frontier != 0 {
            let u = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let fresh = adj[u] & rest;
            rest &= !fresh;
            frontier |= fresh;
        }
    }
    count
}

/// One step of a construction ordering: vertex `v` and its back-neighborhood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionEntry {
    pub v: usize,
    pub m: Vec<usize>,
}

/// Ordering certifying a maximal k-degenerate graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionSequence {
    k: usize,
    order: Vec<ConstructionEntry>,
}

impl ConstructionSequence {
    /// Validates and builds a sequence. Back-neighborhood lists are sorted.
    pub fn new(k: usize, order: Vec<ConstructionEntry>) -> Result<Self, GraphError> {
        let n = order.len();
        if k == 0 && n > 0 {
            return Err(GraphError::InvalidEntry { entry: 0, reason: "k must be at least 1".into() });
        }
        let mut position = vec![usize::MAX; n];
        let mut order = order;
        for (i, entry) in order.iter_mut().enumerate() {
            let bad = |reason: String| GraphError::InvalidEntry { entry: i, reason };
            if entry.v >= n {
                return Err(bad(format!("vertex {} out of range 0..{n}", entry.v)));
            }
            if position[entry.v] != usize::MAX {
                return Err(bad(format!(
                    "vertex {} already placed at entry {}",
                    entry.v, position[entry.v]
                )));
            }
            entry.m.sort_unstable();
            if entry.m.windows(2).any(|w| w[0] == w[1]) {
                return Err(bad("repeated vertex in back-neighborhood".into()));
            }
            let expected = i.min(k);
            if entry.m.len() != expected {
                return Err(bad(format!(
                    "back-neighborhood has {} vertices, expected {expected}",
                    entry.m.len()
                )));
            }
            for &w in &entry.m {
                if w >= n || position[w] == usize::MAX {
                    return Err(bad(format!("vertex {w} is not placed earlier")));
                }
            }
            position[entry.v] = i;
        }
        Ok(Self { k, order })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn entries(&self) -> &[ConstructionEntry] {
        &self.order
    }

    /// Vertices of the initial clique, in order.
    pub fn initial_clique(&self) -> Vec<usize> {
        self.order.iter().take(self.k).map(|e| e.v).collect()
    }

    /// Back-neighborhood `M_v` indexed by vertex id.
    pub fn back_sets(&self) -> Vec<Vec<usize>> {
        let mut back = vec![Vec::new(); self.n()];
        for entry in &self.order {
            back[entry.v] = entry.m.clone();
        }
        back
    }
}

/// The graph certified by `seq`: edges `{v, w}` for every `w` in `M_v`.
pub fn graph_from_construction(seq: &ConstructionSequence) -> Graph {
    let edges = seq.entries().iter().flat_map(|e| e.m.iter().map(move |&w| (e.v, w)));
    Graph::from_edges(seq.n(), edges).expect("validated sequence yields a simple graph")
}

/// True iff every full-size back-neighborhood induces a clique in `g`.
pub fn is_ktree(seq: &ConstructionSequence, g: &Graph) -> bool {
    seq.entries()
        .iter()
        .filter(|e| e.m.len() == seq.k())
        .all(|e| g.is_clique(&e.m))
}

/// Abstract set of `(v, M_v)` pairs with `|M_v| = k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSystem {
    ground_size: usize,
    k: usize,
    pairs: Vec<(usize, Vec<usize>)>,
}

impl KSystem {
    pub fn new(ground_size: usize, k: usize, pairs: Vec<(usize, Vec<usize>)>) -> Result<Self, GraphError> {
        let mut used = BTreeSet::new();
        for (i, (v, m)) in pairs.iter().enumerate() {
            let bad = |reason: String| GraphError::InvalidEntry { entry: i, reason };
            let set: BTreeSet<_> = m.iter().copied().collect();
            if *v >= ground_size || m.iter().any(|&w| w >= ground_size) {
                return Err(bad("vertex out of range".into()));
            }
            if set.len() != k || m.len() != k {
                return Err(bad(format!("pair set must have exactly {k} distinct vertices")));
            }
            if set.contains(v) {
                return Err(bad(format!("vertex {v} belongs to its own set")));
            }
            if !used.insert(*v) {
                return Err(bad(format!("vertex {v} appears in two pairs")));
            }
        }
        Ok(Self { ground_size, k, pairs })
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pairs(&self) -> &[(usize, Vec<usize>)] {
        &self.pairs
    }

    /// Number of sets `M_w` containing `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.pairs.iter().filter(|(_, m)| m.contains(&v)).count()
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.ground_size];
        for (_, m) in &self.pairs {
            for &w in m {
                deg[w] += 1;
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Active pairs: `v` active and `M_v` entirely inactive.
    pub fn active_pairs(&self, active: &[bool]) -> usize {
        self.pairs
            .iter()
            .filter(|(v, m)| active[*v] && m.iter().all(|&w| !active[w]))
            .count()
    }
}

/// The k-system of non-initial entries of `seq`.
pub fn ksystem_from_construction(seq: &ConstructionSequence) -> KSystem {
    let pairs = seq
        .entries()
        .iter()
        .filter(|e| e.m.len() == seq.k())
        .map(|e| (e.v, e.m.clone()))
        .collect();
    KSystem { ground_size: seq.n(), k: seq.k(), pairs }
}
