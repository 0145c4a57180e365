//! Incremental state of one play: vertices arrive one at a time and the
//! component count, the neighborhood sum `Σ|N(C_i)|` and the witnessing
//! vertex count are kept current.
//!
//! `N(C)` is the set of inactive vertices adjacent to the active component
//! `C`. Each component owns its neighborhood as a hash set; merging moves
//! the smaller sets into the largest one, so a run costs
//! `O(Σ deg · log n)` set operations.

use std::collections::HashSet;

use num_bigint::BigInt;
use thiserror::Error;

use crate::graph::{ConstructionSequence, Graph};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActivationError {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    OutOfRange { vertex: usize, n: usize },
    #[error("vertex {0} is already active")]
    AlreadyActive(usize),
    #[error("every vertex is active; the next step is undefined")]
    Complete,
    #[error("not a permutation: {0}")]
    NotAPermutation(String),
    #[error("witnessing vertices need a construction sequence")]
    WitnessesNotTracked,
    #[error("construction sequence has {seq} vertices but the graph has {graph}")]
    SizeMismatch { seq: usize, graph: usize },
}

/// Back-neighborhoods and their inverse, for witnessing-vertex maintenance.
#[derive(Debug, Clone)]
pub struct WitnessIndex {
    back: Vec<Vec<usize>>,
    forward: Vec<Vec<usize>>,
}

impl WitnessIndex {
    pub fn new(seq: &ConstructionSequence) -> Self {
        let back = seq.back_sets();
        let mut forward = vec![Vec::new(); back.len()];
        for (v, m) in back.iter().enumerate() {
            for &w in m {
                forward[w].push(v);
            }
        }
        Self { back, forward }
    }

    pub fn n(&self) -> usize {
        self.back.len()
    }

    pub fn back(&self, v: usize) -> &[usize] {
        &self.back[v]
    }
}

/// What an activation changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivationDelta {
    pub delta_cc: isize,
    pub cc: usize,
    pub nbr_sum: Option<usize>,
    pub wv: Option<usize>,
}

#[derive(Debug, Clone)]
struct Neighborhoods {
    // indexed by union-find root
    sets: Vec<Option<HashSet<usize>>>,
    sum: usize,
}

#[derive(Debug, Clone)]
struct Witnesses<'a> {
    index: &'a WitnessIndex,
    back_active: Vec<u32>,
    count: usize,
}

/// Mutable state of a single run over a shared graph.
#[derive(Debug, Clone)]
pub struct ActivationState<'a> {
    graph: &'a Graph,
    active: Vec<bool>,
    order: Vec<usize>,
    parent: Vec<usize>,
    size: Vec<usize>,
    cc: usize,
    neighborhoods: Option<Neighborhoods>,
    witnesses: Option<Witnesses<'a>>,
    roots: Vec<usize>,
}

impl<'a> ActivationState<'a> {
    /// State tracking only the component count.
    pub fn new(graph: &'a Graph) -> Self {
        let n = graph.n();
        Self {
            graph,
            active: vec![false; n],
            order: Vec::with_capacity(n),
            parent: (0..n).collect(),
            size: vec![1; n],
            cc: 0,
            neighborhoods: None,
            witnesses: None,
            roots: Vec::new(),
        }
    }

    /// Also maintain `Σ|N(C_i)|`.
    pub fn with_neighborhoods(mut self) -> Self {
        assert!(self.order.is_empty(), "enable tracking before the first activation");
        self.neighborhoods = Some(Neighborhoods { sets: vec![None; self.graph.n()], sum: 0 });
        self
    }

    /// Also maintain the witnessing-vertex count for `index`.
    pub fn with_witnesses(mut self, index: &'a WitnessIndex) -> Result<Self, ActivationError> {
        assert!(self.order.is_empty(), "enable tracking before the first activation");
        if index.n() != self.graph.n() {
            return Err(ActivationError::SizeMismatch { seq: index.n(), graph: self.graph.n() });
        }
        self.witnesses = Some(Witnesses { index, back_active: vec![0; index.n()], count: 0 });
        Ok(self)
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn t(&self) -> usize {
        self.order.len()
    }

    pub fn cc(&self) -> usize {
        self.cc
    }

    pub fn is_active(&self, v: usize) -> bool {
        self.active[v]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Activated vertices in arrival order.
    pub fn arrivals(&self) -> &[usize] {
        &self.order
    }

    /// Bitmask of the active set; only for `n <= 64`.
    pub fn active_mask(&self) -> u64 {
        self.order.iter().fold(0, |m, &v| m | 1 << v)
    }

    pub fn tracked_nbr_sum(&self) -> Option<usize> {
        self.neighborhoods.as_ref().map(|nb| nb.sum)
    }

    /// `Σ|N(C_i)|`, recomputed from scratch when not tracked.
    pub fn nbr_sum(&self) -> usize {
        self.tracked_nbr_sum().unwrap_or_else(|| recount_nbr_sum(self))
    }

    pub fn wv(&self) -> Option<usize> {
        self.witnesses.as_ref().map(|w| w.count)
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn root_of(&self, mut v: usize) -> usize {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    /// Number of distinct active components adjacent to the inactive `w`.
    pub fn adj_comp_count(&self, w: usize) -> usize {
        let mut roots: Vec<usize> = self
            .graph
            .neighbors(w)
            .iter()
            .filter(|&&u| self.active[u])
            .map(|&u| self.root_of(u))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    pub fn activate(&mut self, v: usize) -> Result<ActivationDelta, ActivationError> {
        let n = self.n();
        if v >= n {
            return Err(ActivationError::OutOfRange { vertex: v, n });
        }
        if self.active[v] {
            return Err(ActivationError::AlreadyActive(v));
        }
        let graph = self.graph;
        let mut roots = std::mem::take(&mut self.roots);
        roots.clear();
        for &w in graph.neighbors(v) {
            if self.active[w] {
                let r = self.find(w);
                roots.push(r);
            }
        }
        roots.sort_unstable();
        roots.dedup();
        let merged = roots.len();
        self.cc = self.cc + 1 - merged;

        let merged_set = self.neighborhoods.as_mut().map(|nb| {
            let mut sets: Vec<HashSet<usize>> = roots.iter().filter_map(|&r| nb.sets[r].take()).collect();
            nb.sum -= sets.iter().map(HashSet::len).sum::<usize>();
            let largest = (0..sets.len()).max_by_key(|&i| sets[i].len());
            let mut base = largest.map(|i| sets.swap_remove(i)).unwrap_or_default();
            for set in sets {
                base.extend(set);
            }
            base.remove(&v);
            base.extend(graph.neighbors(v).iter().copied().filter(|&w| !self.active[w]));
            nb.sum += base.len();
            base
        });

        self.active[v] = true;
        self.order.push(v);
        let mut root = v;
        for &r in &roots {
            let (big, small) = if self.size[r] >= self.size[root] { (r, root) } else { (root, r) };
            self.parent[small] = big;
            self.size[big] += self.size[small];
            root = big;
        }
        self.roots = roots;
        if let (Some(nb), Some(set)) = (self.neighborhoods.as_mut(), merged_set) {
            nb.sets[root] = Some(set);
        }

        if let Some(wit) = self.witnesses.as_mut() {
            if wit.back_active[v] == 0 {
                wit.count += 1;
            }
            for &w in &wit.index.forward[v] {
                if self.active[w] && wit.back_active[w] == 0 {
                    wit.count -= 1;
                }
                wit.back_active[w] += 1;
            }
        }

        Ok(ActivationDelta {
            delta_cc: 1 - merged as isize,
            cc: self.cc,
            nbr_sum: self.tracked_nbr_sum(),
            wv: self.wv(),
        })
    }

    /// Deactivates everything, touching only what the run touched.
    pub fn reset(&mut self) {
        for &v in &self.order {
            self.active[v] = false;
            self.parent[v] = v;
            self.size[v] = 1;
            if let Some(nb) = self.neighborhoods.as_mut() {
                nb.sets[v] = None;
            }
            if let Some(wit) = self.witnesses.as_mut() {
                for &w in &wit.index.forward[v] {
                    wit.back_active[w] = 0;
                }
            }
        }
        self.order.clear();
        self.cc = 0;
        if let Some(nb) = self.neighborhoods.as_mut() {
            nb.sum = 0;
        }
        if let Some(wit) = self.witnesses.as_mut() {
            wit.count = 0;
        }
    }

    /// Exact expected change of the component count caused by the next
    /// arrival: `(n - t - Σ|N(C_i)|) / (n - t)`.
    pub fn expected_gain(&self) -> Result<Rational, ActivationError> {
        let remaining = self.n() - self.t();
        if remaining == 0 {
            return Err(ActivationError::Complete);
        }
        let numer = BigInt::from(remaining) - BigInt::from(self.nbr_sum());
        Ok(Rational::new(numer, BigInt::from(remaining)))
    }
}

/// Component count of the active part by breadth-first search.
pub fn recount_cc(state: &ActivationState<'_>) -> usize {
    state.graph.induced_components(&state.active)
}

/// Witnessing vertices counted from scratch.
pub fn recount_wv(state: &ActivationState<'_>) -> Result<usize, ActivationError> {
    let wit = state.witnesses.as_ref().ok_or(ActivationError::WitnessesNotTracked)?;
    Ok(state
        .order
        .iter()
        .filter(|&&v| wit.index.back(v).iter().all(|&w| !state.active[w]))
        .count())
}

/// `Σ|N(C_i)|` by labelling components and collecting their inactive
/// neighbors.
pub fn recount_nbr_sum(state: &ActivationState<'_>) -> usize {
    let g = state.graph;
    let mut label = vec![usize::MAX; g.n()];
    let mut stack = Vec::new();
    let mut total = 0;
    let mut seen_nbr = HashSet::new();
    for &s in &state.order {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = s;
        stack.push(s);
        seen_nbr.clear();
        while let Some(u) = stack.pop() {
            for &w in g.neighbors(u) {
                if !state.active[w] {
                    seen_nbr.insert(w);
                } else if label[w] == usize::MAX {
                    label[w] = s;
                    stack.push(w);
                }
            }
        }
        total += seen_nbr.len();
    }
    total
}

/// One row of a run trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub t: usize,
    pub cc: usize,
    pub nbr_sum: usize,
    pub wv: Option<usize>,
}

pub fn check_permutation(n: usize, sigma: &[usize]) -> Result<(), ActivationError> {
    if sigma.len() != n {
        return Err(ActivationError::NotAPermutation(format!("length {} but n = {n}", sigma.len())));
    }
    let mut seen = vec![false; n];
    for &v in sigma {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(ActivationError::NotAPermutation(format!("vertex {v} repeated or out of range")));
        }
    }
    Ok(())
}

/// Plays the whole permutation and records `(t, cc, nbr_sum, wv)` for
/// `t = 0..=n`.
pub fn run_permutation(
    g: &Graph,
    seq: Option<&ConstructionSequence>,
    sigma: &[usize],
) -> Result<Vec<TraceStep>, ActivationError> {
    check_permutation(g.n(), sigma)?;
    let index = seq.map(WitnessIndex::new);
    let mut state = ActivationState::new(g).with_neighborhoods();
    if let Some(index) = index.as_ref() {
        state = state.with_witnesses(index)?;
    }
    let mut trace = Vec::with_capacity(sigma.len() + 1);
    trace.push(TraceStep { t: 0, cc: 0, nbr_sum: 0, wv: state.wv() });
    for &v in sigma {
        let delta = state.activate(v)?;
        trace.push(TraceStep {
            t: state.t(),
            cc: delta.cc,
            nbr_sum: delta.nbr_sum.unwrap_or_default(),
            wv: delta.wv,
        });
    }
    Ok(trace)
}
