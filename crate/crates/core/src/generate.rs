//! Seeded instance generators for every graph family used in the experiments.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{graph_from_construction, ConstructionEntry, ConstructionSequence, Graph};
use crate::rational::parse_fraction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> GenerateError {
    GenerateError::InvalidParam { name, reason: reason.into() }
}

/// A playable arena: the graph, its construction certificate when one
/// exists, and a distinguished initial clique used by trigger strategies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub graph: Graph,
    pub sequence: Option<ConstructionSequence>,
    pub initial_clique: Vec<usize>,
}

impl Instance {
    pub fn from_graph(graph: Graph) -> Self {
        Self { graph, sequence: None, initial_clique: Vec::new() }
    }

    pub fn from_sequence(seq: ConstructionSequence) -> Self {
        Self {
            graph: graph_from_construction(&seq),
            initial_clique: seq.initial_clique(),
            sequence: Some(seq),
        }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

/// Random k-tree grown from the initial clique `0..k`.
///
/// Every new vertex picks its back-neighborhood uniformly among the k-cliques
/// created so far: the initial clique, plus the `k` cliques `{v} ∪ M_v ∖ {w}`
/// contributed by each placed vertex `v`. For `k = 1` this is the random
/// recursive tree. Vertex ids follow the construction order.
pub fn gen_random_ktree(k: usize, n: usize, seed: u64) -> Result<ConstructionSequence, GenerateError> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    if n < k {
        return Err(invalid("n", format!("need n >= k, got n={n}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<ConstructionEntry> =
        (0..k).map(|i| ConstructionEntry { v: i, m: (0..i).collect() }).collect();
    // flat storage: clique c occupies cliques[c*k..(c+1)*k]
    let mut cliques: Vec<usize> = (0..k).collect();
    for v in k..n {
        let c = rng.gen_range(0..cliques.len() / k);
        let m = cliques[c * k..(c + 1) * k].to_vec();
        for skip in 0..k {
            cliques.push(v);
            cliques.extend(m.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &w)| w));
        }
        order.push(ConstructionEntry { v, m });
    }
    Ok(ConstructionSequence::new(k, order).expect("generator emits valid sequences"))
}

/// Random maximal k-degenerate graph: each vertex after the initial clique
/// attaches to a uniformly random k-subset of the earlier vertices.
pub fn gen_random_kdegenerate(k: usize, n: usize, seed: u64) -> Result<ConstructionSequence, GenerateError> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    if n < k {
        return Err(invalid("n", format!("need n >= k, got n={n}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = (0..n)
        .map(|v| {
            let m = if v < k { (0..v).collect() } else { index::sample(&mut rng, v, k).into_vec() };
            ConstructionEntry { v, m }
        })
        .collect();
    Ok(ConstructionSequence::new(k, order).expect("generator emits valid sequences"))
}

/// Where the single joining edge lands on the small star.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StarAttachment {
    Center,
    Leaf,
}

/// Named graph families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// Path on `n` vertices.
    Path { n: usize },
    /// Star on `n` vertices: center 0 and `n - 1` leaves.
    Star { n: usize },
    /// k-tree on `n` vertices whose non-initial vertices all attach to the
    /// initial clique.
    KStar { k: usize, n: usize },
    /// Star with `n + 1` leaves whose center is joined to one end of a path
    /// on `n - 1` vertices (`2n + 1` vertices).
    StarPlusPath { n: usize },
    /// A 2-star on `ceil(ratio * n)` vertices joined by one edge to a star
    /// on the remaining vertices.
    TwoStarPlusStar {
        n: usize,
        ratio: Ratio<i64>,
        /// Non-initial 2-star vertex carrying the joining edge.
        attach_from: usize,
        attach_to: StarAttachment,
    },
    RandomTree { n: usize, seed: u64 },
    KTree { k: usize, n: usize, seed: u64 },
    KDegenerate { k: usize, n: usize, seed: u64 },
    /// d-dimensional grid with `side^d` vertices.
    Grid { d: usize, side: usize },
}

impl Family {
    pub const NAMES: [&'static str; 10] = [
        "path",
        "star",
        "k_star",
        "star_plus_path",
        "two_star_plus_star",
        "random_tree",
        "ktree",
        "kdegenerate",
        "grid",
        "tree",
    ];

    /// Builds a family from its name and `key=value` parameters.
    pub fn from_params(name: &str, params: &BTreeMap<String, String>) -> Result<Self, GenerateError> {
        fn get<T: std::str::FromStr>(
            params: &BTreeMap<String, String>,
            key: &'static str,
        ) -> Result<Option<T>, GenerateError> {
            params
                .get(key)
                .map(|raw| raw.parse::<T>().map_err(|_| invalid(key, format!("cannot parse `{raw}`"))))
                .transpose()
        }
        fn need<T: std::str::FromStr>(
            params: &BTreeMap<String, String>,
            key: &'static str,
        ) -> Result<T, GenerateError> {
            get(params, key)?.ok_or(GenerateError::MissingParam(key))
        }
        let seed = get(params, "seed")?.unwrap_or(0);
        Ok(match name {
            "path" => Family::Path { n: need(params, "n")? },
            "star" => Family::Star { n: need(params, "n")? },
            "k_star" => Family::KStar { k: need(params, "k")?, n: need(params, "n")? },
            "star_plus_path" => Family::StarPlusPath { n: need(params, "n")? },
            "two_star_plus_star" => {
                let ratio = match params.get("ratio") {
                    Some(raw) => parse_fraction(raw).map_err(|e| invalid("ratio", e.to_string()))?,
                    None => Ratio::new(999, 1000),
                };
                let attach_to = match params.get("attach").map(String::as_str) {
                    None | Some("center") => StarAttachment::Center,
                    Some("leaf") => StarAttachment::Leaf,
                    Some(other) => return Err(invalid("attach", format!("expected center|leaf, got `{other}`"))),
                };
                Family::TwoStarPlusStar {
                    n: need(params, "n")?,
                    ratio,
                    attach_from: get(params, "attach_from")?.unwrap_or(2),
                    attach_to,
                }
            }
            "random_tree" | "tree" => Family::RandomTree { n: need(params, "n")?, seed },
            "ktree" => Family::KTree { k: need(params, "k")?, n: need(params, "n")?, seed },
            "kdegenerate" => Family::KDegenerate { k: need(params, "k")?, n: need(params, "n")?, seed },
            "grid" => Family::Grid { d: need(params, "d")?, side: need(params, "side")? },
            other => return Err(GenerateError::UnknownFamily(other.to_string())),
        })
    }

    pub fn build(&self) -> Result<Instance, GenerateError> {
        match *self {
            Family::Path { n } => {
                if n == 0 {
                    return Err(invalid("n", "must be positive"));
                }
                let order = (0..n)
                    .map(|v| ConstructionEntry { v, m: if v == 0 { vec![] } else { vec![v - 1] } })
                    .collect();
                Ok(Instance::from_sequence(ConstructionSequence::new(1, order).unwrap()))
            }
            Family::Star { n } => {
                if n == 0 {
                    return Err(invalid("n", "must be positive"));
                }
                let order = (0..n)
                    .map(|v| ConstructionEntry { v, m: if v == 0 { vec![] } else { vec![0] } })
                    .collect();
                Ok(Instance::from_sequence(ConstructionSequence::new(1, order).unwrap()))
            }
            Family::KStar { k, n } => {
                if k == 0 || n < k {
                    return Err(invalid("n", format!("need n >= k >= 1, got n={n}, k={k}")));
                }
                Ok(Instance::from_sequence(k_star_sequence(k, n)))
            }
            Family::StarPlusPath { n } => {
                if n < 1 {
                    return Err(invalid("n", "must be positive"));
                }
                // center 0, leaves 1..=n+1, path n+2..=2n starting next to the center
                let mut order = vec![ConstructionEntry { v: 0, m: vec![] }];
                order.extend((1..=n + 1).map(|v| ConstructionEntry { v, m: vec![0] }));
                order.extend((n + 2..=2 * n).map(|v| ConstructionEntry {
                    v,
                    m: vec![if v == n + 2 { 0 } else { v - 1 }],
                }));
                Ok(Instance::from_sequence(ConstructionSequence::new(1, order).unwrap()))
            }
            Family::TwoStarPlusStar { n, ratio, attach_from, attach_to } => {
                two_star_plus_star(n, ratio, attach_from, attach_to)
            }
            Family::RandomTree { n, seed } => Ok(Instance::from_sequence(gen_random_ktree(1, n, seed)?)),
            Family::KTree { k, n, seed } => Ok(Instance::from_sequence(gen_random_ktree(k, n, seed)?)),
            Family::KDegenerate { k, n, seed } => Ok(Instance::from_sequence(gen_random_kdegenerate(k, n, seed)?)),
            Family::Grid { d, side } => grid(d, side).map(Instance::from_graph),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Path { n } => write!(f, "path(n={n})"),
            Family::Star { n } => write!(f, "star(n={n})"),
            Family::KStar { k, n } => write!(f, "k_star(k={k},n={n})"),
            Family::StarPlusPath { n } => write!(f, "star_plus_path(n={n})"),
            Family::TwoStarPlusStar { n, ratio, attach_from, attach_to } => write!(
                f,
                "two_star_plus_star(n={n},ratio={ratio},attach_from={attach_from},attach={})",
                match attach_to {
                    StarAttachment::Center => "center",
                    StarAttachment::Leaf => "leaf",
                }
            ),
            Family::RandomTree { n, seed } => write!(f, "random_tree(n={n},seed={seed})"),
            Family::KTree { k, n, seed } => write!(f, "ktree(k={k},n={n},seed={seed})"),
            Family::KDegenerate { k, n, seed } => write!(f, "kdegenerate(k={k},n={n},seed={seed})"),
            Family::Grid { d, side } => write!(f, "grid(d={d},side={side})"),
        }
    }
}

fn k_star_sequence(k: usize, n: usize) -> ConstructionSequence {
    let order = (0..n)
        .map(|v| ConstructionEntry { v, m: (0..v.min(k)).collect() })
        .collect();
    ConstructionSequence::new(k, order).unwrap()
}

fn two_star_plus_star(
    n: usize,
    ratio: Ratio<i64>,
    attach_from: usize,
    attach_to: StarAttachment,
) -> Result<Instance, GenerateError> {
    if ratio <= Ratio::from_integer(0) || ratio >= Ratio::from_integer(1) {
        return Err(invalid("ratio", "must lie strictly between 0 and 1"));
    }
    let big = ratio.numer().unsigned_abs() as u128 * n as u128;
    let den = ratio.denom().unsigned_abs() as u128;
    let two_star = big.div_ceil(den) as usize;
    let star = n.saturating_sub(two_star);
    if two_star < 3 {
        return Err(invalid("n", "2-star part needs at least 3 vertices"));
    }
    if star == 0 || (attach_to == StarAttachment::Leaf && star < 2) {
        return Err(invalid("n", "star part is empty"));
    }
    if attach_from < 2 || attach_from >= two_star {
        return Err(invalid("attach_from", format!("must be a non-initial 2-star vertex in 2..{two_star}")));
    }
    let center = two_star;
    let mut edges: Vec<(usize, usize)> = k_star_sequence(2, two_star)
        .entries()
        .iter()
        .flat_map(|e| e.m.iter().map(move |&w| (e.v, w)))
        .collect();
    edges.extend((center + 1..n).map(|leaf| (center, leaf)));
    let target = match attach_to {
        StarAttachment::Center => center,
        StarAttachment::Leaf => center + 1,
    };
    edges.push((attach_from, target));
    let graph = Graph::from_edges(n, edges).expect("construction is simple");
    Ok(Instance { graph, sequence: None, initial_clique: vec![0, 1] })
}

fn grid(d: usize, side: usize) -> Result<Graph, GenerateError> {
    if d == 0 || side == 0 {
        return Err(invalid("d", "dimension and side must be positive"));
    }
    let n = u32::try_from(d)
        .ok()
        .and_then(|d| side.checked_pow(d))
        .filter(|&n| n <= 1 << 26)
        .ok_or_else(|| invalid("side", "grid too large"))?;
    let mut edges = Vec::new();
    for v in 0..n {
        let mut stride = 1;
        for _ in 0..d {
            if (v / stride) % side + 1 < side {
                edges.push((v, v + stride));
            }
            stride *= side;
        }
    }
    Ok(Graph::from_edges(n, edges).expect("grid is simple"))
}
