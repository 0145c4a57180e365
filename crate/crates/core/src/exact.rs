//! Exact expectations: closed forms, enumeration oracles and the
//! backward-induction optimum of the full-information game.

use std::io::{self, Write};

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::activation::ActivationState;
use crate::generate::{Family, Instance};
use crate::graph::{mask_components, Graph};
use crate::rational::{from_u128, ratio, Rational};
use crate::strategy::{play, state_for, StrategyError, StrategySpec};

/// Largest `n` accepted by [`solve_dp`].
pub const DP_MAX_N: usize = 24;
/// Largest `n` accepted by [`solve_dp_exact`].
pub const DP_EXACT_MAX_N: usize = 12;
/// Largest `n` accepted by [`brute_force_strategy_value`].
pub const PERMUTATION_MAX_N: usize = 9;
/// Largest number of subsets [`brute_force_blind`] will enumerate.
pub const SUBSET_BUDGET: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("{what}: n = {n} exceeds the cap of {cap}")]
    Resource { what: &'static str, n: usize, cap: usize },
    #[error("{what}: {count} cases exceed the enumeration budget")]
    Budget { what: &'static str, count: u128 },
    #[error("domain error: {0}")]
    Domain(String),
}

/// `E CC` after `l` uniformly random arrivals on any tree with `n`
/// vertices: `l(n - l + 1)/n`.
pub fn blind_expectation_tree(n: usize, l: usize) -> Result<Rational, ExactError> {
    if n == 0 || l > n {
        return Err(ExactError::Domain(format!("need 0 <= l <= n and n >= 1, got n={n}, l={l}")));
    }
    Ok(Rational::new(BigInt::from(l) * BigInt::from(n - l + 1), BigInt::from(n)))
}

/// Probability that a fixed vertex is among `l` uniformly chosen vertices
/// while `m` other fixed vertices are not:
/// `(l/n) · Π_{j<m} (n-l-j)/(n-1-j)`.
pub fn witness_probability(n: usize, m: usize, l: usize) -> Rational {
    if l == 0 || l > n || m + l > n {
        return Rational::zero();
    }
    let mut num = BigInt::from(l);
    let mut den = BigInt::from(n);
    for j in 0..m {
        num *= BigInt::from(n - l - j);
        den *= BigInt::from(n - 1 - j);
    }
    Rational::new(num, den)
}

/// Back-set size histogram of a k-tree on `n` vertices: one initial vertex
/// with each size `0..k`, and `n - k` vertices with size `k`.
pub fn ktree_backset_histogram(k: usize, n: usize) -> Vec<usize> {
    let mut hist = vec![1; k + 1];
    hist[k] = n - k;
    hist
}

/// Exact blind expectation for a graph whose components are counted by
/// witnessing vertices, given how many vertices have each back-set size.
pub fn blind_expectation_backsets(n: usize, hist: &[usize], l: usize) -> Rational {
    hist.iter()
        .enumerate()
        .filter(|&(_, &count)| count > 0)
        .map(|(m, &count)| witness_probability(n, m, l) * Rational::from_integer(BigInt::from(count)))
        .fold(Rational::zero(), |acc, x| acc + x)
}

/// Exact blind expectation on any k-tree with `n` vertices after `l`
/// arrivals, summing the witnessing probability of every vertex.
pub fn blind_expectation_ktree(k: usize, n: usize, l: usize) -> Result<Rational, ExactError> {
    if k == 0 || n < k || l > n {
        return Err(ExactError::Domain(format!("need n >= k >= 1 and l <= n, got k={k}, n={n}, l={l}")));
    }
    Ok(blind_expectation_backsets(n, &ktree_backset_histogram(k, n), l))
}

/// Numerators of the blind expectation for every `l = 0..=n` over one
/// common denominator `n · Π_{j<M} (n-1-j)`, `M` the largest back-set size.
pub fn backset_curve_numerators(n: usize, hist: &[usize]) -> (Vec<BigInt>, BigInt) {
    let top = hist.len().saturating_sub(1);
    let denominator = (0..top).fold(BigInt::from(n), |acc, j| acc * BigInt::from(n - 1 - j));
    // scale[m] = Π_{m<=j<top} (n-1-j) lifts size-m terms to the common denominator
    let mut scale = vec![BigInt::one(); top + 1];
    for m in (0..top).rev() {
        scale[m] = &scale[m + 1] * BigInt::from(n - 1 - m);
    }
    let numerators = (0..=n)
        .map(|l| {
            let mut total = BigInt::zero();
            let mut falling = BigInt::from(l);
            for (m, &count) in hist.iter().enumerate() {
                if m > 0 {
                    falling *= BigInt::from(n as i64 - l as i64 - m as i64 + 1);
                }
                if count > 0 && falling.sign() != num_bigint::Sign::Minus {
                    total += &falling * &scale[m] * BigInt::from(count);
                }
            }
            total
        })
        .collect();
    (numerators, denominator)
}

/// Back-set sizes from a maximum cardinality search, provided every
/// back-set (earlier neighbors in search order) is a clique. That holds
/// exactly for chordal graphs, where the component count of every induced
/// subgraph equals its number of witnessing vertices.
pub fn chordal_backset_sizes(g: &Graph) -> Option<Vec<usize>> {
    use std::collections::BinaryHeap;
    let n = g.n();
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut heap: BinaryHeap<(usize, std::cmp::Reverse<usize>)> =
        (0..n).map(|v| (0, std::cmp::Reverse(v))).collect();
    let mut sizes = vec![0; n];
    let mut back = Vec::new();
    while let Some((w, std::cmp::Reverse(v))) = heap.pop() {
        if visited[v] || w != weight[v] {
            continue;
        }
        visited[v] = true;
        back.clear();
        back.extend(g.neighbors(v).iter().copied().filter(|&u| visited[u] && u != v));
        if !g.is_clique(&back) {
            return None;
        }
        sizes[v] = back.len();
        for &u in g.neighbors(v) {
            if !visited[u] {
                weight[u] += 1;
                heap.push((weight[u], std::cmp::Reverse(u)));
            }
        }
    }
    Some(sizes)
}

/// Histogram of back-set sizes for a chordal graph, or `None`.
pub fn chordal_backset_histogram(g: &Graph) -> Option<Vec<usize>> {
    let sizes = chordal_backset_sizes(g)?;
    let mut hist = vec![0; sizes.iter().max().map_or(1, |&m| m + 1)];
    for s in sizes {
        hist[s] += 1;
    }
    Some(hist)
}

/// Exact mean component count over all `l`-subsets, by enumeration.
pub fn brute_force_blind(g: &Graph, l: usize) -> Result<Rational, ExactError> {
    let n = g.n();
    if n > 64 {
        return Err(ExactError::Resource { what: "subset enumeration", n, cap: 64 });
    }
    if l > n {
        return Err(ExactError::Domain(format!("l = {l} exceeds n = {n}")));
    }
    let count: u128 = binomial(n as u128, l as u128);
    if count > SUBSET_BUDGET {
        return Err(ExactError::Budget { what: "subset enumeration", count });
    }
    let adj = g.adjacency_masks();
    let mut total: u128 = 0;
    if l == 0 {
        return Ok(Rational::zero());
    }
    let limit: u128 = 1u128 << n;
    let mut set: u128 = (1u128 << l) - 1;
    while set < limit {
        total += u128::from(mask_components(&adj, set as u64));
        // next subset of the same size (Gosper)
        let low = set & set.wrapping_neg();
        let ripple = set + low;
        set = (((ripple ^ set) >> 2) / low) | ripple;
    }
    Ok(from_u128(total) / from_u128(count))
}

/// Backward-induction values over all active subsets.
///
/// `V(S) = max(CC(S), mean_{v ∉ S} V(S ∪ {v}))`; stopping is recorded where
/// `CC(S)` reaches the continuation mean (ties stop).
#[derive(Debug, Clone)]
pub struct ValueTable {
    n: usize,
    values: Vec<f64>,
    stop: Vec<u64>,
    exact: Option<Vec<Rational>>,
}

impl ValueTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, set: u64) -> f64 {
        self.values[set as usize]
    }

    pub fn exact_value(&self, set: u64) -> Option<&Rational> {
        self.exact.as_ref().map(|v| &v[set as usize])
    }

    pub fn stops(&self, set: u64) -> bool {
        self.stop[(set >> 6) as usize] >> (set & 63) & 1 == 1
    }

    /// Optimal expected score of the whole game, `V(∅)`.
    pub fn root_value(&self) -> f64 {
        self.values[0]
    }

    pub fn exact_root(&self) -> Option<&Rational> {
        self.exact_value(0)
    }

    /// Writes `subset_mask value stop_flag` lines, one per subset.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for set in 0..self.values.len() {
            let value = match &self.exact {
                Some(exact) => crate::rational::format(&exact[set]),
                None => format!("{:.17e}", self.values[set]),
            };
            writeln!(out, "{set} {value} {}", u8::from(self.stops(set as u64)))?;
        }
        Ok(())
    }
}

fn component_table(g: &Graph) -> Vec<u8> {
    let adj = g.adjacency_masks();
    (0..1u64 << g.n()).map(|s| mask_components(&adj, s) as u8).collect()
}

/// Floating-point backward induction for `n <= 24`.
///
/// Every value is a mean of at most `n` terms of earlier values, so the
/// accumulated rounding error stays below `n · 2^-50` in relative terms.
pub fn solve_dp(g: &Graph) -> Result<ValueTable, ExactError> {
    let n = g.n();
    if n > DP_MAX_N {
        return Err(ExactError::Resource { what: "backward induction", n, cap: DP_MAX_N });
    }
    let cc = component_table(g);
    let full = (1u64 << n) - 1;
    let mut values = vec![0.0f64; 1 << n];
    let mut stop = vec![0u64; (1usize << n).div_ceil(64)];
    let tolerance = 1e-12 * n.max(1) as f64;
    for set in (0..=full).rev() {
        let here = f64::from(cc[set as usize]);
        let missing = full & !set;
        let stops = if missing == 0 {
            true
        } else {
            let mut sum = 0.0;
            let mut rest = missing;
            while rest != 0 {
                let v = rest.trailing_zeros();
                rest &= rest - 1;
                sum += values[(set | 1 << v) as usize];
            }
            let mean = sum / f64::from(missing.count_ones());
            values[set as usize] = mean;
            here >= mean - tolerance
        };
        if stops {
            values[set as usize] = here;
            stop[(set >> 6) as usize] |= 1 << (set & 63);
        }
    }
    Ok(ValueTable { n, values, stop, exact: None })
}

/// Backward induction in exact rationals for `n <= 12`; stop decisions are
/// made on the exact values.
pub fn solve_dp_exact(g: &Graph) -> Result<ValueTable, ExactError> {
    let n = g.n();
    if n > DP_EXACT_MAX_N {
        return Err(ExactError::Resource { what: "exact backward induction", n, cap: DP_EXACT_MAX_N });
    }
    let cc = component_table(g);
    let full = (1u64 << n) - 1;
    let mut exact = vec![Rational::zero(); 1 << n];
    let mut stop = vec![0u64; (1usize << n).div_ceil(64)];
    for set in (0..=full).rev() {
        let here = Rational::from_integer(BigInt::from(cc[set as usize]));
        let missing = full & !set;
        let value = if missing == 0 {
            None
        } else {
            let mut sum = Rational::zero();
            let mut rest = missing;
            while rest != 0 {
                let v = rest.trailing_zeros();
                rest &= rest - 1;
                sum += &exact[(set | 1 << v) as usize];
            }
            Some(sum / Rational::from_integer(BigInt::from(missing.count_ones())))
        };
        match value {
            Some(mean) if mean > here => exact[set as usize] = mean,
            _ => {
                exact[set as usize] = here;
                stop[(set >> 6) as usize] |= 1 << (set & 63);
            }
        }
    }
    let values = exact.iter().map(crate::rational::to_f64).collect();
    Ok(ValueTable { n, values, stop, exact: Some(exact) })
}

/// Exact mean score of `spec` over all `n!` permutations.
pub fn brute_force_strategy_value(inst: &Instance, spec: &StrategySpec) -> Result<Rational, StrategyError> {
    let n = inst.n();
    if n > PERMUTATION_MAX_N {
        return Err(ExactError::Resource { what: "permutation enumeration", n, cap: PERMUTATION_MAX_N }.into());
    }
    let spec = spec.prepare(inst)?;
    let mut state = state_for(inst, &spec);
    let mut sigma: Vec<usize> = (0..n).collect();
    let mut total: u64 = 0;
    let mut count: u64 = 0;
    let mut run = |sigma: &[usize], state: &mut ActivationState<'_>| -> Result<(), StrategyError> {
        state.reset();
        let mut arrivals = sigma.iter().copied();
        total += play(state, &spec, || arrivals.next().expect("strategies stop by t = n"))?.score as u64;
        count += 1;
        Ok(())
    };
    // Heap's algorithm, iterative
    let mut c = vec![0usize; n];
    run(&sigma, &mut state)?;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                sigma.swap(0, i);
            } else {
                sigma.swap(c[i], i);
            }
            run(&sigma, &mut state)?;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(Rational::new(BigInt::from(total), BigInt::from(count)))
}

/// Exact expected component count after adding a uniformly random
/// `l`-subset of the inactive vertices to `active`, for forests only
/// (components = vertices - edges).
pub fn forest_extension_expectation(g: &Graph, active: &[bool], l: usize) -> Result<Rational, ExactError> {
    if g.edge_count() + g.component_count() != g.n() {
        return Err(ExactError::Domain("graph is not a forest".into()));
    }
    let a = active.iter().filter(|&&x| x).count();
    let r = g.n() - a;
    if l > r {
        return Err(ExactError::Domain(format!("cannot add {l} of {r} inactive vertices")));
    }
    let (mut inside, mut crossing, mut outside) = (0i64, 0i64, 0i64);
    for (u, v) in g.edges() {
        match (active[u], active[v]) {
            (true, true) => inside += 1,
            (false, false) => outside += 1,
            _ => crossing += 1,
        }
    }
    let mut expected = Rational::from_integer(BigInt::from(a + l - inside as usize));
    if r > 0 {
        expected -= ratio(crossing * l as i64, r as i64);
    }
    if r > 1 {
        expected -= ratio(outside * (l * l.saturating_sub(1)) as i64, (r * (r - 1)) as i64);
    }
    Ok(expected)
}

/// The star-with-path continuation example, evaluated two ways.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemarkEvaluation {
    pub n: usize,
    /// `((n-1)/n)·1 + (1/n)(-(n+1) + (n-1)/4)`, the expression as displayed.
    pub displayed: Rational,
    /// Expected gain of the continuation strategy computed on the instance.
    pub strategy_gain: Rational,
    /// Components when stopping immediately (all `n + 1` leaves active).
    pub stop_now: usize,
}

impl RemarkEvaluation {
    /// Limit of the displayed expression as `n → ∞`.
    pub fn displayed_limit() -> Rational {
        ratio(1, 4)
    }
}

/// Evaluates "if the next vertex is not the center stop, otherwise take
/// `(n-1)/2` more vertices" on `star_plus_path(n)` with every leaf active.
pub fn remark_continuation_value(n: usize) -> Result<RemarkEvaluation, ExactError> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(ExactError::Domain(format!("need odd n >= 3, got {n}")));
    }
    let nn = n as i64;
    let displayed = ratio(nn - 1, nn) + ratio(-(nn + 1) * 4 + (nn - 1), 4 * nn);

    let inst = Family::StarPlusPath { n }.build().map_err(|e| ExactError::Domain(e.to_string()))?;
    let g = &inst.graph;
    let center = 0;
    let mut start = ActivationState::new(g);
    for leaf in 1..=n + 1 {
        start.activate(leaf).expect("fresh leaf");
    }
    let stop_now = start.cc();
    let inactive: Vec<usize> = (0..g.n()).filter(|&v| !start.is_active(v)).collect();
    debug_assert_eq!(inactive.len(), n);
    let mut total = Rational::zero();
    for &next in &inactive {
        let mut state = start.clone();
        state.activate(next).expect("inactive vertex");
        let outcome = if next == center {
            forest_extension_expectation(g, state.active(), (n - 1) / 2)?
        } else {
            Rational::from_integer(BigInt::from(state.cc()))
        };
        total += outcome;
    }
    let expected = total / Rational::from_integer(BigInt::from(n));
    let strategy_gain = expected - Rational::from_integer(BigInt::from(stop_now));
    Ok(RemarkEvaluation { n, displayed, strategy_gain, stop_now })
}
