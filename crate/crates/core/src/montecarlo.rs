//! Seeded Monte Carlo estimation.
//!
//! Replication `i` draws its permutation from a ChaCha8 generator seeded
//! with the master seed and switched to stream `i`, so its arrivals depend
//! only on `(seed, i)`. Scores are stored by replication index and reduced
//! sequentially with pairwise summation: estimates are bit-identical for
//! any number of worker threads.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::activation::ActivationState;
use crate::generate::Instance;
use crate::graph::Graph;
use crate::rational::ceil_times;
use crate::strategy::{play, state_for, StrategyError, StrategySpec};

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub replications: usize,
    pub seed: u64,
    pub ci_level: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { replications: 1000, seed: 0, ci_level: 0.99, threads: None }
    }
}

impl EstimatorConfig {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self { replications, seed, ..Self::default() }
    }

    pub fn with_threads(self, threads: usize) -> Self {
        Self { threads: Some(threads), ..self }
    }

    pub fn with_ci_level(self, ci_level: f64) -> Self {
        Self { ci_level, ..self }
    }

    fn validate(&self) -> Result<(), MonteCarloError> {
        if self.replications == 0 {
            return Err(MonteCarloError::Config("replications must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(MonteCarloError::Config(format!("ci_level {} must lie in (0, 1)", self.ci_level)));
        }
        if self.threads == Some(0) {
            return Err(MonteCarloError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Two-sided normal quantile for the configured level.
    pub fn z(&self) -> f64 {
        Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - (1.0 - self.ci_level) / 2.0)
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T, MonteCarloError> {
        match self.threads {
            None => Ok(job()),
            Some(threads) => rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| MonteCarloError::ThreadPool(e.to_string()))
                .map(|pool| pool.install(job)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Sample mean with a normal-approximation interval.
pub fn summarize(samples: &[f64], cfg: &EstimatorConfig) -> Estimate {
    let count = samples.len();
    let mean = pairwise_sum(samples) / count as f64;
    let deviations: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
    let variance = if count > 1 { pairwise_sum(&deviations) / (count - 1) as f64 } else { 0.0 };
    let std_error = (variance / count as f64).sqrt();
    let half = cfg.z() * std_error;
    Estimate { mean, std_error, ci_low: mean - half, ci_high: mean + half, replications: count, seed: cfg.seed }
}

/// Generator for replication `rep` under `seed`.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Uniform permutation of `0..n` produced one arrival at a time by a
/// forward Fisher–Yates shuffle; any prefix is the same whatever the
/// number of arrivals eventually drawn.
#[derive(Debug, Clone)]
pub struct PermutationStream {
    perm: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl PermutationStream {
    pub fn new(n: usize, seed: u64, rep: usize) -> Self {
        Self { perm: (0..n).collect(), pos: 0, rng: replication_rng(seed, rep) }
    }

    /// Restarts with replication `rep`, reusing the buffer.
    pub fn restart(&mut self, seed: u64, rep: usize) {
        for (i, slot) in self.perm.iter_mut().enumerate() {
            *slot = i;
        }
        self.pos = 0;
        self.rng = replication_rng(seed, rep);
    }

    pub fn drawn(&self) -> usize {
        self.pos
    }
}

impl Iterator for PermutationStream {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let n = self.perm.len();
        if self.pos == n {
            return None;
        }
        let j = self.rng.gen_range(self.pos..n);
        self.perm.swap(self.pos, j);
        self.pos += 1;
        Some(self.perm[self.pos - 1])
    }
}

/// Full permutation of replication `rep`.
pub fn replication_permutation(n: usize, seed: u64, rep: usize) -> Vec<usize> {
    PermutationStream::new(n, seed, rep).collect()
}

/// Scores of `spec` (already prepared) per replication, in index order.
fn strategy_scores(inst: &Instance, spec: &StrategySpec, cfg: &EstimatorConfig) -> Result<Vec<f64>, MonteCarloError> {
    let n = inst.n();
    let seed = cfg.seed;
    let scores = cfg.run(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map_init(
                || (state_for(inst, spec), PermutationStream::new(n, seed, 0)),
                |(state, stream), rep| {
                    state.reset();
                    stream.restart(seed, rep);
                    play(state, spec, || stream.next().expect("strategies stop by t = n")).map(|o| o.score as f64)
                },
            )
            .collect::<Result<Vec<f64>, StrategyError>>()
    })??;
    Ok(scores)
}

/// Mean score of `spec` over uniformly random arrival orders.
pub fn estimate_strategy(inst: &Instance, spec: &StrategySpec, cfg: &EstimatorConfig) -> Result<Estimate, MonteCarloError> {
    cfg.validate()?;
    let spec = spec.prepare(inst)?;
    Ok(summarize(&strategy_scores(inst, &spec, cfg)?, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub estimate: Estimate,
    pub hits: usize,
    /// With no hits: the exact binomial upper confidence bound
    /// `1 - ((1 - level)/2)^(1/replications)`.
    pub zero_hit_upper: Option<f64>,
}

/// Frequency of `CC(G[⌈αn⌉]) > threshold` over random vertex subsets.
pub fn estimate_tail(
    g: &Graph,
    alpha: Ratio<i64>,
    threshold: f64,
    cfg: &EstimatorConfig,
) -> Result<TailEstimate, MonteCarloError> {
    cfg.validate()?;
    if alpha < Ratio::from_integer(0) || alpha > Ratio::from_integer(1) {
        return Err(MonteCarloError::Config(format!("alpha {alpha} is outside [0, 1]")));
    }
    let n = g.n();
    let l = ceil_times(alpha, n);
    let seed = cfg.seed;
    let indicators: Vec<f64> = cfg.run(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map_init(
                || (ActivationState::new(g), PermutationStream::new(n, seed, 0)),
                |(state, stream), rep| {
                    state.reset();
                    stream.restart(seed, rep);
                    for v in stream.take(l) {
                        state.activate(v).expect("permutation arrivals are fresh");
                    }
                    if state.cc() as f64 > threshold {
                        1.0
                    } else {
                        0.0
                    }
                },
            )
            .collect()
    })?;
    let hits = indicators.iter().filter(|&&x| x > 0.0).count();
    let estimate = summarize(&indicators, cfg);
    let zero_hit_upper =
        (hits == 0).then(|| 1.0 - ((1.0 - cfg.ci_level) / 2.0).powf(1.0 / cfg.replications as f64));
    Ok(TailEstimate { estimate, hits, zero_hit_upper })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDifference {
    pub first: usize,
    pub second: usize,
    /// Estimate of `E[score(first) - score(second)]`.
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub estimates: Vec<Estimate>,
    pub differences: Vec<PairDifference>,
}

/// Plays every spec on the same arrival order in each replication and
/// reports per-spec means and all pairwise mean differences.
pub fn compare_strategies(
    inst: &Instance,
    specs: &[StrategySpec],
    cfg: &EstimatorConfig,
) -> Result<Comparison, MonteCarloError> {
    cfg.validate()?;
    if specs.len() < 2 {
        return Err(MonteCarloError::Config("comparison needs at least two strategies".into()));
    }
    let prepared = specs.iter().map(|s| s.prepare(inst)).collect::<Result<Vec<_>, _>>()?;
    let scores = prepared.iter().map(|s| strategy_scores(inst, s, cfg)).collect::<Result<Vec<_>, _>>()?;
    let estimates = scores.iter().map(|s| summarize(s, cfg)).collect();
    let mut differences = Vec::new();
    for first in 0..scores.len() {
        for second in first + 1..scores.len() {
            let diff: Vec<f64> = scores[first].iter().zip(&scores[second]).map(|(a, b)| a - b).collect();
            differences.push(PairDifference { first, second, estimate: summarize(&diff, cfg) });
        }
    }
    Ok(Comparison { estimates, differences })
}

/// Estimates `E CC(G[l])` for every `l` in `thresholds` from one random
/// order per replication, recording the count as each threshold passes.
pub fn blind_curve(g: &Graph, thresholds: &[usize], cfg: &EstimatorConfig) -> Result<Vec<Estimate>, MonteCarloError> {
    cfg.validate()?;
    let n = g.n();
    if let Some(&bad) = thresholds.iter().find(|&&l| l > n) {
        return Err(MonteCarloError::Config(format!("threshold {bad} exceeds n = {n}")));
    }
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by_key(|&i| thresholds[i]);
    let last = thresholds.iter().copied().max().unwrap_or(0);
    let seed = cfg.seed;
    let rows: Vec<Vec<f64>> = cfg.run(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map_init(
                || (ActivationState::new(g), PermutationStream::new(n, seed, 0)),
                |(state, stream), rep| {
                    state.reset();
                    stream.restart(seed, rep);
                    let mut row = vec![0.0; thresholds.len()];
                    let mut next = order.iter().peekable();
                    for t in 0..=last {
                        while let Some(&&i) = next.peek() {
                            if thresholds[i] != t {
                                break;
                            }
                            row[i] = state.cc() as f64;
                            next.next();
                        }
                        if t < last {
                            state.activate(stream.next().expect("t < n")).expect("fresh arrival");
                        }
                    }
                    row
                },
            )
            .collect()
    })?;
    Ok((0..thresholds.len())
        .map(|i| summarize(&rows.iter().map(|r| r[i]).collect::<Vec<_>>(), cfg))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::brute_force_strategy_value;
    use crate::generate::Family;
    use crate::rational::to_f64;

    #[test]
    fn streams_are_prefix_stable_and_uniform() {
        let full = replication_permutation(20, 5, 3);
        let short: Vec<usize> = PermutationStream::new(20, 5, 3).take(7).collect();
        assert_eq!(&full[..7], &short[..]);
        let mut sorted = full.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        assert_ne!(replication_permutation(20, 5, 4), full);
        // first arrival of a 3-permutation is roughly uniform
        let mut counts = [0usize; 3];
        for rep in 0..30_000 {
            counts[PermutationStream::new(3, 1, rep).next().unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| (9_400..10_600).contains(&c)), "{counts:?}");
    }

    #[test]
    fn p3_blind_contains_exact_value() {
        let inst = Family::Path { n: 3 }.build().unwrap();
        let est = estimate_strategy(&inst, &"blind:l=2".parse().unwrap(), &EstimatorConfig::new(100_000, 1)).unwrap();
        assert!(est.contains(4.0 / 3.0), "{est:?}");
        assert!(est.ci_low <= est.mean && est.mean <= est.ci_high);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let inst = Family::RandomTree { n: 200, seed: 4 }.build().unwrap();
        let spec: StrategySpec = "greedy".parse().unwrap();
        let base = EstimatorConfig::new(500, 77);
        let runs: Vec<Estimate> = [1, 4, 16]
            .iter()
            .map(|&t| estimate_strategy(&inst, &spec, &base.with_threads(t)).unwrap())
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
        assert_eq!(runs[0].mean.to_bits(), runs[2].mean.to_bits());
    }

    #[test]
    fn coverage_on_small_instance() {
        let inst = Family::Star { n: 6 }.build().unwrap();
        let spec: StrategySpec = "greedy".parse().unwrap();
        let exact = to_f64(&brute_force_strategy_value(&inst, &spec).unwrap());
        let covered = (0..100)
            .filter(|&trial| {
                estimate_strategy(&inst, &spec, &EstimatorConfig::new(2_000, 1_000 + trial)).unwrap().contains(exact)
            })
            .count();
        assert!(covered >= 95, "{covered}");
    }

    #[test]
    fn tails_and_trivial_cases() {
        let inst = Family::Path { n: 50 }.build().unwrap();
        let cfg = EstimatorConfig::new(200, 3);
        let none = estimate_tail(&inst.graph, Ratio::from_integer(0), 0.5, &cfg).unwrap();
        assert_eq!(none.hits, 0);
        assert!(none.zero_hit_upper.unwrap() > 0.0);
        let all = estimate_tail(&inst.graph, Ratio::from_integer(1), 1.0, &cfg).unwrap();
        assert_eq!(all.hits, 0);
        let some = estimate_tail(&inst.graph, Ratio::new(1, 2), 0.5, &cfg).unwrap();
        assert_eq!(some.hits, 200);
        assert!(some.zero_hit_upper.is_none());
    }

    #[test]
    fn comparisons_use_common_orders() {
        let inst = Family::RandomTree { n: 16, seed: 2 }.build().unwrap();
        let specs: Vec<StrategySpec> =
            ["blind:alpha=1/2", "blind:alpha=1/2", "dp"].iter().map(|s| s.parse().unwrap()).collect();
        let cmp = compare_strategies(&inst, &specs, &EstimatorConfig::new(2_000, 9)).unwrap();
        let same = &cmp.differences[0];
        assert_eq!((same.first, same.second), (0, 1));
        assert_eq!(same.estimate.mean, 0.0);
        assert!(same.estimate.contains(0.0));
        assert!(cmp.estimates[2].mean >= cmp.estimates[0].mean);
        assert!(compare_strategies(&inst, &specs[..1], &EstimatorConfig::new(10, 0)).is_err());
    }

    #[test]
    fn blind_curve_matches_tree_formula() {
        let inst = Family::RandomTree { n: 40, seed: 8 }.build().unwrap();
        let ls = [30, 0, 10, 20, 40];
        let curve = blind_curve(&inst.graph, &ls, &EstimatorConfig::new(20_000, 5)).unwrap();
        for (est, &l) in curve.iter().zip(&ls) {
            let exact = to_f64(&crate::exact::blind_expectation_tree(40, l).unwrap());
            assert!(est.contains(exact) || est.std_error == 0.0 && est.mean == exact, "l={l}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let inst = Family::Path { n: 3 }.build().unwrap();
        let spec: StrategySpec = "greedy".parse().unwrap();
        assert!(estimate_strategy(&inst, &spec, &EstimatorConfig::new(0, 0)).is_err());
        assert!(estimate_strategy(&inst, &spec, &EstimatorConfig::new(5, 0).with_ci_level(1.0)).is_err());
        assert!(estimate_strategy(&inst, &spec, &EstimatorConfig::new(5, 0).with_threads(0)).is_err());
    }
}
