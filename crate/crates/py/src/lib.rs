//! Python bindings: instances, exact values, strategies, Monte Carlo and
//! the closed-form side games.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;

use ccstop::activation::run_permutation;
use ccstop::exact;
use ccstop::io::{read_instance, InstanceFile};
use ccstop::metagame;
use ccstop::montecarlo::{self, Estimate, EstimatorConfig};
use ccstop::rational::{format as format_rational, Rational};
use ccstop::strategy::{self, StrategySpec};
use ccstop::{Family, Graph, Instance};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Point = (f64, f64, f64);

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, value: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((format_rational(value),))
}

fn estimate_dict<'py>(py: Python<'py>, est: &Estimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", est.mean)?;
    d.set_item("std_error", est.std_error)?;
    d.set_item("ci_low", est.ci_low)?;
    d.set_item("ci_high", est.ci_high)?;
    d.set_item("replications", est.replications)?;
    d.set_item("seed", est.seed)?;
    Ok(d)
}

fn parse_spec(spec: &str) -> PyResult<StrategySpec> {
    spec.parse().map_err(value_error)
}

fn config(reps: usize, seed: u64, ci_level: f64, threads: Option<usize>) -> EstimatorConfig {
    EstimatorConfig { replications: reps, seed, ci_level, threads }
}

/// A graph, with its construction sequence when it has one.
#[pyclass(name = "Instance", frozen, module = "pyccstop")]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    /// Builds a named family; parameters are passed as keyword arguments,
    /// e.g. `Instance.family("ktree", k=2, n=100, seed=7)`.
    #[staticmethod]
    #[pyo3(signature = (name, **params))]
    fn family(name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut map = BTreeMap::new();
        if let Some(params) = params {
            for (k, v) in params.iter() {
                map.insert(k.str()?.to_string(), v.str()?.to_string());
            }
        }
        let family = Family::from_params(name, &map).map_err(value_error)?;
        Ok(Self { inner: family.build().map_err(value_error)? })
    }

    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        let graph = Graph::from_edges(n, edges).map_err(value_error)?;
        Ok(Self { inner: Instance::from_graph(graph) })
    }

    /// Reads a graph or construction sequence file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        let inner = match read_instance(BufReader::new(file)).map_err(value_error)? {
            InstanceFile::Graph(g) => Instance::from_graph(g),
            InstanceFile::Sequence(s) => Instance::from_sequence(s),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> Option<usize> {
        self.inner.sequence.as_ref().map(|s| s.k())
    }

    #[getter]
    fn initial_clique(&self) -> Vec<usize> {
        self.inner.initial_clique.clone()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.graph.edges().collect()
    }

    fn component_count(&self) -> usize {
        self.inner.graph.component_count()
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, edges={})", self.inner.n(), self.inner.graph.edge_count())
    }
}

/// `l(n - l + 1)/n` as a Fraction.
#[pyfunction]
fn blind_expectation_tree<'py>(py: Python<'py>, n: usize, l: usize) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &exact::blind_expectation_tree(n, l).map_err(value_error)?)
}

#[pyfunction]
fn blind_expectation_ktree<'py>(py: Python<'py>, k: usize, n: usize, l: usize) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &exact::blind_expectation_ktree(k, n, l).map_err(value_error)?)
}

/// Mean component count over all `l`-subsets, by enumeration.
#[pyfunction]
fn brute_force_blind<'py>(py: Python<'py>, instance: &PyInstance, l: usize) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &exact::brute_force_blind(&instance.inner.graph, l).map_err(value_error)?)
}

/// Exact blind curve of a chordal graph, one Fraction per `l = 0..=n`.
#[pyfunction]
fn blind_curve<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let g = &instance.inner.graph;
    let hist = exact::chordal_backset_histogram(g).ok_or_else(|| value_error("graph is not chordal"))?;
    let (nums, den) = exact::backset_curve_numerators(g.n(), &hist);
    nums.into_iter().map(|num| fraction(py, &Rational::new(num, den.clone()))).collect()
}

/// Optimal full-information value `V(∅)`: a Fraction when `exact`
/// (n <= 12), a float otherwise (n <= 24).
#[pyfunction]
#[pyo3(signature = (instance, exact = false))]
fn dp_value<'py>(py: Python<'py>, instance: &PyInstance, exact: bool) -> PyResult<Bound<'py, PyAny>> {
    let g = &instance.inner.graph;
    if exact {
        let table = exact::solve_dp_exact(g).map_err(value_error)?;
        fraction(py, table.exact_root().expect("exact table"))
    } else {
        let table = py.detach(|| exact::solve_dp(g)).map_err(value_error)?;
        Ok(table.root_value().into_pyobject(py)?.into_any())
    }
}

/// Exact mean score of a strategy over all permutations (n <= 9).
#[pyfunction]
fn strategy_value<'py>(py: Python<'py>, instance: &PyInstance, spec: &str) -> PyResult<Bound<'py, PyAny>> {
    let spec = parse_spec(spec)?;
    fraction(py, &exact::brute_force_strategy_value(&instance.inner, &spec).map_err(value_error)?)
}

/// Plays a strategy along `sigma`; returns `(stop_time, score)`.
#[pyfunction]
fn run_strategy(instance: &PyInstance, spec: &str, sigma: Vec<usize>) -> PyResult<(usize, usize)> {
    let out = strategy::run_strategy(&instance.inner, &parse_spec(spec)?, &sigma).map_err(value_error)?;
    Ok((out.stop_time, out.score))
}

/// Component count at every `t = 0..=n` along `sigma`.
#[pyfunction]
fn trace(instance: &PyInstance, sigma: Vec<usize>) -> PyResult<Vec<usize>> {
    let steps = run_permutation(&instance.inner.graph, instance.inner.sequence.as_ref(), &sigma).map_err(value_error)?;
    Ok(steps.into_iter().map(|s| s.cc).collect())
}

#[pyfunction]
#[pyo3(signature = (instance, spec, reps = 1000, seed = 0, ci_level = 0.99, threads = None))]
fn estimate<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    spec: &str,
    reps: usize,
    seed: u64,
    ci_level: f64,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = parse_spec(spec)?;
    let cfg = config(reps, seed, ci_level, threads);
    let est = py.detach(|| montecarlo::estimate_strategy(&instance.inner, &spec, &cfg)).map_err(value_error)?;
    estimate_dict(py, &est)
}

/// Common-random-number comparison; returns per-spec estimates and the
/// pairwise differences `(i, j, estimate of score_i - score_j)`.
#[pyfunction]
#[pyo3(signature = (instance, specs, reps = 1000, seed = 0, ci_level = 0.99, threads = None))]
fn compare<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    specs: Vec<String>,
    reps: usize,
    seed: u64,
    ci_level: f64,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let specs = specs.iter().map(|s| parse_spec(s)).collect::<PyResult<Vec<_>>>()?;
    let cfg = config(reps, seed, ci_level, threads);
    let cmp = py.detach(|| montecarlo::compare_strategies(&instance.inner, &specs, &cfg)).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("estimates", cmp.estimates.iter().map(|e| estimate_dict(py, e)).collect::<PyResult<Vec<_>>>()?)?;
    let diffs = cmp
        .differences
        .iter()
        .map(|d| Ok((d.first, d.second, estimate_dict(py, &d.estimate)?)))
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("differences", diffs)?;
    Ok(out)
}

/// Frequency of `CC(G[ceil(alpha n)]) > threshold`; `alpha` is a string
/// such as `"1/2"`.
#[pyfunction]
#[pyo3(signature = (instance, alpha, threshold, reps = 1000, seed = 0, ci_level = 0.99, threads = None))]
#[allow(clippy::too_many_arguments)]
fn estimate_tail<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    alpha: &str,
    threshold: f64,
    reps: usize,
    seed: u64,
    ci_level: f64,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let alpha = ccstop::rational::parse_fraction(alpha).map_err(value_error)?;
    let cfg = config(reps, seed, ci_level, threads);
    let tail =
        py.detach(|| montecarlo::estimate_tail(&instance.inner.graph, alpha, threshold, &cfg)).map_err(value_error)?;
    let out = estimate_dict(py, &tail.estimate)?;
    out.set_item("hits", tail.hits)?;
    out.set_item("zero_hit_upper", tail.zero_hit_upper)?;
    Ok(out)
}

/// Exact evaluation of continuing past the greedy stop on
/// `star_plus_path(n)`: `(displayed expression, strategy gain)`.
#[pyfunction]
fn remark_continuation<'py>(py: Python<'py>, n: usize) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let r = exact::remark_continuation_value(n).map_err(value_error)?;
    Ok((fraction(py, &r.displayed)?, fraction(py, &r.strategy_gain)?))
}

#[pyfunction]
fn phi(alpha: f64, beta: f64, gamma: f64) -> PyResult<f64> {
    metagame::phi(alpha, beta, gamma).map_err(value_error)
}

/// `(max, [(alpha, beta, gamma), ...])`.
#[pyfunction]
#[pyo3(signature = (grid_step = metagame::DEFAULT_GRID_STEP, refine_tol = metagame::DEFAULT_REFINE_TOL))]
fn maximize_phi(py: Python<'_>, grid_step: f64, refine_tol: f64) -> PyResult<(f64, Vec<Point>)> {
    let m = py.detach(|| metagame::maximize_phi(grid_step, refine_tol)).map_err(value_error)?;
    Ok((m.max_value, m.maximizers.into_iter().map(|[a, b, c]| (a, b, c)).collect()))
}

#[pyfunction]
fn mt_score(alpha: f64, k: u32) -> PyResult<f64> {
    metagame::mt_score(alpha, k).map_err(value_error)
}

/// `(argmax, max)` of `(1 - alpha)^k alpha`.
#[pyfunction]
#[pyo3(signature = (k, grid_step = metagame::DEFAULT_GRID_STEP))]
fn mt_argmax(k: u32, grid_step: f64) -> PyResult<(f64, f64)> {
    let m = metagame::mt_argmax(k, grid_step).map_err(value_error)?;
    Ok((m.argmax, m.value))
}

#[pymodule]
fn pyccstop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(blind_expectation_tree, m)?)?;
    m.add_function(wrap_pyfunction!(blind_expectation_ktree, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_blind, m)?)?;
    m.add_function(wrap_pyfunction!(blind_curve, m)?)?;
    m.add_function(wrap_pyfunction!(dp_value, m)?)?;
    m.add_function(wrap_pyfunction!(strategy_value, m)?)?;
    m.add_function(wrap_pyfunction!(run_strategy, m)?)?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_tail, m)?)?;
    m.add_function(wrap_pyfunction!(remark_continuation, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_phi, m)?)?;
    m.add_function(wrap_pyfunction!(mt_score, m)?)?;
    m.add_function(wrap_pyfunction!(mt_argmax, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
