//! Stopping strategies.
//!
//! A strategy is consulted at every time `t = 0..=n` and answers continue or
//! stop. Blind strategies only ever receive a [`BlindView`] holding `(n, t)`;
//! full-information strategies receive the whole [`ActivationState`]. The
//! permutation's future is never exposed.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::Ratio;
use thiserror::Error;

use crate::activation::{ActivationError, ActivationState};
use crate::exact::{self, ExactError, ValueTable};
use crate::generate::Instance;
use crate::rational::{ceil_times, parse_fraction, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("strategy `{0}` needs full information but was given a blind view")]
    Regime(String),
    #[error("strategy `{0}` must be prepared against an instance before playing")]
    Unprepared(String),
    #[error("cannot parse strategy `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("trigger set: {0}")]
    Trigger(String),
    #[error(transparent)]
    Activation(#[from] ActivationError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop,
}

/// What a blind strategy may observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlindView {
    pub n: usize,
    pub t: usize,
}

/// Observable history handed to [`decide`].
#[derive(Debug, Clone, Copy)]
pub enum View<'s, 'a> {
    Blind(BlindView),
    Full(&'s ActivationState<'a>),
}

impl View<'_, '_> {
    pub fn blind(&self) -> BlindView {
        match self {
            View::Blind(b) => *b,
            View::Full(state) => BlindView { n: state.n(), t: state.t() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerSet {
    /// The instance's distinguished initial clique.
    InitialClique,
    Vertices(Vec<usize>),
}

/// Catalog of stopping rules.
#[derive(Debug, Clone)]
pub enum StrategySpec {
    /// Stop after exactly `l` arrivals.
    BlindThreshold { l: usize },
    /// Stop after `ceil(alpha * n)` arrivals.
    BlindFraction { alpha: Ratio<i64> },
    /// Continue while the expected gain of one more arrival is nonnegative
    /// (positive when `strict`).
    Greedy { strict: bool },
    /// Take `ceil(alpha n)` vertices; once any trigger vertex is active,
    /// aim for `ceil(gamma n)` in total instead.
    TwoPhase { alpha: Ratio<i64>, gamma: Ratio<i64>, trigger: TriggerSet },
    /// Backward-induction optimum; `None` until prepared.
    DpOptimal(Option<Arc<ValueTable>>),
    /// Test-only: sees the whole permutation and stops at the first time
    /// the component count peaks. Not a stopping time.
    Clairvoyant,
}

impl PartialEq for StrategySpec {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl StrategySpec {
    pub fn is_blind(&self) -> bool {
        matches!(self, StrategySpec::BlindThreshold { .. } | StrategySpec::BlindFraction { .. })
    }

    pub fn needs_neighborhoods(&self) -> bool {
        matches!(self, StrategySpec::Greedy { .. })
    }

    /// Resolves instance-dependent parts: the trigger set and the DP table.
    pub fn prepare(&self, inst: &Instance) -> Result<StrategySpec, StrategyError> {
        Ok(match self {
            StrategySpec::TwoPhase { alpha, gamma, trigger } => {
                let vertices = match trigger {
                    TriggerSet::InitialClique if inst.initial_clique.is_empty() => {
                        return Err(StrategyError::Trigger("instance has no initial clique".into()))
                    }
                    TriggerSet::InitialClique => inst.initial_clique.clone(),
                    TriggerSet::Vertices(v) => v.clone(),
                };
                if let Some(&bad) = vertices.iter().find(|&&v| v >= inst.n()) {
                    return Err(StrategyError::Trigger(format!("vertex {bad} out of range")));
                }
                StrategySpec::TwoPhase { alpha: *alpha, gamma: *gamma, trigger: TriggerSet::Vertices(vertices) }
            }
            StrategySpec::DpOptimal(None) => StrategySpec::DpOptimal(Some(Arc::new(exact::solve_dp(&inst.graph)?))),
            StrategySpec::DpOptimal(Some(table)) if table.n() != inst.n() => {
                return Err(StrategyError::Unprepared("dp table belongs to another instance".into()))
            }
            other => other.clone(),
        })
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::BlindThreshold { l } => write!(f, "blind:l={l}"),
            StrategySpec::BlindFraction { alpha } => write!(f, "blind:alpha={alpha}"),
            StrategySpec::Greedy { strict: false } => write!(f, "greedy"),
            StrategySpec::Greedy { strict: true } => write!(f, "greedy:tie=stop"),
            StrategySpec::TwoPhase { alpha, gamma, trigger } => {
                write!(f, "twophase:alpha={alpha},gamma={gamma},trigger=")?;
                match trigger {
                    TriggerSet::InitialClique => write!(f, "initial_clique"),
                    TriggerSet::Vertices(v) => {
                        let ids: Vec<String> = v.iter().map(usize::to_string).collect();
                        write!(f, "{}", ids.join("+"))
                    }
                }
            }
            StrategySpec::DpOptimal(_) => write!(f, "dp"),
            StrategySpec::Clairvoyant => write!(f, "clairvoyant"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = StrategyError;

    /// Parses `blind:l=42`, `blind:alpha=1/3`, `greedy`, `greedy:tie=stop`,
    /// `twophase:alpha=1/3,gamma=1/2,trigger=initial_clique` and `dp`.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| StrategyError::Parse { input: input.to_string(), reason: reason.to_string() };
        let (kind, rest) = input.trim().split_once(':').unwrap_or((input.trim(), ""));
        let mut params = Vec::new();
        for item in rest.split(',').filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| fail("parameters look like key=value"))?;
            params.push((key.trim(), value.trim()));
        }
        let lookup = |key: &str| params.iter().find(|(k, _)| *k == key).map(|&(_, v)| v);
        let fraction = |key: &str| -> Result<Ratio<i64>, StrategyError> {
            let raw = lookup(key).ok_or_else(|| fail(&format!("missing `{key}`")))?;
            let value = parse_fraction(raw).map_err(|e| fail(&e.to_string()))?;
            if value < Ratio::from_integer(0) || value > Ratio::from_integer(1) {
                return Err(fail(&format!("`{key}` must lie in [0, 1]")));
            }
            Ok(value)
        };
        let allow = |keys: &[&str]| -> Result<(), StrategyError> {
            match params.iter().find(|(k, _)| !keys.contains(k)) {
                Some((k, _)) => Err(fail(&format!("unexpected parameter `{k}`"))),
                None => Ok(()),
            }
        };
        match kind {
            "blind" => match (lookup("l"), lookup("alpha")) {
                (Some(l), None) => {
                    allow(&["l"])?;
                    let l = l.parse().map_err(|_| fail("`l` must be a non-negative integer"))?;
                    Ok(StrategySpec::BlindThreshold { l })
                }
                (None, Some(_)) => {
                    allow(&["alpha"])?;
                    Ok(StrategySpec::BlindFraction { alpha: fraction("alpha")? })
                }
                _ => Err(fail("blind needs exactly one of `l` or `alpha`")),
            },
            "greedy" => {
                allow(&["tie"])?;
                match lookup("tie") {
                    None | Some("continue") => Ok(StrategySpec::Greedy { strict: false }),
                    Some("stop") => Ok(StrategySpec::Greedy { strict: true }),
                    Some(_) => Err(fail("`tie` is continue or stop")),
                }
            }
            "twophase" => {
                allow(&["alpha", "gamma", "trigger"])?;
                let trigger = match lookup("trigger") {
                    None | Some("initial_clique") => TriggerSet::InitialClique,
                    Some(list) => TriggerSet::Vertices(
                        list.split('+')
                            .map(|id| id.parse().map_err(|_| fail("trigger is initial_clique or ids joined by +")))
                            .collect::<Result<_, _>>()?,
                    ),
                };
                Ok(StrategySpec::TwoPhase { alpha: fraction("alpha")?, gamma: fraction("gamma")?, trigger })
            }
            "dp" => {
                allow(&[])?;
                Ok(StrategySpec::DpOptimal(None))
            }
            _ => Err(fail("unknown strategy kind")),
        }
    }
}

/// Continue or stop, given only what the view exposes.
pub fn decide(spec: &StrategySpec, view: View<'_, '_>) -> Result<Decision, StrategyError> {
    let BlindView { n, t } = view.blind();
    let full = || match view {
        View::Full(state) => Ok(state),
        View::Blind(_) => Err(StrategyError::Regime(spec.to_string())),
    };
    let stop_if = |cond: bool| if cond { Decision::Stop } else { Decision::Continue };
    if t >= n {
        // still reject regime mismatches at the horizon
        if !spec.is_blind() {
            full()?;
        }
        return Ok(Decision::Stop);
    }
    Ok(match spec {
        StrategySpec::BlindThreshold { l } => stop_if(t >= *l),
        StrategySpec::BlindFraction { alpha } => stop_if(t >= ceil_times(*alpha, n)),
        StrategySpec::Greedy { strict } => {
            let state = full()?;
            let remaining = n - t;
            let nbr = state.nbr_sum();
            stop_if(if *strict { remaining <= nbr } else { remaining < nbr })
        }
        StrategySpec::TwoPhase { alpha, gamma, trigger } => {
            let state = full()?;
            let TriggerSet::Vertices(vertices) = trigger else {
                return Err(StrategyError::Unprepared(spec.to_string()));
            };
            let triggered = vertices.iter().any(|&v| state.is_active(v));
            stop_if(t >= ceil_times(if triggered { *gamma } else { *alpha }, n))
        }
        StrategySpec::DpOptimal(table) => {
            let state = full()?;
            let table = table.as_ref().ok_or_else(|| StrategyError::Unprepared(spec.to_string()))?;
            stop_if(table.stops(state.active_mask()))
        }
        StrategySpec::Clairvoyant => return Err(StrategyError::Regime(spec.to_string())),
    })
}

/// Stopping time and the component count at that time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopOutcome {
    pub stop_time: usize,
    pub score: usize,
}

/// Plays `spec` on a state, pulling arrivals from `next` until it stops.
/// The state must be fresh (or reset) and track what `spec` reads.
pub fn play(
    state: &mut ActivationState<'_>,
    spec: &StrategySpec,
    mut next: impl FnMut() -> usize,
) -> Result<StopOutcome, StrategyError> {
    if matches!(spec, StrategySpec::Clairvoyant) {
        let n = state.n();
        let mut best = StopOutcome { stop_time: 0, score: 0 };
        for _ in 0..n {
            state.activate(next())?;
            if state.cc() > best.score {
                best = StopOutcome { stop_time: state.t(), score: state.cc() };
            }
        }
        return Ok(best);
    }
    loop {
        let view = if spec.is_blind() {
            View::Blind(BlindView { n: state.n(), t: state.t() })
        } else {
            View::Full(state)
        };
        if decide(spec, view)? == Decision::Stop {
            return Ok(StopOutcome { stop_time: state.t(), score: state.cc() });
        }
        state.activate(next())?;
    }
}

/// Fresh state with the tracking `spec` needs.
pub fn state_for<'a>(inst: &'a Instance, spec: &StrategySpec) -> ActivationState<'a> {
    let state = ActivationState::new(&inst.graph);
    if spec.needs_neighborhoods() {
        state.with_neighborhoods()
    } else {
        state
    }
}

/// Plays `spec` along `sigma`. The strategy is prepared against `inst` first if
/// it still needs it.
pub fn run_strategy(inst: &Instance, spec: &StrategySpec, sigma: &[usize]) -> Result<StopOutcome, StrategyError> {
    crate::activation::check_permutation(inst.n(), sigma)?;
    let prepared = spec.prepare(inst)?;
    let mut state = state_for(inst, &prepared);
    let mut arrivals = sigma.iter().copied();
    play(&mut state, &prepared, || arrivals.next().expect("strategies stop by t = n"))
}

/// Graph classes with a closed-form blind expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlindKind {
    Tree,
    KTree(usize),
}

/// Best fixed stopping time and its exact expectation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindOptimum {
    /// Every maximizing `l`, ascending.
    pub thresholds: Vec<usize>,
    pub expected: Rational,
}

impl BlindOptimum {
    pub fn l(&self) -> usize {
        self.thresholds[0]
    }
}

/// Scans every `l` in `0..=n` exactly.
pub fn blind_optimal_threshold(kind: BlindKind, n: usize) -> Result<BlindOptimum, ExactError> {
    let (numerators, denominator) = match kind {
        BlindKind::Tree => {
            if n == 0 {
                return Err(ExactError::Domain("tree needs n >= 1".into()));
            }
            let nums = (0..=n).map(|l| BigInt::from(l) * BigInt::from(n - l + 1)).collect::<Vec<_>>();
            (nums, BigInt::from(n))
        }
        BlindKind::KTree(k) => {
            if k == 0 || n < k + 1 {
                return Err(ExactError::Domain(format!("k-tree needs n >= k + 1 >= 2, got k={k}, n={n}")));
            }
            let hist = exact::ktree_backset_histogram(k, n);
            exact::backset_curve_numerators(n, &hist)
        }
    };
    let best = numerators.iter().max().expect("n >= 1").clone();
    let thresholds = (0..=n).filter(|&l| numerators[l] == best).collect();
    Ok(BlindOptimum { thresholds, expected: Rational::new(best, denominator) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::Family;
    use crate::rational::ratio;

    fn p3() -> Instance {
        Family::Path { n: 3 }.build().unwrap()
    }

    #[test]
    fn blind_threshold_decisions() {
        let spec: StrategySpec = "blind:l=3".parse().unwrap();
        let at = |t| decide(&spec, View::Blind(BlindView { n: 10, t })).unwrap();
        assert_eq!(at(2), Decision::Continue);
        assert_eq!(at(3), Decision::Stop);
    }

    #[test]
    fn greedy_needs_full_information() {
        let spec = StrategySpec::Greedy { strict: false };
        let err = decide(&spec, View::Blind(BlindView { n: 3, t: 1 })).unwrap_err();
        assert!(matches!(err, StrategyError::Regime(_)));
        let inst = p3();
        let mut state = ActivationState::new(&inst.graph).with_neighborhoods();
        state.activate(0).unwrap();
        assert_eq!(decide(&spec, View::Full(&state)).unwrap(), Decision::Continue);
    }

    #[test]
    fn greedy_stops_exactly_when_neighborhoods_outnumber_the_rest() {
        let inst = Family::Star { n: 6 }.build().unwrap();
        let mut state = ActivationState::new(&inst.graph).with_neighborhoods();
        for leaf in 1..=3 {
            state.activate(leaf).unwrap();
        }
        // n - t = 3, Σ|N(C_i)| = 3 -> gain 0, continue unless strict
        assert_eq!(state.expected_gain().unwrap(), ratio(0, 1));
        assert_eq!(decide(&StrategySpec::Greedy { strict: false }, View::Full(&state)).unwrap(), Decision::Continue);
        assert_eq!(decide(&StrategySpec::Greedy { strict: true }, View::Full(&state)).unwrap(), Decision::Stop);
        state.activate(4).unwrap();
        assert_eq!(decide(&StrategySpec::Greedy { strict: false }, View::Full(&state)).unwrap(), Decision::Stop);
    }

    #[test]
    fn blind_threshold_on_p3() {
        let out = run_strategy(&p3(), &"blind:l=2".parse().unwrap(), &[0, 2, 1]).unwrap();
        assert_eq!(out, StopOutcome { stop_time: 2, score: 2 });
    }

    #[test]
    fn greedy_leaves_star_plus_path_before_the_center() {
        let n = 11;
        let inst = Family::StarPlusPath { n }.build().unwrap();
        // all n + 1 leaves first, then the center, then the path
        let mut sigma: Vec<usize> = (1..=n + 1).collect();
        sigma.push(0);
        sigma.extend(n + 2..=2 * n);
        let out = run_strategy(&inst, &StrategySpec::Greedy { strict: false }, &sigma).unwrap();
        assert_eq!(out, StopOutcome { stop_time: n + 1, score: n + 1 });
    }

    #[test]
    fn two_phase_switches_target_on_trigger() {
        let inst = Family::KStar { k: 2, n: 12 }.build().unwrap();
        let spec: StrategySpec = "twophase:alpha=1/3,gamma=1/2,trigger=initial_clique".parse().unwrap();
        let untouched: Vec<usize> = (2..12).chain([0, 1]).collect();
        assert_eq!(run_strategy(&inst, &spec, &untouched).unwrap().stop_time, 4);
        let early: Vec<usize> = [5, 0].into_iter().chain((1..12).filter(|&v| v != 5)).collect();
        assert_eq!(run_strategy(&inst, &spec, &early).unwrap().stop_time, 6);
        // unresolved trigger sets are refused
        let err = decide(&spec, View::Full(&ActivationState::new(&inst.graph))).unwrap_err();
        assert!(matches!(err, StrategyError::Unprepared(_)));
        let bare = Instance::from_graph(inst.graph.clone());
        assert!(matches!(spec.prepare(&bare), Err(StrategyError::Trigger(_))));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for text in [
            "blind:l=42",
            "blind:alpha=333/1000",
            "greedy",
            "greedy:tie=stop",
            "twophase:alpha=1/3,gamma=1/2,trigger=initial_clique",
            "twophase:alpha=1/3,gamma=1/2,trigger=0+1",
            "dp",
        ] {
            let spec: StrategySpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!("blind:alpha=0.333".parse::<StrategySpec>().unwrap().to_string(), "blind:alpha=333/1000");
        for bad in ["blind", "blind:l=-1", "blind:l=2,alpha=1/2", "greedy:tie=maybe", "twophase:alpha=2,gamma=1/2", "dp:x=1", "oracle"] {
            assert!(bad.parse::<StrategySpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn blind_optimal_thresholds() {
        let five = blind_optimal_threshold(BlindKind::Tree, 5).unwrap();
        assert_eq!((five.thresholds.clone(), five.expected.clone()), (vec![3], ratio(9, 5)));
        let four = blind_optimal_threshold(BlindKind::Tree, 4).unwrap();
        assert_eq!((four.thresholds.clone(), four.expected.clone()), (vec![2, 3], ratio(3, 2)));
        assert_eq!(blind_optimal_threshold(BlindKind::KTree(1), 5).unwrap(), five);
        assert_eq!(blind_optimal_threshold(BlindKind::KTree(1), 4).unwrap(), four);
        assert!(blind_optimal_threshold(BlindKind::KTree(3), 3).is_err());
    }

    #[test]
    fn decisions_only_depend_on_the_observable_prefix() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let inst = Family::RandomTree { n: 9, seed: 4 }.build().unwrap();
        let specs: Vec<StrategySpec> = ["greedy", "dp", "twophase:alpha=1/3,gamma=1/2,trigger=0", "blind:alpha=1/2"]
            .iter()
            .map(|s| s.parse::<StrategySpec>().unwrap().prepare(&inst).unwrap())
            .collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let mut sigma: Vec<usize> = (0..9).collect();
            sigma.shuffle(&mut rng);
            for spec in &specs {
                let out = run_strategy(&inst, spec, &sigma).unwrap();
                // permuting the unseen suffix cannot move the stopping time
                let mut other = sigma.clone();
                other[out.stop_time..].shuffle(&mut rng);
                assert_eq!(run_strategy(&inst, spec, &other).unwrap(), out, "{spec}");
            }
        }
    }
}
