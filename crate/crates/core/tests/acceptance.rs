//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs with its own harness so the lines are always shown:
//! `cargo test -p ccstop --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use ccstop::activation::ActivationState;
use ccstop::exact::{self, remark_continuation_value, RemarkEvaluation};
use ccstop::generate::{gen_random_kdegenerate, gen_random_ktree, Family};
use ccstop::graph::{graph_from_construction, is_ktree, Graph};
use ccstop::metagame;
use ccstop::montecarlo::{self, EstimatorConfig};
use ccstop::rational::{ratio, to_f64, Rational};
use ccstop::strategy::{blind_optimal_threshold, BlindKind, StrategySpec};
use ccstop::{Instance, WitnessIndex};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_tree(n: usize, seed: u64) -> Graph {
    graph_from_construction(&gen_random_ktree(1, n, seed).unwrap())
}

fn blind_tree_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for i in 0..20 {
        let n = rng.gen_range(1..=12);
        let g = random_tree(n, 100 + i);
        for l in 0..=n {
            let want = exact::blind_expectation_tree(n, l).unwrap();
            let got = exact::brute_force_blind(&g, l).unwrap();
            ensure(got == want, || format!("tree #{i} n={n} l={l}: {got} != {want}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (tree, l) pairs equal exactly"))
}

fn tree_bracket() -> Outcome {
    let mut parts = Vec::new();
    for n in [5usize, 50, 500, 500_000] {
        let best = blind_optimal_threshold(BlindKind::Tree, n).unwrap();
        let quarter = ratio(n as i64, 4);
        ensure(best.expected > quarter && best.expected < &quarter + ratio(1, 1), || {
            format!("n={n}: max {} outside (n/4, n/4+1)", best.expected)
        })?;
        parts.push(format!("n={n}: l={} max-n/4={:.6}", best.l(), to_f64(&(best.expected - quarter))));
    }
    Ok(parts.join("; "))
}

fn ktree_formula() -> Outcome {
    let mut checked = 0;
    for k in 1..=3 {
        for n in k..=10 {
            for seed in 0..3 {
                let seq = gen_random_ktree(k, n, seed * 31 + n as u64).unwrap();
                let g = graph_from_construction(&seq);
                for l in 0..=n {
                    let want = exact::brute_force_blind(&g, l).unwrap();
                    let got = exact::blind_expectation_ktree(k, n, l).unwrap();
                    ensure(got == want, || format!("k={k} n={n} l={l}: {got} != {want}"))?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} (k-tree, l) pairs equal exactly"))
}

fn ktree_bracket() -> Outcome {
    let n = 100_000usize;
    let mut parts = Vec::new();
    for k in 1..=5usize {
        let l = (n as f64 / (k + 1) as f64).round() as usize;
        let value = to_f64(&exact::blind_expectation_ktree(k, n, l).unwrap());
        let lead = metagame::mt_optimum(k as u32) * n as f64;
        let low = lead - (k as f64 + 2.0) / std::f64::consts::E;
        let high = lead + 1.0;
        ensure(low <= value && value <= high, || format!("k={k}: {value} outside [{low}, {high}]"))?;
        parts.push(format!("k={k}: {:.4}", value - lead));
    }
    Ok(format!("value - k^k/(k+1)^(k+1) n: {}", parts.join(", ")))
}

fn catalog(n: usize) -> Vec<StrategySpec> {
    let mut specs: Vec<StrategySpec> = (0..=n).map(|l| StrategySpec::BlindThreshold { l }).collect();
    for text in [
        "blind:alpha=1/3",
        "blind:alpha=1/2",
        "greedy",
        "greedy:tie=stop",
        "twophase:alpha=1/3,gamma=1/2,trigger=initial_clique",
        "twophase:alpha=1/2,gamma=1/4,trigger=0",
    ] {
        specs.push(text.parse().unwrap());
    }
    specs
}

fn dp_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut instances: Vec<Instance> = (0..50)
        .map(|i| Family::RandomTree { n: rng.gen_range(2..=8), seed: 500 + i }.build().unwrap())
        .collect();
    instances.push(Family::Path { n: 8 }.build().unwrap());
    instances.push(Family::Star { n: 8 }.build().unwrap());
    let mut evaluated = 0;
    for (i, inst) in instances.iter().enumerate() {
        let table = exact::solve_dp_exact(&inst.graph).unwrap();
        let optimum = table.exact_root().unwrap().clone();
        let float = exact::solve_dp(&inst.graph).unwrap();
        ensure((float.root_value() - to_f64(&optimum)).abs() < 1e-12, || format!("instance {i}: float and exact DP differ"))?;
        for spec in catalog(inst.n()) {
            let value = exact::brute_force_strategy_value(inst, &spec).unwrap();
            ensure(value <= optimum, || format!("instance {i}: {spec} scores {value} > V = {optimum}"))?;
            evaluated += 1;
        }
        let dp = exact::brute_force_strategy_value(inst, &"dp".parse().unwrap()).unwrap();
        ensure(dp == optimum, || format!("instance {i}: dp strategy scores {dp} != V = {optimum}"))?;
    }
    Ok(format!("{} trees, {evaluated} strategy values <= V, dp strategy attains V", instances.len()))
}

fn path_trend() -> Outcome {
    let per_n: Vec<(usize, f64)> = (8..=22)
        .map(|n| {
            let g = Family::Path { n }.build().unwrap().graph;
            (n, exact::solve_dp(&g).unwrap().root_value() / n as f64)
        })
        .collect();
    let listing = per_n.iter().map(|(n, v)| format!("{n}:{v:.5}")).collect::<Vec<_>>().join(" ");
    for &(n, v) in &per_n {
        ensure(v > 0.25, || format!("P{n}: V/n = {v} <= 1/4 [{listing}]"))?;
    }
    for w in per_n.windows(2) {
        if w[0].0 >= 12 {
            ensure(w[1].1 <= w[0].1, || format!("V/n increases from P{} to P{} [{listing}]", w[0].0, w[1].0))?;
        }
    }
    let gap = |n: usize| per_n.iter().find(|p| p.0 == n).unwrap().1 - 0.25;
    ensure(gap(22) < gap(12), || format!("gap at 22 not below gap at 12 [{listing}]"))?;
    Ok(format!("V/n: {listing}"))
}

fn witnesses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut steps = 0usize;
    for trial in 0..1000 {
        let k = rng.gen_range(1..=4);
        let n = rng.gen_range(k..=200);
        let seq = gen_random_ktree(k, n, rng.gen()).unwrap();
        let g = graph_from_construction(&seq);
        let index = WitnessIndex::new(&seq);
        let mut state = ActivationState::new(&g).with_witnesses(&index).unwrap();
        let mut sigma: Vec<usize> = (0..n).collect();
        sigma.shuffle(&mut rng);
        let prefix = rng.gen_range(0..=n);
        for &v in &sigma[..prefix] {
            let delta = state.activate(v).unwrap();
            ensure(delta.wv == Some(delta.cc), || format!("trial {trial} (k={k}, n={n}): cc {} != wv {:?}", delta.cc, delta.wv))?;
            steps += 1;
        }
    }
    let mut degenerate = 0;
    let mut attempts = 0;
    while degenerate < 100 {
        attempts += 1;
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(k + 3..=200);
        let seq = gen_random_kdegenerate(k, n, rng.gen()).unwrap();
        let g = graph_from_construction(&seq);
        if is_ktree(&seq, &g) {
            continue;
        }
        let index = WitnessIndex::new(&seq);
        let mut state = ActivationState::new(&g).with_witnesses(&index).unwrap();
        let mut sigma: Vec<usize> = (0..n).collect();
        sigma.shuffle(&mut rng);
        for &v in &sigma {
            let delta = state.activate(v).unwrap();
            ensure(delta.cc <= delta.wv.unwrap(), || format!("k-degenerate k={k} n={n}: cc {} > wv {:?}", delta.cc, delta.wv))?;
        }
        degenerate += 1;
    }
    Ok(format!("{steps} k-tree steps with cc = wv; 100 k-degenerate orders with cc <= wv ({attempts} drawn)"))
}

fn gain_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..100 {
        let inst = match trial % 4 {
            0 => Family::RandomTree { n: rng.gen_range(2..40), seed: rng.gen() },
            1 => Family::KTree { k: 2, n: rng.gen_range(3..40), seed: rng.gen() },
            2 => Family::KDegenerate { k: 3, n: rng.gen_range(4..40), seed: rng.gen() },
            _ => Family::Grid { d: 2, side: rng.gen_range(2..6) },
        }
        .build()
        .unwrap();
        let g = &inst.graph;
        let n = g.n();
        let mut state = ActivationState::new(g).with_neighborhoods();
        let mut sigma: Vec<usize> = (0..n).collect();
        sigma.shuffle(&mut rng);
        for &v in &sigma[..rng.gen_range(0..n)] {
            state.activate(v).unwrap();
        }
        let formula = state.expected_gain().unwrap();
        let inactive: Vec<usize> = (0..n).filter(|&v| !state.is_active(v)).collect();
        let total: i64 = inactive
            .iter()
            .map(|&v| {
                let mut next = state.clone();
                next.activate(v).unwrap().delta_cc as i64
            })
            .sum();
        let brute = ratio(total, inactive.len() as i64);
        ensure(formula == brute, || format!("state {trial}: formula {formula} != mean {brute}"))?;
    }
    Ok("100 states, formula equals enumerated mean exactly".into())
}

fn remark() -> Outcome {
    let mut smallest: Option<(usize, Rational)> = None;
    for n in (11..=501).step_by(2) {
        let RemarkEvaluation { strategy_gain, .. } = remark_continuation_value(n).unwrap();
        ensure(strategy_gain > ratio(0, 1), || format!("n={n}: gain {strategy_gain} is not positive"))?;
        if smallest.as_ref().is_none_or(|(_, g)| &strategy_gain < g) {
            smallest = Some((n, strategy_gain));
        }
    }
    let at = remark_continuation_value(501).unwrap();
    let (n_min, g_min) = smallest.unwrap();
    Ok(format!(
        "gain > 0 for all odd n in [11, 501] (min {} at n={n_min}; n=501: {:.6}); displayed expression at n=501 = {:.6}, limit {} (not 3/4)",
        to_f64(&g_min),
        to_f64(&at.strategy_gain),
        to_f64(&at.displayed),
        RemarkEvaluation::displayed_limit()
    ))
}

fn phi_max() -> Outcome {
    let m = metagame::maximize_phi(metagame::DEFAULT_GRID_STEP, metagame::DEFAULT_REFINE_TOL).unwrap();
    ensure((m.max_value - 0.25).abs() < 1e-9, || format!("max {}", m.max_value))?;
    let has = |pred: &dyn Fn(&[f64; 3]) -> bool| m.maximizers.iter().any(pred);
    let near = |x: f64, y: f64| (x - y).abs() < 1e-6;
    ensure(has(&|p| near(p[0], 0.5) && near(p[2], 0.5) && p[1] > 0.05), || "no (1/2, b, 1/2) maximizer".into())?;
    ensure(has(&|p| near(p[0], 0.5) && near(p[1], 0.0) && (p[2] - 0.5).abs() > 0.05), || "no (1/2, 0, c) maximizer".into())?;
    ensure(has(&|p| near(p[0], 1.0) && near(p[1], 1.0) && near(p[2], 0.5)), || "no (1, 1, 1/2) maximizer".into())?;
    Ok(format!("max = {:.12}, {} representative maximizers", m.max_value, m.maximizers.len()))
}

fn mt_scores() -> Outcome {
    let step = 0.01;
    for k in 1..=10u32 {
        let m = metagame::mt_argmax(k, step).unwrap();
        let want = 1.0 / f64::from(k + 1);
        ensure((m.grid_argmax - want).abs() <= step, || format!("k={k}: grid argmax {}", m.grid_argmax))?;
        ensure((m.argmax - want).abs() <= step, || format!("k={k}: argmax {}", m.argmax))?;
        ensure((m.value - metagame::mt_optimum(k)).abs() < 1e-12, || format!("k={k}: max {} vs {}", m.value, metagame::mt_optimum(k)))?;
    }
    Ok("k = 1..10: argmax 1/(k+1), max k^k/(k+1)^(k+1)".into())
}

fn separation() -> Outcome {
    let n = 100_000usize;
    let inst = Family::TwoStarPlusStar {
        n,
        ratio: Ratio::new(999, 1000),
        attach_from: 2,
        attach_to: ccstop::generate::StarAttachment::Center,
    }
    .build()
    .unwrap();
    // exact blind curve: the instance is chordal, so components equal witnesses
    let hist = exact::chordal_backset_histogram(&inst.graph).ok_or("instance is not chordal")?;
    let (nums, den) = exact::backset_curve_numerators(n, &hist);
    let l_star = (0..=n).max_by(|&a, &b| nums[a].cmp(&nums[b]).then(b.cmp(&a))).unwrap();
    let l_ref = n.div_ceil(3);
    let best = Rational::new(nums[l_star].clone(), den.clone());
    let reference = Rational::new(nums[l_ref].clone(), den.clone());
    let correction = to_f64(&(&best - &reference));

    // Monte Carlo scan of the same curve near its peak
    let window: Vec<usize> = (l_star.saturating_sub(2000)..=l_star + 2000).step_by(100).chain([l_star, l_ref]).collect();
    let scan = montecarlo::blind_curve(&inst.graph, &window, &EstimatorConfig::new(200, 11)).unwrap();
    let covered = scan
        .iter()
        .zip(&window)
        .filter(|(est, &l)| est.contains(to_f64(&Rational::new(nums[l].clone(), den.clone()))))
        .count();
    let mc_peak = window[(0..window.len()).max_by(|&a, &b| scan[a].mean.total_cmp(&scan[b].mean)).unwrap()];

    let specs: Vec<StrategySpec> = ["twophase:alpha=1/3,gamma=1/2,trigger=initial_clique", &format!("blind:l={l_ref}")]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let cfg = EstimatorConfig::new(4000, 12);
    let cmp = montecarlo::compare_strategies(&inst, &specs, &cfg).unwrap();
    let d = cmp.differences[0].estimate;
    let (low, high, mean) = (d.ci_low - correction, d.ci_high - correction, d.mean - correction);
    let detail = format!(
        "best blind l*={l_star} (exact {:.3}; MC scan peak l={mc_peak}, {covered}/{} CIs cover exact); \
         E[TP - B(l*)] = {mean:.3}, 99% CI [{low:.3}, {high:.3}] ({} CRN reps vs l={l_ref}, exact offset {correction:.4})",
        to_f64(&best),
        window.len(),
        cfg.replications
    );
    ensure(low > 0.0, || detail.clone())?;
    Ok(detail)
}

fn concentration() -> Outcome {
    let n = 10_000usize;
    let g = random_tree(n, 13);
    let (alpha, epsilon) = (0.5, 0.3);
    let beta = g.edge_count() as f64 / n as f64;
    let threshold = (alpha - alpha * alpha * beta) * n as f64 + 0.3 * epsilon * n as f64;
    let tail = montecarlo::estimate_tail(&g, Ratio::new(1, 2), threshold, &EstimatorConfig::new(10_000, 14)).unwrap();
    let bound = epsilon.powi(3) / 2000.0;
    let detail = format!(
        "threshold {threshold:.1}: {} hits in {} reps, tail {:.2e} <= {bound:.2e} + 3*{:.2e}{}",
        tail.hits,
        tail.estimate.replications,
        tail.estimate.mean,
        tail.estimate.std_error,
        tail.zero_hit_upper.map(|u| format!(" (zero-hit upper bound {u:.2e})")).unwrap_or_default()
    );
    ensure(tail.estimate.mean <= bound + 3.0 * tail.estimate.std_error, || detail.clone())?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let inst = Family::KTree { k: 2, n: 2_000, seed: 3 }.build().unwrap();
    let specs: Vec<StrategySpec> = ["greedy", "blind:alpha=1/3", "twophase:alpha=1/3,gamma=1/2,trigger=initial_clique"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let runs: Vec<_> = [1usize, 4, 16]
        .iter()
        .map(|&t| {
            let cfg = EstimatorConfig::new(300, 2024).with_threads(t);
            let single = montecarlo::estimate_strategy(&inst, &specs[0], &cfg).unwrap();
            let cmp = montecarlo::compare_strategies(&inst, &specs, &cfg).unwrap();
            let tail = montecarlo::estimate_tail(&inst.graph, Ratio::new(1, 3), 100.0, &cfg).unwrap();
            let curve = montecarlo::blind_curve(&inst.graph, &[10, 500, 667, 1500], &cfg).unwrap();
            (single, cmp, tail, curve)
        })
        .collect();
    let bits = |r: &(montecarlo::Estimate, montecarlo::Comparison, montecarlo::TailEstimate, Vec<montecarlo::Estimate>)| {
        let mut v = vec![r.0.mean.to_bits(), r.0.std_error.to_bits(), r.2.estimate.mean.to_bits()];
        v.extend(r.1.estimates.iter().chain(r.1.differences.iter().map(|d| &d.estimate)).chain(&r.3).flat_map(|e| {
            [e.mean.to_bits(), e.std_error.to_bits(), e.ci_low.to_bits(), e.ci_high.to_bits()]
        }));
        v
    };
    ensure(bits(&runs[0]) == bits(&runs[1]) && bits(&runs[0]) == bits(&runs[2]), || "estimates differ across thread counts".into())?;
    ensure(runs[0] == runs[1] && runs[0] == runs[2], || "reports differ across thread counts".into())?;
    Ok(format!("threads 1/4/16 bit-identical (greedy mean {:.6})", runs[0].0.mean))
}

fn main() {
    let criteria: [Criterion; 14] = [
        ("blind expectation on trees equals l(n-l+1)/n", blind_tree_formula),
        ("tree blind optimum lies in (n/4, n/4+1)", tree_bracket),
        ("k-tree blind formula equals enumeration", ktree_formula),
        ("k-tree blind value at n/(k+1) within bracket", ktree_bracket),
        ("backward induction dominates the catalog", dp_optimality),
        ("path optimum per vertex trends down above 1/4", path_trend),
        ("components equal witnesses on k-trees", witnesses),
        ("expected one-step gain formula", gain_formula),
        ("continuing past the greedy stop pays off", remark),
        ("phi maximum and maximizers", phi_max),
        ("(1-a)^k a maximum", mt_scores),
        ("two-phase beats the best blind threshold", separation),
        ("concentration tail below bound", concentration),
        ("Monte Carlo determinism across threads", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| f == &id) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {id:>2} {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
