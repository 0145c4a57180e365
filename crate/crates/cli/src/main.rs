use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ccstop::exact::{self, ExactError};
use ccstop::generate::{GenerateError, Instance};
use ccstop::graph::is_ktree;
use ccstop::io::{read_instance, write_graph, write_sequence, FormatError, InstanceFile};
use ccstop::metagame::{self, MetagameError};
use ccstop::montecarlo::{self, EstimatorConfig, MonteCarloError};
use ccstop::rational::{format as format_rational, parse_fraction, to_f64, Rational};
use ccstop::strategy::{StrategyError, StrategySpec};
use ccstop::Family;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "ccstop", version, about = "Stop a random vertex arrival process at many connected components")]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true, env = "CCSTOP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance files.
    Generate {
        #[command(subcommand)]
        what: GenerateCommand,
    },
    /// Exact blind expectation for every stopping time l, as CSV.
    BlindScan {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value_t = ScanKind::Auto)]
        kind: ScanKind,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate strategies exactly, by backward induction, or by Monte Carlo.
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Strategy, e.g. `blind:l=3`, `blind:alpha=1/3`, `greedy`, `dp`,
        /// `twophase:alpha=1/3,gamma=1/2,trigger=initial_clique`. Repeatable.
        #[arg(long = "strategy", required = true)]
        strategies: Vec<String>,
        #[arg(long, value_enum)]
        mode: Mode,
        #[command(flatten)]
        mc: McArgs,
        /// Write the backward-induction table (`mask value stop`) here.
        #[arg(long)]
        dump_table: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Tail frequency of the component count after ceil(alpha n) arrivals.
    Concentration {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_parser = fraction)]
        alpha: String,
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        mc: McArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Maximize the closed-form side games.
    Metagame {
        #[command(subcommand)]
        what: MetagameCommand,
    },
}

#[derive(Subcommand)]
enum GenerateCommand {
    /// Random k-tree.
    Ktree {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sequence file; the graph goes next to it with extension `.graph`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Any named family.
    Family {
        #[arg(long)]
        name: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra family parameter `key=value`. Repeatable.
        #[arg(long = "param", value_parser = key_value)]
        params: Vec<(String, String)>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MetagameCommand {
    /// Maximum of phi(alpha, beta, gamma) over the unit cube.
    PhiMax {
        #[arg(long, default_value_t = metagame::DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long, default_value_t = metagame::DEFAULT_REFINE_TOL)]
        refine_tol: f64,
        /// Hold beta fixed.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Maximizer of (1 - alpha)^k alpha.
    MtArgmax {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = metagame::DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
struct InstanceArgs {
    /// Family name (path, star, k_star, star_plus_path, two_star_plus_star,
    /// random_tree, ktree, kdegenerate, grid).
    #[arg(long, conflicts_with_all = ["input", "ktree"])]
    family: Option<String>,
    /// Shorthand for `--family ktree --k K`.
    #[arg(long, value_name = "K", conflicts_with = "input")]
    ktree: Option<usize>,
    /// Graph (`n` header) or construction sequence (`k` header) file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Seed of the random instance generators.
    #[arg(long, default_value_t = 0)]
    graph_seed: u64,
    /// Extra family parameter `key=value`. Repeatable.
    #[arg(long = "param", value_parser = key_value)]
    params: Vec<(String, String)>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct McArgs {
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Master seed of the Monte Carlo streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.99)]
    ci_level: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Exact,
    Dp,
    Mc,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ScanKind {
    Auto,
    Tree,
    Ktree,
    Chordal,
    Enumerate,
}

fn key_value(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got `{raw}`"))
}

fn fraction(raw: &str) -> Result<String, String> {
    parse_fraction(raw).map(|_| raw.to_string()).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Cap(String),
    Io(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Cap(_) => 3,
            Failure::Io(_) => 4,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Cap(m) | Failure::Io(m) | Failure::Other(m) => m,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<GenerateError> for Failure {
    fn from(e: GenerateError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ExactError> for Failure {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::Resource { .. } | ExactError::Budget { .. } => Failure::Cap(e.to_string()),
            ExactError::Domain(_) => Failure::Usage(e.to_string()),
        }
    }
}

impl From<StrategyError> for Failure {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::Exact(inner) => inner.into(),
            StrategyError::Activation(_) => Failure::Other(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<MonteCarloError> for Failure {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::Strategy(inner) => inner.into(),
            MonteCarloError::Config(_) => Failure::Usage(e.to_string()),
            MonteCarloError::ThreadPool(_) => Failure::Other(e.to_string()),
        }
    }
}

impl From<MetagameError> for Failure {
    fn from(e: MetagameError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn format_failure(path: &Path, e: FormatError) -> Failure {
    match e {
        FormatError::Io(inner) => Failure::Io(format!("{}: {inner}", path.display())),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    }
}

struct Loaded {
    instance: Instance,
    descriptor: Value,
}

fn load_instance(args: &InstanceArgs) -> Result<Loaded, Failure> {
    if let Some(path) = &args.input {
        let file = File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let instance = match read_instance(BufReader::new(file)).map_err(|e| format_failure(path, e))? {
            InstanceFile::Graph(g) => Instance::from_graph(g),
            InstanceFile::Sequence(seq) => Instance::from_sequence(seq),
        };
        let descriptor = json!({
            "source": path.display().to_string(),
            "n": instance.n(),
            "k": instance.sequence.as_ref().map(|s| s.k()),
            "edges": instance.graph.edge_count(),
        });
        return Ok(Loaded { instance, descriptor });
    }
    let (name, k) = match (&args.family, args.ktree) {
        (Some(name), None) => (name.clone(), args.k),
        (None, Some(k)) => ("ktree".to_string(), Some(k)),
        _ => return Err(Failure::Usage("give one of --family, --ktree or --input".into())),
    };
    let family = family_from(&name, args.n, k, args.graph_seed, &args.params)?;
    let instance = family.build()?;
    let descriptor = json!({
        "family": family.to_string(),
        "n": instance.n(),
        "k": instance.sequence.as_ref().map(|s| s.k()),
        "edges": instance.graph.edge_count(),
    });
    Ok(Loaded { instance, descriptor })
}

fn family_from(
    name: &str,
    n: Option<usize>,
    k: Option<usize>,
    seed: u64,
    extra: &[(String, String)],
) -> Result<Family, Failure> {
    let mut params = BTreeMap::new();
    if let Some(n) = n {
        params.insert("n".to_string(), n.to_string());
    }
    if let Some(k) = k {
        params.insert("k".to_string(), k.to_string());
    }
    params.insert("seed".to_string(), seed.to_string());
    params.extend(extra.iter().cloned());
    Ok(Family::from_params(name, &params)?)
}

fn output_writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(path: &Option<PathBuf>, report: &Value) -> Result<(), Failure> {
    let mut out = output_writer(path)?;
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn mc_config(mc: &McArgs, threads: Option<usize>) -> EstimatorConfig {
    EstimatorConfig { replications: mc.reps, seed: mc.seed, ci_level: mc.ci_level, threads }
}

fn resolved_threads(threads: Option<usize>) -> usize {
    threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn exact_json(value: &Rational) -> Value {
    json!({ "exact": format_rational(value), "value": to_f64(value) })
}

fn generate(what: GenerateCommand) -> Result<(), Failure> {
    let (family, output) = match what {
        GenerateCommand::Ktree { k, n, seed, output } => (Family::KTree { k, n, seed }, output),
        GenerateCommand::Family { name, n, k, seed, params, output } => {
            (family_from(&name, n, k, seed, &params)?, output)
        }
    };
    let instance = family.build()?;
    let Some(path) = output else {
        let mut out = output_writer(&None)?;
        write_graph(&mut out, &instance.graph)?;
        out.flush()?;
        return Ok(());
    };
    let mut files = Vec::new();
    let graph_path = match &instance.sequence {
        Some(seq) => {
            let mut out = output_writer(&Some(path.clone()))?;
            write_sequence(&mut out, seq)?;
            out.flush()?;
            files.push(path.display().to_string());
            path.with_extension("graph")
        }
        None => path.clone(),
    };
    let mut out = output_writer(&Some(graph_path.clone()))?;
    write_graph(&mut out, &instance.graph)?;
    out.flush()?;
    files.push(graph_path.display().to_string());
    emit_json(
        &None,
        &json!({
            "tool": "ccstop",
            "version": VERSION,
            "command": "generate",
            "family": family.to_string(),
            "n": instance.n(),
            "edges": instance.graph.edge_count(),
            "is_ktree": instance.sequence.as_ref().map(|s| is_ktree(s, &instance.graph)),
            "files": files,
        }),
    )
}

fn blind_scan(instance: &InstanceArgs, kind: ScanKind, output: &Option<PathBuf>) -> Result<(), Failure> {
    let Loaded { instance, .. } = load_instance(instance)?;
    let g = &instance.graph;
    let n = g.n();
    let ktree_k = instance.sequence.as_ref().filter(|s| is_ktree(s, g)).map(|s| s.k());
    let is_tree = n > 0 && g.edge_count() + 1 == n && g.is_connected();
    let kind = match kind {
        ScanKind::Auto if ktree_k.is_some() => ScanKind::Ktree,
        ScanKind::Auto if is_tree => ScanKind::Tree,
        ScanKind::Auto if exact::chordal_backset_sizes(g).is_some() => ScanKind::Chordal,
        ScanKind::Auto => ScanKind::Enumerate,
        other => other,
    };
    let values: Vec<Rational> = match kind {
        ScanKind::Tree => {
            if !is_tree {
                return Err(Failure::Usage("instance is not a tree".into()));
            }
            (0..=n).map(|l| exact::blind_expectation_tree(n, l)).collect::<Result<_, _>>()?
        }
        ScanKind::Ktree | ScanKind::Chordal => {
            let hist = if kind == ScanKind::Ktree {
                let k = ktree_k.ok_or_else(|| Failure::Usage("instance carries no k-tree sequence".into()))?;
                exact::ktree_backset_histogram(k, n)
            } else {
                exact::chordal_backset_histogram(g).ok_or_else(|| Failure::Usage("instance is not chordal".into()))?
            };
            let (nums, den) = exact::backset_curve_numerators(n, &hist);
            nums.into_iter().map(|num| Rational::new(num, den.clone())).collect()
        }
        ScanKind::Enumerate | ScanKind::Auto => {
            (0..=n).map(|l| exact::brute_force_blind(g, l)).collect::<Result<_, _>>()?
        }
    };
    let best = values.iter().max().cloned().unwrap_or_default();
    let mut out = output_writer(output)?;
    writeln!(out, "l,expected_cc,is_argmax")?;
    for (l, v) in values.iter().enumerate() {
        writeln!(out, "{l},{},{}", to_f64(v), u8::from(*v == best))?;
    }
    out.flush()?;
    Ok(())
}

struct RunArgs<'a> {
    instance: &'a InstanceArgs,
    strategies: &'a [String],
    mode: Mode,
    mc: &'a McArgs,
    dump_table: &'a Option<PathBuf>,
    output: &'a Option<PathBuf>,
    threads: Option<usize>,
}

fn run(args: RunArgs<'_>) -> Result<(), Failure> {
    let started = Instant::now();
    let Loaded { instance, descriptor } = load_instance(args.instance)?;
    let specs = args
        .strategies
        .iter()
        .map(|s| s.parse::<StrategySpec>())
        .collect::<Result<Vec<_>, _>>()?;
    let n = instance.n();
    let mut config = json!({
        "instance": args.instance,
        "strategies": args.strategies,
        "mode": args.mode,
    });
    let mut report = json!({ "tool": "ccstop", "version": VERSION, "command": "run", "instance": descriptor });
    match args.mode {
        Mode::Exact => {
            let results = specs
                .iter()
                .map(|spec| {
                    let value = exact::brute_force_strategy_value(&instance, spec)?;
                    let mut entry = exact_json(&value);
                    entry["strategy"] = json!(spec.to_string());
                    entry["per_n"] = json!(to_f64(&value) / n as f64);
                    Ok(entry)
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            report["results"] = json!(results);
        }
        Mode::Dp => {
            if let Some(other) = specs.iter().find(|s| !matches!(s, StrategySpec::DpOptimal(_))) {
                return Err(Failure::Usage(format!(
                    "mode dp evaluates the `dp` strategy only (got `{other}`); use --mode exact or mc"
                )));
            }
            let table = if n <= exact::DP_EXACT_MAX_N {
                exact::solve_dp_exact(&instance.graph)?
            } else {
                exact::solve_dp(&instance.graph)?
            };
            if let Some(path) = args.dump_table {
                let file = File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                let mut out = BufWriter::new(file);
                table.write_dump(&mut out)?;
                out.flush()?;
            }
            let mut entry = match table.exact_root() {
                Some(v) => exact_json(v),
                None => json!({ "exact": Value::Null, "value": table.root_value() }),
            };
            entry["strategy"] = json!("dp");
            entry["per_n"] = json!(table.root_value() / n as f64);
            report["results"] = json!(vec![entry; specs.len()]);
        }
        Mode::Mc => {
            let cfg = mc_config(args.mc, args.threads);
            config["reps"] = json!(cfg.replications);
            config["seed"] = json!(cfg.seed);
            config["ci_level"] = json!(cfg.ci_level);
            config["threads"] = json!(resolved_threads(args.threads));
            if specs.len() == 1 {
                let est = montecarlo::estimate_strategy(&instance, &specs[0], &cfg)?;
                report["results"] = json!([{
                    "strategy": specs[0].to_string(),
                    "estimate": est,
                    "per_n": est.mean / n as f64,
                }]);
            } else {
                let cmp = montecarlo::compare_strategies(&instance, &specs, &cfg)?;
                let results: Vec<Value> = specs
                    .iter()
                    .zip(&cmp.estimates)
                    .map(|(spec, est)| json!({ "strategy": spec.to_string(), "estimate": est, "per_n": est.mean / n as f64 }))
                    .collect();
                let diffs: Vec<Value> = cmp
                    .differences
                    .iter()
                    .map(|d| {
                        json!({
                            "first": specs[d.first].to_string(),
                            "second": specs[d.second].to_string(),
                            "difference": d.estimate,
                        })
                    })
                    .collect();
                report["results"] = json!(results);
                report["differences"] = json!(diffs);
            }
        }
    }
    report["config"] = config;
    report["wall_clock_seconds"] = json!(started.elapsed().as_secs_f64());
    emit_json(args.output, &report)
}

fn concentration(
    instance: &InstanceArgs,
    alpha: &str,
    epsilon: f64,
    mc: &McArgs,
    output: &Option<PathBuf>,
    threads: Option<usize>,
) -> Result<(), Failure> {
    let started = Instant::now();
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Failure::Usage(format!("epsilon {epsilon} is outside [0, 1]")));
    }
    let Loaded { instance: inst, descriptor } = load_instance(instance)?;
    let alpha_frac = parse_fraction(alpha).map_err(|e| Failure::Usage(e.to_string()))?;
    let a = *alpha_frac.numer() as f64 / *alpha_frac.denom() as f64;
    let n = inst.n() as f64;
    let beta = inst.graph.edge_count() as f64 / n;
    let threshold = (a - a * a * beta) * n + 0.3 * epsilon * n;
    let cfg = mc_config(mc, threads);
    let tail = montecarlo::estimate_tail(&inst.graph, alpha_frac, threshold, &cfg)?;
    let report = json!({
        "tool": "ccstop",
        "version": VERSION,
        "command": "concentration",
        "instance": descriptor,
        "beta": beta,
        "threshold": threshold,
        "bound": epsilon.powi(3) / 2000.0,
        "tail": tail,
        "config": {
            "instance": instance,
            "alpha": alpha,
            "epsilon": epsilon,
            "reps": cfg.replications,
            "seed": cfg.seed,
            "ci_level": cfg.ci_level,
            "threads": resolved_threads(threads),
        },
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
    });
    emit_json(output, &report)
}

fn metagame_cmd(what: MetagameCommand) -> Result<(), Failure> {
    let mut out = output_writer(&None)?;
    match what {
        MetagameCommand::PhiMax { grid_step, refine_tol, beta } => {
            let result = match beta {
                Some(b) => metagame::maximize_phi_at_beta(b, grid_step, refine_tol)?,
                None => metagame::maximize_phi(grid_step, refine_tol)?,
            };
            writeln!(out, "max {:.9}", result.max_value)?;
            for [a, b, c] in result.maximizers {
                writeln!(out, "argmax alpha={a:.9} beta={b:.9} gamma={c:.9}")?;
            }
        }
        MetagameCommand::MtArgmax { k, grid_step } => {
            let result = metagame::mt_argmax(k, grid_step)?;
            writeln!(out, "k {k}")?;
            writeln!(out, "argmax {:.9}", result.argmax)?;
            writeln!(out, "max {:.9}", result.value)?;
            writeln!(out, "closed_form {:.9}", metagame::mt_optimum(k))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    match cli.command {
        Command::Generate { what } => generate(what),
        Command::BlindScan { instance, kind, output } => blind_scan(&instance, kind, &output),
        Command::Run { instance, strategies, mode, mc, dump_table, output } => run(RunArgs {
            instance: &instance,
            strategies: &strategies,
            mode,
            mc: &mc,
            dump_table: &dump_table,
            output: &output,
            threads,
        }),
        Command::Concentration { instance, alpha, epsilon, mc, output } => {
            concentration(&instance, &alpha, epsilon, &mc, &output, threads)
        }
        Command::Metagame { what } => metagame_cmd(what),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
