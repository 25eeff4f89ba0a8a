use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fixlab::bounds::bound_report;
use fixlab::export::{write_benchmarks, write_mttf_trace, write_trace};
use fixlab::io::{parse_configuration, read_configuration, read_graph, write_edge_list};
use fixlab::monte_carlo::{estimate, speedup_benchmark, EpsilonPolicy, DEFAULT_RUNS};
use fixlab::mttf::{mttf_exact, mttf_lower_bound, MttfOptions, DEFAULT_STOP_STDEV};
use fixlab::oracle::build_chain;
use fixlab::solver::{
    classify_vertices, solve, trajectory, Criterion, SolveOptions, DEFAULT_EPSILON,
    DEFAULT_MAX_ITERS,
};
use fixlab::{Configuration, Error, EvolutionaryGraph, GeneratorSpec, Rule};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "fixlab",
    version,
    about = "Fixation probabilities on evolutionary graphs"
)]
struct Cli {
    /// Worker threads for parallel work; defaults to all cores.
    #[arg(long, global = true, env = "FIXLAB_THREADS")]
    threads: Option<usize>,

    /// Write a manifest that `fixlab replay` can re-run.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
enum Command {
    /// Generate a random graph.
    Generate(GenerateArgs),
    /// Fixation probability under neutral drift.
    Solve(SolveArgs),
    /// Per-step min/max/avg/stdev and expected mutants as CSV.
    Trajectory(TrajectoryArgs),
    /// Monte Carlo estimate for a biased rule.
    Simulate(SimulateArgs),
    /// Lower and upper bounds for an advantageous single mutant.
    Bounds(BoundsArgs),
    /// Lower bound on the mean time to fixation.
    Mttf(MttfArgs),
    /// Exact values from the full Markov chain (small graphs only).
    Oracle(OracleArgs),
    /// Time Monte Carlo against the solver.
    Compare(CompareArgs),
    /// Label vertices of an undirected unweighted graph.
    Amplifier(AmplifierArgs),
    /// Re-run a manifest.
    #[serde(skip)]
    Replay { path: PathBuf },
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct GraphSource {
    /// Graph file: JSON `{"n":..,"edges":[[i,j,w],..]}` or an edge list.
    #[arg(
        long,
        required_unless_present = "generate",
        conflicts_with = "generate"
    )]
    graph: Option<PathBuf>,

    /// Generator spec such as `pa:n=100,m=2,w=random`.
    #[arg(long)]
    generate: Option<String>,

    /// Seed for `--generate`.
    #[arg(long, default_value_t = 0)]
    graph_seed: u64,
}

impl GraphSource {
    fn load(&self) -> Result<EvolutionaryGraph, Error> {
        match (&self.graph, &self.generate) {
            (Some(path), _) => read_graph(path),
            (None, Some(spec)) => spec.parse::<GeneratorSpec>()?.generate(self.graph_seed),
            (None, None) => Err(Error::InvalidParameter("need --graph or --generate".into())),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ConfigArg {
    /// Initial mutants: `0,3`, `[0,3]`, or a file holding either.
    #[arg(long, default_value = "0")]
    config: String,
}

impl ConfigArg {
    fn load(&self) -> Result<Configuration, Error> {
        if Path::new(&self.config).is_file() {
            read_configuration(&self.config)
        } else {
            parse_configuration(&self.config)
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct GenerateArgs {
    /// Generator spec such as `er:n=50,p=0.1`.
    #[arg(long)]
    generate: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; `.json` writes JSON, anything else an edge list.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
    #[command(flatten)]
    #[serde(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "bd")]
    rule: Rule,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// `range` (bracket half-width) or `stdev`.
    #[arg(long, default_value = "range")]
    criterion: Criterion,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: u64,
    /// Also write the convergence trace as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct TrajectoryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
    #[command(flatten)]
    #[serde(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "bd")]
    rule: Rule,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
    #[command(flatten)]
    #[serde(flatten)]
    config: ConfigArg,
    /// Neutral names select the birth-biased variant.
    #[arg(long, default_value = "bd-b")]
    rule: Rule,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct BoundsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
    /// Mutant vertex; every vertex when absent.
    #[arg(long)]
    vertex: Option<usize>,
    #[arg(long, default_value = "bd-b")]
    rule: Rule,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct MttfArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
    #[command(flatten)]
    #[serde(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "bd")]
    rule: Rule,
    #[arg(long, default_value_t = DEFAULT_STOP_STDEV)]
    stop_stdev: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: u64,
    /// Also report exact mean times from the full chain.
    #[arg(long)]
    exact: bool,
    /// CSV of `t,p_min,increment,running_sum`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
    #[command(flatten)]
    #[serde(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "bd-b")]
    rule: Rule,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
    #[command(flatten)]
    #[serde(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "bd")]
    rule: Rule,
    /// Only neutral drift is compared.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop the solver at this stdev instead of at the Monte Carlo band.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Benchmark CSV; appended to if it exists.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct AmplifierArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphSource,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    tool: String,
    version: String,
    #[serde(flatten)]
    command: Command,
}

fn print_json(value: &impl Serialize) -> Result<(), Error> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn csv_sink(out: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(command: &Command) -> Result<(), Error> {
    match command {
        Command::Generate(a) => {
            let spec: GeneratorSpec = a.generate.parse()?;
            let g = spec.generate(a.seed)?;
            match &a.out {
                Some(p) if p.extension().is_some_and(|e| e == "json") => {
                    fixlab::io::write_graph_json(p, &g)?
                }
                Some(p) => fs::write(p, write_edge_list(&g.to_spec()))?,
                None => print_json(&g.to_spec())?,
            }
            if a.out.is_some() {
                let stats = g.stats();
                print_json(&json!({
                    "generator": spec.to_string(),
                    "seed": a.seed,
                    "n": g.n(),
                    "edges": g.edge_count(),
                    "strongly_connected": stats.is_strongly_connected,
                }))?;
            }
        }
        Command::Solve(a) => {
            let g = a.graph.load()?;
            let c = a.config.load()?;
            let opts = SolveOptions::new(a.rule.family(), a.epsilon)
                .criterion(a.criterion)
                .max_iters(a.max_iters)
                .record_trajectory(a.out.is_some());
            let rep = solve(&g, &c, &opts)?;
            if let (Some(path), Some(rows)) = (&a.out, &rep.trajectory) {
                write_trace(csv_sink(Some(path))?, rows)?;
            }
            print_json(&json!({
                "fixation": rep.fixation,
                "lower": rep.lower,
                "upper": rep.upper,
                "tau": rep.half_range,
                "iterations": rep.iterations,
                "converged": rep.converged,
                "stalled": rep.stalled,
                "rule": opts.rule,
                "criterion": opts.criterion,
                "epsilon": opts.epsilon,
            }))?;
        }
        Command::Trajectory(a) => {
            let g = a.graph.load()?;
            let c = a.config.load()?;
            let rows = trajectory(&g, &c, a.rule.family(), a.steps)?;
            write_trace(csv_sink(a.out.as_deref())?, &rows)?;
        }
        Command::Simulate(a) => {
            let g = a.graph.load()?;
            let c = a.config.load()?;
            print_json(&estimate(&g, &c, a.rule.biased(), a.r, a.runs, a.seed)?)?;
        }
        Command::Bounds(a) => {
            let g = a.graph.load()?;
            let vertices: Vec<usize> = match a.vertex {
                Some(v) => vec![v],
                None => (0..g.n()).collect(),
            };
            let reports = vertices
                .into_iter()
                .map(|v| bound_report(&g, v, a.r, a.rule.biased(), a.epsilon))
                .collect::<Result<Vec<_>, _>>()?;
            if a.vertex.is_some() {
                print_json(&reports[0])?;
            } else {
                print_json(&reports)?;
            }
        }
        Command::Mttf(a) => {
            let g = a.graph.load()?;
            let c = a.config.load()?;
            let opts = MttfOptions {
                rule: a.rule.family(),
                stop_stdev: a.stop_stdev,
                max_iters: a.max_iters,
                record_trace: a.out.is_some(),
            };
            let mut rep = mttf_lower_bound(&g, &c, &opts)?;
            if let (Some(path), Some(rows)) = (&a.out, rep.trace.take()) {
                write_mttf_trace(csv_sink(Some(path))?, &rows)?;
            }
            let exact = if a.exact {
                Some(mttf_exact(&g, &c, a.rule.family().as_biased(), 1.0)?)
            } else {
                None
            };
            print_json(&json!({ "bound": rep, "exact": exact }))?;
        }
        Command::Oracle(a) => {
            let g = a.graph.load()?;
            let c = a.config.load()?;
            let chain = build_chain(&g, a.rule.biased(), a.r)?;
            let sol = chain.solve()?;
            let times = sol.mean_times(&c)?;
            print_json(&json!({
                "fixation": sol.fixation(&c)?,
                "extinction": sol.extinction(&c)?,
                "mean_fixation_time": times.fixation,
                "mean_extinction_time": times.extinction,
                "mean_absorption_time": times.absorption,
                "rule": a.rule.biased(),
                "r": a.r,
                "states": chain.n_states(),
            }))?;
        }
        Command::Compare(a) => {
            if a.r != 1.0 {
                return Err(Error::InvalidParameter(
                    "compare times neutral drift only; use --r 1".into(),
                ));
            }
            let g = a.graph.load()?;
            let c = a.config.load()?;
            let policy = a
                .epsilon
                .map_or(EpsilonPolicy::WithinStdError, EpsilonPolicy::Fixed);
            let b = speedup_benchmark(&g, &c, a.rule.family(), a.runs, a.seed, policy)?;
            if let Some(path) = &a.out {
                append_benchmark(path, &b)?;
            }
            print_json(&b)?;
        }
        Command::Amplifier(a) => {
            let g = a.graph.load()?;
            let stats = g.stats();
            let labels = classify_vertices(&g)?;
            let threshold = stats.mean_inverse_degree.map(|m| 1.0 / m);
            let vertices: Vec<_> = labels
                .iter()
                .enumerate()
                .map(|(i, l)| json!({ "vertex": i, "degree": g.out_degree(i), "class": l }))
                .collect();
            print_json(&json!({ "threshold": threshold, "vertices": vertices }))?;
        }
        Command::Replay { path } => {
            let text = fs::read_to_string(path)?;
            let manifest: RunManifest = serde_json::from_str(&text)?;
            run(&manifest.command)?;
        }
    }
    Ok(())
}

fn append_benchmark(path: &Path, b: &fixlab::monte_carlo::Benchmark) -> Result<(), Error> {
    let mut buf = Vec::new();
    write_benchmarks(&mut buf, std::slice::from_ref(b))?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    let exists = path.exists() && fs::metadata(path)?.len() > 0;
    let body = if exists {
        text.split_once('\n').map_or("", |(_, rest)| rest)
    } else {
        &text
    };
    fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?
        .write_all(body.as_bytes())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Results do not depend on the thread count; this only sets speed.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if let (Some(path), false) = (&cli.manifest, matches!(cli.command, Command::Replay { .. })) {
        let manifest = RunManifest {
            tool: "fixlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: cli.command.clone(),
        };
        let written = serde_json::to_string_pretty(&manifest)
            .map_err(Error::from)
            .and_then(|s| fs::write(path, s).map_err(Error::from));
        if let Err(e) = written {
            eprintln!("fixlab: cannot write manifest: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({ "reason": e.code(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
