use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pspt_core::distributed::{self, BatchOptions, ClusterPlan, QuerySet};
use pspt_core::eval::{self, EvalConfig, TieMode};
use pspt_core::format;
use pspt_core::generate::{self, Model, Weights};
use pspt_core::{load_edge_list, Graph, Index, QueryEngine};

#[derive(Parser)]
#[command(name = "pspt", version, about = "Shortest-path queries from partial shortest path trees")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "PSPT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from an edge list.
    Build(BuildArgs),
    /// Answer one query.
    Query(QueryArgs),
    /// Compare query latency against bidirectional search.
    Bench(BenchArgs),
    /// Sweep alpha and classify sampled pairs against exact distances.
    Eval(EvalArgs),
    /// Write a synthetic edge list.
    Gen(GenArgs),
    /// Run a batch of pair queries through the map/shuffle/reduce simulator.
    Batch(BatchArgs),
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        Ok(x) => Err(format!("must be finite and > 0, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "4", value_parser = positive_f64)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    s: u64,
    t: u64,
    /// Return several paths through distinct meeting nodes, at most K if given.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "0")]
    multi: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "10000", value_parser = clap::value_parser!(u64).range(1..))]
    pairs: u64,
    #[arg(long, default_value = "1")]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Consistent,
    Arbitrary,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated alpha values.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.0625,0.125,0.25,0.5,1,2,4,8,16,32",
        value_parser = positive_f64
    )]
    alphas: Vec<f64>,
    #[arg(long, default_value = "200", value_parser = clap::value_parser!(u64).range(2..))]
    node_sample: u64,
    /// Pairs per round among the sampled nodes (default: all of them).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pairs_per_round: Option<u64>,
    #[arg(long, default_value = "5", value_parser = clap::value_parser!(u64).range(1..))]
    rounds: u64,
    #[arg(long, default_value = "1")]
    seed: u64,
    #[arg(long, value_enum, default_value = "consistent")]
    tie: TieArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Pa,
    Er,
    Line,
    Grid,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    model: ModelArg,
    #[arg(long)]
    n: Option<usize>,
    /// Edges per arriving node (pa).
    #[arg(long, default_value = "3")]
    m: usize,
    /// Edge probability (er).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Uniform integer weights in 1..=MAX instead of unit weights.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    max_weight: Option<u32>,
    #[arg(long, default_value = "1")]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// File with one "u v" pair per line.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value = "1", value_parser = clap::value_parser!(u64).range(1..))]
    machines: u64,
    #[arg(long, default_value = "0")]
    seed: u64,
    /// Include the path column.
    #[arg(long)]
    paths: bool,
    #[arg(long, default_value_t = distributed::DEFAULT_FAN_IN_CAP)]
    fan_in_cap: usize,
    /// Where to write the per-machine accounting CSV.
    #[arg(long)]
    accounting: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_graph(path: &Path) -> Result<Graph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_edge_list(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn read_index(path: &Path) -> Result<Index> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    format::deserialize(BufReader::new(file)).with_context(|| format!("loading index {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build(args: BuildArgs) -> Result<()> {
    let graph = read_graph(&args.graph)?;
    let start = Instant::now();
    let index = Index::build(&graph, args.alpha)?;
    let secs = start.elapsed().as_secs_f64();
    let mut sink = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    format::serialize(&index, &mut sink)?;
    sink.flush()?;
    let survivors = index.pruned().survivor_count();
    let mut out = io::stdout().lock();
    writeln!(out, "nodes,edges,survivors,alpha,beta,entries,build_seconds,us_per_node")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{:.3},{:.3}",
        graph.node_count(),
        graph.edge_count(),
        survivors,
        args.alpha,
        index.beta(),
        index.total_entries(),
        secs,
        secs * 1e6 / survivors.max(1) as f64
    )?;
    Ok(())
}

fn join(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

fn query(args: QueryArgs) -> Result<()> {
    let graph = read_graph(&args.graph)?;
    let index = read_index(&args.index)?;
    let engine = QueryEngine::new(&index, &graph)?;
    let mut out = io::stdout().lock();
    match args.multi {
        None => {
            let r = engine.query(args.s, args.t, true)?;
            writeln!(out, "distance,resolution,meeting_node,path")?;
            writeln!(
                out,
                "{},{},{},{}",
                r.distance.map(|d| d.to_string()).unwrap_or_default(),
                r.resolution.as_str(),
                r.meeting_node.map(|m| m.to_string()).unwrap_or_default(),
                r.path.map(|p| join(&p.nodes)).unwrap_or_default()
            )?;
        }
        Some(k) => {
            let paths = engine.query_multi(args.s, args.t, (k > 0).then_some(k))?;
            writeln!(out, "rank,length,path")?;
            for (i, p) in paths.iter().enumerate() {
                writeln!(out, "{},{},{}", i + 1, p.length, join(&p.nodes))?;
            }
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let graph = read_graph(&args.graph)?;
    let index = read_index(&args.index)?;
    let engine = QueryEngine::new(&index, &graph)?;
    let pairs = eval::sample_pairs(graph.node_count(), args.pairs as usize, args.seed);
    let report = eval::bench_latency(&engine, &pairs)?;
    report.write_csv(io::stdout().lock())?;
    eprintln!(
        "median speedup {:.1}x, {} fallbacks, {} inexact answers",
        report.median_speedup(),
        report.fallbacks,
        report.inexact
    );
    Ok(())
}

fn evaluate(args: EvalArgs) -> Result<()> {
    let graph = read_graph(&args.graph)?;
    let config = EvalConfig {
        alphas: args.alphas,
        node_sample: args.node_sample as usize,
        pairs_per_round: args.pairs_per_round.map(|p| p as usize),
        rounds: args.rounds as usize,
        seed: args.seed,
        tie: match args.tie {
            TieArg::Consistent => TieMode::Consistent,
            TieArg::Arbitrary => TieMode::Arbitrary { seed: args.seed },
        },
    };
    let report = eval::run_experiment(&graph, &config)?;
    report.write_csv(io::stdout().lock())?;
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let need = |v: Option<usize>, name: &str| v.with_context(|| format!("--{name} is required for this model"));
    let model = match args.model {
        ModelArg::Pa => Model::PreferentialAttachment {
            n: need(args.n, "n")?,
            m: args.m,
        },
        ModelArg::Er => {
            let p = args.p.context("--p is required for this model")?;
            if !(0.0..=1.0).contains(&p) {
                bail!("--p must lie in [0, 1]");
            }
            Model::ErdosRenyi { n: need(args.n, "n")?, p }
        }
        ModelArg::Line => Model::Line { n: need(args.n, "n")? },
        ModelArg::Grid => Model::Grid {
            rows: need(args.rows, "rows")?,
            cols: need(args.cols, "cols")?,
        },
    };
    let weights = match args.max_weight {
        None => Weights::Unit,
        Some(max) => Weights::UniformInt { max },
    };
    let mut out = output(args.out.as_deref())?;
    generate::write_generated(&mut out, model, weights, args.seed)?;
    out.flush()?;
    Ok(())
}

fn batch(args: BatchArgs) -> Result<()> {
    let graph = read_graph(&args.graph)?;
    let index = read_index(&args.index)?;
    let file = File::open(&args.pairs).with_context(|| format!("opening {}", args.pairs.display()))?;
    let pairs = distributed::parse_pairs(BufReader::new(file))
        .with_context(|| format!("reading {}", args.pairs.display()))?;
    let plan = ClusterPlan::new(args.machines as usize, args.seed)?;
    let options = BatchOptions {
        want_paths: args.paths,
        fan_in_cap: args.fan_in_cap,
    };
    let run = distributed::batch_query(&index, &graph, &QuerySet::Pairs(pairs), &plan, options)?;
    let mut out = output(args.out.as_deref())?;
    distributed::write_results_csv(&run.rows, args.paths, &mut out)?;
    out.flush()?;
    match args.accounting {
        Some(path) => {
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            distributed::write_accounting_csv(&run.accounting, file)?;
        }
        None => distributed::write_accounting_csv(&run.accounting, io::stderr().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => bench(a),
        Command::Eval(a) => evaluate(a),
        Command::Gen(a) => gen(a),
        Command::Batch(a) => batch(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
