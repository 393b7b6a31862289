//! `gmrf-active`: active node classification experiments from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gmrf_active::bench::{
    default_checkpoints, emit_csv, emit_summary, run_experiment, AccuracyScope, ExperimentConfig,
    GraphSource,
};
use gmrf_active::checks::run_all;
use gmrf_active::graph::{
    build_from_features, load_features, normalize_features, save_edge_list, save_labels,
    LabeledGraph, Similarity,
};
use gmrf_active::strategies::{ConfidenceSchedule, MixingSchedule, Strategy, UtilityKind};
use gmrf_active::Error;

const OUT_DIR_ENV: &str = "GMRF_ACTIVE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "gmrf-active",
    version,
    about = "Active node classification with GMRF utilities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic graph as `<out>` (edge list) and its `.labels` sibling.
    Gen(GenArgs),
    /// Build a similarity graph from a feature CSV.
    BuildGraph(BuildGraphArgs),
    /// Run one strategy.
    Run(RunArgs),
    /// Run several strategies with shared per-run seeds.
    Compare(CompareArgs),
    /// Run the built-in property suites.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// `grid:RxC` or `community:SIZES:pin=P:pout=Q`
    #[arg(long)]
    graph: GraphSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge-list path (default: graph.edges in $GMRF_ACTIVE_OUT_DIR or `.`)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Pearson,
    Rbf,
}

#[derive(Args, Debug)]
struct BuildGraphArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Pearson)]
    method: Method,
    /// RBF bandwidth
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Weights below this are dropped.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Skip the per-column [-1, 1] normalization.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// `grid:RxC`, `community:SIZES:pin=P:pout=Q`, `file:EDGES` or
    /// `features:CSV[:pearson|:rbf=S][:thr=X]`
    #[arg(long)]
    graph: GraphSource,
    /// Label file for `file:` graphs (default: the `.labels` sibling).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Query budget.
    #[arg(long = "T")]
    budget: usize,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = gmrf_active::gmrf::DEFAULT_DELTA, value_parser = parse_delta, allow_negative_numbers = true)]
    delta: f64,
    /// `inv_sqrt`, `const:<a>` or `none`
    #[arg(long, default_value = "inv_sqrt")]
    confidence: ConfidenceSchedule,
    /// Hybrid-random scale, or `none`
    #[arg(long, default_value = "none")]
    hybrid: MixingSchedule,
    /// Worst case over labels instead of the expectation (FL, KL).
    #[arg(long)]
    maxmin: bool,
    /// Average accuracy over all nodes instead of the remaining unlabeled set.
    #[arg(long)]
    all_nodes: bool,
    /// CSV path (default: results.csv in $GMRF_ACTIVE_OUT_DIR or `.`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Do not print the checkpoint summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    strategy: UtilityKind,
    #[command(flatten)]
    common: ExperimentArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Comma-separated: random, unc, vm, sigma-opt, fl, klg, kl, tv, msd
    #[arg(long, value_delimiter = ',', required = true)]
    strategies: Vec<UtilityKind>,
    #[command(flatten)]
    common: ExperimentArgs,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn parse_delta(s: &str) -> Result<f64, String> {
    let d: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(format!("delta must be positive and finite, got {s}"))
    }
}

fn default_out(explicit: Option<PathBuf>, file_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(file_name)
    })
}

fn write_graph(lg: &LabeledGraph, out: &Path) -> anyhow::Result<()> {
    let labels_path = out.with_extension("labels");
    if labels_path == out {
        bail!("output path {} must not end in .labels", out.display());
    }
    save_edge_list(&lg.graph, out)?;
    save_labels(lg.labels(), &labels_path)?;
    eprintln!(
        "wrote {} nodes, {} edges to {} and {}",
        lg.graph.num_nodes(),
        lg.graph.num_edges(),
        out.display(),
        labels_path.display()
    );
    Ok(())
}

fn gen(args: GenArgs) -> anyhow::Result<()> {
    let lg = args.graph.build(args.seed)?;
    write_graph(&lg, &default_out(args.out, "graph.edges"))
}

fn build_graph(args: BuildGraphArgs) -> anyhow::Result<()> {
    let (mut x, labels, c) = load_features(&args.features)?;
    if !args.raw {
        x = normalize_features(&x)?;
    }
    let similarity = match args.method {
        Method::Pearson => Similarity::Pearson,
        Method::Rbf => Similarity::Rbf { sigma: args.sigma },
    };
    let graph = build_from_features(&x, similarity, args.threshold)?;
    let lg = LabeledGraph::new(graph, labels, c)?;
    write_graph(&lg, &default_out(args.out, "graph.edges"))
}

fn experiment(kinds: &[UtilityKind], args: ExperimentArgs) -> anyhow::Result<()> {
    let mut source = args.graph;
    if let (GraphSource::File { labels, .. }, Some(explicit)) = (&mut source, args.labels) {
        *labels = Some(explicit);
    }
    let lg = source
        .build(args.seed)
        .with_context(|| format!("building graph `{source}`"))?;
    let strategies: Vec<Strategy> = kinds
        .iter()
        .map(|&k| {
            Strategy::new(k)
                .with_confidence(args.confidence)
                .with_mixing(args.hybrid)
                .with_maxmin(args.maxmin)
        })
        .collect();
    let mut cfg = ExperimentConfig::named(&strategies, args.budget, args.runs as usize, args.seed);
    cfg.delta = args.delta;
    if args.all_nodes {
        cfg.scope = AccuracyScope::AllNodes;
    }
    cfg.validate(lg.graph.num_nodes()).map_err(Usage)?;
    let results = run_experiment(&cfg, &lg)?;
    let out = default_out(args.out, "results.csv");
    emit_csv(&results, &out)?;
    eprintln!("wrote {}", out.display());
    if !args.quiet {
        print!(
            "{}",
            emit_summary(&results, &default_checkpoints(cfg.budget))
        );
    }
    Ok(())
}

fn check(args: CheckArgs) -> anyhow::Result<()> {
    let outcomes = run_all(args.seed)?;
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        bail!("{failed} of {} suites failed", outcomes.len());
    }
    Ok(())
}

/// Configuration that parsed but is inconsistent with the graph.
#[derive(Debug)]
struct Usage(Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::Run(a) => experiment(&[a.strategy], a.common),
        Command::Compare(a) => experiment(&a.strategies, a.common),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
