//! Seeded Monte-Carlo active-learning experiments.
//!
//! Every run `r` uses seed `base_seed + r` for all strategies of a config, so
//! their first (uniform) query coincides and curve differences come from the
//! strategies rather than from the draws.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmrf::{ClassModel, UnlabeledInverse, DEFAULT_DELTA};
use crate::graph::{
    build_from_features, community_graph, grid_graph, load_features, load_labeled_graph,
    normalize_features, regularized_laplacian, LabeledGraph, Similarity,
};
use crate::strategies::{select, Strategy, UtilityKind};

/// Checkpoints reported by [`emit_summary`] (clipped to the budget; `T` is
/// always appended).
pub const DEFAULT_CHECKPOINTS: [usize; 3] = [5, 10, 20];

/// Where the experiment graph comes from.
///
/// Text form: `grid:RxC`, `community:250,350,400:pin=0.05:pout=0.002`,
/// `file:EDGES` (labels read from `EDGES` with extension `.labels` unless
/// given explicitly) or `features:CSV[:pearson|:rbf=S][:thr=X][:raw]`.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    Grid {
        rows: usize,
        cols: usize,
    },
    Community {
        sizes: Vec<usize>,
        p_in: f64,
        p_out: f64,
    },
    File {
        edges: PathBuf,
        labels: Option<PathBuf>,
    },
    Features {
        path: PathBuf,
        similarity: Similarity,
        threshold: f64,
        normalize: bool,
    },
}

impl GraphSource {
    /// Materializes the graph; random generators use `seed`.
    pub fn build(&self, seed: u64) -> Result<LabeledGraph> {
        match self {
            GraphSource::Grid { rows, cols } => grid_graph(*rows, *cols, seed),
            GraphSource::Community { sizes, p_in, p_out } => {
                community_graph(sizes, *p_in, *p_out, seed)
            }
            GraphSource::File { edges, labels } => {
                let labels = labels
                    .clone()
                    .unwrap_or_else(|| edges.with_extension("labels"));
                load_labeled_graph(edges, labels)
            }
            GraphSource::Features {
                path,
                similarity,
                threshold,
                normalize,
            } => {
                let (mut x, labels, c) = load_features(path)?;
                if *normalize {
                    x = normalize_features(&x)?;
                }
                let graph = build_from_features(&x, *similarity, *threshold)?;
                LabeledGraph::new(graph, labels, c)
            }
        }
    }
}

fn bad_source(s: &str, why: &str) -> Error {
    Error::InvalidConfig(format!("graph spec `{s}`: {why}"))
}

fn parse_prob(s: &str, tok: &str, key: &str) -> Result<f64> {
    tok.strip_prefix(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad_source(s, &format!("expected `{key}<number>`, found `{tok}`")))
}

impl FromStr for GraphSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad_source(s, "expected `<kind>:<args>`"))?;
        match kind {
            "grid" => {
                let (r, c) = rest
                    .split_once(['x', 'X'])
                    .ok_or_else(|| bad_source(s, "expected `grid:RxC`"))?;
                let rows = r.parse().map_err(|_| bad_source(s, "bad row count"))?;
                let cols = c.parse().map_err(|_| bad_source(s, "bad column count"))?;
                Ok(GraphSource::Grid { rows, cols })
            }
            "community" => {
                let mut toks = rest.split(':');
                let sizes = toks
                    .next()
                    .unwrap_or("")
                    .split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad_source(s, "bad block sizes"))?;
                let (mut p_in, mut p_out) = (0.05, 0.002);
                for tok in toks {
                    if tok.starts_with("pin=") {
                        p_in = parse_prob(s, tok, "pin=")?;
                    } else if tok.starts_with("pout=") {
                        p_out = parse_prob(s, tok, "pout=")?;
                    } else {
                        return Err(bad_source(s, &format!("unknown option `{tok}`")));
                    }
                }
                Ok(GraphSource::Community { sizes, p_in, p_out })
            }
            "file" if !rest.is_empty() => Ok(GraphSource::File {
                edges: PathBuf::from(rest),
                labels: None,
            }),
            "features" => {
                // options are peeled off the end so the path may itself contain ':'
                let mut toks: Vec<&str> = rest.split(':').collect();
                let mut similarity = Similarity::Pearson;
                let mut threshold = 0.0;
                let mut normalize = true;
                while toks.len() > 1 {
                    let tok = *toks.last().expect("len > 1");
                    if tok == "pearson" {
                        similarity = Similarity::Pearson;
                    } else if tok == "raw" {
                        normalize = false;
                    } else if let Some(v) = tok.strip_prefix("rbf=") {
                        let sigma = v.parse().map_err(|_| bad_source(s, "bad rbf bandwidth"))?;
                        similarity = Similarity::Rbf { sigma };
                    } else if let Some(v) = tok.strip_prefix("thr=") {
                        threshold = v.parse().map_err(|_| bad_source(s, "bad threshold"))?;
                    } else {
                        break;
                    }
                    toks.pop();
                }
                let path = toks.join(":");
                if path.is_empty() {
                    return Err(bad_source(s, "missing feature file"));
                }
                Ok(GraphSource::Features {
                    path: PathBuf::from(path),
                    similarity,
                    threshold,
                    normalize,
                })
            }
            _ => Err(bad_source(
                s,
                "unknown kind (grid, community, file, features)",
            )),
        }
    }
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::Grid { rows, cols } => write!(f, "grid:{rows}x{cols}"),
            GraphSource::Community { sizes, p_in, p_out } => {
                let sizes: Vec<String> = sizes.iter().map(usize::to_string).collect();
                write!(f, "community:{}:pin={p_in}:pout={p_out}", sizes.join(","))
            }
            GraphSource::File { edges, .. } => write!(f, "file:{}", edges.display()),
            GraphSource::Features {
                path,
                similarity,
                threshold,
                normalize,
            } => {
                write!(f, "features:{}", path.display())?;
                match similarity {
                    Similarity::Pearson => write!(f, ":pearson")?,
                    Similarity::Rbf { sigma } => write!(f, ":rbf={sigma}")?,
                }
                write!(f, ":thr={threshold}")?;
                if !normalize {
                    write!(f, ":raw")?;
                }
                Ok(())
            }
        }
    }
}

/// Which nodes the accuracy at step `t` is computed over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AccuracyScope {
    /// The remaining unlabeled set `U^t`.
    #[default]
    Unlabeled,
    /// All nodes, counting queried nodes as correct.
    AllNodes,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// `(label, strategy)`; labels name the CSV rows.
    pub strategies: Vec<(String, Strategy)>,
    /// Query budget `T`.
    pub budget: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub delta: f64,
    pub scope: AccuracyScope,
}

impl ExperimentConfig {
    pub fn new(
        strategies: Vec<(String, Strategy)>,
        budget: usize,
        runs: usize,
        base_seed: u64,
    ) -> Self {
        ExperimentConfig {
            strategies,
            budget,
            runs,
            base_seed,
            delta: DEFAULT_DELTA,
            scope: AccuracyScope::Unlabeled,
        }
    }

    /// Strategies labeled by their utility name.
    pub fn named(strategies: &[Strategy], budget: usize, runs: usize, base_seed: u64) -> Self {
        let labeled = strategies
            .iter()
            .map(|s| (s.kind.name().to_string(), *s))
            .collect();
        Self::new(labeled, budget, runs, base_seed)
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("no strategies given".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget T must be at least 1".into()));
        }
        if self.budget >= num_nodes {
            return Err(Error::InvalidConfig(format!(
                "budget T = {} must be smaller than the number of nodes {num_nodes}",
                self.budget
            )));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidDelta(self.delta));
        }
        Ok(())
    }
}

/// Ground truth with a query counter.
#[derive(Clone, Debug)]
pub struct LabelOracle {
    labels: Vec<usize>,
    queries: usize,
}

impl LabelOracle {
    pub fn new(labels: Vec<usize>) -> Self {
        LabelOracle { labels, queries: 0 }
    }

    pub fn query(&mut self, node: usize) -> Result<usize> {
        let c = *self.labels.get(node).ok_or(Error::MissingLabel(node))?;
        self.queries += 1;
        Ok(c)
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Fraction of unlabeled nodes whose predicted class matches `truth`.
pub fn accuracy(model: &ClassModel, truth: &[usize]) -> Result<f64> {
    let predictions = model.predict_classes();
    if predictions.is_empty() {
        return Err(Error::EmptyUnlabeled);
    }
    let mut correct = 0usize;
    for &(node, c) in &predictions {
        let y = *truth.get(node).ok_or(Error::MissingLabel(node))?;
        correct += usize::from(c == y);
    }
    Ok(correct as f64 / predictions.len() as f64)
}

fn scoped_accuracy(model: &ClassModel, truth: &[usize], scope: AccuracyScope) -> Result<f64> {
    let acc = accuracy(model, truth)?;
    Ok(match scope {
        AccuracyScope::Unlabeled => acc,
        AccuracyScope::AllNodes => {
            let u = model.unlabeled().len() as f64;
            (acc * u + model.num_labeled() as f64) / truth.len() as f64
        }
    })
}

/// Share of the most frequent class.
pub fn baseline_accuracy(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::NoLabels);
    }
    let mut counts = std::collections::BTreeMap::new();
    for &c in labels {
        *counts.entry(c).or_insert(0usize) += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(max as f64 / labels.len() as f64)
}

/// Accuracy statistics over Monte-Carlo runs, indexed by `t − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyCurve {
    pub mean: Vec<f64>,
    /// Sample standard deviation (zero for a single run).
    pub std: Vec<f64>,
    /// `per_run[r][t − 1]`
    pub per_run: Vec<Vec<f64>>,
}

impl AccuracyCurve {
    pub fn from_runs(per_run: Vec<Vec<f64>>) -> Self {
        let runs = per_run.len();
        let len = per_run.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for t in 0..len {
            let m = per_run.iter().map(|r| r[t]).sum::<f64>() / runs as f64;
            mean[t] = m;
            if runs > 1 {
                let ss: f64 = per_run.iter().map(|r| (r[t] - m).powi(2)).sum();
                std[t] = (ss / (runs - 1) as f64).sqrt();
            }
        }
        AccuracyCurve { mean, std, per_run }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn runs(&self) -> usize {
        self.per_run.len()
    }

    /// Mean accuracy after `t` queries (1-based).
    pub fn at(&self, t: usize) -> f64 {
        self.mean[t - 1]
    }
}

/// One run of one strategy.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub accuracy: Vec<f64>,
    pub queries: Vec<usize>,
    /// Hypothetical-mean evaluations per selection step.
    pub retrain_calls: Vec<usize>,
    /// Unlabeled-set size at each selection step.
    pub unlabeled_sizes: Vec<usize>,
    /// Largest `|μ|` seen after any update.
    pub max_abs_mean: f64,
}

/// Runs greedy sampling (select, query, observe, score) for `budget` steps from
/// the prior model `initial`.
pub fn run_single(
    strategy: &Strategy,
    initial: &ClassModel,
    truth: &[usize],
    budget: usize,
    seed: u64,
    scope: AccuracyScope,
) -> Result<RunTrace> {
    let mut model = initial.clone();
    let mut oracle = LabelOracle::new(truth.to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = RunTrace {
        accuracy: Vec::with_capacity(budget),
        queries: Vec::with_capacity(budget),
        retrain_calls: Vec::with_capacity(budget),
        unlabeled_sizes: Vec::with_capacity(budget),
        max_abs_mean: model.max_abs_mean(),
    };
    for t in 1..=budget {
        trace.unlabeled_sizes.push(model.unlabeled().len());
        let report = select(strategy, &model, t, &mut rng)?;
        let label = oracle.query(report.chosen)?;
        model.observe(report.chosen, label)?;
        trace.queries.push(report.chosen);
        trace.retrain_calls.push(report.retrain_calls);
        trace.max_abs_mean = trace.max_abs_mean.max(model.max_abs_mean());
        trace.accuracy.push(scoped_accuracy(&model, truth, scope)?);
    }
    Ok(trace)
}

#[derive(Clone, Debug)]
pub struct StrategyResult {
    pub label: String,
    pub strategy: Strategy,
    pub curve: AccuracyCurve,
    pub runs: Vec<RunTrace>,
}

impl StrategyResult {
    /// Largest number of hypothetical-mean calls in any single scan.
    pub fn max_retrain_calls(&self) -> usize {
        self.runs
            .iter()
            .flat_map(|r| r.retrain_calls.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs_mean(&self) -> f64 {
        self.runs.iter().fold(0.0, |acc, r| acc.max(r.max_abs_mean))
    }

    /// Whether every scan stayed within [`retrain_budget`].
    pub fn respects_retrain_budget(&self, num_classes: usize) -> bool {
        self.runs.iter().all(|r| {
            r.retrain_calls
                .iter()
                .zip(&r.unlabeled_sizes)
                .all(|(&calls, &u)| calls <= retrain_budget(self.strategy.kind, num_classes, u))
        })
    }
}

/// Maximum hypothetical-mean evaluations one scan may perform: none for the
/// closed-form utilities, one per (candidate, label) for FL and KL.
pub fn retrain_budget(kind: UtilityKind, num_classes: usize, unlabeled: usize) -> usize {
    if kind.retrains() {
        num_classes * unlabeled
    } else {
        0
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub strategies: Vec<StrategyResult>,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub budget: usize,
}

impl ExperimentResult {
    pub fn get(&self, label: &str) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.label == label)
    }
}

/// Runs every strategy of `cfg` for `cfg.runs` seeded repetitions on `graph`.
/// The prior inverse is factored once and cloned into each run.
pub fn run_experiment(cfg: &ExperimentConfig, graph: &LabeledGraph) -> Result<ExperimentResult> {
    let n = graph.graph.num_nodes();
    cfg.validate(n)?;
    let lap = regularized_laplacian(&graph.graph, cfg.delta)?;
    let prior = ClassModel::from_inverse(
        UnlabeledInverse::from_laplacian(&lap)?,
        cfg.delta,
        graph.num_classes(),
    )?;
    let truth = graph.labels();
    let jobs: Vec<(usize, usize)> = (0..cfg.strategies.len())
        .flat_map(|s| (0..cfg.runs).map(move |r| (s, r)))
        .collect();
    let traces: Vec<RunTrace> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let seed = cfg.base_seed.wrapping_add(r as u64);
            run_single(
                &cfg.strategies[s].1,
                &prior,
                truth,
                cfg.budget,
                seed,
                cfg.scope,
            )
        })
        .collect::<Result<_>>()?;
    let mut traces = traces.into_iter();
    let strategies = cfg
        .strategies
        .iter()
        .map(|(label, strategy)| {
            let runs: Vec<RunTrace> = traces.by_ref().take(cfg.runs).collect();
            let curve = AccuracyCurve::from_runs(runs.iter().map(|r| r.accuracy.clone()).collect());
            StrategyResult {
                label: label.clone(),
                strategy: *strategy,
                curve,
                runs,
            }
        })
        .collect();
    Ok(ExperimentResult {
        strategies,
        num_nodes: n,
        num_classes: graph.num_classes(),
        budget: cfg.budget,
    })
}

/// CSV text: `strategy,t,mean_accuracy,std_accuracy,runs`, one row per
/// (strategy, t).
pub fn to_csv(results: &ExperimentResult) -> Result<String> {
    if results.strategies.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut out = String::from("strategy,t,mean_accuracy,std_accuracy,runs\n");
    for s in &results.strategies {
        for t in 0..s.curve.len() {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{}\n",
                s.label,
                t + 1,
                s.curve.mean[t],
                s.curve.std[t],
                s.curve.runs()
            ));
        }
    }
    Ok(out)
}

/// Writes [`to_csv`] to `path`. Nothing is created when there are no results.
pub fn emit_csv(results: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_csv(results)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub strategy: String,
    pub t: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub runs: usize,
}

/// Parses text produced by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let bad = |line: usize, msg: &str| Error::Parse {
        path: PathBuf::from("<csv>"),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "strategy,t,mean_accuracy,std_accuracy,runs")) => {}
        _ => return Err(bad(1, "missing or unexpected header")),
    }
    lines
        .map(|(idx, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(idx + 1, "expected 5 fields"));
            }
            Ok(CsvRow {
                strategy: f[0].to_string(),
                t: f[1].parse().map_err(|_| bad(idx + 1, "bad t"))?,
                mean_accuracy: f[2].parse().map_err(|_| bad(idx + 1, "bad mean"))?,
                std_accuracy: f[3].parse().map_err(|_| bad(idx + 1, "bad std"))?,
                runs: f[4].parse().map_err(|_| bad(idx + 1, "bad runs"))?,
            })
        })
        .collect()
}

/// Checkpoints `{5, 10, 20, T}` restricted to `1..=T`.
pub fn default_checkpoints(budget: usize) -> Vec<usize> {
    let mut cps: Vec<usize> = DEFAULT_CHECKPOINTS
        .iter()
        .copied()
        .filter(|&t| t < budget)
        .collect();
    cps.push(budget);
    cps
}

/// Fixed-width table of `mean±std` at the given checkpoints.
pub fn emit_summary(results: &ExperimentResult, checkpoints: &[usize]) -> String {
    let width = results
        .strategies
        .iter()
        .map(|s| s.label.len())
        .max()
        .unwrap_or(0)
        .max("strategy".len());
    let cps: Vec<usize> = checkpoints
        .iter()
        .copied()
        .filter(|&t| t >= 1 && t <= results.budget)
        .collect();
    let mut out = format!("{:<width$}", "strategy");
    for t in &cps {
        out.push_str(&format!("  {:>15}", format!("t={t}")));
    }
    out.push('\n');
    for s in &results.strategies {
        out.push_str(&format!("{:<width$}", s.label));
        for &t in &cps {
            let cell = format!("{:.3}±{:.3}", s.curve.mean[t - 1], s.curve.std[t - 1]);
            out.push_str(&format!("  {cell:>15}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_connected_graph, GraphBuilder};
    use crate::strategies::ConfidenceSchedule;

    fn small_labeled(n: usize, seed: u64) -> LabeledGraph {
        let g = random_connected_graph(n, 0.2, seed);
        let labels = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        LabeledGraph::new(g, labels, 2).unwrap()
    }

    #[test]
    fn graph_source_grammar() {
        assert_eq!(
            "grid:10x12".parse::<GraphSource>().unwrap(),
            GraphSource::Grid { rows: 10, cols: 12 }
        );
        let c: GraphSource = "community:250,350,400:pin=0.05:pout=0.002".parse().unwrap();
        assert_eq!(
            c,
            GraphSource::Community {
                sizes: vec![250, 350, 400],
                p_in: 0.05,
                p_out: 0.002
            }
        );
        assert_eq!(c.to_string().parse::<GraphSource>().unwrap(), c);
        let f: GraphSource = "features:data/x.csv:rbf=0.5:thr=0.1".parse().unwrap();
        assert_eq!(
            f,
            GraphSource::Features {
                path: "data/x.csv".into(),
                similarity: Similarity::Rbf { sigma: 0.5 },
                threshold: 0.1,
                normalize: true
            }
        );
        for bad in [
            "grid:10",
            "mesh:3x3",
            "community:a,b",
            "community:5,5:q=1",
            "file:",
            "features:",
        ] {
            assert!(bad.parse::<GraphSource>().is_err(), "{bad}");
        }
    }

    #[test]
    fn config_validation() {
        let s = [Strategy::new(UtilityKind::Random)];
        assert!(ExperimentConfig::named(&s, 9, 1, 0).validate(10).is_ok());
        assert!(ExperimentConfig::named(&s, 10, 1, 0).validate(10).is_err());
        assert!(ExperimentConfig::named(&s, 3, 0, 0).validate(10).is_err());
        assert!(ExperimentConfig::named(&[], 3, 1, 0).validate(10).is_err());
        let mut cfg = ExperimentConfig::named(&s, 3, 1, 0);
        cfg.delta = 0.0;
        assert!(cfg.validate(10).is_err());
    }

    #[test]
    fn budget_n_minus_one_leaves_one_node() {
        let lg = small_labeled(8, 3);
        let cfg = ExperimentConfig::named(&[Strategy::new(UtilityKind::Tv)], 7, 1, 1);
        let res = run_experiment(&cfg, &lg).unwrap();
        let s = &res.strategies[0];
        assert_eq!(s.curve.len(), 7);
        let acc = *s.curve.mean.last().unwrap();
        assert!(acc == 0.0 || acc == 1.0);
        let mut q = s.runs[0].queries.clone();
        q.sort_unstable();
        q.dedup();
        assert_eq!(q.len(), 7);
    }

    #[test]
    fn equal_seeds_give_identical_curves() {
        let lg = small_labeled(20, 5);
        let cfg = ExperimentConfig::named(&[Strategy::new(UtilityKind::Random)], 6, 3, 42);
        let a = run_experiment(&cfg, &lg).unwrap();
        let b = run_experiment(&cfg, &lg).unwrap();
        assert_eq!(a.strategies[0].curve, b.strategies[0].curve);
    }

    #[test]
    fn strategies_share_first_query() {
        let lg = small_labeled(25, 9);
        let strategies = [
            Strategy::new(UtilityKind::Random),
            Strategy::new(UtilityKind::Tv).with_confidence(ConfidenceSchedule::InvSqrt),
            Strategy::new(UtilityKind::Vm),
        ];
        let res = run_experiment(&ExperimentConfig::named(&strategies, 3, 4, 11), &lg).unwrap();
        for r in 0..4 {
            let first: Vec<usize> = res
                .strategies
                .iter()
                .map(|s| s.runs[r].queries[0])
                .collect();
            assert!(first.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn zero_mean_accuracy_uses_negative_tie() {
        // prior mean is zero everywhere, so every prediction is class 0
        let lg = small_labeled(12, 2);
        let lap = regularized_laplacian(&lg.graph, 0.005).unwrap();
        let model = ClassModel::init(&lap, 2).unwrap();
        let zeros = lg.labels().iter().filter(|&&c| c == 0).count() as f64;
        assert_eq!(accuracy(&model, lg.labels()).unwrap(), zeros / 12.0);
    }

    #[test]
    fn accuracy_all_correct() {
        let mut b = GraphBuilder::new(3);
        b.add_edge(0, 1, 1.0).unwrap();
        b.add_edge(1, 2, 1.0).unwrap();
        let lap = regularized_laplacian(&b.build(), 0.005).unwrap();
        let mut model = ClassModel::init(&lap, 2).unwrap();
        model.observe(0, 1).unwrap();
        assert_eq!(accuracy(&model, &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(
            scoped_accuracy(&model, &[1, 1, 0], AccuracyScope::AllNodes).unwrap(),
            2.0 / 3.0
        );
    }

    #[test]
    fn baseline_examples() {
        assert!((baseline_accuracy(&[1, 1, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(baseline_accuracy(&[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(baseline_accuracy(&[]).is_err());
    }

    #[test]
    fn oracle_counts_queries() {
        let mut o = LabelOracle::new(vec![0, 1]);
        assert_eq!(o.query(1).unwrap(), 1);
        assert_eq!(o.query(1).unwrap(), 1);
        assert_eq!(o.queries(), 2);
        assert!(matches!(o.query(5), Err(Error::MissingLabel(5))));
    }

    #[test]
    fn sample_std() {
        let c = AccuracyCurve::from_runs(vec![vec![0.5, 1.0], vec![1.0, 1.0]]);
        assert_eq!(c.mean, vec![0.75, 1.0]);
        assert!((c.std[0] - (0.125f64).sqrt()).abs() < 1e-15);
        assert_eq!(c.std[1], 0.0);
        assert_eq!(AccuracyCurve::from_runs(vec![vec![0.3]]).std, vec![0.0]);
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let lg = small_labeled(15, 7);
        let cfg = ExperimentConfig::named(&[Strategy::new(UtilityKind::Msd)], 3, 2, 0);
        let res = run_experiment(&cfg, &lg).unwrap();
        let text = to_csv(&res).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        let rows = parse_csv(&text).unwrap();
        for (t, row) in rows.iter().enumerate() {
            assert_eq!(row.t, t + 1);
            assert_eq!(row.runs, 2);
            assert!((row.mean_accuracy - res.strategies[0].curve.mean[t]).abs() <= 5e-7);
        }
    }

    #[test]
    fn empty_results_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let empty = ExperimentResult {
            strategies: Vec::new(),
            num_nodes: 0,
            num_classes: 2,
            budget: 0,
        };
        assert!(matches!(emit_csv(&empty, &path), Err(Error::EmptyResults)));
        assert!(!path.exists());
    }

    #[test]
    fn checkpoints_and_summary() {
        assert_eq!(default_checkpoints(30), vec![5, 10, 20, 30]);
        assert_eq!(default_checkpoints(20), vec![5, 10, 20]);
        assert_eq!(default_checkpoints(3), vec![3]);
        let lg = small_labeled(15, 7);
        let cfg = ExperimentConfig::named(&[Strategy::new(UtilityKind::Vm)], 6, 2, 0);
        let res = run_experiment(&cfg, &lg).unwrap();
        let text = emit_summary(&res, &default_checkpoints(6));
        assert!(text.starts_with("strategy"));
        assert!(text.contains("t=5") && text.contains("t=6"));
        assert_eq!(text.lines().count(), 2);
    }
}
