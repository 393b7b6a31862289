//! Query utilities and the greedy selection rule.
//!
//! Closed-form utilities (KLG, TV, MSD, VM, Σ-opt, Unc) read only the current
//! mean and the cached column norms of G, so a full scan costs `O(C·|U|)`.
//! FL and KL evaluate hypothetical means for every candidate label and cost
//! `O(C·|U|²)` per scan; the model's retrain counter records those calls.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmrf::{
    argmax_class, normalized_posteriors, posterior_from_mean, sign_label, ClassModel, GmrfModel,
    MulticlassModel, UnlabeledInverse,
};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Candidate scans at least this large are scored in parallel.
const PARALLEL_SCAN_MIN: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UtilityKind {
    Random,
    Unc,
    Vm,
    SigmaOpt,
    Fl,
    Klg,
    Kl,
    Tv,
    Msd,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 9] = [
        UtilityKind::Random,
        UtilityKind::Unc,
        UtilityKind::Vm,
        UtilityKind::SigmaOpt,
        UtilityKind::Fl,
        UtilityKind::Klg,
        UtilityKind::Kl,
        UtilityKind::Tv,
        UtilityKind::Msd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UtilityKind::Random => "random",
            UtilityKind::Unc => "unc",
            UtilityKind::Vm => "vm",
            UtilityKind::SigmaOpt => "sigma-opt",
            UtilityKind::Fl => "fl",
            UtilityKind::Klg => "klg",
            UtilityKind::Kl => "kl",
            UtilityKind::Tv => "tv",
            UtilityKind::Msd => "msd",
        }
    }

    /// Whether scoring needs hypothetical means (model retraining).
    pub fn retrains(self) -> bool {
        matches!(self, UtilityKind::Fl | UtilityKind::Kl)
    }
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UtilityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

/// Confidence weight `a_t` mixing the uniform prior into the label posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConfidenceSchedule {
    None,
    Constant(f64),
    /// `a_t = 1/√t`
    InvSqrt,
}

impl ConfidenceSchedule {
    pub fn weight(&self, t: usize) -> f64 {
        match *self {
            ConfidenceSchedule::None => 0.0,
            ConfidenceSchedule::Constant(a) => a,
            ConfidenceSchedule::InvSqrt => 1.0 / (t.max(1) as f64).sqrt(),
        }
    }
}

impl FromStr for ConfidenceSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ConfidenceSchedule::None),
            "inv_sqrt" => Ok(ConfidenceSchedule::InvSqrt),
            _ => {
                let value = s
                    .strip_prefix("const:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "confidence must be inv_sqrt, const:<a> or none, got `{s}`"
                        ))
                    })?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::InvalidConfidence(value));
                }
                Ok(ConfidenceSchedule::Constant(value))
            }
        }
    }
}

impl fmt::Display for ConfidenceSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfidenceSchedule::None => f.write_str("none"),
            ConfidenceSchedule::Constant(a) => write!(f, "const:{a}"),
            ConfidenceSchedule::InvSqrt => f.write_str("inv_sqrt"),
        }
    }
}

/// Probability `π_t` of replacing the greedy pick by a uniform draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MixingSchedule {
    None,
    /// `π_t = min(1, scale/√t)`
    Hybrid {
        scale: f64,
    },
}

impl MixingSchedule {
    pub fn probability(&self, t: usize) -> f64 {
        match *self {
            MixingSchedule::None => 0.0,
            MixingSchedule::Hybrid { scale } => (scale / (t.max(1) as f64).sqrt()).min(1.0),
        }
    }
}

impl FromStr for MixingSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(MixingSchedule::None);
        }
        match s.parse::<f64>() {
            Ok(scale) if scale >= 0.0 && scale.is_finite() => Ok(MixingSchedule::Hybrid { scale }),
            _ => Err(Error::InvalidConfig(format!(
                "hybrid must be a nonnegative scale or none, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strategy {
    pub kind: UtilityKind,
    pub confidence: ConfidenceSchedule,
    pub mixing: MixingSchedule,
    /// Use the minimum over candidate labels instead of the expectation (FL, KL).
    pub maxmin: bool,
}

impl Strategy {
    pub fn new(kind: UtilityKind) -> Self {
        Strategy {
            kind,
            confidence: ConfidenceSchedule::None,
            mixing: MixingSchedule::None,
            maxmin: false,
        }
    }

    pub fn with_confidence(mut self, confidence: ConfidenceSchedule) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn with_mixing(mut self, mixing: MixingSchedule) -> Self {
        self.mixing = mixing;
        self
    }

    pub fn with_maxmin(mut self, maxmin: bool) -> Self {
        self.maxmin = maxmin;
        self
    }
}

/// Scores of one selection step.
#[derive(Clone, Debug)]
pub struct UtilityReport {
    pub t: usize,
    pub chosen: usize,
    /// `(node, score)` in ascending node order; empty for uniform draws.
    pub scores: Vec<(usize, f64)>,
    /// Hypothetical-mean evaluations performed by the scan.
    pub retrain_calls: usize,
}

fn check_confidence(a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(Error::InvalidConfidence(a))
    }
}

// ---------------------------------------------------------------------------
// closed forms on the shared inverse

fn vm_at(inv: &UnlabeledInverse, a: usize) -> Result<f64> {
    Ok(inv.l2_sq(a) / inv.pivot(a)?)
}

fn sigma_opt_at(inv: &UnlabeledInverse, a: usize) -> Result<f64> {
    let l1 = inv.l1(a);
    Ok(l1 * l1 / inv.pivot(a)?)
}

// ---------------------------------------------------------------------------
// binary

fn binary_weights(mu: f64, conf: f64) -> [(f64, f64); 2] {
    let p = 0.5 * conf + (1.0 - conf) * posterior_from_mean(mu);
    [(1.0, p), (-1.0, 1.0 - p)]
}

/// `E[(y − μ)²] / (2g)` with `y` drawn from the confidence-mixed posterior.
fn klg_value(mu: f64, g: f64, conf: f64) -> f64 {
    let mu2 = mu * mu;
    (conf * (1.0 + mu2) + (1.0 - conf) * (1.0 - mu2)) / (2.0 * g)
}

fn tv_value(mu: f64, g: f64, l1: f64) -> f64 {
    2.0 / g * (1.0 - mu * mu) * l1
}

fn msd_value(mu: f64, g: f64, l2_sq: f64) -> f64 {
    (1.0 - mu * mu) * l2_sq / (g * g)
}

fn unc_value(means: impl IntoIterator<Item = f64>) -> f64 {
    let mut top = [f64::NEG_INFINITY; 2];
    for mu in means {
        if mu > top[0] {
            top = [mu, top[0]];
        } else if mu > top[1] {
            top[1] = mu;
        }
    }
    -(top[0] - top[1]).abs()
}

fn klg_binary(model: &GmrfModel, a: usize, conf: f64) -> Result<f64> {
    Ok(klg_value(model.mean()[a], model.inverse().pivot(a)?, conf))
}

fn tv_binary(model: &GmrfModel, a: usize) -> Result<f64> {
    let inv = model.inverse();
    Ok(tv_value(model.mean()[a], inv.pivot(a)?, inv.l1(a)))
}

fn msd_binary(model: &GmrfModel, a: usize) -> Result<f64> {
    let inv = model.inverse();
    Ok(msd_value(model.mean()[a], inv.pivot(a)?, inv.l2_sq(a)))
}

fn flips_binary(model: &GmrfModel, a: usize, plus: &[f64]) -> f64 {
    model
        .mean()
        .iter()
        .zip(plus)
        .enumerate()
        .filter(|&(j, (m, p))| j != a && sign_label(*m) != sign_label(*p))
        .count() as f64
}

fn kl_change_binary(model: &GmrfModel, a: usize, plus: &[f64]) -> f64 {
    model
        .mean()
        .iter()
        .zip(plus)
        .enumerate()
        .filter(|&(j, _)| j != a)
        .map(|(_, (m, p))| bernoulli_kl(posterior_from_mean(*p), posterior_from_mean(*m)))
        .sum()
}

fn retraining_binary(
    model: &GmrfModel,
    a: usize,
    conf: f64,
    maxmin: bool,
    change: impl Fn(&GmrfModel, usize, &[f64]) -> f64,
) -> Result<f64> {
    let weights = binary_weights(model.mean()[a], conf);
    let mut expected = 0.0;
    let mut worst = f64::INFINITY;
    for (y, w) in weights {
        let plus = model.hypothetical_mean_at(a, y)?;
        let c = change(model, a, &plus);
        expected += w * c;
        worst = worst.min(c);
    }
    Ok(if maxmin { worst } else { expected })
}

/// `KL(Ber(q) ‖ Ber(p))` with both parameters floored into `[ε, 1 − ε]`.
pub fn bernoulli_kl(q: f64, p: f64) -> f64 {
    let q = q.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let cross = -q * p.ln() - (1.0 - q) * (1.0 - p).ln();
    let entropy = -q * q.ln() - (1.0 - q) * (1.0 - q).ln();
    (cross - entropy).max(0.0)
}

fn categorical_kl(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .map(|(&qc, &pc)| {
            let qc = qc.max(PROB_FLOOR);
            let pc = pc.max(PROB_FLOOR);
            qc * (qc / pc).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

fn binary_utility(
    model: &GmrfModel,
    kind: UtilityKind,
    a: usize,
    conf: f64,
    maxmin: bool,
) -> Result<f64> {
    let inv = model.inverse();
    match kind {
        UtilityKind::Random => Ok(0.0),
        UtilityKind::Unc => {
            let mu = model.mean()[a];
            Ok(unc_value([mu, -mu]))
        }
        UtilityKind::Vm => vm_at(inv, a),
        UtilityKind::SigmaOpt => sigma_opt_at(inv, a),
        UtilityKind::Klg => klg_binary(model, a, conf),
        UtilityKind::Tv => {
            Ok(0.5 * conf * sigma_opt_at(inv, a)? + (1.0 - conf) * tv_binary(model, a)?)
        }
        UtilityKind::Msd => Ok(0.5 * conf * vm_at(inv, a)? + (1.0 - conf) * msd_binary(model, a)?),
        UtilityKind::Fl => retraining_binary(model, a, conf, maxmin, flips_binary),
        UtilityKind::Kl => retraining_binary(model, a, conf, maxmin, kl_change_binary),
    }
}

// ---------------------------------------------------------------------------
// multiclass

fn confident_posteriors(mm: &MulticlassModel, a: usize, conf: f64) -> Vec<f64> {
    let c = mm.num_classes() as f64;
    normalized_posteriors(mm.means_at(a))
        .into_iter()
        .map(|p| conf / c + (1.0 - conf) * p)
        .collect()
}

fn uncertainty_mass(mm: &MulticlassModel, a: usize) -> f64 {
    normalized_posteriors(mm.means_at(a))
        .iter()
        .map(|p| 1.0 - p * p)
        .sum()
}

fn tv_multiclass(mm: &MulticlassModel, a: usize) -> Result<f64> {
    let inv = mm.inverse();
    Ok(uncertainty_mass(mm, a) * inv.l1(a) / inv.pivot(a)?)
}

fn msd_multiclass(mm: &MulticlassModel, a: usize) -> Result<f64> {
    let inv = mm.inverse();
    let g = inv.pivot(a)?;
    Ok(uncertainty_mass(mm, a) * inv.l2_sq(a) / (g * g))
}

fn klg_multiclass(mm: &MulticlassModel, a: usize, conf: f64) -> Result<f64> {
    let g = mm.inverse().pivot(a)?;
    let means: Vec<f64> = mm.means_at(a).collect();
    let weights = confident_posteriors(mm, a, conf);
    let mut total = 0.0;
    for (observed, w) in weights.iter().enumerate() {
        let innovation: f64 = means
            .iter()
            .enumerate()
            .map(|(c, mu)| {
                let y = if c == observed { 1.0 } else { -1.0 };
                (y - mu) * (y - mu)
            })
            .sum();
        total += w * innovation / (2.0 * g);
    }
    Ok(total)
}

fn retraining_multiclass(
    mm: &MulticlassModel,
    a: usize,
    conf: f64,
    maxmin: bool,
    kind: UtilityKind,
) -> Result<f64> {
    let weights = confident_posteriors(mm, a, conf);
    let m = mm.unlabeled().len();
    let current: Vec<Vec<f64>> = (0..m).map(|j| mm.means_at(j).collect()).collect();
    let mut expected = 0.0;
    let mut worst = f64::INFINITY;
    for (observed, w) in weights.iter().enumerate() {
        let plus = mm.hypothetical_means_at(a, observed)?;
        let at = |j: usize| plus.iter().map(move |field| field[j]);
        let change: f64 = (0..m)
            .filter(|&j| j != a)
            .map(|j| match kind {
                UtilityKind::Fl => {
                    f64::from(argmax_class(at(j)) != argmax_class(current[j].iter().copied()))
                }
                _ => categorical_kl(
                    &normalized_posteriors(at(j)),
                    &normalized_posteriors(current[j].iter().copied()),
                ),
            })
            .sum();
        expected += w * change;
        worst = worst.min(change);
    }
    Ok(if maxmin { worst } else { expected })
}

fn multiclass_utility(
    mm: &MulticlassModel,
    kind: UtilityKind,
    a: usize,
    conf: f64,
    maxmin: bool,
) -> Result<f64> {
    let inv = mm.inverse();
    match kind {
        UtilityKind::Random => Ok(0.0),
        UtilityKind::Unc => Ok(unc_value(mm.means_at(a))),
        UtilityKind::Vm => vm_at(inv, a),
        UtilityKind::SigmaOpt => sigma_opt_at(inv, a),
        UtilityKind::Klg => klg_multiclass(mm, a, conf),
        UtilityKind::Tv => {
            Ok(0.5 * conf * sigma_opt_at(inv, a)? + (1.0 - conf) * tv_multiclass(mm, a)?)
        }
        UtilityKind::Msd => Ok(0.5 * conf * vm_at(inv, a)? + (1.0 - conf) * msd_multiclass(mm, a)?),
        UtilityKind::Fl | UtilityKind::Kl => retraining_multiclass(mm, a, conf, maxmin, kind),
    }
}

// ---------------------------------------------------------------------------
// public scoring surface

fn utility_at(
    model: &ClassModel,
    kind: UtilityKind,
    a: usize,
    conf: f64,
    maxmin: bool,
) -> Result<f64> {
    match model {
        ClassModel::Binary(m) => binary_utility(m, kind, a, conf, maxmin),
        ClassModel::Multiclass(m) => multiclass_utility(m, kind, a, conf, maxmin),
    }
}

/// Utility of unlabeled node `i` with confidence weight `conf` applied.
///
/// For TV and MSD the adjusted score is the blend
/// `0.5·a·U_{Σ-opt} + (1−a)·U_TV` (respectively `0.5·a·U_VM + (1−a)·U_MSD`);
/// for KLG, FL and KL the expectation over the queried label is taken under
/// `a·uniform + (1−a)·posterior`. Unc, VM and Σ-opt ignore `conf`.
pub fn apply_confidence(
    model: &ClassModel,
    kind: UtilityKind,
    i: usize,
    conf: f64,
    maxmin: bool,
) -> Result<f64> {
    check_confidence(conf)?;
    let a = model.inverse().index_of(i)?;
    utility_at(model, kind, a, conf, maxmin)
}

/// `(1 − μ_i²) / (2 g_ii)`
pub fn score_klg(model: &GmrfModel, i: usize) -> Result<f64> {
    klg_binary(model, model.inverse().index_of(i)?, 0.0)
}

/// `(2 / g_ii)(1 − μ_i²)‖g_i‖₁`
pub fn score_tv(model: &GmrfModel, i: usize) -> Result<f64> {
    tv_binary(model, model.inverse().index_of(i)?)
}

/// `Σ_c [1 − p̄_c²] · ‖g_i‖₁ / g_ii`
pub fn score_tv_mc(model: &MulticlassModel, i: usize) -> Result<f64> {
    tv_multiclass(model, model.inverse().index_of(i)?)
}

/// `(1 − μ_i²)‖g_i‖₂² / g_ii²`
pub fn score_msd(model: &GmrfModel, i: usize) -> Result<f64> {
    msd_binary(model, model.inverse().index_of(i)?)
}

/// `‖g_i‖₂² / g_ii`
pub fn score_vm(model: &GmrfModel, i: usize) -> Result<f64> {
    vm_at(model.inverse(), model.inverse().index_of(i)?)
}

/// `‖g_i‖₁² / g_ii`
pub fn score_sigma_opt(model: &GmrfModel, i: usize) -> Result<f64> {
    sigma_opt_at(model.inverse(), model.inverse().index_of(i)?)
}

/// Posterior-weighted expected number of prediction flips over `U ∖ {i}`.
pub fn score_fl(model: &GmrfModel, i: usize) -> Result<f64> {
    retraining_binary(
        model,
        model.inverse().index_of(i)?,
        0.0,
        false,
        flips_binary,
    )
}

/// Posterior-weighted sum of per-node Bernoulli KL divergences over `U ∖ {i}`.
pub fn score_kl(model: &GmrfModel, i: usize) -> Result<f64> {
    retraining_binary(
        model,
        model.inverse().index_of(i)?,
        0.0,
        false,
        kl_change_binary,
    )
}

/// Negative gap between the two largest class means (binary: `−2|μ_i|`).
pub fn score_unc(model: &ClassModel, i: usize) -> Result<f64> {
    let a = model.inverse().index_of(i)?;
    utility_at(model, UtilityKind::Unc, a, 0.0, false)
}

/// Scores every unlabeled node for `strategy` at iteration `t`.
pub fn scan(strategy: &Strategy, model: &ClassModel, t: usize) -> Result<Vec<(usize, f64)>> {
    let conf = strategy.confidence.weight(t);
    check_confidence(conf)?;
    let nodes = model.unlabeled();
    let score = |a: usize| utility_at(model, strategy.kind, a, conf, strategy.maxmin);
    let values: Vec<f64> = if strategy.kind.retrains() && nodes.len() >= PARALLEL_SCAN_MIN {
        (0..nodes.len())
            .into_par_iter()
            .map(score)
            .collect::<Result<_>>()?
    } else {
        (0..nodes.len()).map(score).collect::<Result<_>>()?
    };
    Ok(nodes.iter().copied().zip(values).collect())
}

/// Highest score, ties (and NaNs) resolved towards the lowest node id.
pub fn argmax_lowest_id(scores: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(node, s) in scores {
        if s.is_nan() {
            continue;
        }
        match best {
            Some((bn, bs)) if s < bs || (s == bs && node > bn) => {}
            _ => best = Some((node, s)),
        }
    }
    best.map(|(n, _)| n)
}

/// Chooses the query for iteration `t` (1-based). The first query, every
/// Random step, and hybrid exploration steps draw uniformly from U.
pub fn select<R: Rng + ?Sized>(
    strategy: &Strategy,
    model: &ClassModel,
    t: usize,
    rng: &mut R,
) -> Result<UtilityReport> {
    let nodes = model.unlabeled();
    if nodes.is_empty() {
        return Err(Error::EmptyUnlabeled);
    }
    let uniform = |rng: &mut R| nodes[rng.random_range(0..nodes.len())];
    let explore = t <= 1 || strategy.kind == UtilityKind::Random || {
        let pi = strategy.mixing.probability(t);
        pi > 0.0 && rng.random::<f64>() < pi
    };
    if explore {
        return Ok(UtilityReport {
            t,
            chosen: uniform(rng),
            scores: Vec::new(),
            retrain_calls: 0,
        });
    }
    let before = model.retrain_counter().get();
    let scores = scan(strategy, model, t)?;
    let retrain_calls = model.retrain_counter().get() - before;
    let chosen = argmax_lowest_id(&scores).ok_or(Error::EmptyUnlabeled)?;
    Ok(UtilityReport {
        t,
        chosen,
        scores,
        retrain_calls,
    })
}
