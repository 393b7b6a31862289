//! Self-contained property suites, run by the `check` command.
//!
//! Each suite draws its own random instances from a seed and compares the
//! incremental machinery against dense recomputation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gmrf::{conditional_mean_direct, ClassModel, GmrfModel};
use crate::graph::{random_connected_graph, regularized_laplacian, RegularizedLaplacian};
use crate::strategies::{argmax_lowest_id, scan, ConfidenceSchedule, Strategy, UtilityKind};

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteOutcome {
    fn from_error(name: &'static str, worst: f64, tol: f64, instances: usize) -> Self {
        SuiteOutcome {
            name,
            passed: worst < tol,
            detail: format!("{instances} instances, max error {worst:.3e} (tol {tol:e})"),
        }
    }
}

fn random_problem(rng: &mut ChaCha8Rng, max_n: usize) -> Result<RegularizedLaplacian> {
    let n = rng.random_range(3..=max_n);
    let g = random_connected_graph(n, rng.random_range(0.05..0.4), rng.random());
    regularized_laplacian(&g, 0.005)
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Incremental mean and inverse against direct solves at every step.
pub fn incremental_updates(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let lap = random_problem(&mut rng, 40)?;
        let n = lap.num_nodes();
        let dense = lap.to_dense();
        let mut model = GmrfModel::init(&lap)?;
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut labeled = BTreeMap::new();
        for &k in &order[..n - 1] {
            let y = random_sign(&mut rng);
            model.observe(k, y)?;
            labeled.insert(k, y);
            let direct = conditional_mean_direct(&lap, &labeled)?;
            for (a, &node) in model.unlabeled().iter().enumerate() {
                worst = worst.max((model.mean()[a] - direct.get(node).unwrap_or(f64::NAN)).abs());
            }
            let u = model.unlabeled();
            let block = dense.select_rows(u).select_columns(u);
            let inv = block
                .try_inverse()
                .unwrap_or_else(|| DMatrix::from_element(1, 1, f64::NAN));
            worst = worst.max(max_abs_diff(&inv, model.inverse().matrix()));
        }
        if worst.is_nan() {
            worst = f64::INFINITY;
        }
    }
    Ok(SuiteOutcome::from_error(
        "incremental-updates",
        worst,
        1e-8,
        instances,
    ))
}

/// `C_UL C_LL⁻¹ + L_UU⁻¹ L_UL = 0` for a precision `L` and covariance `C = L⁻¹`.
pub fn block_inverse_identity(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(4..=20);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let l = &a * a.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1);
        let c = l.clone().try_inverse().expect("positive definite");
        let split = rng.random_range(1..n);
        let lab: Vec<usize> = (0..split).collect();
        let unl: Vec<usize> = (split..n).collect();
        let c_ul = c.select_rows(&unl).select_columns(&lab);
        let c_ll = c.select_rows(&lab).select_columns(&lab);
        let l_uu = l.select_rows(&unl).select_columns(&unl);
        let l_ul = l.select_rows(&unl).select_columns(&lab);
        let lhs = c_ul * c_ll.try_inverse().expect("pd") + l_uu.try_inverse().expect("pd") * l_ul;
        worst = worst.max(lhs.amax());
    }
    Ok(SuiteOutcome::from_error(
        "block-inverse-identity",
        worst,
        1e-8,
        instances,
    ))
}

/// Closed-form norms of the hypothetical mean shift against full retraining.
pub fn closed_form_vs_retraining(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let lap = random_problem(&mut rng, 30)?;
        let n = lap.num_nodes();
        let mut model = GmrfModel::init(&lap)?;
        for k in 0..rng.random_range(1..n) {
            model.observe(k, random_sign(&mut rng))?;
        }
        for (a, &i) in model.unlabeled().iter().enumerate() {
            let inv = model.inverse();
            let (g, mu) = (inv.diag(a), model.mean()[a]);
            for y in [-1.0, 1.0] {
                let plus = model.hypothetical_mean(i, y)?;
                let diffs: Vec<f64> = plus.iter().zip(model.mean()).map(|(p, m)| p - m).collect();
                let l1: f64 = diffs.iter().map(|d| d.abs()).sum();
                let l2: f64 = diffs.iter().map(|d| d * d).sum();
                worst = worst.max((l1 - (y - mu).abs() * inv.l1(a) / g).abs());
                worst = worst.max((l2 - (y - mu).powi(2) * inv.l2_sq(a) / (g * g)).abs());
            }
        }
    }
    Ok(SuiteOutcome::from_error(
        "closed-form-vs-retraining",
        worst,
        1e-8,
        instances,
    ))
}

fn top_two_gap(scores: &[(usize, f64)]) -> f64 {
    let mut s: Vec<f64> = scores.iter().map(|p| p.1).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if s.len() < 2 {
        f64::INFINITY
    } else {
        (s[0] - s[1]) / s[0].abs().max(1e-300)
    }
}

/// With full confidence the adjusted MSD/TV pick the VM/Σ-opt query.
pub fn non_adaptive_reduction(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = ConfidenceSchedule::Constant(1.0);
    let pairs = [
        (UtilityKind::Msd, UtilityKind::Vm),
        (UtilityKind::Tv, UtilityKind::SigmaOpt),
    ];
    let mut done = 0;
    let mut mismatches = 0;
    let mut attempts = 0;
    while done < instances && attempts < 50 * instances {
        attempts += 1;
        let lap = random_problem(&mut rng, 30)?;
        let mut model = GmrfModel::init(&lap)?;
        for k in 0..rng.random_range(1..lap.num_nodes() - 1) {
            model.observe(k, random_sign(&mut rng))?;
        }
        let model = ClassModel::Binary(model);
        let mut tie_free = true;
        let mut picks = Vec::new();
        for (adjusted, plain) in pairs {
            let a = scan(&Strategy::new(adjusted).with_confidence(full), &model, 2)?;
            let b = scan(&Strategy::new(plain), &model, 2)?;
            tie_free &= top_two_gap(&a) > 1e-9 && top_two_gap(&b) > 1e-9;
            picks.push((argmax_lowest_id(&a), argmax_lowest_id(&b)));
        }
        if !tie_free {
            continue;
        }
        done += 1;
        mismatches += picks.iter().filter(|(a, b)| a != b).count();
    }
    Ok(SuiteOutcome {
        name: "non-adaptive-reduction",
        passed: done == instances && mismatches == 0,
        detail: format!("{done} tie-free instances, {mismatches} argmax mismatches"),
    })
}

/// Mean boundedness, and invariance of the closed-form scores and
/// predictions under negation of every observed label.
pub fn symmetry_and_bounds(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [
        UtilityKind::Tv,
        UtilityKind::Msd,
        UtilityKind::Klg,
        UtilityKind::Vm,
        UtilityKind::SigmaOpt,
    ];
    let mut score_err: f64 = 0.0;
    let mut max_mu: f64 = 0.0;
    let mut unflipped = 0;
    for _ in 0..instances {
        let lap = random_problem(&mut rng, 40)?;
        let mut pos = GmrfModel::init(&lap)?;
        let mut neg = GmrfModel::init(&lap)?;
        for k in 0..rng.random_range(1..lap.num_nodes() - 1) {
            let y = random_sign(&mut rng);
            pos.observe(k, y)?;
            neg.observe(k, -y)?;
            max_mu = max_mu.max(pos.max_abs_mean()).max(neg.max_abs_mean());
        }
        for ((_, p), (&m, (_, q))) in pos
            .predict()
            .iter()
            .zip(pos.mean().iter().zip(neg.predict()))
        {
            if m != 0.0 && *p != -q {
                unflipped += 1;
            }
        }
        let (pos, neg) = (ClassModel::Binary(pos), ClassModel::Binary(neg));
        for kind in kinds {
            let s = Strategy::new(kind);
            for ((_, a), (_, b)) in scan(&s, &pos, 2)?.into_iter().zip(scan(&s, &neg, 2)?) {
                score_err = score_err.max((a - b).abs());
            }
        }
    }
    Ok(SuiteOutcome {
        name: "symmetry-and-bounds",
        passed: max_mu <= 1.0 + 1e-9 && score_err < 1e-12 && unflipped == 0,
        detail: format!(
            "{instances} instances, max |mu| {max_mu:.12}, score drift {score_err:.3e}, {unflipped} unflipped predictions"
        ),
    })
}

/// Every suite with default instance counts.
pub fn run_all(seed: u64) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        incremental_updates(seed, 30)?,
        block_inverse_identity(seed.wrapping_add(1), 20)?,
        closed_form_vs_retraining(seed.wrapping_add(2), 10)?,
        non_adaptive_reduction(seed.wrapping_add(3), 20)?,
        symmetry_and_bounds(seed.wrapping_add(4), 20)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for outcome in run_all(2024).unwrap() {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }
}
