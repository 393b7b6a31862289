//! Gaussian-Markov-random-field relaxation of the label field.
//!
//! The binary model keeps the conditional mean of the unlabeled nodes and the
//! inverse of `L + δI` restricted to them. Observing a label updates both in
//! `O(|U|²)` with the dongle-node mean update and a rank-one Schur downdate,
//! so the system is never refactored after [`GmrfModel::init`].

mod inverse;
mod multiclass;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::RegularizedLaplacian;

pub use inverse::{UnlabeledInverse, MIN_PIVOT};
pub(crate) use multiclass::{argmax_class, normalized_posteriors};
pub use multiclass::{ClassModel, MulticlassModel};

/// Default regularizer.
pub const DEFAULT_DELTA: f64 = 0.005;

/// Counts hypothetical (retraining) mean evaluations. Shared-reference safe so
/// that read-only candidate scans can run in parallel.
#[derive(Debug, Default)]
pub struct RetrainCounter(AtomicUsize);

impl RetrainCounter {
    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }

    pub(crate) fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

impl Clone for RetrainCounter {
    fn clone(&self) -> Self {
        RetrainCounter(AtomicUsize::new(self.get()))
    }
}

/// Values indexed by an ordered list of node ids.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeValues {
    pub nodes: Vec<usize>,
    pub values: DVector<f64>,
}

impl NodeValues {
    pub fn get(&self, node: usize) -> Option<f64> {
        self.nodes
            .binary_search(&node)
            .ok()
            .map(|pos| self.values[pos])
    }
}

/// `p(y_i = +1)` approximated from the conditional mean.
pub fn posterior_from_mean(mu: f64) -> f64 {
    ((mu + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Hard decision: `+1` iff `μ > 0`.
pub fn sign_label(mu: f64) -> i8 {
    if mu > 0.0 {
        1
    } else {
        -1
    }
}

fn check_observation(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidObservation(y))
    }
}

/// Conditional mean over the unlabeled nodes by a direct solve of
/// `(L + δI)_UU m = −(L + δI)_UL y_L`.
pub fn conditional_mean_direct(
    lap: &RegularizedLaplacian,
    labeled: &BTreeMap<usize, f64>,
) -> Result<NodeValues> {
    let n = lap.num_nodes();
    if labeled.is_empty() {
        return Err(Error::NoLabels);
    }
    if let Some(&bad) = labeled.keys().find(|&&k| k >= n) {
        return Err(Error::NodeOutOfRange(bad, n));
    }
    let unlabeled: Vec<usize> = (0..n).filter(|i| !labeled.contains_key(i)).collect();
    if unlabeled.is_empty() {
        return Err(Error::EmptyUnlabeled);
    }
    let lab_nodes: Vec<usize> = labeled.keys().copied().collect();
    let y = DVector::from_iterator(lab_nodes.len(), labeled.values().copied());
    let l_uu = lap.block(&unlabeled, &unlabeled);
    let l_ul = lap.block(&unlabeled, &lab_nodes);
    let rhs = -(l_ul * y);
    let chol = l_uu.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(NodeValues {
        nodes: unlabeled,
        values: chol.solve(&rhs),
    })
}

/// Binary GMRF model over one `{−1, +1}` label field.
#[derive(Clone, Debug)]
pub struct GmrfModel {
    inverse: UnlabeledInverse,
    mean: Vec<f64>,
    labeled: BTreeMap<usize, f64>,
    delta: f64,
    retrain: RetrainCounter,
}

impl GmrfModel {
    /// Nothing labeled, zero mean, `G = (L + δI)⁻¹`.
    pub fn init(lap: &RegularizedLaplacian) -> Result<Self> {
        Ok(Self::from_inverse(
            UnlabeledInverse::from_laplacian(lap)?,
            lap.delta(),
        ))
    }

    /// Starts from a precomputed full inverse (nothing labeled).
    pub fn from_inverse(inverse: UnlabeledInverse, delta: f64) -> Self {
        let m = inverse.len();
        GmrfModel {
            inverse,
            mean: vec![0.0; m],
            labeled: BTreeMap::new(),
            delta,
            retrain: RetrainCounter::default(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.inverse.num_nodes()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn inverse(&self) -> &UnlabeledInverse {
        &self.inverse
    }

    pub fn unlabeled(&self) -> &[usize] {
        self.inverse.nodes()
    }

    pub fn labeled(&self) -> &BTreeMap<usize, f64> {
        &self.labeled
    }

    /// Conditional mean, aligned with [`Self::unlabeled`].
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn mean_of(&self, node: usize) -> Result<f64> {
        Ok(self.mean[self.inverse.index_of(node)?])
    }

    pub fn mean_values(&self) -> NodeValues {
        NodeValues {
            nodes: self.unlabeled().to_vec(),
            values: DVector::from_column_slice(&self.mean),
        }
    }

    pub fn retrain_counter(&self) -> &RetrainCounter {
        &self.retrain
    }

    /// Reveals `y` at node `k`: dongle-node mean update followed by the Schur
    /// shrink of G.
    pub fn observe(&mut self, k: usize, y: f64) -> Result<()> {
        check_observation(y)?;
        let a = self.inverse.index_of(k)?;
        let gkk = self.inverse.pivot(a)?;
        let gain = (y - self.mean[a]) / gkk;
        for (m, g) in self.mean.iter_mut().zip(self.inverse.column(a)) {
            *m += gain * g;
        }
        self.inverse.remove(a)?;
        self.mean.remove(a);
        self.labeled.insert(k, y);
        Ok(())
    }

    /// Mean over the current unlabeled set (entry `k` included) if `k` were
    /// observed as `y`. Does not mutate the model.
    pub fn hypothetical_mean(&self, k: usize, y: f64) -> Result<Vec<f64>> {
        check_observation(y)?;
        let a = self.inverse.index_of(k)?;
        self.hypothetical_mean_at(a, y)
    }

    pub(crate) fn hypothetical_mean_at(&self, a: usize, y: f64) -> Result<Vec<f64>> {
        let gkk = self.inverse.pivot(a)?;
        self.retrain.bump();
        Ok(shifted_mean(
            &self.mean,
            self.inverse.column(a),
            (y - self.mean[a]) / gkk,
        ))
    }

    pub fn posterior_plus(&self, i: usize) -> Result<f64> {
        Ok(posterior_from_mean(self.mean_of(i)?))
    }

    /// Hard labels for every unlabeled node, in ascending node order.
    pub fn predict(&self) -> Vec<(usize, i8)> {
        self.unlabeled()
            .iter()
            .zip(&self.mean)
            .map(|(&node, &mu)| (node, sign_label(mu)))
            .collect()
    }

    pub fn max_abs_mean(&self) -> f64 {
        self.mean.iter().fold(0.0, |acc, m| acc.max(m.abs()))
    }
}

/// `mean + gain · column`
pub(crate) fn shifted_mean(mean: &[f64], column: &[f64], gain: f64) -> Vec<f64> {
    mean.iter().zip(column).map(|(m, g)| m + gain * g).collect()
}
