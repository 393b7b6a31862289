use std::collections::BTreeMap;

use super::{posterior_from_mean, shifted_mean, GmrfModel, RetrainCounter, UnlabeledInverse};
use crate::error::{Error, Result};
use crate::graph::RegularizedLaplacian;

/// One-vs-rest GMRF over `C ≥ 2` classes.
///
/// G depends only on the unlabeled set, so the per-class binary fields share
/// one inverse and differ only in their means.
#[derive(Clone, Debug)]
pub struct MulticlassModel {
    inverse: UnlabeledInverse,
    means: Vec<Vec<f64>>,
    labeled: BTreeMap<usize, usize>,
    delta: f64,
    retrain: RetrainCounter,
}

/// Index of the largest entry; ties resolve to the lowest class id.
pub(crate) fn argmax_class(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (c, v);
        }
    }
    best.0
}

/// Normalized shifted means `m_c / Σ m_c` with `m_c = clamp((μ_c + 1)/2)`.
pub(crate) fn normalized_posteriors(means: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let shifted: Vec<f64> = means.into_iter().map(posterior_from_mean).collect();
    let total: f64 = shifted.iter().sum();
    if total > 0.0 {
        shifted.iter().map(|m| m / total).collect()
    } else {
        vec![1.0 / shifted.len() as f64; shifted.len()]
    }
}

impl MulticlassModel {
    pub fn init(lap: &RegularizedLaplacian, num_classes: usize) -> Result<Self> {
        Self::from_inverse(
            UnlabeledInverse::from_laplacian(lap)?,
            lap.delta(),
            num_classes,
        )
    }

    pub fn from_inverse(inverse: UnlabeledInverse, delta: f64, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::TooSmall {
                what: "classes",
                min: 2,
                got: num_classes,
            });
        }
        let m = inverse.len();
        Ok(MulticlassModel {
            inverse,
            means: vec![vec![0.0; m]; num_classes],
            labeled: BTreeMap::new(),
            delta,
            retrain: RetrainCounter::default(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
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

    pub fn labeled(&self) -> &BTreeMap<usize, usize> {
        &self.labeled
    }

    /// Mean of the class-`c` field, aligned with [`Self::unlabeled`].
    pub fn class_mean(&self, c: usize) -> &[f64] {
        &self.means[c]
    }

    pub(crate) fn means_at(&self, a: usize) -> impl Iterator<Item = f64> + '_ {
        self.means.iter().map(move |m| m[a])
    }

    pub fn retrain_counter(&self) -> &RetrainCounter {
        &self.retrain
    }

    fn check_class(&self, c: usize) -> Result<()> {
        if c >= self.num_classes() {
            return Err(Error::InvalidClass {
                class: c,
                num_classes: self.num_classes(),
            });
        }
        Ok(())
    }

    /// Observes class `c` at node `k`: `+1` in field `c`, `−1` in every other.
    pub fn observe(&mut self, k: usize, c: usize) -> Result<()> {
        self.check_class(c)?;
        let a = self.inverse.index_of(k)?;
        let gkk = self.inverse.pivot(a)?;
        let column = self.inverse.column(a);
        for (class, mean) in self.means.iter_mut().enumerate() {
            let y = if class == c { 1.0 } else { -1.0 };
            let gain = (y - mean[a]) / gkk;
            for (m, g) in mean.iter_mut().zip(column) {
                *m += gain * g;
            }
        }
        self.inverse.remove(a)?;
        for mean in &mut self.means {
            mean.remove(a);
        }
        self.labeled.insert(k, c);
        Ok(())
    }

    /// Per-class means if node `k` were observed as class `c`.
    pub fn hypothetical_means(&self, k: usize, c: usize) -> Result<Vec<Vec<f64>>> {
        self.check_class(c)?;
        let a = self.inverse.index_of(k)?;
        self.hypothetical_means_at(a, c)
    }

    pub(crate) fn hypothetical_means_at(&self, a: usize, c: usize) -> Result<Vec<Vec<f64>>> {
        let gkk = self.inverse.pivot(a)?;
        self.retrain.bump();
        let column = self.inverse.column(a);
        Ok(self
            .means
            .iter()
            .enumerate()
            .map(|(class, mean)| {
                let y = if class == c { 1.0 } else { -1.0 };
                shifted_mean(mean, column, (y - mean[a]) / gkk)
            })
            .collect())
    }

    /// Most likely class for every unlabeled node, in ascending node order.
    pub fn predict(&self) -> Vec<(usize, usize)> {
        self.unlabeled()
            .iter()
            .enumerate()
            .map(|(a, &node)| (node, argmax_class(self.means_at(a))))
            .collect()
    }

    /// Class distribution at unlabeled node `i` from normalized shifted means.
    pub fn posteriors(&self, i: usize) -> Result<Vec<f64>> {
        let a = self.inverse.index_of(i)?;
        Ok(normalized_posteriors(self.means_at(a)))
    }

    pub fn max_abs_mean(&self) -> f64 {
        self.means
            .iter()
            .flatten()
            .fold(0.0, |acc, m| acc.max(m.abs()))
    }
}

/// Binary or one-vs-rest model chosen by the number of classes.
#[derive(Clone, Debug)]
pub enum ClassModel {
    /// Two classes; class 1 is the `+1` field.
    Binary(GmrfModel),
    Multiclass(MulticlassModel),
}

impl ClassModel {
    pub fn init(lap: &RegularizedLaplacian, num_classes: usize) -> Result<Self> {
        Self::from_inverse(
            UnlabeledInverse::from_laplacian(lap)?,
            lap.delta(),
            num_classes,
        )
    }

    pub fn from_inverse(inverse: UnlabeledInverse, delta: f64, num_classes: usize) -> Result<Self> {
        if num_classes == 2 {
            Ok(ClassModel::Binary(GmrfModel::from_inverse(inverse, delta)))
        } else {
            Ok(ClassModel::Multiclass(MulticlassModel::from_inverse(
                inverse,
                delta,
                num_classes,
            )?))
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ClassModel::Binary(_) => 2,
            ClassModel::Multiclass(m) => m.num_classes(),
        }
    }

    pub fn inverse(&self) -> &UnlabeledInverse {
        match self {
            ClassModel::Binary(m) => m.inverse(),
            ClassModel::Multiclass(m) => m.inverse(),
        }
    }

    pub fn unlabeled(&self) -> &[usize] {
        self.inverse().nodes()
    }

    pub fn num_labeled(&self) -> usize {
        match self {
            ClassModel::Binary(m) => m.labeled().len(),
            ClassModel::Multiclass(m) => m.labeled().len(),
        }
    }

    pub fn observe(&mut self, k: usize, class: usize) -> Result<()> {
        match self {
            ClassModel::Binary(m) => match class {
                0 => m.observe(k, -1.0),
                1 => m.observe(k, 1.0),
                _ => Err(Error::InvalidClass {
                    class,
                    num_classes: 2,
                }),
            },
            ClassModel::Multiclass(m) => m.observe(k, class),
        }
    }

    /// Predicted class id for every unlabeled node, in ascending node order.
    pub fn predict_classes(&self) -> Vec<(usize, usize)> {
        match self {
            ClassModel::Binary(m) => m
                .predict()
                .into_iter()
                .map(|(node, y)| (node, usize::from(y > 0)))
                .collect(),
            ClassModel::Multiclass(m) => m.predict(),
        }
    }

    pub fn retrain_counter(&self) -> &RetrainCounter {
        match self {
            ClassModel::Binary(m) => m.retrain_counter(),
            ClassModel::Multiclass(m) => m.retrain_counter(),
        }
    }

    pub fn max_abs_mean(&self) -> f64 {
        match self {
            ClassModel::Binary(m) => m.max_abs_mean(),
            ClassModel::Multiclass(m) => m.max_abs_mean(),
        }
    }
}
