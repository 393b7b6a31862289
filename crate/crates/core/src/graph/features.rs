use nalgebra::DMatrix;

use super::{Graph, GraphBuilder};
use crate::error::{Error, Result};

/// Pairwise similarity used to turn feature vectors into edge weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Similarity {
    /// `exp(−‖x_i − x_j‖² / σ²)`
    Rbf { sigma: f64 },
    /// Normalized inner product `⟨x_i, x_j⟩ / (‖x_i‖ ‖x_j‖)` of the (already
    /// column-normalized) feature vectors. Zero vectors get weight 0.
    Pearson,
}

fn check_finite(features: &DMatrix<f64>) -> Result<()> {
    for c in 0..features.ncols() {
        for r in 0..features.nrows() {
            if !features[(r, c)].is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Maps every column affinely onto `[−1, 1]`; constant columns become zero.
pub fn normalize_features(features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if features.nrows() == 0 {
        return Err(Error::TooSmall {
            what: "feature rows",
            min: 1,
            got: 0,
        });
    }
    check_finite(features)?;
    let mut out = features.clone();
    for mut col in out.column_iter_mut() {
        let lo = col.min();
        let hi = col.max();
        let range = hi - lo;
        if range == 0.0 {
            col.fill(0.0);
            continue;
        }
        for v in col.iter_mut() {
            *v = if *v == hi {
                1.0
            } else {
                2.0 * (*v - lo) / range - 1.0
            };
        }
    }
    Ok(out)
}

/// Similarity graph over the rows of `features`. Weights below `threshold`
/// and all nonpositive weights are dropped.
pub fn build_from_features(
    features: &DMatrix<f64>,
    similarity: Similarity,
    threshold: f64,
) -> Result<Graph> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(Error::TooSmall {
            what: "feature rows",
            min: 2,
            got: n,
        });
    }
    if d < 1 {
        return Err(Error::TooSmall {
            what: "feature columns",
            min: 1,
            got: d,
        });
    }
    if let Similarity::Rbf { sigma } = similarity {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidBandwidth(sigma));
        }
    }
    check_finite(features)?;

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| features.row(i).iter().copied().collect())
        .collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let mut builder = GraphBuilder::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = match similarity {
                Similarity::Rbf { sigma } => {
                    let dist2: f64 = rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (-dist2 / (sigma * sigma)).exp()
                }
                Similarity::Pearson => {
                    if norms[i] == 0.0 || norms[j] == 0.0 {
                        0.0
                    } else {
                        let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                        dot / (norms[i] * norms[j])
                    }
                }
            };
            if w > 0.0 && w >= threshold {
                builder.add_edge(i, j, w)?;
            }
        }
    }
    let graph = builder.build();
    graph.ensure_connected()?;
    Ok(graph)
}
