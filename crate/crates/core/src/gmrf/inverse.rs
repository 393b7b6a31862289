use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::RegularizedLaplacian;

/// Pivots below this are treated as a near-singular restriction.
pub const MIN_PIVOT: f64 = 1e-12;

/// Inverse of the regularized Laplacian restricted to the unlabeled nodes,
/// together with the index bookkeeping and cached column norms.
///
/// Unlabeled nodes are kept in ascending id order, so index `a` of the
/// matrix always refers to the `a`-th smallest unlabeled node id.
#[derive(Clone, Debug)]
pub struct UnlabeledInverse {
    nodes: Vec<usize>,
    position: Vec<Option<usize>>,
    g: DMatrix<f64>,
    l1: Vec<f64>,
    l2_sq: Vec<f64>,
}

impl UnlabeledInverse {
    /// Full inverse of `L + δI` via Cholesky.
    pub fn from_laplacian(lap: &RegularizedLaplacian) -> Result<Self> {
        let n = lap.num_nodes();
        let chol = lap
            .to_dense()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        let mut g = chol.inverse();
        // the triangular solves leave O(eps) asymmetry; store the symmetric part
        for c in 0..n {
            for r in (c + 1)..n {
                let avg = 0.5 * (g[(r, c)] + g[(c, r)]);
                g[(r, c)] = avg;
                g[(c, r)] = avg;
            }
        }
        let mut inv = UnlabeledInverse {
            nodes: (0..n).collect(),
            position: (0..n).map(Some).collect(),
            g,
            l1: Vec::new(),
            l2_sq: Vec::new(),
        };
        inv.refresh_norms();
        Ok(inv)
    }

    fn refresh_norms(&mut self) {
        let m = self.len();
        let data = self.g.as_slice();
        self.l1 = (0..m)
            .map(|a| data[a * m..(a + 1) * m].iter().map(|v| v.abs()).sum())
            .collect();
        self.l2_sq = (0..m)
            .map(|a| data[a * m..(a + 1) * m].iter().map(|v| v * v).sum())
            .collect();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.position.len()
    }

    /// Unlabeled node ids in ascending order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn index_of(&self, node: usize) -> Result<usize> {
        self.position
            .get(node)
            .copied()
            .flatten()
            .ok_or(Error::NotUnlabeled(node))
    }

    pub fn contains(&self, node: usize) -> bool {
        matches!(self.position.get(node), Some(Some(_)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Column `a` of G (equal to row `a` by symmetry).
    pub fn column(&self, a: usize) -> &[f64] {
        let m = self.len();
        &self.g.as_slice()[a * m..(a + 1) * m]
    }

    pub fn diag(&self, a: usize) -> f64 {
        self.g[(a, a)]
    }

    /// `‖g_a‖₁`
    pub fn l1(&self, a: usize) -> f64 {
        self.l1[a]
    }

    /// `‖g_a‖₂²`
    pub fn l2_sq(&self, a: usize) -> f64 {
        self.l2_sq[a]
    }

    /// Diagonal entry at index `a`, rejecting degenerate pivots.
    pub(crate) fn pivot(&self, a: usize) -> Result<f64> {
        let gkk = self.diag(a);
        if !(gkk >= MIN_PIVOT) {
            return Err(Error::DegeneratePivot {
                node: self.nodes[a],
                value: gkk,
            });
        }
        Ok(gkk)
    }

    /// Removes index `a` from the unlabeled set: `G ← G − g_a g_aᵀ / g_aa`,
    /// then drops row and column `a`. Column norms are recomputed in the
    /// same pass.
    pub(crate) fn remove(&mut self, a: usize) -> Result<()> {
        let gkk = self.pivot(a)?;
        let m = self.len();
        let old = self.g.as_slice();
        let col_k: Vec<f64> = old[a * m..(a + 1) * m].to_vec();
        let inv_gkk = 1.0 / gkk;
        let new_m = m - 1;
        let mut data = Vec::with_capacity(new_m * new_m);
        let mut l1 = Vec::with_capacity(new_m);
        let mut l2_sq = Vec::with_capacity(new_m);
        for c in (0..m).filter(|&c| c != a) {
            let src = &old[c * m..(c + 1) * m];
            let ck = col_k[c];
            let (mut s1, mut s2) = (0.0, 0.0);
            for r in (0..m).filter(|&r| r != a) {
                let v = src[r] - col_k[r] * ck * inv_gkk;
                s1 += v.abs();
                s2 += v * v;
                data.push(v);
            }
            l1.push(s1);
            l2_sq.push(s2);
        }
        self.g = DMatrix::from_vec(new_m, new_m, data);
        self.l1 = l1;
        self.l2_sq = l2_sq;

        let node = self.nodes.remove(a);
        self.position[node] = None;
        for (idx, &n) in self.nodes.iter().enumerate().skip(a) {
            self.position[n] = Some(idx);
        }
        Ok(())
    }
}
