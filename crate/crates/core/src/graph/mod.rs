//! Weighted undirected graphs, their regularized Laplacians, and the
//! generators and loaders used by the experiments.
//!
//! A [`Graph`] is stored as sorted adjacency lists. Every stored edge has a
//! strictly positive weight, appears in both endpoint lists with the same
//! weight, and never joins a node to itself.

mod features;
mod generators;
mod io;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use features::{build_from_features, normalize_features, Similarity};
pub use generators::{community_graph, grid_graph};
pub use io::{
    load_edge_list, load_features, load_labeled_graph, load_labels, save_edge_list, save_labels,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<(usize, f64)>>,
    node_ids: Option<Vec<String>>,
    num_edges: usize,
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Neighbors of `i` with their weights, sorted by neighbor id.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match self.adjacency[i].binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => self.adjacency[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, w)| w).sum()
    }

    /// Each undirected edge once, as `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, nbrs)| {
            nbrs.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    pub fn node_ids(&self) -> Option<&[String]> {
        self.node_ids.as_deref()
    }

    pub fn with_node_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.num_nodes() {
            return Err(Error::InvalidConfig(format!(
                "{} node ids for {} nodes",
                ids.len(),
                self.num_nodes()
            )));
        }
        self.node_ids = Some(ids);
        Ok(self)
    }

    /// Connected-component id for every node, numbered in order of first appearance.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &(u, _) in &self.adjacency[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    pub fn is_connected(&self) -> bool {
        self.components().0 <= 1
    }

    pub(crate) fn ensure_connected(&self) -> Result<()> {
        let (components, _) = self.components();
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(())
    }

    /// Dense weighted adjacency matrix.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.num_nodes();
        let mut w = DMatrix::zeros(n, n);
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &(j, wij) in nbrs {
                w[(i, j)] = wij;
            }
        }
        w
    }
}

/// Accumulates undirected edges and validates them into a [`Graph`].
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    n: usize,
    edges: BTreeMap<(usize, usize), f64>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        GraphBuilder {
            n,
            edges: BTreeMap::new(),
        }
    }

    /// Adds the undirected edge `{i, j}`. Zero weights are ignored; a repeat of
    /// an existing edge must carry the same weight.
    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) -> Result<&mut Self> {
        if i >= self.n {
            return Err(Error::NodeOutOfRange(i, self.n));
        }
        if j >= self.n {
            return Err(Error::NodeOutOfRange(j, self.n));
        }
        if i == j {
            return Err(Error::InvalidConfig(format!("self-loop at node {i}")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "edge ({i}, {j}) has invalid weight {w}"
            )));
        }
        if w == 0.0 {
            return Ok(self);
        }
        let key = (i.min(j), i.max(j));
        match self.edges.get(&key) {
            Some(&prev) if prev != w => Err(Error::ConflictingWeight {
                i: key.0,
                j: key.1,
                first: prev,
                second: w,
            }),
            Some(_) => Ok(self),
            None => {
                self.edges.insert(key, w);
                Ok(self)
            }
        }
    }

    pub fn build(self) -> Graph {
        let mut adjacency = vec![Vec::new(); self.n];
        for (&(i, j), &w) in &self.edges {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|&(k, _)| k);
        }
        Graph {
            adjacency,
            node_ids: None,
            num_edges: self.edges.len(),
        }
    }
}

/// `L + δI` with `L = D − W`, stored sparsely.
#[derive(Clone, Debug)]
pub struct RegularizedLaplacian {
    delta: f64,
    diagonal: Vec<f64>,
    off_diagonal: Vec<Vec<(usize, f64)>>,
}

impl RegularizedLaplacian {
    pub fn num_nodes(&self) -> usize {
        self.diagonal.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        match self.off_diagonal[i].binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => self.off_diagonal[i][pos].1,
            Err(_) => 0.0,
        }
    }

    /// Nonzero off-diagonal entries of row `i` (each equal to `−w_ij`).
    pub fn row_off_diagonal(&self, i: usize) -> &[(usize, f64)] {
        &self.off_diagonal[i]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.diagonal
            .iter()
            .zip(&self.off_diagonal)
            .map(|(&d, row)| d + row.iter().map(|&(_, v)| v).sum::<f64>())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.diagonal.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.num_nodes();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal[i];
            for &(j, v) in &self.off_diagonal[i] {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Dense block with the given (ordered) row and column node sets.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.get(rows[r], cols[c]))
    }

    /// Applies the multiplicative rescaling `(W, δ) → (cW, cδ)`.
    pub fn scaled(&self, c: f64) -> Self {
        RegularizedLaplacian {
            delta: self.delta * c,
            diagonal: self.diagonal.iter().map(|d| d * c).collect(),
            off_diagonal: self
                .off_diagonal
                .iter()
                .map(|row| row.iter().map(|&(j, v)| (j, v * c)).collect())
                .collect(),
        }
    }
}

/// Builds `D − W + δI` for a connected graph.
pub fn regularized_laplacian(graph: &Graph, delta: f64) -> Result<RegularizedLaplacian> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidDelta(delta));
    }
    graph.ensure_connected()?;
    let n = graph.num_nodes();
    let mut diagonal = Vec::with_capacity(n);
    let mut off_diagonal = Vec::with_capacity(n);
    for i in 0..n {
        diagonal.push(graph.degree(i) + delta);
        off_diagonal.push(graph.neighbors(i).iter().map(|&(j, w)| (j, -w)).collect());
    }
    Ok(RegularizedLaplacian {
        delta,
        diagonal,
        off_diagonal,
    })
}

/// A graph together with one class label per node.
#[derive(Clone, Debug)]
pub struct LabeledGraph {
    pub graph: Graph,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledGraph {
    pub fn new(graph: Graph, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != graph.num_nodes() {
            return Err(Error::InvalidConfig(format!(
                "{} labels for {} nodes",
                labels.len(),
                graph.num_nodes()
            )));
        }
        if num_classes < 2 {
            return Err(Error::TooSmall {
                what: "classes",
                min: 2,
                got: num_classes,
            });
        }
        let mut seen = vec![false; num_classes];
        for &c in &labels {
            if c >= num_classes {
                return Err(Error::InvalidClass {
                    class: c,
                    num_classes,
                });
            }
            seen[c] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidConfig(format!(
                "class {missing} has no nodes"
            )));
        }
        Ok(LabeledGraph {
            graph,
            labels,
            num_classes,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Binary targets in `{−1, +1}`, class 1 mapping to `+1`. Only meaningful for two classes.
    pub fn binary_targets(&self) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&c| if c == 1 { 1.0 } else { -1.0 })
            .collect()
    }
}

/// Random connected graph: a random recursive tree with weights in `[0.1, 1)`
/// plus each remaining pair independently with probability `extra_p`.
pub fn random_connected_graph(n: usize, extra_p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = GraphBuilder::new(n);
    let mut tree = vec![vec![false; n]; n];
    for i in 1..n {
        let j = rng.random_range(0..i);
        tree[i][j] = true;
        tree[j][i] = true;
        let w = rng.random_range(0.1..1.0);
        builder.add_edge(i, j, w).expect("valid tree edge");
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !tree[i][j] && rng.random_bool(extra_p) {
                let w = rng.random_range(0.1..1.0);
                builder.add_edge(i, j, w).expect("valid extra edge");
            }
        }
    }
    builder.build()
}
