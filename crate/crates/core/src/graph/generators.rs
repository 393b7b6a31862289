use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphBuilder, LabeledGraph};
use crate::error::{Error, Result};

const COMMUNITY_ATTEMPTS: usize = 100;

/// 4-neighbor lattice with unit weights and two planted class-1 regions.
///
/// Nodes are numbered row-major (`r * cols + c`). Class 1 (label id 1) fills
/// the 3×3 blocks in the upper-left and lower-right corners. Each node on the
/// center row `rows / 2` and center column `cols / 2` that is not already in
/// a block joins class 1 independently with probability 0.5. Everything else
/// is class −1 (label id 0).
pub fn grid_graph(rows: usize, cols: usize, seed: u64) -> Result<LabeledGraph> {
    let smaller = rows.min(cols);
    if smaller < 4 {
        return Err(Error::TooSmall {
            what: "grid rows and columns",
            min: 4,
            got: smaller,
        });
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut builder = GraphBuilder::new(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                builder.add_edge(id(r, c), id(r, c + 1), 1.0)?;
            }
            if r + 1 < rows {
                builder.add_edge(id(r, c), id(r + 1, c), 1.0)?;
            }
        }
    }

    let in_block = |r: usize, c: usize| (r < 3 && c < 3) || (r >= rows - 3 && c >= cols - 3);
    let mut labels = vec![0usize; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            if in_block(r, c) {
                labels[id(r, c)] = 1;
            }
        }
    }

    let mid_row = rows / 2;
    let mid_col = cols / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..rows {
        for c in 0..cols {
            if (r == mid_row || c == mid_col) && !in_block(r, c) && rng.random_bool(0.5) {
                labels[id(r, c)] = 1;
            }
        }
    }

    LabeledGraph::new(builder.build(), labels, 2)
}

/// Planted-partition random graph with unit weights; node labels are block
/// indices. Regenerates (continuing the same random stream) until connected.
pub fn community_graph(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<LabeledGraph> {
    if sizes.len() < 2 {
        return Err(Error::TooSmall {
            what: "communities",
            min: 2,
            got: sizes.len(),
        });
    }
    if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
        return Err(Error::TooSmall {
            what: "nodes per community",
            min: 2,
            got: s,
        });
    }
    let valid = |p: f64| (0.0..=1.0).contains(&p);
    if !valid(p_in) || !valid(p_out) || p_in <= p_out {
        return Err(Error::InvalidProbability(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }

    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..COMMUNITY_ATTEMPTS {
        let mut builder = GraphBuilder::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if labels[i] == labels[j] { p_in } else { p_out };
                if rng.random_bool(p) {
                    builder.add_edge(i, j, 1.0)?;
                }
            }
        }
        let graph = builder.build();
        if graph.is_connected() {
            return LabeledGraph::new(graph, labels, sizes.len());
        }
    }
    Err(Error::RetryBudgetExhausted {
        attempts: COMMUNITY_ATTEMPTS,
    })
}
