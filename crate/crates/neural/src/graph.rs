//! Nearest-neighbour graphs and edge convolution.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Slope of the leaky ReLU inside the edge MLP.
pub const EDGE_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    pub k: usize,
    /// `neighbors[i*k..(i+1)*k]`, nearest first.
    pub neighbors: Vec<usize>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }
}

/// `k` nearest other points of each point by Euclidean distance; equal
/// distances go to the smaller index.
pub fn knn_graph(positions: &[[f64; 3]], k: usize) -> Result<KnnGraph> {
    let n = positions.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} needs 1 ≤ k < N = {n}")));
    }
    let mut neighbors = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for (i, p) in positions.iter().enumerate() {
        cand.clear();
        cand.extend(positions.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, q)| {
            let d2 = (0..3).map(|c| (p[c] - q[c]) * (p[c] - q[c])).sum::<f64>();
            (d2, j)
        }));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
        }
        cand[..k].sort_unstable_by(cmp);
        neighbors.extend(cand[..k].iter().map(|c| c.1));
    }
    Ok(KnnGraph { k, neighbors })
}

/// Weights of one edge layer: `[x_i ; x_j − x_i]` (2F) → F′.
pub struct EdgeWeights {
    pub w: Var,
    pub b: Var,
}

/// `y_i = max_j LeakyReLU(W·[x_i ; x_j − x_i] + b)` over the neighbours of
/// `i`, elementwise.
pub fn edge_conv(tape: &mut Tape, x: Var, graph: &KnnGraph, weights: &EdgeWeights) -> Var {
    let n = tape.value(x).rows;
    assert_eq!(graph.len(), n, "graph covers {} points, features {}", graph.len(), n);
    let centre: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, graph.k)).collect();
    let xi = tape.select_rows(x, Arc::new(centre));
    let xj = tape.select_rows(x, Arc::new(graph.neighbors.clone()));
    let d = tape.sub(xj, xi);
    let e = tape.concat_cols(&[xi, d]);
    let h = tape.matmul(e, weights.w);
    let h = tape.add_row(h, weights.b);
    let h = tape.leaky_relu(h, EDGE_SLOPE);
    tape.group_max(h, graph.k)
}

/// Positions as an N×3 tensor.
pub fn positions_tensor(positions: &[[f64; 3]]) -> Tensor {
    Tensor::from_vec(positions.len(), 3, positions.iter().flatten().copied().collect())
}
