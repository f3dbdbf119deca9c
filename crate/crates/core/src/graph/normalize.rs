//! Symmetric adjacency normalization and edge-dropout sampling.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Graph;

/// Sparse Â = D̃^{-1/2}(A+I)D̃^{-1/2} with D̃ the degree diagonal of A+I.
///
/// Symmetric, nonnegative, strictly positive diagonal; an isolated node gets
/// Â_ii = 1. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    /// Builds Â from an undirected edge list (u < v pairs, deduplicated,
    /// no self-loops). Self-loops are added here as part of A+I.
    fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut degree = vec![1.0f64; n]; // self-loop
        for &(u, v) in edges {
            degree[u] += 1.0;
            degree[v] += 1.0;
        }
        // 1/sqrt(d_u · d_v) in one shot: exact on the diagonal and for
        // perfect-square products.
        let weight = |u: usize, v: usize| 1.0 / (degree[u] * degree[v]).sqrt();

        let mut indptr = vec![0usize; n + 1];
        for &(u, v) in edges {
            indptr[u + 1] += 1;
            indptr[v + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i] + 1; // +1 for the diagonal entry
        }
        let nnz = indptr[n];
        let mut indices = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut cursor = indptr[..n].to_vec();
        for &(u, v) in edges {
            let w = weight(u, v);
            indices[cursor[u]] = v;
            values[cursor[u]] = w;
            cursor[u] += 1;
            indices[cursor[v]] = u;
            values[cursor[v]] = w;
            cursor[v] += 1;
        }
        for i in 0..n {
            indices[cursor[i]] = i;
            values[cursor[i]] = 1.0 / degree[i];
        }
        // Rows are filled off-diagonal first, diagonal last; one sort pass
        // restores the sorted-CSR invariant.
        for i in 0..n {
            let lo = indptr[i];
            let hi = indptr[i + 1];
            let mut row: Vec<(usize, f64)> = indices[lo..hi]
                .iter()
                .copied()
                .zip(values[lo..hi].iter().copied())
                .collect();
            row.sort_unstable_by_key(|&(j, _)| j);
            for (k, (j, w)) in row.into_iter().enumerate() {
                indices[lo + k] = j;
                values[lo + k] = w;
            }
        }
        NormalizedAdjacency {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// The identity matrix; the post-intervention "no neighbors" operator.
    pub fn identity(n: usize) -> Self {
        NormalizedAdjacency {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Â · x for dense x. Rows are computed independently with a fixed
    /// per-row summation order, so the result is bitwise independent of the
    /// number of worker threads.
    pub fn matmul(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(
            x.nrows(),
            self.n,
            "matmul: operand has {} rows, adjacency has {} nodes",
            x.nrows(),
            self.n
        );
        let cols = x.ncols();
        let mut out = Array2::zeros((self.n, cols));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut row)| {
                for k in self.indptr[i]..self.indptr[i + 1] {
                    let j = self.indices[k];
                    let w = self.values[k];
                    for (c, r) in row.iter_mut().enumerate() {
                        *r += w * x[(j, c)];
                    }
                }
            });
        out
    }

    /// Dense copy, for small-graph tests.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] = self.values[k];
            }
        }
        m
    }
}

/// Symmetric normalization with self-loops: Â = D̃^{-1/2}(A+I)D̃^{-1/2}.
pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let edges: Vec<(usize, usize)> = g.adjacency().undirected_edges().collect();
    NormalizedAdjacency::from_undirected_edges(g.node_count(), &edges)
}

/// Drops each undirected edge independently with probability `tau` (both
/// directed entries together) and renormalizes the surviving subgraph exactly
/// as [`normalize_adjacency`]. `tau = 0` reproduces the full normalization
/// bit for bit. Deterministic given the stream state.
pub fn edge_dropout_sample(g: &Graph, tau: f64, rng: &mut ChaCha8Rng) -> NormalizedAdjacency {
    assert!(
        (0.0..1.0).contains(&tau),
        "edge dropout rate must lie in [0, 1), got {tau}"
    );
    let survivors: Vec<(usize, usize)> = g
        .adjacency()
        .undirected_edges()
        .filter(|_| rng.random::<f64>() >= tau)
        .collect();
    NormalizedAdjacency::from_undirected_edges(g.node_count(), &survivors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Splits;
    use crate::rng;
    use ndarray::{array, Array2};

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(
            Array2::zeros((n, 1)),
            edges,
            vec![0; n],
            1,
            Splits::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_node_normalizes_to_one() {
        let a = normalize_adjacency(&graph(1, &[]));
        assert_eq!(a.to_dense(), array![[1.0]]);
    }

    #[test]
    fn two_node_edge_gives_uniform_half() {
        let a = normalize_adjacency(&graph(2, &[(0, 1)]));
        assert_eq!(a.to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn path_graph_matches_hand_evaluation() {
        // Degrees with self-loops: 2, 3, 2.
        let a = normalize_adjacency(&graph(3, &[(0, 1), (1, 2)]));
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 6.0_f64.sqrt()).abs() < 1e-15);
        assert!((a.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_keeps_unit_self_loop() {
        let a = normalize_adjacency(&graph(3, &[(0, 1)]));
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.get(2, 0), 0.0);
    }

    #[test]
    fn matmul_matches_dense_product() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let a = normalize_adjacency(&g);
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.0], [-2.0, 4.0]];
        let got = a.matmul(&x.view());
        let want = a.to_dense().dot(&x);
        for (u, v) in got.iter().zip(want.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_tau_equals_full_normalization_exactly() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]);
        let full = normalize_adjacency(&g);
        let sampled = edge_dropout_sample(&g, 0.0, &mut rng::stream(9));
        assert_eq!(full, sampled);
    }

    #[test]
    fn identical_stream_states_give_identical_samples() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        let a = edge_dropout_sample(&g, 0.15, &mut rng::stream(42));
        let b = edge_dropout_sample(&g, 0.15, &mut rng::stream(42));
        assert_eq!(a, b);
    }

    #[test]
    fn dropout_rate_matches_bernoulli_oracle() {
        // Two-node single-edge graph: the edge survives iff Â_01 > 0.
        let g = graph(2, &[(0, 1)]);
        let mut stream = rng::stream(7);
        let mut survived = 0usize;
        for _ in 0..10_000 {
            let a = edge_dropout_sample(&g, 0.5, &mut stream);
            if a.get(0, 1) > 0.0 {
                survived += 1;
            }
        }
        // Binomial(10000, 0.5): 3 sigma = 150.
        assert!(
            (survived as i64 - 5_000).abs() <= 150,
            "survived {survived} of 10000"
        );
    }

    #[test]
    fn normalization_is_symmetric() {
        let g = graph(6, &[(0, 1), (0, 2), (1, 4), (3, 5), (2, 5)]);
        let a = normalize_adjacency(&g);
        let d = a.to_dense();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(d[(i, j)], d[(j, i)]);
            }
        }
    }
}
