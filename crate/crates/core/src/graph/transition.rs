//! Category transition matrix.

use ndarray::Array2;

use super::{Graph, UNLABELED};
use crate::error::{Error, Result};

/// Row-stochastic L×L matrix of edge ratios between label categories.
///
/// Entry (i, j) is the ratio of edges between category i and j to the edges
/// incident to category i, counted over a labeled node set. Rows of
/// categories with no incident labeled edges are uniform 1/L.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransitionMatrix {
    t: Array2<f64>,
}

impl TransitionMatrix {
    pub fn num_classes(&self) -> usize {
        self.t.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.t[(from, to)]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.t
    }
}

/// Counts edges with both endpoints in `labeled_set` and row-normalizes.
///
/// An intra-category edge increments its diagonal cell once; a cross-category
/// edge increments both (a, b) and (b, a).
pub fn compute_transition_matrix(g: &Graph, labeled_set: &[usize]) -> Result<TransitionMatrix> {
    let l = g.num_classes();
    let labels = g.labels();
    let mut in_set = vec![false; g.node_count()];
    for &i in labeled_set {
        if i >= g.node_count() {
            return Err(Error::Validation(format!(
                "labeled set index {i} out of range"
            )));
        }
        if labels[i] == UNLABELED {
            return Err(Error::Validation(format!(
                "labeled set contains unlabeled node {i}"
            )));
        }
        in_set[i] = true;
    }

    let mut counts = Array2::<f64>::zeros((l, l));
    for (u, v) in g.adjacency().undirected_edges() {
        if !(in_set[u] && in_set[v]) {
            continue;
        }
        let (a, b) = (labels[u] as usize, labels[v] as usize);
        counts[(a, b)] += 1.0;
        if a != b {
            counts[(b, a)] += 1.0;
        }
    }
    for mut row in counts.rows_mut() {
        let sum: f64 = row.sum();
        if sum > 0.0 {
            row.mapv_inplace(|c| c / sum);
        } else {
            row.fill(1.0 / l as f64);
        }
    }
    Ok(TransitionMatrix { t: counts })
}
