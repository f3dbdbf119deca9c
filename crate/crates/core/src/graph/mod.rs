//! Graph container and structure-level operations.
//!
//! A [`Graph`] is immutable after construction: node features, an undirected
//! adjacency in compressed sparse row form, integer labels with `-1` marking
//! unlabeled nodes, and three disjoint train/valid/test index sets. All
//! sampling operations take explicit streams so callers own determinism.

mod io;
mod normalize;
mod perturb;
mod transition;

pub use io::{load_graph, save_dataset};
pub use normalize::{edge_dropout_sample, normalize_adjacency, NormalizedAdjacency};
pub use perturb::{inject_cross_category_edges, EndpointRule};
pub use transition::{compute_transition_matrix, TransitionMatrix};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value for unlabeled nodes.
pub const UNLABELED: i64 = -1;

/// Sorted CSR structure of an undirected, unweighted adjacency.
///
/// Each edge is stored in both directions; no self-loops, no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    /// Builds the symmetric adjacency from an undirected edge list.
    ///
    /// Self-loops and duplicate edges are dropped; the second return value
    /// counts what was removed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<(Self, SanitizeStats)> {
        let mut stats = SanitizeStats::default();
        let mut directed = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside [0, {n})"
                )));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            directed.push((u, v));
            directed.push((v, u));
        }
        directed.sort_unstable();
        let before = directed.len();
        directed.dedup();
        // Both directions of a duplicate input edge disappear together.
        stats.duplicates_dropped = (before - directed.len()) / 2;

        let mut indptr = vec![0usize; n + 1];
        for &(u, _) in &directed {
            indptr[u + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let indices = directed.into_iter().map(|(_, v)| v).collect();
        Ok((Adjacency { n, indptr, indices }, stats))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of directed entries (twice the undirected edge count).
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.indices.len() / 2
    }

    /// Neighbor ids of `u`, sorted.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.indices[self.indptr[u]..self.indptr[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.indptr[u + 1] - self.indptr[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as (u, v) pairs with u < v, in sorted order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }
}

/// Counts of entries removed while sanitizing an edge list.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SanitizeStats {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl SanitizeStats {
    pub fn total(&self) -> usize {
        self.self_loops_dropped + self.duplicates_dropped
    }
}

/// Disjoint train/valid/test node index sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    fn validate(&self, n: usize, labels: &[i64]) -> Result<()> {
        let mut seen = vec![0u8; n];
        for (name, set, needs_label) in [
            ("train", &self.train, true),
            ("valid", &self.valid, true),
            ("test", &self.test, false),
        ] {
            for &i in set {
                if i >= n {
                    return Err(Error::Validation(format!(
                        "{name} split index {i} out of range for {n} nodes"
                    )));
                }
                if seen[i] != 0 {
                    return Err(Error::Validation(format!(
                        "node {i} appears in more than one split"
                    )));
                }
                seen[i] = 1;
                if needs_label && labels[i] == UNLABELED {
                    return Err(Error::Validation(format!(
                        "{name} split contains unlabeled node {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Immutable node-classification graph.
#[derive(Debug, Clone)]
pub struct Graph {
    features: Array2<f64>,
    adjacency: Adjacency,
    labels: Vec<i64>,
    num_classes: usize,
    splits: Splits,
}

impl Graph {
    /// Constructs a graph and validates every invariant. Self-loops and
    /// duplicate edges are dropped silently; use [`Graph::new_with_stats`]
    /// when the caller wants the counts.
    pub fn new(
        features: Array2<f64>,
        edges: &[(usize, usize)],
        labels: Vec<i64>,
        num_classes: usize,
        splits: Splits,
    ) -> Result<Self> {
        Self::new_with_stats(features, edges, labels, num_classes, splits).map(|(g, _)| g)
    }

    pub fn new_with_stats(
        features: Array2<f64>,
        edges: &[(usize, usize)],
        labels: Vec<i64>,
        num_classes: usize,
        splits: Splits,
    ) -> Result<(Self, SanitizeStats)> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::Validation(format!(
                "feature matrix has {n} rows but label vector has {} entries",
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::Validation("num_classes must be positive".into()));
        }
        for (i, &l) in labels.iter().enumerate() {
            if l != UNLABELED && !(0..num_classes as i64).contains(&l) {
                return Err(Error::Validation(format!(
                    "label {l} of node {i} outside [-1, {num_classes})"
                )));
            }
        }
        if !features.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("features contain non-finite values".into()));
        }
        splits.validate(n, &labels)?;
        let (adjacency, stats) = Adjacency::from_edges(n, edges)?;
        Ok((
            Graph {
                features,
                adjacency,
                labels,
                num_classes,
                splits,
            },
            stats,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.n
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn label(&self, node: usize) -> i64 {
        self.labels[node]
    }

    /// A copy of this graph with the feature matrix replaced. Adjacency,
    /// labels, and splits are shared unchanged; row count must match.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Graph> {
        if features.nrows() != self.node_count() {
            return Err(Error::Dimension(format!(
                "replacement features have {} rows, graph has {} nodes",
                features.nrows(),
                self.node_count()
            )));
        }
        if !features.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("features contain non-finite values".into()));
        }
        Ok(Graph {
            features,
            adjacency: self.adjacency.clone(),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            splits: self.splits.clone(),
        })
    }

    /// A copy with a different edge set (used by edge injection).
    pub(crate) fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Graph> {
        let (adjacency, _) = Adjacency::from_edges(self.node_count(), edges)?;
        Ok(Graph {
            features: self.features.clone(),
            adjacency,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            splits: self.splits.clone(),
        })
    }
}

/// Classification accuracy of `pred` against `labels` over `set`.
///
/// Nodes without a label are skipped; returns 0 for an empty set.
pub fn accuracy(pred: &[usize], labels: &[i64], set: &[usize]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for &i in set {
        if labels[i] == UNLABELED {
            continue;
        }
        total += 1;
        if pred[i] as i64 == labels[i] {
            hit += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn feat(n: usize) -> Array2<f64> {
        Array2::zeros((n, 2))
    }

    #[test]
    fn builds_symmetric_adjacency_from_edge_list() {
        let g = Graph::new(
            feat(3),
            &[(0, 1), (1, 2)],
            vec![0, 1, 0],
            2,
            Splits::default(),
        )
        .unwrap();
        assert_eq!(g.adjacency().nnz(), 4);
        assert!(g.adjacency().has_edge(0, 1));
        assert!(g.adjacency().has_edge(1, 0));
        assert!(g.adjacency().has_edge(2, 1));
        assert!(!g.adjacency().has_edge(0, 2));
        assert_eq!(g.adjacency().edge_count(), 2);
    }

    #[test]
    fn drops_self_loops_and_duplicates_with_counts() {
        let (g, stats) = Graph::new_with_stats(
            feat(3),
            &[(0, 0), (0, 1), (1, 0), (0, 1)],
            vec![0, 0, 0],
            1,
            Splits::default(),
        )
        .unwrap();
        assert_eq!(stats.self_loops_dropped, 1);
        assert_eq!(stats.duplicates_dropped, 2);
        assert_eq!(g.adjacency().edge_count(), 1);
    }

    #[test]
    fn rejects_label_count_mismatch() {
        let err = Graph::new(feat(3), &[], vec![0, 0, 0, 0], 1, Splits::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_out_of_range_labels_edges_and_splits() {
        assert!(Graph::new(feat(2), &[], vec![0, 5], 2, Splits::default()).is_err());
        assert!(Graph::new(feat(2), &[(0, 3)], vec![0, 0], 1, Splits::default()).is_err());
        let bad = Splits {
            train: vec![7],
            ..Default::default()
        };
        assert!(Graph::new(feat(2), &[], vec![0, 0], 1, bad).is_err());
    }

    #[test]
    fn rejects_overlapping_splits_and_unlabeled_train() {
        let overlapping = Splits {
            train: vec![0],
            valid: vec![0],
            test: vec![],
        };
        assert!(Graph::new(feat(2), &[], vec![0, 0], 1, overlapping).is_err());
        let unlabeled_train = Splits {
            train: vec![1],
            ..Default::default()
        };
        assert!(Graph::new(feat(2), &[], vec![0, -1], 1, unlabeled_train).is_err());
    }

    #[test]
    fn undirected_edges_are_sorted_and_unique() {
        let g = Graph::new(
            feat(4),
            &[(2, 3), (0, 1), (1, 2)],
            vec![0, 0, 0, 0],
            1,
            Splits::default(),
        )
        .unwrap();
        let edges: Vec<_> = g.adjacency().undirected_edges().collect();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn accuracy_ignores_unlabeled_nodes() {
        let labels = vec![0, 1, -1, 1];
        let pred = vec![0, 0, 0, 1];
        let acc = accuracy(&pred, &labels, &[0, 1, 2, 3]);
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    }
}
