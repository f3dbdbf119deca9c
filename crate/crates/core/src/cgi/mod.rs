//! The causal inference mechanism layered on a trained classifier.
//!
//! Given the original prediction ŷ and the post-intervention prediction ŷˢ,
//! the mechanism estimates the Monte-Carlo uncertainty of the neighborhood's
//! causal effect, distills seven per-node factors, and trains a
//! support-vector choice model on labeled conflict nodes that decides whether
//! to keep ẑ or revert to ẑˢ. The L-way head and the prediction-averaging
//! ensemble serve as baselines.

mod choice;
mod lway;

pub use choice::{
    choice_decision, train_choice_model, train_choice_model_subset, ChoiceModel,
    ChoiceModelConfig, CvEntry, Standardizer,
};
pub use lway::{lway_baseline, LwayConfig, LwayOutcome};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::appnp::{argmax_rows, AppnpModel, InferenceMode, PredictionBundle};
use crate::error::{Error, Result};
use crate::graph::{Graph, TransitionMatrix, UNLABELED};
use crate::rng;

/// Number of Monte-Carlo repeats used by default.
pub const DEFAULT_K_MC: usize = 50;
/// Edge-dropout ratio used by default.
pub const DEFAULT_TAU: f64 = 0.15;

/// Element-wise prediction variance over edge-dropout samples.
#[derive(Debug, Clone)]
pub struct CausalUncertainty {
    /// n×L population variance of the sampled probability matrices. Because
    /// the post-intervention prediction is constant per node, this equals the
    /// variance of the sampled causal effects.
    pub variance: Array2<f64>,
    /// Per-node variance read off at the originally predicted class.
    pub graph_var: Vec<f64>,
}

/// Runs `k_mc` Sampled-mode forwards on independent streams derived from
/// `master_seed` and returns the per-class population variance.
///
/// Sample `i` uses the stream seeded with
/// `rng::derive(master_seed, rng::tags::MC_SAMPLE, i)`; replaying those
/// streams regenerates the identical sampled adjacencies. Samples run
/// concurrently and are merged by index, so the result does not depend on
/// thread count.
pub fn estimate_causal_uncertainty(
    model: &AppnpModel,
    g: &Graph,
    k_mc: usize,
    tau: f64,
    master_seed: u64,
) -> Result<CausalUncertainty> {
    if k_mc < 2 {
        return Err(Error::Validation(format!(
            "variance needs at least 2 Monte-Carlo samples, got {k_mc}"
        )));
    }
    let samples: Vec<Array2<f64>> = (0..k_mc)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::derived_stream(master_seed, rng::tags::MC_SAMPLE, i as u64);
            model.forward(
                g,
                InferenceMode::Sampled {
                    tau,
                    rng: &mut stream,
                },
            )
        })
        .collect::<Result<_>>()?;

    let shape = samples[0].raw_dim();
    let mut mean = Array2::<f64>::zeros(shape);
    for s in &samples {
        mean += s;
    }
    mean.mapv_inplace(|v| v / k_mc as f64);
    let mut variance = Array2::<f64>::zeros(shape);
    for s in &samples {
        let dev = s - &mean;
        variance += &(&dev * &dev);
    }
    variance.mapv_inplace(|v| v / k_mc as f64);

    let z_hat = argmax_rows(&model.forward(g, InferenceMode::Full)?);
    let graph_var = z_hat
        .iter()
        .enumerate()
        .map(|(i, &z)| variance[(i, z)])
        .collect();
    Ok(CausalUncertainty {
        variance,
        graph_var,
    })
}

/// One of the seven scalar inputs of the choice model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    GraphVar,
    SelfConf,
    NeighborConf,
    SelfSelf,
    NeighborNeighbor,
    SelfNeighbor,
    NeighborSelf,
}

impl Factor {
    pub const ALL: [Factor; 7] = [
        Factor::GraphVar,
        Factor::SelfConf,
        Factor::NeighborConf,
        Factor::SelfSelf,
        Factor::NeighborNeighbor,
        Factor::SelfNeighbor,
        Factor::NeighborSelf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Factor::GraphVar => "graph_var",
            Factor::SelfConf => "self_conf",
            Factor::NeighborConf => "neighbor_conf",
            Factor::SelfSelf => "self_self",
            Factor::NeighborNeighbor => "neighbor_neighbor",
            Factor::SelfNeighbor => "self_neighbor",
            Factor::NeighborSelf => "neighbor_self",
        }
    }
}

/// The seven factors feeding the choice model.
///
/// Naming note: `self_conf` is the confidence of the full-graph prediction
/// (ŷ at ẑ) and `neighbor_conf` that of the neighbor-blocked prediction
/// (ŷˢ at ẑˢ). The names read swapped relative to intuition but are the
/// established factor names, kept verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorVector {
    pub graph_var: f64,
    pub self_conf: f64,
    pub neighbor_conf: f64,
    pub self_self: f64,
    pub neighbor_neighbor: f64,
    pub self_neighbor: f64,
    pub neighbor_self: f64,
}

impl FactorVector {
    pub fn component(&self, f: Factor) -> f64 {
        match f {
            Factor::GraphVar => self.graph_var,
            Factor::SelfConf => self.self_conf,
            Factor::NeighborConf => self.neighbor_conf,
            Factor::SelfSelf => self.self_self,
            Factor::NeighborNeighbor => self.neighbor_neighbor,
            Factor::SelfNeighbor => self.self_neighbor,
            Factor::NeighborSelf => self.neighbor_self,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        Factor::ALL.iter().map(|&f| self.component(f)).collect()
    }

    /// Components of the factors in `keep`, in their order.
    pub fn select(&self, keep: &[Factor]) -> Vec<f64> {
        keep.iter().map(|&f| self.component(f)).collect()
    }
}

/// Assembles the factor vector of one node from the prediction bundle, the
/// Monte-Carlo variance, and the category transition matrix.
pub fn extract_factors(
    bundle: &PredictionBundle,
    graph_var: &[f64],
    t_matrix: &TransitionMatrix,
    node: usize,
) -> FactorVector {
    let z = bundle.z_hat[node];
    let zs = bundle.z_self[node];
    FactorVector {
        graph_var: graph_var[node],
        self_conf: bundle.y_hat[(node, z)],
        neighbor_conf: bundle.y_self[(node, zs)],
        self_self: t_matrix.get(z, z),
        neighbor_neighbor: t_matrix.get(zs, zs),
        self_neighbor: t_matrix.get(z, zs),
        neighbor_self: t_matrix.get(zs, z),
    }
}

/// Factor vectors for every node.
pub fn extract_all_factors(
    bundle: &PredictionBundle,
    graph_var: &[f64],
    t_matrix: &TransitionMatrix,
) -> Vec<FactorVector> {
    (0..bundle.node_count())
        .map(|i| extract_factors(bundle, graph_var, t_matrix, i))
        .collect()
}

/// Inclusion rule for the choice training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceMode {
    /// Keep only nodes where the two classifications disagree and at least
    /// one of them is correct.
    #[default]
    ConflictOnly,
    /// Keep every node where at least one classification is correct.
    Literal,
}

/// One labeled choice example: +1 when the original classification is the
/// correct one, -1 otherwise.
#[derive(Debug, Clone)]
pub struct ChoiceRow {
    pub node: usize,
    pub factors: FactorVector,
    pub label: i8,
}

#[derive(Debug, Clone)]
pub struct ChoiceDataset {
    pub rows: Vec<ChoiceRow>,
    pub mode: ChoiceMode,
}

impl ChoiceDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<i8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Fraction of rows whose original classification is correct; the
    /// accuracy of always keeping ẑ.
    pub fn majority_reference(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.label == 1).count() as f64 / self.rows.len() as f64
    }
}

/// Builds the choice training data over `candidate_set`.
pub fn build_choice_dataset(
    bundle: &PredictionBundle,
    factors: &[FactorVector],
    true_labels: &[i64],
    candidate_set: &[usize],
    mode: ChoiceMode,
) -> Result<ChoiceDataset> {
    let mut rows = Vec::new();
    for &i in candidate_set {
        let z = true_labels[i];
        if z == UNLABELED {
            return Err(Error::Validation(format!(
                "choice candidate node {i} has no label"
            )));
        }
        let z = z as usize;
        let hat_correct = bundle.z_hat[i] == z;
        let self_correct = bundle.z_self[i] == z;
        let include = match mode {
            ChoiceMode::ConflictOnly => bundle.is_conflict(i) && (hat_correct || self_correct),
            ChoiceMode::Literal => hat_correct || self_correct,
        };
        if include {
            rows.push(ChoiceRow {
                node: i,
                factors: factors[i],
                label: if hat_correct { 1 } else { -1 },
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::DatasetSparsity(format!(
            "no usable choice examples among {} candidates",
            candidate_set.len()
        )));
    }
    Ok(ChoiceDataset { rows, mode })
}

/// Final per-node classes: on conflict nodes the choice model's decision
/// value picks between ẑ (when `p_hat >= threshold`) and ẑˢ; elsewhere the
/// agreed classification is returned without consulting the model.
pub fn cgi_predict(
    bundle: &PredictionBundle,
    factors: &[FactorVector],
    model: &ChoiceModel,
    threshold: f64,
) -> Vec<usize> {
    (0..bundle.node_count())
        .map(|i| {
            if !bundle.is_conflict(i) {
                return bundle.z_hat[i];
            }
            let p_hat = choice_decision(model, &factors[i]);
            if p_hat >= threshold {
                bundle.z_hat[i]
            } else {
                bundle.z_self[i]
            }
        })
        .collect()
}

/// Classes from the argmax of the averaged predictions `(ŷ + ŷˢ)/2`.
pub fn ensemble_predict(bundle: &PredictionBundle) -> Vec<usize> {
    let mean = (&bundle.y_hat + &bundle.y_self) * 0.5;
    argmax_rows(&mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{compute_transition_matrix, Splits};
    use ndarray::array;

    fn bundle_from(y_hat: Array2<f64>, y_self: Array2<f64>) -> PredictionBundle {
        let effect = &y_hat - &y_self;
        let z_hat = argmax_rows(&y_hat);
        let z_self = argmax_rows(&y_self);
        PredictionBundle {
            y_hat,
            y_self,
            effect,
            z_hat,
            z_self,
        }
    }

    #[test]
    fn factors_collapse_when_classifications_coincide() {
        let bundle = bundle_from(array![[0.7, 0.3]], array![[0.6, 0.4]]);
        let g = Graph::new(
            array![[0.0], [0.0], [0.0]],
            &[(0, 1), (1, 2)],
            vec![0, 0, 1],
            2,
            Splits::default(),
        )
        .unwrap();
        let t = compute_transition_matrix(&g, &[0, 1, 2]).unwrap();
        let f = extract_factors(&bundle, &[0.01], &t, 0);
        assert_eq!(f.self_self, f.neighbor_neighbor);
        assert_eq!(f.self_self, f.self_neighbor);
        assert_eq!(f.self_self, f.neighbor_self);
        assert_eq!(f.self_self, t.get(0, 0));
    }

    #[test]
    fn uniform_prediction_gives_one_over_l_confidence() {
        let bundle = bundle_from(array![[0.25, 0.25, 0.25, 0.25]], array![[0.7, 0.1, 0.1, 0.1]]);
        let g = Graph::new(
            ndarray::Array2::zeros((4, 1)),
            &[],
            vec![0, 1, 2, 3],
            4,
            Splits::default(),
        )
        .unwrap();
        let t = compute_transition_matrix(&g, &[0, 1, 2, 3]).unwrap();
        let f = extract_factors(&bundle, &[0.0], &t, 0);
        assert_eq!(f.self_conf, 0.25);
        assert_eq!(f.neighbor_conf, 0.7);
    }

    #[test]
    fn two_class_transition_lookup() {
        // T = [[0.5, 0.5], [1, 0]], ẑ = 0, ẑˢ = 1.
        let g = Graph::new(
            ndarray::Array2::zeros((3, 1)),
            &[(0, 1), (1, 2)],
            vec![0, 0, 1],
            2,
            Splits::default(),
        )
        .unwrap();
        let t = compute_transition_matrix(&g, &[0, 1, 2]).unwrap();
        let bundle = bundle_from(array![[0.8, 0.2]], array![[0.1, 0.9]]);
        let f = extract_factors(&bundle, &[0.0], &t, 0);
        assert_eq!(
            (f.self_self, f.neighbor_neighbor, f.self_neighbor, f.neighbor_self),
            (0.5, 0.0, 0.5, 1.0)
        );
    }

    #[test]
    fn dataset_inclusion_rules() {
        // Node 0: ẑ correct, ẑˢ wrong (conflict) -> included, +1.
        // Node 1: both equal and correct -> literal only, +1.
        // Node 2: both wrong -> never included.
        // Node 3: conflict, ẑˢ correct -> included, -1.
        let y_hat = array![
            [0.9, 0.1, 0.0],
            [0.8, 0.1, 0.1],
            [0.1, 0.8, 0.1],
            [0.6, 0.3, 0.1]
        ];
        let y_self = array![
            [0.1, 0.9, 0.0],
            [0.7, 0.2, 0.1],
            [0.2, 0.7, 0.1],
            [0.2, 0.7, 0.1]
        ];
        let bundle = bundle_from(y_hat, y_self);
        let labels = vec![0i64, 0, 2, 1];
        let factors = vec![
            FactorVector {
                graph_var: 0.0,
                self_conf: 0.0,
                neighbor_conf: 0.0,
                self_self: 0.0,
                neighbor_neighbor: 0.0,
                self_neighbor: 0.0,
                neighbor_self: 0.0,
            };
            4
        ];
        let set = [0, 1, 2, 3];

        let conflict =
            build_choice_dataset(&bundle, &factors, &labels, &set, ChoiceMode::ConflictOnly)
                .unwrap();
        let ids: Vec<usize> = conflict.rows.iter().map(|r| r.node).collect();
        assert_eq!(ids, vec![0, 3]);
        assert_eq!(conflict.rows[0].label, 1);
        assert_eq!(conflict.rows[1].label, -1);

        let literal =
            build_choice_dataset(&bundle, &factors, &labels, &set, ChoiceMode::Literal).unwrap();
        let ids: Vec<usize> = literal.rows.iter().map(|r| r.node).collect();
        assert_eq!(ids, vec![0, 1, 3]);
        assert_eq!(literal.majority_reference(), 2.0 / 3.0);
    }

    #[test]
    fn empty_choice_data_reports_sparsity() {
        let bundle = bundle_from(array![[0.2, 0.8]], array![[0.3, 0.7]]);
        let labels = vec![0i64];
        let factors = vec![FactorVector {
            graph_var: 0.0,
            self_conf: 0.0,
            neighbor_conf: 0.0,
            self_self: 0.0,
            neighbor_neighbor: 0.0,
            self_neighbor: 0.0,
            neighbor_self: 0.0,
        }];
        let err =
            build_choice_dataset(&bundle, &factors, &labels, &[0], ChoiceMode::ConflictOnly)
                .unwrap_err();
        assert!(matches!(err, Error::DatasetSparsity(_)));
    }

    #[test]
    fn ensemble_averages_then_takes_argmax() {
        let bundle = bundle_from(array![[0.6, 0.4], [0.5, 0.5]], array![[0.2, 0.8], [0.5, 0.5]]);
        // Means: [0.4, 0.6] -> class 1; tie [0.5, 0.5] -> class 0.
        assert_eq!(ensemble_predict(&bundle), vec![1, 0]);
    }

    #[test]
    fn ensemble_of_identical_predictions_is_the_original() {
        let p = array![[0.3, 0.7], [0.9, 0.1]];
        let bundle = bundle_from(p.clone(), p);
        assert_eq!(ensemble_predict(&bundle), bundle.z_hat);
    }
}
