//! Trust-feature pilot: does an explicit trustworthiness column help the
//! model use the graph better, and how far is that from the oracle choice?

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::analysis::oracle_bound;
use crate::appnp::{train, TrainLog};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{accuracy, Graph, UNLABELED};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrustReport {
    /// Test accuracy of the unmodified model.
    pub plain_accuracy: f64,
    /// Test accuracy after appending the trust feature and retraining.
    pub trust_accuracy: f64,
    /// Accuracy of the per-node best choice between ẑ and ẑˢ.
    pub oracle_bound: f64,
    pub plain_log: TrainLog,
    pub trust_log: TrainLog,
}

/// Trains the base model, derives the per-node trust value (+1 when the
/// original classification is correct, -1 when not, 0 where the two
/// classifications agree or the label is unknown), appends it as one extra
/// feature column, retrains, and reports both accuracies and the oracle
/// bound. Both per-epoch loss logs are kept for comparison.
pub fn trust_feature_experiment(g: &Graph, cfg: &RunConfig) -> Result<TrustReport> {
    let trained = train(g, &cfg.train_config()).map_err(Error::in_stage("train-plain"))?;
    let bundle = trained
        .model
        .predict_bundle(g)
        .map_err(Error::in_stage("predict"))?;
    let labels = g.labels();
    let test = &g.splits().test;

    let trust = Array2::from_shape_fn((g.node_count(), 1), |(i, _)| {
        if labels[i] == UNLABELED || !bundle.is_conflict(i) {
            0.0
        } else if bundle.z_hat[i] as i64 == labels[i] {
            1.0
        } else {
            -1.0
        }
    });
    let augmented = ndarray::concatenate(Axis(1), &[g.features().view(), trust.view()])
        .expect("row counts match");
    let g_trust = g.with_features(augmented)?;
    let retrained = train(&g_trust, &cfg.train_config()).map_err(Error::in_stage("train-trust"))?;
    let bundle_trust = retrained
        .model
        .predict_bundle(&g_trust)
        .map_err(Error::in_stage("predict"))?;

    Ok(TrustReport {
        plain_accuracy: accuracy(&bundle.z_hat, labels, test),
        trust_accuracy: accuracy(&bundle_trust.z_hat, labels, test),
        oracle_bound: oracle_bound(&bundle, labels, test),
        plain_log: trained.log,
        trust_log: retrained.log,
    })
}
