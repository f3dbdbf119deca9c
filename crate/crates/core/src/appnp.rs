//! Personalized-PageRank propagation and the trained classifier.
//!
//! The classifier is a two-layer perceptron whose logits are diffused over
//! the graph with the teleport recurrence `z_{t+1} = (1-a)·Â·z_t + a·h`,
//! `z_0 = h`. Three inference modes share one set of trained parameters:
//! `Full` propagates over the normalized adjacency, `SelfOnly` blocks the
//! neighborhood entirely (the post-intervention prediction), and `Sampled`
//! propagates over an edge-dropout draw of the graph.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_dropout_sample, normalize_adjacency, Graph, NormalizedAdjacency};
use crate::nn::{
    adam_step, l2_penalty, mlp_backward, mlp_forward_eval, mlp_forward_train, softmax,
    softmax_cross_entropy, AdamConfig, L2Blocks, MlpParams, OptState,
};
use crate::rng;

/// Teleport propagation on pre-softmax logits: returns `z_k` of the
/// recurrence `z_{t+1} = (1-alpha)·Â·z_t + alpha·h` with `z_0 = h`.
///
/// Linear in `h`; with a symmetric `Â` the operator is its own adjoint, which
/// the training loop relies on to backpropagate through the diffusion.
pub fn propagate(
    h: &Array2<f64>,
    a_hat: &NormalizedAdjacency,
    alpha: f64,
    k: usize,
) -> Array2<f64> {
    let mut z = h.clone();
    for _ in 0..k {
        let mut az = a_hat.matmul(&z.view());
        az.mapv_inplace(|v| v * (1.0 - alpha));
        az.scaled_add(alpha, h);
        z = az;
    }
    z
}

/// How the neighborhood enters a forward pass.
pub enum InferenceMode<'r> {
    /// Propagate over the full normalized adjacency.
    Full,
    /// Block the neighborhood: do(N = ∅), realized as the identity operator.
    SelfOnly,
    /// Propagate over an edge-dropout sample of the graph.
    Sampled { tau: f64, rng: &'r mut ChaCha8Rng },
}

/// Trained APPNP classifier: perceptron parameters plus propagation
/// hyperparameters.
#[derive(Debug, Clone)]
pub struct AppnpModel {
    pub mlp: MlpParams,
    pub alpha_teleport: f64,
    pub k_prop: usize,
    pub dropout_rate: f64,
}

impl AppnpModel {
    /// Eval-mode perceptron logits (no dropout, no propagation).
    pub fn logits(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        mlp_forward_eval(&self.mlp, &features.view())
    }

    /// Probabilities from propagating the eval-mode logits over `a_hat`.
    pub fn forward_with_adjacency(
        &self,
        features: &Array2<f64>,
        a_hat: &NormalizedAdjacency,
    ) -> Result<Array2<f64>> {
        let h = self.logits(features)?;
        Ok(softmax(&propagate(&h, a_hat, self.alpha_teleport, self.k_prop)))
    }

    /// Eval-mode prediction probabilities. Dropout is disabled in every
    /// inference mode; `Sampled` only drops edges.
    pub fn forward(&self, g: &Graph, mode: InferenceMode<'_>) -> Result<Array2<f64>> {
        match mode {
            InferenceMode::Full => {
                let a_hat = normalize_adjacency(g);
                self.forward_with_adjacency(g.features(), &a_hat)
            }
            // The identity is an exact fixed point of the recurrence, so the
            // propagation is skipped rather than multiplied out.
            InferenceMode::SelfOnly => Ok(softmax(&self.logits(g.features())?)),
            InferenceMode::Sampled { tau, rng } => {
                let a_hat = edge_dropout_sample(g, tau, rng);
                self.forward_with_adjacency(g.features(), &a_hat)
            }
        }
    }

    /// Original + post-intervention predictions and the causal effect.
    pub fn predict_bundle(&self, g: &Graph) -> Result<PredictionBundle> {
        let y_hat = self.forward(g, InferenceMode::Full)?;
        let y_self = self.forward(g, InferenceMode::SelfOnly)?;
        let effect = &y_hat - &y_self;
        let z_hat = argmax_rows(&y_hat);
        let z_self = argmax_rows(&y_self);
        Ok(PredictionBundle {
            y_hat,
            y_self,
            effect,
            z_hat,
            z_self,
        })
    }
}

/// Row argmax with smallest-index tie-break.
pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_val = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best_val {
                    best = j;
                    best_val = v;
                }
            }
            best
        })
        .collect()
}

/// Per-node original prediction, post-intervention prediction, causal
/// effect `e = ŷ - ŷˢ`, and both classifications.
#[derive(Debug, Clone)]
pub struct PredictionBundle {
    pub y_hat: Array2<f64>,
    pub y_self: Array2<f64>,
    pub effect: Array2<f64>,
    pub z_hat: Vec<usize>,
    pub z_self: Vec<usize>,
}

impl PredictionBundle {
    pub fn node_count(&self) -> usize {
        self.z_hat.len()
    }

    /// Whether the original and post-intervention classifications disagree.
    pub fn is_conflict(&self, node: usize) -> bool {
        self.z_hat[node] != self.z_self[node]
    }

    pub fn conflict_nodes<'a>(&'a self, set: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        set.iter().copied().filter(move |&i| self.is_conflict(i))
    }
}

/// Training hyperparameters; defaults follow the standard APPNP recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub l2_lambda: f64,
    pub l2_blocks: L2Blocks,
    pub alpha: f64,
    pub k_prop: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 64,
            dropout: 0.5,
            lr: 0.01,
            l2_lambda: 5e-4,
            l2_blocks: L2Blocks::W1Only,
            alpha: 0.1,
            k_prop: 10,
            max_epochs: 1000,
            patience: 100,
            seed: 0,
        }
    }
}

/// Per-epoch objective values, one entry per executed epoch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AppnpModel,
    pub log: TrainLog,
    /// Epoch whose validation loss selected the returned parameters.
    pub best_epoch: usize,
}

/// Trains the classifier on the train split, early-stopping on validation
/// loss. Deterministic given `cfg.seed`. When the validation split is empty
/// the train loss is monitored instead.
pub fn train(g: &Graph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if g.splits().train.is_empty() {
        return Err(Error::Validation("train split is empty".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(Error::Validation(format!(
            "teleport weight must lie in (0, 1], got {}",
            cfg.alpha
        )));
    }
    if cfg.k_prop == 0 {
        return Err(Error::Validation("k_prop must be at least 1".into()));
    }
    let a_hat = normalize_adjacency(g);
    let monitor: &[usize] = if g.splits().valid.is_empty() {
        &g.splits().train
    } else {
        &g.splits().valid
    };

    let mut params = MlpParams::glorot(
        g.feature_dim(),
        cfg.hidden,
        g.num_classes(),
        &mut rng::derived_stream(cfg.seed, rng::tags::INIT, 0),
    );
    let mut opt_state = OptState::new(&params);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut dropout_rng = rng::derived_stream(cfg.seed, rng::tags::DROPOUT, 0);

    let mut log = TrainLog::default();
    let mut best_loss = f64::INFINITY;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut epochs_since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let (cache, h) =
            mlp_forward_train(&params, &g.features().view(), cfg.dropout, &mut dropout_rng)?;
        let z = propagate(&h, &a_hat, cfg.alpha, cfg.k_prop);
        let (ce, d_z) = softmax_cross_entropy(&z, g.labels(), &g.splits().train)?;
        let objective = ce + l2_penalty(&params, cfg.l2_lambda, cfg.l2_blocks);
        if !objective.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("non-finite loss {objective}"),
            });
        }
        // Adjoint of the diffusion; equals the forward operator because Â is
        // symmetric.
        let d_h = propagate(&d_z, &a_hat, cfg.alpha, cfg.k_prop);
        let grads = mlp_backward(&params, &cache, &d_h, cfg.l2_lambda, cfg.l2_blocks)?;
        adam_step(&mut params, &grads, &mut opt_state, &adam)?;

        let h_eval = mlp_forward_eval(&params, &g.features().view())?;
        let z_eval = propagate(&h_eval, &a_hat, cfg.alpha, cfg.k_prop);
        let (monitor_loss, _) = softmax_cross_entropy(&z_eval, g.labels(), monitor)?;

        log.train_loss.push(objective);
        log.valid_loss.push(monitor_loss);

        if monitor_loss < best_loss {
            best_loss = monitor_loss;
            best_params = params.clone();
            best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        model: AppnpModel {
            mlp: best_params,
            alpha_teleport: cfg.alpha,
            k_prop: cfg.k_prop,
            dropout_rate: cfg.dropout,
        },
        log,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Splits;
    use ndarray::array;

    fn two_node_ahat() -> NormalizedAdjacency {
        let g = Graph::new(
            Array2::zeros((2, 1)),
            &[(0, 1)],
            vec![0, 0],
            1,
            Splits::default(),
        )
        .unwrap();
        normalize_adjacency(&g)
    }

    use ndarray::Array2;

    #[test]
    fn identity_adjacency_is_a_fixed_point() {
        let a = NormalizedAdjacency::identity(3);
        let h = array![[1.0, -2.0], [0.5, 0.25], [3.0, 0.0]];
        let z = propagate(&h, &a, 0.37, 7);
        for (got, want) in z.iter().zip(h.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn full_teleport_returns_the_input() {
        let a = two_node_ahat();
        let h = array![[2.0, -1.0], [0.0, 1.0]];
        let z = propagate(&h, &a, 1.0, 5);
        assert_eq!(z, h);
    }

    #[test]
    fn one_step_two_node_hand_value() {
        let a = two_node_ahat();
        let h = array![[1.0, 0.0], [0.0, 1.0]];
        let z = propagate(&h, &a, 0.1, 1);
        let want = array![[0.55, 0.45], [0.45, 0.55]];
        for (got, want) in z.iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn propagation_is_linear() {
        let a = two_node_ahat();
        let h1 = array![[0.3, -0.7], [2.0, 0.1]];
        let h2 = array![[-1.0, 0.4], [0.6, 0.9]];
        let sum = propagate(&(&h1 + &h2), &a, 0.2, 6);
        let parts = propagate(&h1, &a, 0.2, 6) + propagate(&h2, &a, 0.2, 6);
        for (got, want) in sum.iter().zip(parts.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    fn identity_mlp_model() -> AppnpModel {
        let mut mlp = MlpParams::zeros(2, 2, 2);
        mlp.w1 = array![[1.0, 0.0], [0.0, 1.0]];
        mlp.w2 = array![[1.0, 0.0], [0.0, 1.0]];
        AppnpModel {
            mlp,
            alpha_teleport: 0.1,
            k_prop: 1,
            dropout_rate: 0.0,
        }
    }

    fn two_node_graph() -> Graph {
        Graph::new(
            array![[1.0, 0.0], [0.0, 1.0]],
            &[(0, 1)],
            vec![0, 1],
            2,
            Splits::default(),
        )
        .unwrap()
    }

    #[test]
    fn self_mode_equals_softmax_of_raw_logits_exactly() {
        let model = identity_mlp_model();
        let g = two_node_graph();
        let got = model.forward(&g, InferenceMode::SelfOnly).unwrap();
        let want = softmax(&model.logits(g.features()).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn sampled_with_zero_tau_equals_full_exactly() {
        let model = identity_mlp_model();
        let g = two_node_graph();
        let full = model.forward(&g, InferenceMode::Full).unwrap();
        let mut stream = rng::stream(11);
        let sampled = model
            .forward(
                &g,
                InferenceMode::Sampled {
                    tau: 0.0,
                    rng: &mut stream,
                },
            )
            .unwrap();
        assert_eq!(full, sampled);
    }

    #[test]
    fn full_mode_composes_propagation_with_the_mlp() {
        // Identity MLP on the 2-node graph: probabilities are the softmax of
        // the one-step propagation of the identity.
        let model = identity_mlp_model();
        let g = two_node_graph();
        let got = model.forward(&g, InferenceMode::Full).unwrap();
        let want = softmax(&array![[0.55, 0.45], [0.45, 0.55]]);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bundle_effect_and_classes_follow_definitions() {
        let model = identity_mlp_model();
        let g = two_node_graph();
        let bundle = model.predict_bundle(&g).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = bundle.y_hat[(i, j)] - bundle.y_self[(i, j)];
                assert_eq!(bundle.effect[(i, j)], want);
            }
        }
        assert_eq!(bundle.z_hat[0], 0);
        assert_eq!(bundle.z_self[1], 1);
    }

    #[test]
    fn edgeless_graph_has_zero_effect() {
        let model = identity_mlp_model();
        let g = Graph::new(
            array![[1.0, 0.0], [0.0, 1.0]],
            &[],
            vec![0, 1],
            2,
            Splits::default(),
        )
        .unwrap();
        let bundle = model.predict_bundle(&g).unwrap();
        assert!(bundle.effect.iter().all(|&e| e.abs() < 1e-15));
        assert_eq!(bundle.z_hat, bundle.z_self);
    }

    #[test]
    fn argmax_breaks_ties_at_the_smallest_index() {
        let p = array![[0.4, 0.4, 0.2], [0.2, 0.3, 0.5], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
        assert_eq!(argmax_rows(&p), vec![0, 2, 0]);
    }

    #[test]
    fn overfits_a_separable_toy_and_is_seed_deterministic() {
        // 10 nodes, 2 classes, features equal to the one-hot label.
        let n = 10;
        let features = Array2::from_shape_fn((n, 2), |(i, j)| {
            if (i % 2 == 0) == (j == 0) {
                1.0
            } else {
                0.0
            }
        });
        let labels: Vec<i64> = (0..n).map(|i| (i % 2) as i64).collect();
        let edges: Vec<(usize, usize)> = (0..n - 2).map(|i| (i, i + 2)).collect();
        let splits = Splits {
            train: (0..n).collect(),
            valid: vec![],
            test: vec![],
        };
        let g = Graph::new(features, &edges, labels.clone(), 2, splits).unwrap();
        let cfg = TrainConfig {
            hidden: 8,
            dropout: 0.2,
            max_epochs: 500,
            patience: 500,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train(&g, &cfg).unwrap();
        let probs = out.model.forward(&g, InferenceMode::Full).unwrap();
        let pred = argmax_rows(&probs);
        let acc = crate::graph::accuracy(&pred, g.labels(), &g.splits().train);
        assert_eq!(acc, 1.0, "train accuracy {acc}");

        let out2 = train(&g, &cfg).unwrap();
        assert_eq!(out.model.mlp, out2.model.mlp);
        assert_eq!(out.best_epoch, out2.best_epoch);
    }

    #[test]
    fn locality_is_bounded_by_k_prop_hops() {
        // Path 0-1-2-3-4 with k_prop = 2: node 0 must be bitwise invariant to
        // feature changes at nodes 3 and 4.
        let features = Array2::from_shape_fn((5, 2), |(i, j)| (i * 2 + j) as f64 / 10.0);
        let g = Graph::new(
            features.clone(),
            &[(0, 1), (1, 2), (2, 3), (3, 4)],
            vec![0, 1, 0, 1, 0],
            2,
            Splits::default(),
        )
        .unwrap();
        let model = AppnpModel {
            mlp: MlpParams::glorot(2, 6, 2, &mut rng::stream(2)),
            alpha_teleport: 0.1,
            k_prop: 2,
            dropout_rate: 0.0,
        };
        let base = model.forward(&g, InferenceMode::Full).unwrap();

        let mut far = features;
        far[(3, 0)] = 9.0;
        far[(4, 1)] = -4.0;
        let g2 = g.with_features(far).unwrap();
        let moved = model.forward(&g2, InferenceMode::Full).unwrap();
        assert_eq!(base.row(0), moved.row(0));
        assert_ne!(base.row(2), moved.row(2));
    }

    #[test]
    fn self_mode_ignores_adjacency_changes() {
        let model = identity_mlp_model();
        let g = two_node_graph();
        let g_no_edges = Graph::new(
            g.features().clone(),
            &[],
            vec![0, 1],
            2,
            Splits::default(),
        )
        .unwrap();
        let a = model.forward(&g, InferenceMode::SelfOnly).unwrap();
        let b = model.forward(&g_no_edges, InferenceMode::SelfOnly).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_errors_on_empty_train_split() {
        let g = two_node_graph();
        assert!(train(&g, &TrainConfig::default()).is_err());
    }
}
