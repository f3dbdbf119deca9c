//! L-way baseline: a linear-softmax head over [ŷ ⊕ ŷˢ ⊕ e].

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::appnp::{argmax_rows, PredictionBundle};
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, AdamConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LwayConfig {
    pub reg_alpha: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for LwayConfig {
    fn default() -> Self {
        LwayConfig {
            reg_alpha: 5e-4,
            lr: 0.01,
            epochs: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LwayOutcome {
    /// 3L×L weight matrix of the head.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    /// Argmax classes for every node under the trained head.
    pub predictions: Vec<usize>,
    pub train_loss: Vec<f64>,
}

fn concat_inputs(bundle: &PredictionBundle) -> Array2<f64> {
    ndarray::concatenate(
        Axis(1),
        &[
            bundle.y_hat.view(),
            bundle.y_self.view(),
            bundle.effect.view(),
        ],
    )
    .expect("bundle matrices share row count")
}

pub(crate) fn lway_loss_and_grad(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    inputs: &Array2<f64>,
    labels: &[i64],
    train_set: &[usize],
    reg_alpha: f64,
) -> Result<(f64, Array2<f64>, Array1<f64>)> {
    let mut logits = inputs.dot(weights);
    logits += bias;
    let (ce, d_logits) = softmax_cross_entropy(&logits, labels, train_set)?;
    let loss = ce + reg_alpha * weights.iter().map(|w| w * w).sum::<f64>();
    let mut d_w = inputs.t().dot(&d_logits);
    d_w.scaled_add(2.0 * reg_alpha, weights);
    let d_b = d_logits.sum_axis(Axis(0));
    Ok((loss, d_w, d_b))
}

/// Trains the head with Adam on `train_set`. The problem is convex, so the
/// head starts at zero and needs no randomness; the run is deterministic.
pub fn lway_baseline(
    bundle: &PredictionBundle,
    labels: &[i64],
    train_set: &[usize],
    cfg: &LwayConfig,
) -> Result<LwayOutcome> {
    let l = bundle.y_hat.ncols();
    let inputs = concat_inputs(bundle);
    let mut weights = Array2::<f64>::zeros((3 * l, l));
    let mut bias = Array1::<f64>::zeros(l);

    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut m_w = Array2::<f64>::zeros(weights.raw_dim());
    let mut v_w = Array2::<f64>::zeros(weights.raw_dim());
    let mut m_b = Array1::<f64>::zeros(l);
    let mut v_b = Array1::<f64>::zeros(l);
    let mut train_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let (loss, d_w, d_b) =
            lway_loss_and_grad(&weights, &bias, &inputs, labels, train_set, cfg.reg_alpha)?;
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("non-finite L-way loss {loss}"),
            });
        }
        train_loss.push(loss);
        let step = (epoch + 1) as u64;
        crate::nn::adam_update_block(
            weights.as_slice_mut().unwrap(),
            d_w.as_slice().unwrap(),
            m_w.as_slice_mut().unwrap(),
            v_w.as_slice_mut().unwrap(),
            &adam,
            step,
        );
        crate::nn::adam_update_block(
            bias.as_slice_mut().unwrap(),
            d_b.as_slice().unwrap(),
            m_b.as_slice_mut().unwrap(),
            v_b.as_slice_mut().unwrap(),
            &adam,
            step,
        );
    }

    let mut logits = inputs.dot(&weights);
    logits += &bias;
    Ok(LwayOutcome {
        weights,
        bias,
        predictions: argmax_rows(&logits),
        train_loss,
    })
}
