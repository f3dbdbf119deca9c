//! Two-layer perceptron with rectifier activation and inverted dropout.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::MlpParams;
use crate::error::{Error, Result};

/// Which parameter blocks the L2 penalty covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Blocks {
    /// First-layer weights only (the APPNP convention).
    #[default]
    W1Only,
    /// All four blocks.
    All,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x_drop: Array2<f64>,
    hidden: Array2<f64>,
    hidden_drop: Array2<f64>,
    mask_hidden: Option<Array2<f64>>,
}

/// Inverted dropout: surviving entries are scaled by 1/keep so the
/// expectation matches the eval-mode activation.
fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < keep {
            scale
        } else {
            0.0
        }
    })
}

fn affine(x: &ArrayView2<'_, f64>, w: &Array2<f64>, b: &ndarray::Array1<f64>) -> Result<Array2<f64>> {
    if x.ncols() != w.nrows() {
        return Err(Error::Dimension(format!(
            "affine: input has {} columns, weight expects {}",
            x.ncols(),
            w.nrows()
        )));
    }
    let mut out = x.dot(w);
    out += b;
    Ok(out)
}

/// Training-mode forward pass; dropout applied to the input and hidden layer.
pub fn mlp_forward_train(
    params: &MlpParams,
    x: &ArrayView2<'_, f64>,
    dropout_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ForwardCache, Array2<f64>)> {
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Validation(format!(
            "dropout rate must lie in [0, 1), got {dropout_rate}"
        )));
    }
    let (mask_in, mask_hidden) = if dropout_rate > 0.0 {
        let m_in = dropout_mask((x.nrows(), x.ncols()), dropout_rate, rng);
        let m_h = dropout_mask((x.nrows(), params.w1.ncols()), dropout_rate, rng);
        (Some(m_in), Some(m_h))
    } else {
        (None, None)
    };
    let x_drop = match &mask_in {
        Some(m) => x.to_owned() * m,
        None => x.to_owned(),
    };
    let mut hidden = affine(&x_drop.view(), &params.w1, &params.b1)?;
    hidden.mapv_inplace(|v| v.max(0.0));
    let hidden_drop = match &mask_hidden {
        Some(m) => &hidden * m,
        None => hidden.clone(),
    };
    let logits = affine(&hidden_drop.view(), &params.w2, &params.b2)?;
    Ok((
        ForwardCache {
            x_drop,
            hidden,
            hidden_drop,
            mask_hidden,
        },
        logits,
    ))
}

/// Deterministic eval-mode forward pass (no dropout).
pub fn mlp_forward_eval(params: &MlpParams, x: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut hidden = affine(x, &params.w1, &params.b1)?;
    hidden.mapv_inplace(|v| v.max(0.0));
    affine(&hidden.view(), &params.w2, &params.b2)
}

/// Eval-mode forward that also returns a cache, for gradient paths with
/// dropout frozen.
pub fn mlp_forward_frozen(
    params: &MlpParams,
    x: &ArrayView2<'_, f64>,
) -> Result<(ForwardCache, Array2<f64>)> {
    let x_drop = x.to_owned();
    let mut hidden = affine(&x_drop.view(), &params.w1, &params.b1)?;
    hidden.mapv_inplace(|v| v.max(0.0));
    let hidden_drop = hidden.clone();
    let logits = affine(&hidden_drop.view(), &params.w2, &params.b2)?;
    Ok((
        ForwardCache {
            x_drop,
            hidden,
            hidden_drop,
            mask_hidden: None,
        },
        logits,
    ))
}

/// Exact gradient of `loss + l2_lambda * ||selected blocks||_F^2` given the
/// loss gradient with respect to the MLP logits. Dropout masks recorded in
/// the cache are reused.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &ForwardCache,
    d_logits: &Array2<f64>,
    l2_lambda: f64,
    l2_blocks: L2Blocks,
) -> Result<MlpParams> {
    if d_logits.nrows() != cache.hidden_drop.nrows()
        || d_logits.ncols() != params.w2.ncols()
    {
        return Err(Error::Dimension(format!(
            "mlp_backward: dLogits is {}x{}, expected {}x{}",
            d_logits.nrows(),
            d_logits.ncols(),
            cache.hidden_drop.nrows(),
            params.w2.ncols()
        )));
    }
    let mut grads = params.zeros_like();

    grads.w2 = cache.hidden_drop.t().dot(d_logits);
    grads.b2 = d_logits.sum_axis(Axis(0));

    let mut d_hidden = d_logits.dot(&params.w2.t());
    if let Some(mask) = &cache.mask_hidden {
        d_hidden *= mask;
    }
    // Rectifier gate: zero where the pre-activation was clipped.
    ndarray::Zip::from(&mut d_hidden)
        .and(&cache.hidden)
        .for_each(|g, &h| {
            if h <= 0.0 {
                *g = 0.0;
            }
        });

    grads.w1 = cache.x_drop.t().dot(&d_hidden);
    grads.b1 = d_hidden.sum_axis(Axis(0));

    if l2_lambda != 0.0 {
        grads.w1.scaled_add(2.0 * l2_lambda, &params.w1);
        if l2_blocks == L2Blocks::All {
            grads.b1.scaled_add(2.0 * l2_lambda, &params.b1);
            grads.w2.scaled_add(2.0 * l2_lambda, &params.w2);
            grads.b2.scaled_add(2.0 * l2_lambda, &params.b2);
        }
    }
    Ok(grads)
}

/// Frobenius-norm-squared of the selected blocks.
pub fn l2_penalty(params: &MlpParams, l2_lambda: f64, l2_blocks: L2Blocks) -> f64 {
    if l2_lambda == 0.0 {
        return 0.0;
    }
    let sq = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>();
    let mut total = sq(params.w1.as_slice().unwrap());
    if l2_blocks == L2Blocks::All {
        total += sq(params.b1.as_slice().unwrap());
        total += sq(params.w2.as_slice().unwrap());
        total += sq(params.b2.as_slice().unwrap());
    }
    l2_lambda * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::softmax;
    use crate::rng;
    use ndarray::{array, Array2};

    #[test]
    fn zero_params_give_zero_logits_and_uniform_softmax() {
        let p = MlpParams::zeros(3, 4, 5);
        let x = Array2::from_shape_fn((2, 3), |(i, j)| (i + j) as f64);
        let logits = mlp_forward_eval(&p, &x.view()).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
        let probs = softmax(&logits);
        assert!(probs.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn negative_preactivations_are_clipped() {
        let mut p = MlpParams::zeros(1, 2, 1);
        p.w1 = array![[1.0, 1.0]];
        p.b1 = array![0.0, 0.0];
        p.w2 = array![[1.0], [1.0]];
        let x = array![[-3.0]];
        let logits = mlp_forward_eval(&p, &x.view()).unwrap();
        assert_eq!(logits[(0, 0)], 0.0);
    }

    #[test]
    fn one_by_one_hand_evaluation() {
        let mut p = MlpParams::zeros(1, 1, 1);
        p.w1 = array![[3.0]];
        p.b1 = array![-1.0];
        p.w2 = array![[1.0]];
        p.b2 = array![0.0];
        let x = array![[2.0]];
        let logits = mlp_forward_eval(&p, &x.view()).unwrap();
        assert_eq!(logits[(0, 0)], 5.0);
    }

    #[test]
    fn eval_mode_is_deterministic_and_train_with_zero_rate_matches() {
        let p = MlpParams::glorot(4, 8, 3, &mut rng::stream(5));
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i * 7 + j) % 5) as f64 / 5.0);
        let a = mlp_forward_eval(&p, &x.view()).unwrap();
        let (_, b) = mlp_forward_train(&p, &x.view(), 0.0, &mut rng::stream(0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn backward_with_zero_dlogits_reduces_to_regularizer() {
        let p = MlpParams::glorot(3, 4, 2, &mut rng::stream(8));
        let x = Array2::ones((5, 3));
        let (cache, logits) = mlp_forward_frozen(&p, &x.view()).unwrap();
        let d0 = Array2::zeros(logits.raw_dim());

        let g = mlp_backward(&p, &cache, &d0, 0.0, L2Blocks::W1Only).unwrap();
        assert!(g.w1.iter().all(|&v| v == 0.0));
        assert!(g.w2.iter().all(|&v| v == 0.0));

        let g = mlp_backward(&p, &cache, &d0, 0.05, L2Blocks::W1Only).unwrap();
        for (got, want) in g.w1.iter().zip(p.w1.iter().map(|w| 0.1 * w)) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(g.w2.iter().all(|&v| v == 0.0));

        let g = mlp_backward(&p, &cache, &d0, 0.05, L2Blocks::All).unwrap();
        for (got, want) in g.w2.iter().zip(p.w2.iter().map(|w| 0.1 * w)) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = MlpParams::zeros(3, 4, 2);
        let x = Array2::<f64>::zeros((2, 5));
        assert!(mlp_forward_eval(&p, &x.view()).is_err());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        // Positive weights and a positive bias keep every pre-activation
        // positive for every mask, so the rectifier is the identity here and
        // the mask expectation is measurable through the layer.
        let mut p = MlpParams::zeros(6, 10, 4);
        p.w1.fill(0.3);
        p.b1.fill(1.0);
        let x = Array2::from_shape_fn((4, 6), |(i, j)| ((i + 2 * j) % 7) as f64 / 3.0 + 0.1);
        let eval_hidden = {
            let mut h = x.dot(&p.w1);
            h += &p.b1;
            h.mean().unwrap()
        };
        let mut stream = rng::stream(17);
        let mut acc = 0.0;
        let rounds = 10_000;
        for _ in 0..rounds {
            let (cache, _) = mlp_forward_train(&p, &x.view(), 0.5, &mut stream).unwrap();
            acc += cache.hidden_drop.mean().unwrap();
        }
        let mean = acc / rounds as f64;
        assert!(
            (mean - eval_hidden).abs() / eval_hidden.abs() < 0.02,
            "dropout mean {mean} vs eval {eval_hidden}"
        );
    }
}
