//! Softmax and cross-entropy over selected rows.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::UNLABELED;

/// Row-wise softmax with max-subtraction for stability.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean negative log-likelihood over `index_set` plus its gradient.
///
/// Gradient rows outside the set are zero; inside the set they are
/// `(softmax - onehot) / |set|`.
pub fn softmax_cross_entropy(
    logits: &Array2<f64>,
    labels: &[i64],
    index_set: &[usize],
) -> Result<(f64, Array2<f64>)> {
    if index_set.is_empty() {
        return Err(Error::Validation(
            "cross-entropy over an empty index set".into(),
        ));
    }
    if labels.len() != logits.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.nrows()
        )));
    }
    let l = logits.ncols();
    let inv = 1.0 / index_set.len() as f64;
    let mut d_logits = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for &i in index_set {
        if i >= logits.nrows() {
            return Err(Error::Validation(format!("index {i} out of range")));
        }
        let label = labels[i];
        if label == UNLABELED || label < 0 || label as usize >= l {
            return Err(Error::Validation(format!(
                "node {i} has no usable label ({label})"
            )));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let logsum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += logsum - row[label as usize];
        for j in 0..l {
            let p = (row[j] - logsum).exp();
            d_logits[(i, j)] = (p - if j == label as usize { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok((loss * inv, d_logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_logits_cost_ln_l() {
        let logits = Array2::zeros((3, 4));
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert!((loss - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_drive_loss_to_zero() {
        let mut prev = f64::INFINITY;
        for margin in [2.0, 8.0, 32.0, 128.0] {
            let logits = array![[margin, 0.0]];
            let (loss, _) = softmax_cross_entropy(&logits, &[0], &[0]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-40);
    }

    #[test]
    fn two_class_closed_form() {
        let logits = array![[1.0, 0.0]];
        let (loss, grad) = softmax_cross_entropy(&logits, &[0], &[0]).unwrap();
        let want = (1.0 + (-1.0_f64).exp()).ln();
        assert!((loss - want).abs() < 1e-12);
        // d/dlogit0 = p0 - 1, d/dlogit1 = p1.
        let p0 = 1.0 / (1.0 + (-1.0_f64).exp());
        assert!((grad[(0, 0)] - (p0 - 1.0)).abs() < 1e-12);
        assert!((grad[(0, 1)] - (1.0 - p0)).abs() < 1e-12);
    }

    #[test]
    fn rows_outside_the_set_have_zero_gradient() {
        let logits = array![[0.3, -0.2], [4.0, 1.0], [0.0, 0.0]];
        let (_, grad) = softmax_cross_entropy(&logits, &[0, 1, 0], &[1]).unwrap();
        assert!(grad.row(0).iter().all(|&v| v == 0.0));
        assert!(grad.row(2).iter().all(|&v| v == 0.0));
        assert!(grad.row(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn empty_set_is_rejected() {
        let logits = Array2::zeros((2, 2));
        assert!(softmax_cross_entropy(&logits, &[0, 0], &[]).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one_under_extreme_logits() {
        let logits = array![[1e8, -1e8, 700.0], [-745.0, 0.0, 745.0]];
        let p = softmax(&logits);
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
