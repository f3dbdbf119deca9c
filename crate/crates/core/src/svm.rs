//! RBF-kernel support-vector classifier trained by sequential minimal
//! optimization.
//!
//! Solves the standard C-SVC dual: minimize `½ αᵀQα − eᵀα` subject to
//! `0 ≤ α ≤ C` and `yᵀα = 0`, with `Q_ij = y_i y_j K(x_i, x_j)`. The working
//! set is the maximal violating pair; the stopping criterion is the duality
//! gap estimate `m(α) − M(α) < tol`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * sq).exp()
}

#[derive(Debug, Clone, Copy)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SmoParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        SmoParams {
            c,
            gamma,
            tol: 1e-3,
            max_iter: 0, // 0 = auto: max(100_000, 200·m)
        }
    }
}

/// Full dual solution; `alpha[i]` pairs with training point `i`.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final `m(α) − M(α)` gap.
    pub residual: f64,
}

/// Deployable classifier: support vectors with their signed dual
/// coefficients `αᵢ·yᵢ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfSvc {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
}

impl RbfSvc {
    pub fn from_solution(x: &[Vec<f64>], y: &[i8], sol: &SmoSolution, params: &SmoParams) -> Self {
        let mut support_vectors = Vec::new();
        let mut dual_coefs = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(x[i].clone());
                dual_coefs.push(a * f64::from(y[i]));
            }
        }
        RbfSvc {
            support_vectors,
            dual_coefs,
            bias: sol.bias,
            gamma: params.gamma,
            c: params.c,
        }
    }

    /// Signed decision value; the predicted label is its sign.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * rbf_kernel(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

fn validate_inputs(x: &[Vec<f64>], y: &[i8]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} points but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Validation("empty training set".into()));
    }
    let dim = x[0].len();
    if x.iter().any(|row| row.len() != dim) {
        return Err(Error::Dimension("ragged feature rows".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite feature value".into()));
    }
    if y.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::Validation("labels must be +1 or -1".into()));
    }
    if !y.contains(&1) || !y.contains(&-1) {
        return Err(Error::Validation(
            "training data contains a single class".into(),
        ));
    }
    Ok(())
}

/// Trains the dual to tolerance `params.tol`.
pub fn smo_fit(x: &[Vec<f64>], y: &[i8], params: &SmoParams) -> Result<SmoSolution> {
    validate_inputs(x, y)?;
    if !(params.c > 0.0) || !(params.gamma > 0.0) {
        return Err(Error::Validation(format!(
            "C and gamma must be positive, got C={} gamma={}",
            params.c, params.gamma
        )));
    }
    let m = x.len();
    let c = params.c;
    let max_iter = if params.max_iter == 0 {
        (200 * m).max(100_000)
    } else {
        params.max_iter
    };

    let kernel: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| rbf_kernel(&x[i], &x[j], params.gamma)).collect())
        .collect();
    let yf: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();

    let mut alpha = vec![0.0f64; m];
    // G_i = (Qα)_i − 1.
    let mut grad = vec![-1.0f64; m];

    let select = |alpha: &[f64], grad: &[f64]| -> (f64, usize, f64, usize) {
        let mut up_val = f64::NEG_INFINITY;
        let mut up_idx = usize::MAX;
        let mut low_val = f64::INFINITY;
        let mut low_idx = usize::MAX;
        for t in 0..m {
            let v = -yf[t] * grad[t];
            let in_up = (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0.0);
            let in_low = (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < c);
            if in_up && v > up_val {
                up_val = v;
                up_idx = t;
            }
            if in_low && v < low_val {
                low_val = v;
                low_idx = t;
            }
        }
        (up_val, up_idx, low_val, low_idx)
    };

    let mut iterations = 0;
    let mut residual;
    loop {
        let (m_val, i, big_m_val, j) = select(&alpha, &grad);
        residual = m_val - big_m_val;
        if residual < params.tol || i == usize::MAX || j == usize::MAX {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::SolverNonConvergence {
                iterations,
                residual,
                tolerance: params.tol,
            });
        }
        iterations += 1;

        // Step t along the direction (yᵢ·eᵢ, −yⱼ·eⱼ), which preserves yᵀα.
        let curvature = (kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j]).max(1e-12);
        let t_star = residual / curvature;
        let room_i = if y[i] == 1 { c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] == 1 { alpha[j] } else { c - alpha[j] };
        let step = t_star.min(room_i).min(room_j);

        if step >= room_i {
            alpha[i] = if y[i] == 1 { c } else { 0.0 };
        } else {
            alpha[i] += yf[i] * step;
        }
        if step >= room_j {
            alpha[j] = if y[j] == 1 { 0.0 } else { c };
        } else {
            alpha[j] -= yf[j] * step;
        }
        for t in 0..m {
            grad[t] += step * yf[t] * (kernel[t][i] - kernel[t][j]);
        }
    }

    // Bias from free support vectors; fall back to the gap midpoint.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..m {
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += -yf[t] * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let (m_val, _, big_m_val, _) = select(&alpha, &grad);
        -(m_val + big_m_val) / 2.0
    };

    Ok(SmoSolution {
        alpha,
        bias,
        iterations,
        residual,
    })
}

/// Largest violation of the KKT optimality conditions, evaluated directly
/// from the data (independent of the solver's gradient bookkeeping).
pub fn kkt_violation(
    x: &[Vec<f64>],
    y: &[i8],
    alpha: &[f64],
    bias: f64,
    c: f64,
    gamma: f64,
) -> f64 {
    let m = x.len();
    let mut worst = 0.0f64;
    for i in 0..m {
        let u: f64 = (0..m)
            .map(|j| alpha[j] * f64::from(y[j]) * rbf_kernel(&x[j], &x[i], gamma))
            .sum();
        let margin = f64::from(y[i]) * (u + bias);
        let v = if alpha[i] <= 1e-9 {
            (1.0 - margin).max(0.0)
        } else if alpha[i] >= c - 1e-9 {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Dual objective `½ αᵀQα − eᵀα`.
pub fn dual_objective(x: &[Vec<f64>], y: &[i8], alpha: &[f64], gamma: f64) -> f64 {
    let m = x.len();
    let mut quad = 0.0;
    for i in 0..m {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            if alpha[j] == 0.0 {
                continue;
            }
            quad += alpha[i]
                * alpha[j]
                * f64::from(y[i])
                * f64::from(y[j])
                * rbf_kernel(&x[i], &x[j], gamma);
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Stratified k-fold assignment: per-class shuffle, then round-robin deal.
/// Returns `k` disjoint index sets covering `0..y.len()`.
pub fn stratified_folds(y: &[i8], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    let mut stream = rng::derived_stream(seed, rng::tags::CV_FOLDS, 0);
    for class in [1i8, -1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut stream);
        for (pos, idx) in members.into_iter().enumerate() {
            folds[pos % k].push(idx);
        }
    }
    folds
}
