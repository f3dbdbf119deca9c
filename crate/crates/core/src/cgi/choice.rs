//! The support-vector choice model and its cross-validated tuning.

use serde::{Deserialize, Serialize};

use super::{ChoiceDataset, Factor, FactorVector};
use crate::error::{Error, Result};
use crate::svm::{smo_fit, stratified_folds, RbfSvc, SmoParams};

/// Hyperparameter search space and training knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiceModelConfig {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// Dual tolerance handed to the SMO solver.
    pub tol: f64,
}

impl Default for ChoiceModelConfig {
    fn default() -> Self {
        ChoiceModelConfig {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![0.01, 0.1, 1.0, 10.0],
            folds: 5,
            seed: 0,
            tol: 1e-3,
        }
    }
}

/// Per-factor mean and scale fitted on the training rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Zero mean, unit population scale; constant columns keep scale 1 so
    /// they pass through unchanged.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut scale = vec![0.0; dim];
        for row in rows {
            for (s, (v, m)) in scale.iter_mut().zip(row.iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scale {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Standardizer { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// One grid evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvEntry {
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
}

/// RBF support-vector choice model with standardization baked in.
///
/// Support vectors are stored standardized; [`choice_decision`] applies the
/// stored standardization to the query before the kernel expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiceModel {
    pub svc: RbfSvc,
    pub standardization: Standardizer,
    /// Which factors feed the model, in input order.
    pub factors: Vec<Factor>,
    pub cv_table: Vec<CvEntry>,
    pub folds_used: usize,
    pub training_size: usize,
}

fn sorted_grid(grid: &[f64], what: &str) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config(format!("{what} grid must be positive")));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

fn fit_on(
    x: &[Vec<f64>],
    y: &[i8],
    keep: &[usize],
    params: &SmoParams,
) -> Result<RbfSvc> {
    let xs: Vec<Vec<f64>> = keep.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<i8> = keep.iter().map(|&i| y[i]).collect();
    let sol = smo_fit(&xs, &ys, params)?;
    Ok(RbfSvc::from_solution(&xs, &ys, &sol, params))
}

/// Trains the choice model on a factor subset (used by the ablation study).
pub fn train_choice_model_subset(
    data: &ChoiceDataset,
    keep: &[Factor],
    cfg: &ChoiceModelConfig,
) -> Result<ChoiceModel> {
    if keep.is_empty() {
        return Err(Error::Validation("cannot drop every factor".into()));
    }
    let y = data.labels();
    let pos = y.iter().filter(|&&l| l == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation(format!(
            "choice data is single-class ({pos} positive, {neg} negative)"
        )));
    }

    let raw: Vec<Vec<f64>> = data.rows.iter().map(|r| r.factors.select(keep)).collect();
    let standardization = Standardizer::fit(&raw);
    let x: Vec<Vec<f64>> = raw.iter().map(|r| standardization.apply(r)).collect();

    let c_grid = sorted_grid(&cfg.c_grid, "C")?;
    let gamma_grid = sorted_grid(&cfg.gamma_grid, "gamma")?;

    // Stratification needs at least two members per class and fold.
    let folds_used = cfg.folds.min(pos).min(neg);
    let mut cv_table = Vec::new();
    let (mut best_c, mut best_gamma) = (c_grid[0], gamma_grid[0]);
    if folds_used >= 2 {
        let folds = stratified_folds(&y, folds_used, cfg.seed);
        let mut best_acc = f64::NEG_INFINITY;
        for &c in &c_grid {
            for &gamma in &gamma_grid {
                let params = SmoParams {
                    c,
                    gamma,
                    tol: cfg.tol,
                    max_iter: 0,
                };
                let mut correct = 0usize;
                for fold in &folds {
                    let mut in_fold = vec![false; y.len()];
                    for &i in fold {
                        in_fold[i] = true;
                    }
                    let train_idx: Vec<usize> =
                        (0..y.len()).filter(|&i| !in_fold[i]).collect();
                    let model = fit_on(&x, &y, &train_idx, &params)?;
                    correct += fold
                        .iter()
                        .filter(|&&i| (model.decision(&x[i]) >= 0.0) == (y[i] == 1))
                        .count();
                }
                let accuracy = correct as f64 / y.len() as f64;
                cv_table.push(CvEntry { c, gamma, accuracy });
                // Strict improvement keeps the smallest C, then smallest
                // gamma, on ties.
                if accuracy > best_acc {
                    best_acc = accuracy;
                    best_c = c;
                    best_gamma = gamma;
                }
            }
        }
    }

    let params = SmoParams {
        c: best_c,
        gamma: best_gamma,
        tol: cfg.tol,
        max_iter: 0,
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let svc = fit_on(&x, &y, &all, &params)?;
    Ok(ChoiceModel {
        svc,
        standardization,
        factors: keep.to_vec(),
        cv_table,
        folds_used,
        training_size: y.len(),
    })
}

/// Trains on all seven factors with stratified cross-validated grid search.
pub fn train_choice_model(data: &ChoiceDataset, cfg: &ChoiceModelConfig) -> Result<ChoiceModel> {
    train_choice_model_subset(data, &Factor::ALL, cfg)
}

/// Decision value `p̂` for one node's factors; its sign (against the
/// threshold) picks between the original and the post-intervention class.
pub fn choice_decision(model: &ChoiceModel, factors: &FactorVector) -> f64 {
    let raw = factors.select(&model.factors);
    model.svc.decision(&model.standardization.apply(&raw))
}
