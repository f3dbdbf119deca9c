//! Ranking analyses over per-node scores and the factor ablation study.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::appnp::PredictionBundle;
use crate::cgi::{train_choice_model_subset, ChoiceDataset, ChoiceModelConfig, Factor};
use crate::error::{Error, Result};
use crate::graph::UNLABELED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    Ascending,
    Descending,
}

/// Stable ranking permutation: positions sorted by score (ties by index).
pub fn rank_nodes(scores: &[f64], order: SortOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let cmp = scores[a].partial_cmp(&scores[b]).expect("finite scores");
        let cmp = match order {
            SortOrder::Ascending => cmp,
            SortOrder::Descending => cmp.reverse(),
        };
        cmp.then(a.cmp(&b))
    });
    idx
}

/// Contiguous group sizes: equal sizes with the remainder distributed to the
/// earliest groups.
pub fn group_sizes(n: usize, groups: usize) -> Vec<usize> {
    let base = n / groups;
    let extra = n % groups;
    (0..groups)
        .map(|g| base + usize::from(g < extra))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecileRow {
    pub group: usize,
    pub size: usize,
    pub accuracy: f64,
}

/// Ranks nodes by score, splits them into `groups` contiguous groups, and
/// returns per-group accuracy.
pub fn decile_analysis(
    scores: &[f64],
    correctness: &[bool],
    groups: usize,
    order: SortOrder,
) -> Result<Vec<DecileRow>> {
    if scores.len() != correctness.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} correctness flags",
            scores.len(),
            correctness.len()
        )));
    }
    if groups == 0 || scores.len() < groups {
        return Err(Error::Validation(format!(
            "cannot split {} nodes into {groups} groups",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Validation("scores must be finite".into()));
    }
    let ranked = rank_nodes(scores, order);
    let sizes = group_sizes(scores.len(), groups);
    let mut rows = Vec::with_capacity(groups);
    let mut cursor = 0usize;
    for (group, &size) in sizes.iter().enumerate() {
        let members = &ranked[cursor..cursor + size];
        let hits = members.iter().filter(|&&i| correctness[i]).count();
        rows.push(DecileRow {
            group,
            size,
            accuracy: hits as f64 / size as f64,
        });
        cursor += size;
    }
    Ok(rows)
}

/// Overlap ratios between the groupings induced by two rankings.
///
/// Entry (i, j) is `|group_i(a) ∩ group_j(b)| / |group_i(a)|`; with equal
/// group sizes every row sums to 1.
pub fn overlap_matrix(rank_a: &[usize], rank_b: &[usize], groups: usize) -> Result<Array2<f64>> {
    let n = rank_a.len();
    if rank_b.len() != n {
        return Err(Error::Validation(format!(
            "rankings cover {n} and {} nodes",
            rank_b.len()
        )));
    }
    if groups == 0 || n < groups {
        return Err(Error::Validation(format!(
            "cannot split {n} nodes into {groups} groups"
        )));
    }
    let check_perm = |rank: &[usize]| -> Result<()> {
        let mut seen = vec![false; n];
        for &i in rank {
            if i >= n || seen[i] {
                return Err(Error::Validation("ranking is not a permutation".into()));
            }
            seen[i] = true;
        }
        Ok(())
    };
    check_perm(rank_a)?;
    check_perm(rank_b)?;

    let sizes = group_sizes(n, groups);
    let group_of = |rank: &[usize]| {
        let mut assignment = vec![0usize; n];
        let mut cursor = 0;
        for (g, &size) in sizes.iter().enumerate() {
            for &node in &rank[cursor..cursor + size] {
                assignment[node] = g;
            }
            cursor += size;
        }
        assignment
    };
    let in_a = group_of(rank_a);
    let in_b = group_of(rank_b);

    let mut counts = Array2::<f64>::zeros((groups, groups));
    for node in 0..n {
        counts[(in_a[node], in_b[node])] += 1.0;
    }
    for (i, mut row) in counts.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|c| c / sizes[i] as f64);
    }
    Ok(counts)
}

/// Accuracy of the per-node best choice between ẑ and ẑˢ: the fraction of
/// labeled nodes in `eval_set` where either classification is correct.
pub fn oracle_bound(bundle: &PredictionBundle, labels: &[i64], eval_set: &[usize]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for &i in eval_set {
        if labels[i] == UNLABELED {
            continue;
        }
        total += 1;
        let z = labels[i] as usize;
        if bundle.z_hat[i] == z || bundle.z_self[i] == z {
            hit += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let ranks = |vals: &[f64]| -> Vec<f64> {
        let order = rank_nodes(vals, SortOrder::Ascending);
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && vals[order[j + 1]] == vals[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &node in &order[i..=j] {
                ranks[node] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mean;
        let dy = ry[i] - mean;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return 0.0;
    }
    cov / (var_x * var_y).sqrt()
}

/// One ablation round: the factor dropped (None = all factors kept) and the
/// resulting choice accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub dropped: Option<Factor>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Accuracy of always keeping the original classification.
    pub majority_reference: f64,
}

/// Cross-validated choice accuracy of the model with each named factor
/// removed in turn, next to the all-factors run and the majority reference.
///
/// Accuracy is the best cross-validation accuracy over the grid; tiny
/// datasets that cannot be folded fall back to training accuracy.
pub fn ablate_factors(
    data: &ChoiceDataset,
    factors_to_drop: &[Factor],
    cfg: &ChoiceModelConfig,
) -> Result<AblationReport> {
    let mut rows = Vec::new();
    let run = |dropped: Option<Factor>| -> Result<AblationRow> {
        let keep: Vec<Factor> = Factor::ALL
            .into_iter()
            .filter(|f| Some(*f) != dropped)
            .collect();
        let model = train_choice_model_subset(data, &keep, cfg)?;
        let accuracy = if model.cv_table.is_empty() {
            let correct = data
                .rows
                .iter()
                .filter(|r| {
                    (crate::cgi::choice_decision(&model, &r.factors) >= 0.0) == (r.label == 1)
                })
                .count();
            correct as f64 / data.rows.len() as f64
        } else {
            model
                .cv_table
                .iter()
                .map(|e| e.accuracy)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        Ok(AblationRow { dropped, accuracy })
    };

    rows.push(run(None)?);
    for &f in factors_to_drop {
        rows.push(run(Some(f))?);
    }
    Ok(AblationReport {
        rows,
        majority_reference: data.majority_reference(),
    })
}
