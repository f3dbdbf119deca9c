//! Planted-partition graphs with class-correlated Gaussian features.
//!
//! The generator backs the synthetic-discrepancy experiments: a homophilous
//! stochastic-block-model graph whose features carry enough signal for a
//! feature-only classifier, while the graph adds accuracy on top.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Splits};
use crate::rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub nodes: usize,
    pub classes: usize,
    pub feature_dim: usize,
    /// Edge probability inside a block.
    pub p_intra: f64,
    /// Edge probability across blocks.
    pub p_inter: f64,
    /// Standard deviation of the per-node Gaussian noise around the class
    /// mean (class means are standard normal draws).
    pub feature_noise: f64,
    pub train_per_class: usize,
    pub valid_count: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            nodes: 1500,
            classes: 6,
            feature_dim: 24,
            p_intra: 0.009,
            p_inter: 0.0005,
            feature_noise: 1.8,
            train_per_class: 20,
            valid_count: 500,
        }
    }
}

/// Draws a labeled planted-partition graph. Deterministic given `seed`.
pub fn planted_partition(cfg: &SyntheticConfig, seed: u64) -> Result<Graph> {
    let n = cfg.nodes;
    let l = cfg.classes;
    if n == 0 || l == 0 || cfg.feature_dim == 0 {
        return Err(Error::Validation(
            "synthetic graph needs nodes, classes, and features".into(),
        ));
    }
    if cfg.train_per_class * l + cfg.valid_count > n {
        return Err(Error::Validation(format!(
            "splits need {} nodes but the graph has {n}",
            cfg.train_per_class * l + cfg.valid_count
        )));
    }
    let mut stream = rng::derived_stream(seed, rng::tags::SYNTH, 0);

    // Balanced labels in random placement.
    let mut labels: Vec<i64> = (0..n).map(|i| (i % l) as i64).collect();
    labels.shuffle(&mut stream);

    let normal = StandardNormal;
    let means: Vec<Vec<f64>> = (0..l)
        .map(|_| (0..cfg.feature_dim).map(|_| normal.sample(&mut stream)).collect())
        .collect();
    let features = Array2::from_shape_fn((n, cfg.feature_dim), |(i, d)| {
        means[labels[i] as usize][d] + cfg.feature_noise * {
            let v: f64 = normal.sample(&mut stream);
            v
        }
    });

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] {
                cfg.p_intra
            } else {
                cfg.p_inter
            };
            if stream.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    // Per-class train picks, then a random validation set from the rest.
    let mut train = Vec::new();
    let mut remaining = Vec::new();
    for class in 0..l as i64 {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut stream);
        if members.len() < cfg.train_per_class {
            return Err(Error::Generation(format!(
                "class {class} has only {} members, need {} for training",
                members.len(),
                cfg.train_per_class
            )));
        }
        train.extend_from_slice(&members[..cfg.train_per_class]);
        remaining.extend_from_slice(&members[cfg.train_per_class..]);
    }
    remaining.sort_unstable();
    remaining.shuffle(&mut stream);
    let valid: Vec<usize> = remaining[..cfg.valid_count].to_vec();
    let test: Vec<usize> = remaining[cfg.valid_count..].to_vec();
    train.sort_unstable();
    let mut valid = valid;
    valid.sort_unstable();
    let mut test = test;
    test.sort_unstable();

    Graph::new(
        features,
        &edges,
        labels,
        l,
        Splits { train, valid, test },
    )
}
