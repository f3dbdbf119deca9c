//! Synthetic cross-category edge injection.

use rand::seq::SliceRandom;

use super::{Graph, UNLABELED};
use crate::error::{Error, Result};
use crate::rng;

/// Which endpoints of an injected edge must belong to the selected subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRule {
    /// Both endpoints inside the selected subset (the stricter reading).
    #[default]
    Both,
    /// At least one endpoint inside the selected subset.
    AtLeastOne,
}

/// Rounds half away from zero.
pub(crate) fn round_half_away(x: f64) -> usize {
    x.abs().round() as usize
}

/// Adds `round(ratio * |E|)` undirected cross-category edges whose endpoints
/// satisfy `rule` with respect to a random `node_fraction` subset of nodes.
///
/// Added edges connect nodes of different categories, duplicate no existing
/// or added edge, and leave features, labels, and splits unchanged. Nodes
/// without a label cannot participate. Deterministic given `seed`.
pub fn inject_cross_category_edges(
    g: &Graph,
    ratio: f64,
    node_fraction: f64,
    seed: u64,
    rule: EndpointRule,
) -> Result<Graph> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Validation(format!(
            "injection ratio must lie in (0, 1], got {ratio}"
        )));
    }
    if !(node_fraction > 0.0 && node_fraction <= 1.0) {
        return Err(Error::Validation(format!(
            "node fraction must lie in (0, 1], got {node_fraction}"
        )));
    }
    let n = g.node_count();
    let target = round_half_away(ratio * g.adjacency().edge_count() as f64);

    let mut stream = rng::derived_stream(seed, rng::tags::INJECT, 0);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut stream);
    let subset_size = round_half_away(node_fraction * n as f64).min(n);
    let mut selected = vec![false; n];
    for &u in &nodes[..subset_size] {
        selected[u] = true;
    }

    // Enumerate every legal pair once, then draw without replacement; exact
    // shortfall detection and no rejection-sampling stalls.
    let labels = g.labels();
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for u in 0..n {
        if labels[u] == UNLABELED {
            continue;
        }
        for v in (u + 1)..n {
            if labels[v] == UNLABELED || labels[u] == labels[v] {
                continue;
            }
            let eligible = match rule {
                EndpointRule::Both => selected[u] && selected[v],
                EndpointRule::AtLeastOne => selected[u] || selected[v],
            };
            if eligible && !g.adjacency().has_edge(u, v) {
                candidates.push((u, v));
            }
        }
    }
    if candidates.len() < target {
        return Err(Error::Generation(format!(
            "needed {target} cross-category edges but only {} legal pairs exist \
             within the selected subset (short by {})",
            candidates.len(),
            target - candidates.len()
        )));
    }
    let (chosen, _) = candidates.partial_shuffle(&mut stream, target);

    let mut edges: Vec<(usize, usize)> = g.adjacency().undirected_edges().collect();
    edges.extend_from_slice(chosen);
    g.with_edges(&edges)
}
