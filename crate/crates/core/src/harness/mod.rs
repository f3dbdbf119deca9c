//! End-to-end experiment driver.
//!
//! A pipeline run trains the classifier, computes the original and
//! post-intervention predictions, estimates Monte-Carlo causal uncertainty,
//! builds the choice dataset on labeled candidates, trains the choice model,
//! applies the choice rule on the test split, and collects every accuracy,
//! analysis, and dump needed by the reports.

mod analysis;
mod pilot;
mod report;

pub use analysis::{
    ablate_factors, decile_analysis, group_sizes, oracle_bound, overlap_matrix, rank_nodes,
    spearman, AblationReport, AblationRow, DecileRow, SortOrder,
};
pub use pilot::{trust_feature_experiment, TrustReport};
pub use report::{emit_report, validate_report};

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::appnp::{train, AppnpModel, PredictionBundle, TrainLog};
use crate::cgi::{
    build_choice_dataset, cgi_predict, ensemble_predict, estimate_causal_uncertainty,
    extract_all_factors, lway_baseline, train_choice_model, ChoiceModel, CvEntry, FactorVector,
    LwayConfig,
};
use crate::config::{ChoiceCandidates, RunConfig};
use crate::error::{Error, Result};
use crate::graph::{
    accuracy, compute_transition_matrix, inject_cross_category_edges, load_graph, Graph,
    TransitionMatrix, UNLABELED,
};
use crate::synth::planted_partition;

pub const SCHEMA_VERSION: u32 = 1;
const DECILE_GROUPS: usize = 10;
/// Below this many choice examples the mechanism falls back to the original
/// prediction.
pub const MIN_CHOICE_EXAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MethodAccuracy {
    pub appnp: f64,
    pub self_only: f64,
    pub ensemble: f64,
    pub lway: f64,
    pub cgi: f64,
    pub oracle_bound: f64,
}

impl MethodAccuracy {
    fn as_array(&self) -> [f64; 6] {
        [
            self.appnp,
            self.self_only,
            self.ensemble,
            self.lway,
            self.cgi,
            self.oracle_bound,
        ]
    }

    fn from_array(v: [f64; 6]) -> Self {
        MethodAccuracy {
            appnp: v[0],
            self_only: v[1],
            ensemble: v[2],
            lway: v[3],
            cgi: v[4],
            oracle_bound: v[5],
        }
    }
}

/// Relative improvement of the CGI prediction, reported against both
/// reference methods.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RelativeImprovement {
    pub over_appnp: f64,
    pub over_ensemble: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictStats {
    /// Test nodes whose original and post-intervention classes disagree.
    pub count: usize,
    pub test_size: usize,
    /// Fraction of labeled test conflicts where the final choice is correct.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice_accuracy: Option<f64>,
    /// Reference: fraction of labeled test conflicts where always keeping ẑ
    /// is correct.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub majority_choice_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiceSummary {
    pub fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub support_vectors: usize,
    pub training_size: usize,
    pub cv_table: Vec<CvEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub uncertainty_seconds: f64,
    pub choice_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub seed: u64,
    pub accuracy: MethodAccuracy,
    pub relative_improvement: RelativeImprovement,
    pub conflict: ConflictStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice_model: Option<ChoiceSummary>,
    /// Spearman correlation between decile index (graph_var ascending) and
    /// decile accuracy on the test split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decile_spearman_graph_var: Option<f64>,
    pub timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Valid,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRow {
    pub node: usize,
    pub split: SplitName,
    pub z_hat: usize,
    pub z_self: usize,
    pub z_ensemble: usize,
    pub z_lway: usize,
    pub z_cgi: usize,
    pub conflict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_self: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecileTable {
    pub ranking: String,
    pub rows: Vec<DecileRow>,
}

/// Everything a run produces; [`emit_report`] turns it into files.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: MetricsReport,
    pub model: AppnpModel,
    pub choice_model: Option<ChoiceModel>,
    pub bundle: PredictionBundle,
    pub graph_var: Vec<f64>,
    pub factors: Vec<FactorVector>,
    pub transition: TransitionMatrix,
    pub predictions: Vec<PredictionRow>,
    pub losses: TrainLog,
    pub deciles: Vec<DecileTable>,
    pub overlap: Option<Array2<f64>>,
    /// Choice labels by node, for the factor dump.
    pub choice_labels: Vec<(usize, i8)>,
}

/// Loads or generates the graph named by the config and applies the optional
/// cross-category injection.
pub fn prepare_graph(cfg: &RunConfig) -> Result<Graph> {
    let g = if let Some(paths) = &cfg.paths {
        load_graph(&paths.edges, &paths.features, &paths.labels, &paths.splits)
            .map_err(Error::in_stage("load"))?
    } else if let Some(synth) = &cfg.synthetic {
        planted_partition(synth, cfg.seed).map_err(Error::in_stage("synthesize"))?
    } else {
        return Err(Error::Config(
            "config needs either 'paths' or 'synthetic'".into(),
        ));
    };
    match &cfg.injection {
        Some(inj) => inject_cross_category_edges(
            &g,
            inj.ratio,
            inj.node_fraction,
            cfg.seed,
            inj.endpoint_rule,
        )
        .map_err(Error::in_stage("inject")),
        None => Ok(g),
    }
}

fn labeled_subset(g: &Graph, set: &[usize]) -> Vec<usize> {
    set.iter()
        .copied()
        .filter(|&i| g.label(i) != UNLABELED)
        .collect()
}

fn split_assignment(g: &Graph) -> Vec<SplitName> {
    let mut assignment = vec![SplitName::Unsplit; g.node_count()];
    for &i in &g.splits().train {
        assignment[i] = SplitName::Train;
    }
    for &i in &g.splits().valid {
        assignment[i] = SplitName::Valid;
    }
    for &i in &g.splits().test {
        assignment[i] = SplitName::Test;
    }
    assignment
}

/// Runs the full mechanism on an already-prepared graph.
pub fn run_pipeline_on(cfg: &RunConfig, g: &Graph) -> Result<PipelineOutput> {
    let total_clock = Instant::now();
    let mut timing = Timing::default();

    let clock = Instant::now();
    let trained = train(g, &cfg.train_config()).map_err(Error::in_stage("train"))?;
    timing.train_seconds = clock.elapsed().as_secs_f64();
    let model = trained.model;

    let bundle = model.predict_bundle(g).map_err(Error::in_stage("predict"))?;

    let clock = Instant::now();
    let uncertainty = estimate_causal_uncertainty(&model, g, cfg.k_mc, cfg.tau, cfg.seed)
        .map_err(Error::in_stage("uncertainty"))?;
    timing.uncertainty_seconds = clock.elapsed().as_secs_f64();

    let labeled: Vec<usize> = {
        let mut v = g.splits().train.clone();
        v.extend_from_slice(&g.splits().valid);
        v
    };
    let transition =
        compute_transition_matrix(g, &labeled).map_err(Error::in_stage("transition"))?;
    let factors = extract_all_factors(&bundle, &uncertainty.graph_var, &transition);

    let candidates: Vec<usize> = match cfg.choice_candidates {
        ChoiceCandidates::Validation => g.splits().valid.clone(),
        ChoiceCandidates::TrainValidation => labeled.clone(),
    };

    let clock = Instant::now();
    let choice_built = build_choice_dataset(
        &bundle,
        &factors,
        g.labels(),
        &candidates,
        cfg.choice_mode,
    )
    .and_then(|data| {
        if data.len() < MIN_CHOICE_EXAMPLES {
            return Err(Error::DatasetSparsity(format!(
                "{} choice examples, need {MIN_CHOICE_EXAMPLES}",
                data.len()
            )));
        }
        let model = train_choice_model(&data, &cfg.choice_config())?;
        Ok((data, model))
    });
    timing.choice_seconds = clock.elapsed().as_secs_f64();

    let (choice_labels, choice_model, choice_summary) = match choice_built {
        Ok((data, model)) => {
            let summary = ChoiceSummary {
                fallback: false,
                fallback_reason: None,
                c: Some(model.svc.c),
                gamma: Some(model.svc.gamma),
                support_vectors: model.svc.support_vectors.len(),
                training_size: model.training_size,
                cv_table: model.cv_table.clone(),
            };
            let labels: Vec<(usize, i8)> =
                data.rows.iter().map(|r| (r.node, r.label)).collect();
            (labels, Some(model), summary)
        }
        // Sparse or single-class choice data degrades to the original
        // prediction; anything else is a real failure.
        Err(err @ (Error::DatasetSparsity(_) | Error::Validation(_))) => {
            let summary = ChoiceSummary {
                fallback: true,
                fallback_reason: Some(err.to_string()),
                c: None,
                gamma: None,
                support_vectors: 0,
                training_size: 0,
                cv_table: Vec::new(),
            };
            (Vec::new(), None, summary)
        }
        Err(other) => return Err(Error::in_stage("choice")(other)),
    };

    let z_cgi = match &choice_model {
        Some(m) => cgi_predict(&bundle, &factors, m, cfg.threshold),
        None => bundle.z_hat.clone(),
    };
    let z_ens = ensemble_predict(&bundle);
    let lway = lway_baseline(&bundle, g.labels(), &candidates, &LwayConfig::default())
        .map_err(Error::in_stage("lway"))?;

    let test = &g.splits().test;
    let labels = g.labels();
    let acc = MethodAccuracy {
        appnp: accuracy(&bundle.z_hat, labels, test),
        self_only: accuracy(&bundle.z_self, labels, test),
        ensemble: accuracy(&z_ens, labels, test),
        lway: accuracy(&lway.predictions, labels, test),
        cgi: accuracy(&z_cgi, labels, test),
        oracle_bound: oracle_bound(&bundle, labels, test),
    };
    let relative_improvement = RelativeImprovement {
        over_appnp: if acc.appnp > 0.0 {
            (acc.cgi - acc.appnp) / acc.appnp
        } else {
            0.0
        },
        over_ensemble: if acc.ensemble > 0.0 {
            (acc.cgi - acc.ensemble) / acc.ensemble
        } else {
            0.0
        },
    };

    let labeled_test = labeled_subset(g, test);
    let conflict_nodes: Vec<usize> = test
        .iter()
        .copied()
        .filter(|&i| bundle.is_conflict(i))
        .collect();
    let labeled_conflicts: Vec<usize> = conflict_nodes
        .iter()
        .copied()
        .filter(|&i| labels[i] != UNLABELED)
        .collect();
    let conflict_rate = |pred: &[usize]| {
        if labeled_conflicts.is_empty() {
            return None;
        }
        let hits = labeled_conflicts
            .iter()
            .filter(|&&i| pred[i] as i64 == labels[i])
            .count();
        Some(hits as f64 / labeled_conflicts.len() as f64)
    };
    let conflict = ConflictStats {
        count: conflict_nodes.len(),
        test_size: test.len(),
        choice_accuracy: conflict_rate(&z_cgi),
        majority_choice_accuracy: conflict_rate(&bundle.z_hat),
    };

    // Decile and overlap analyses over the labeled test nodes.
    let mut deciles = Vec::new();
    let mut overlap = None;
    let mut decile_spearman_graph_var = None;
    if labeled_test.len() >= DECILE_GROUPS {
        let gv: Vec<f64> = labeled_test
            .iter()
            .map(|&i| uncertainty.graph_var[i])
            .collect();
        let conf: Vec<f64> = labeled_test
            .iter()
            .map(|&i| factors[i].neighbor_conf)
            .collect();
        let correctness: Vec<bool> = labeled_test
            .iter()
            .map(|&i| bundle.z_hat[i] as i64 == labels[i])
            .collect();
        let by_var = decile_analysis(&gv, &correctness, DECILE_GROUPS, SortOrder::Ascending)
            .map_err(Error::in_stage("deciles"))?;
        let accs: Vec<f64> = by_var.iter().map(|r| r.accuracy).collect();
        let idx: Vec<f64> = (0..by_var.len()).map(|i| i as f64).collect();
        decile_spearman_graph_var = Some(spearman(&idx, &accs));
        deciles.push(DecileTable {
            ranking: "graph_var_asc".into(),
            rows: by_var,
        });
        let by_conf = decile_analysis(&conf, &correctness, DECILE_GROUPS, SortOrder::Descending)
            .map_err(Error::in_stage("deciles"))?;
        deciles.push(DecileTable {
            ranking: "neighbor_conf_desc".into(),
            rows: by_conf,
        });
        overlap = Some(
            overlap_matrix(
                &rank_nodes(&gv, SortOrder::Ascending),
                &rank_nodes(&conf, SortOrder::Descending),
                DECILE_GROUPS,
            )
            .map_err(Error::in_stage("overlap"))?,
        );
    }

    let splits = split_assignment(g);
    let predictions: Vec<PredictionRow> = (0..g.node_count())
        .map(|i| PredictionRow {
            node: i,
            split: splits[i],
            z_hat: bundle.z_hat[i],
            z_self: bundle.z_self[i],
            z_ensemble: z_ens[i],
            z_lway: lway.predictions[i],
            z_cgi: z_cgi[i],
            conflict: bundle.is_conflict(i),
            y_hat: cfg
                .dump_probabilities
                .then(|| bundle.y_hat.row(i).to_vec()),
            y_self: cfg
                .dump_probabilities
                .then(|| bundle.y_self.row(i).to_vec()),
        })
        .collect();

    timing.total_seconds = total_clock.elapsed().as_secs_f64();
    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        accuracy: acc,
        relative_improvement,
        conflict,
        choice_model: Some(choice_summary),
        decile_spearman_graph_var,
        timing,
    };

    Ok(PipelineOutput {
        report,
        model,
        choice_model,
        bundle,
        graph_var: uncertainty.graph_var,
        factors,
        transition,
        predictions,
        losses: trained.log,
        deciles,
        overlap,
        choice_labels,
    })
}

/// Prepares the graph and runs the pipeline.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput> {
    let g = prepare_graph(cfg)?;
    run_pipeline_on(cfg, &g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub mean: MethodAccuracy,
    pub std: MethodAccuracy,
    pub per_seed: Vec<MetricsReport>,
}

/// Runs the pipeline `num_seeds` times on one fixed graph, varying only the
/// training/inference seed (`seed`, `seed+1`, ...), and aggregates mean and
/// standard deviation per method.
pub fn run_multi_seed(cfg: &RunConfig, num_seeds: usize) -> Result<MultiSeedReport> {
    if num_seeds == 0 {
        return Err(Error::Config("num_seeds must be positive".into()));
    }
    let g = prepare_graph(cfg)?;
    let mut per_seed = Vec::with_capacity(num_seeds);
    let mut seeds = Vec::with_capacity(num_seeds);
    for s in 0..num_seeds as u64 {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = cfg.seed + s;
        seeds.push(run_cfg.seed);
        per_seed.push(run_pipeline_on(&run_cfg, &g)?.report);
    }

    let mut mean = [0.0f64; 6];
    for r in &per_seed {
        for (m, v) in mean.iter_mut().zip(r.accuracy.as_array()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= num_seeds as f64;
    }
    let mut var = [0.0f64; 6];
    for r in &per_seed {
        for ((v, x), m) in var.iter_mut().zip(r.accuracy.as_array()).zip(mean) {
            *v += (x - m) * (x - m);
        }
    }
    for v in &mut var {
        *v = (*v / num_seeds as f64).sqrt();
    }

    Ok(MultiSeedReport {
        schema_version: SCHEMA_VERSION,
        seeds,
        mean: MethodAccuracy::from_array(mean),
        std: MethodAccuracy::from_array(var),
        per_seed,
    })
}
