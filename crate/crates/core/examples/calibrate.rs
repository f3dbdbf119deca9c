//! Scratch harness for tuning the synthetic experiment constants.

use cgi_core::config::{InjectionConfig, RunConfig};
use cgi_core::graph::EndpointRule;
use cgi_core::harness::run_multi_seed;
use cgi_core::synth::SyntheticConfig;

fn main() {
    let seeds: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let base = RunConfig {
        seed: 42,
        synthetic: Some(SyntheticConfig::default()),
        epochs: 500,
        ..RunConfig::default()
    };
    for ratio in [0.0, 0.1, 0.3, 0.5] {
        let mut cfg = base.clone();
        if ratio > 0.0 {
            cfg.injection = Some(InjectionConfig {
                ratio,
                node_fraction: 0.5,
                endpoint_rule: EndpointRule::AtLeastOne,
            });
        }
        let t0 = std::time::Instant::now();
        let agg = run_multi_seed(&cfg, seeds).unwrap();
        let m = agg.mean;
        let conflicts: Vec<usize> = agg.per_seed.iter().map(|r| r.conflict.count).collect();
        let fallbacks: usize = agg
            .per_seed
            .iter()
            .filter(|r| r.choice_model.as_ref().map(|c| c.fallback).unwrap_or(true))
            .count();
        let mean_of = |f: &dyn Fn(&cgi_core::harness::MetricsReport) -> Option<f64>| {
            let vals: Vec<f64> = agg.per_seed.iter().filter_map(f).collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        };
        let choice_acc = mean_of(&|r| r.conflict.choice_accuracy);
        let majority = mean_of(&|r| r.conflict.majority_choice_accuracy);
        let svm_params: Vec<(f64, f64, usize)> = agg
            .per_seed
            .iter()
            .filter_map(|r| {
                r.choice_model
                    .as_ref()
                    .and_then(|c| Some((c.c?, c.gamma?, c.training_size)))
            })
            .collect();
        println!(
            "rho={ratio:.1} appnp={:.3} self={:.3} ens={:.3} lway={:.3} cgi={:.3} oracle={:.3} conflicts={conflicts:?} fallbacks={fallbacks} choice={choice_acc:.3} majority={majority:.3} svm={svm_params:?} ({:.1}s)",
            m.appnp, m.self_only, m.ensemble, m.lway, m.cgi, m.oracle_bound,
            t0.elapsed().as_secs_f64()
        );
    }
}
