//! Causal GCN inference (CGI).
//!
//! The crate trains an APPNP-style graph convolutional classifier, computes a
//! post-intervention prediction with the neighborhood blocked, estimates the
//! causal effect of the local structure together with its Monte-Carlo
//! uncertainty, and learns an RBF support-vector choice model that decides per
//! node whether to keep the graph prediction or fall back to the self-only
//! one. A harness module drives the end-to-end experiments and emits JSON/CSV
//! reports.
//!
//! Layers, bottom up:
//!
//! * [`graph`] — immutable graph container, file I/O, symmetric adjacency
//!   normalization, cross-category edge injection, edge-dropout sampling, and
//!   the category transition matrix.
//! * [`nn`] — dense kernels: a two-layer perceptron with inverted dropout,
//!   softmax cross-entropy, an Adam optimizer, and finite-difference gradient
//!   verification.
//! * [`appnp`] — personalized-PageRank propagation, the training loop, and the
//!   Full / Self / Sampled inference modes.
//! * [`svm`] / [`cgi`] — the SMO support-vector solver and the CGI mechanism
//!   built on top of it (causal uncertainty, factors, choice model, baselines).
//! * [`harness`] — pipeline, analyses, pilot study, and report emission.

pub mod appnp;
pub mod cgi;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod graph;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod svm;
pub mod synth;

pub use appnp::{AppnpModel, InferenceMode, PredictionBundle, TrainConfig, TrainLog, TrainOutcome};
pub use cgi::{
    CausalUncertainty, ChoiceDataset, ChoiceModel, Factor, FactorVector, DEFAULT_K_MC, DEFAULT_TAU,
};
pub use config::{DataPaths, RunConfig, SvmConfig};
pub use error::{Error, Result};
pub use graph::{Adjacency, Graph, NormalizedAdjacency, Splits, TransitionMatrix};
pub use harness::{MetricsReport, PipelineOutput};
pub use nn::{MlpParams, OptState};
pub use synth::SyntheticConfig;
