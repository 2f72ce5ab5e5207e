//! Semi-supervised node classification with a two-layer GCN, targeted DICE
//! topology attacks, and correction of attacked nodes by copying them onto
//! structurally similar donors.
//!
//! ```
//! use gcnshield_core::synthetic::{planted_partition, SyntheticConfig};
//! use gcnshield_core::{Graph, NormalizedAdjacency};
//!
//! let ds = planted_partition(&SyntheticConfig::default()).unwrap();
//! let a_hat = NormalizedAdjacency::new(&ds.graph);
//! assert_eq!(a_hat.n_nodes(), ds.graph.n_nodes());
//! # let _: &Graph = &ds.graph;
//! ```

pub mod attack;
pub mod checkpoint;
pub mod data;
pub mod dataset;
pub mod defense;
pub mod embedding;
mod error;
pub mod eval;
pub mod gcn;
pub mod graph;
pub mod optim;
pub mod rng;
pub mod sparse;
pub mod synthetic;

pub use attack::{dice_attack, AttackConfig, AttackReport, Severity, TargetEdit};
pub use data::{sample_split, FeatureMatrix, LabelVector, NodeSplit};
pub use dataset::{load_dataset, read_bundle, write_bundle, Dataset};
pub use defense::{Aggregation, CopyPrediction, CorrectionAudit, DefenseConfig, NodeCopying};
pub use embedding::{DistanceMatrix, Embedder, EmbeddingMatrix, GvaeConfig, GvaeModel};
pub use error::{Error, Result};
pub use eval::{
    run_experiment, run_trial, summarize, ExperimentConfig, Method, RunOptions, SummaryTable, TrialResult,
};
pub use gcn::{GcnModel, MlpModel, SoftmaxOutput, TrainConfig};
pub use graph::{Graph, NodeId, NormalizedAdjacency};
