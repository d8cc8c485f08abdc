//! Joint neighbor-graph learning and feature propagation for graph-based
//! semi-supervised node classification, trained end-to-end.
//!
//! The pipeline: pairwise Euclidean distances are computed once from the raw
//! features; each network layer solves a per-row simplex-constrained graph
//! problem coupled to the current features, diffuses features over the
//! learned graph with a one-step power iteration, and applies a trainable
//! linear map. Training minimizes a semi-supervised cross-entropy via
//! reverse-mode differentiation on a recording tape, optionally unrolled
//! through the graph construction itself.
//!
//! Modules:
//! - [`numkit`]: dense matrices and the differentiation tape
//! - [`graphlearn`]: distances, simplex projection, adaptive and kNN graphs
//! - [`propagation`]: fixed-graph and adaptive feature propagation
//! - [`model`]: the layered network, loss, and gradients
//! - [`train`]: Glorot init, Adam, the training loop, metrics
//! - [`data`]: loaders, stratified splits, synthetic generators
//! - [`oracles`]: slow independent references used by tests

pub mod data;
pub mod error;
pub mod graphlearn;
pub mod model;
pub mod numkit;
pub mod oracles;
pub mod propagation;
pub mod train;

pub use data::Dataset;
pub use error::{Error, Result};
pub use graphlearn::{
    AffinityMatrix, DistanceMatrix, GammaMode, GraphMode, SStepSolution, SparseRowSolution,
    ThresholdRule,
};
pub use model::{LabeledSplit, ModelState, Variant};
pub use numkit::{Matrix, Tape};
pub use propagation::{GradMode, HyperParams};
pub use train::{AdamState, EpochRecord, FitOutcome, RunMetrics, TrainConfig};
