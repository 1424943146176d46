//! Stacked-classifier graph convolutional networks.
//!
//! The pipeline fits classical classifiers on the labelled nodes, combines
//! their per-node class probabilities into an `N × K` matrix, and trains a
//! dense GCN on that matrix in place of the raw node features. Around it sit
//! dataset loaders, a synthetic cluster-graph generator, experiment
//! statistics, and an evaluator for a Rademacher-style generalization bound.

pub mod aggregation;
pub mod bounds;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gcn;
pub mod graph;
pub mod learners;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Graph, NormalizedAdjacency, SplitSpec};
