//! Surrogate-assisted weight-sharing architecture search.
//!
//! Sub-network accuracies read off a shared super-network carry an
//! architecture-specific random error. This crate fits a graph convolutional
//! regressor over the graph of architectures at cell-level Hamming distance 1,
//! uses its predictions to rank a whole subspace, and re-verifies the
//! top-ranked pool with the evaluator before committing. The search proceeds
//! segment by segment, carrying the top candidates of each round forward as
//! a super-cell.

pub mod arch_graph;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod gcn;
pub mod metrics;
pub mod report;
pub mod search;
pub mod search_space;
pub mod seeds;
pub mod sparse;

pub use error::{Error, Result};
