//! Network-representation learning for default prediction at desk scale.
//!
//! The pipeline mirrors a production risk stack: a sharded adjacency-list
//! graph store, an unsupervised first-order embedding trainer and a
//! supervised neighbor-aggregation classifier (both running mini-batch SGD
//! against a pull/push/barrier parameter store), a gradient-boosted tree
//! ensemble over the concatenated outputs, and Kolmogorov-Smirnov
//! evaluation with default-rate lift reports. A stochastic-block-model
//! generator supplies homophilous benchmark graphs so every experiment is
//! runnable end to end.

pub mod binio;
pub mod embedding;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod graph;
pub mod labels;
pub mod mart;
pub mod math;
pub mod pipeline;
pub mod store;
pub mod sup;
pub mod synth;
pub mod unsup;
pub mod util;

pub use error::{Error, Result};
pub use graph::{NodeId, PartitionedGraph};
