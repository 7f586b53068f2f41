//! Allocation-only core of the regraph binary function similarity toolkit.
//!
//! Functions recovered from binaries are represented as code property graphs
//! ([`graph::CodePropertyGraph`]), encoded into numeric node features against an
//! operator vocabulary ([`vocab`]), embedded by a message-passing graph neural
//! network ([`model`]) and compared with the Pearson correlation coefficient
//! ([`pearson`]). Ranking, Recall@K and the before/after improvement table live in
//! [`rank`] and [`metrics`].
//!
//! Everything here is pure computation over in-memory values. File formats,
//! external tool orchestration and the command line live in the `regraph` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pearson;
pub mod rank;
pub mod synth;
pub mod train;
pub mod vocab;

pub use graph::{
    CodePropertyGraph, CpgEdge, CpgNode, EdgeType, FunctionCorpus, GraphError, NodeKind, Provenance,
};
pub use model::{FunctionEmbedding, GnnModel, Hyper, ModelError};
pub use pearson::{pearson, SimilarityError};
pub use vocab::{EncodedGraph, OperatorVocabulary};

/// Default upper bound on nodes per function graph.
pub const DEFAULT_MAX_NODES: usize = 5000;
