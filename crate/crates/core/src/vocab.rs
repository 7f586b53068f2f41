//! Operator vocabulary and numeric graph encoding.
//!
//! Node feature layout (width [`NUM_FEATURES`]):
//!
//! | columns | meaning |
//! |---------|---------|
//! | 0..10   | one-hot [`NodeKind`] in [`NodeKind::ALL`] order |
//! | 10      | literal flag |
//! | 11      | `ln(1 + out_degree)` over all edge types |
//! | 12      | operator slot: vocabulary index, 0 for empty or out-of-vocabulary |

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{CodePropertyGraph, EdgeType, FunctionCorpus, NodeKind, Provenance};

/// Index reserved for unknown and empty tokens.
pub const OOV_INDEX: u32 = 0;
/// Features consumed densely by the input projection.
pub const DENSE_FEATURES: usize = NodeKind::COUNT + 2;
/// Dense features plus the operator slot.
pub const NUM_FEATURES: usize = DENSE_FEATURES + 1;
pub const LITERAL_COLUMN: usize = NodeKind::COUNT;
pub const DEGREE_COLUMN: usize = NodeKind::COUNT + 1;
pub const OP_COLUMN: usize = DENSE_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabEntry {
    pub index: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VocabError {
    EmptyCorpus,
    /// Indices are not exactly `1..=N`.
    NonDenseIndices,
}

impl fmt::Display for VocabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabError::EmptyCorpus => f.write_str("cannot build a vocabulary from an empty corpus"),
            VocabError::NonDenseIndices => f.write_str("operator indices must be dense 1..N with 0 reserved"),
        }
    }
}

impl core::error::Error for VocabError {}

/// Operator token statistics with dense indices `1..=N`; index 0 is reserved
/// for out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorVocabulary {
    /// Revision number, recorded in datasets and models built against it.
    pub version: u32,
    pub min_count: u64,
    entries: BTreeMap<String, VocabEntry>,
}

impl OperatorVocabulary {
    pub const DEFAULT_VERSION: u32 = 1;

    /// Counts every non-empty operator token in the corpus and keeps those
    /// seen at least `min_count` times. Indices go by descending count, then
    /// ascending token.
    pub fn build(corpus: &FunctionCorpus, min_count: u64) -> Result<Self, VocabError> {
        if corpus.is_empty() {
            return Err(VocabError::EmptyCorpus);
        }
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for n in corpus.functions.iter().flat_map(|g| g.nodes.iter()) {
            if !n.op_token.is_empty() {
                *counts.entry(n.op_token.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let entries = kept
            .into_iter()
            .enumerate()
            .map(|(i, (tok, count))| {
                (
                    String::from(tok),
                    VocabEntry {
                        index: i as u32 + 1,
                        count,
                    },
                )
            })
            .collect();
        Ok(OperatorVocabulary {
            version: Self::DEFAULT_VERSION,
            min_count,
            entries,
        })
    }

    /// Rebuilds a vocabulary from stored entries, checking index density.
    pub fn from_entries(
        version: u32,
        min_count: u64,
        entries: BTreeMap<String, VocabEntry>,
    ) -> Result<Self, VocabError> {
        let mut seen = alloc::vec![false; entries.len()];
        for e in entries.values() {
            let i = e.index as usize;
            if i == 0 || i > seen.len() || seen[i - 1] {
                return Err(VocabError::NonDenseIndices);
            }
            seen[i - 1] = true;
        }
        Ok(OperatorVocabulary {
            version,
            min_count,
            entries,
        })
    }

    pub fn with_version(mut self, version: u32) -> Self {
        self.version = version;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, VocabEntry> {
        &self.entries
    }

    pub fn get(&self, token: &str) -> Option<VocabEntry> {
        self.entries.get(token).copied()
    }

    /// Vocabulary index of a token, or [`OOV_INDEX`].
    pub fn index_of(&self, token: &str) -> u32 {
        self.entries.get(token).map_or(OOV_INDEX, |e| e.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EncodedEdge {
    pub src: usize,
    pub dst: usize,
    pub etype: EdgeType,
}

/// A graph ready for the model: dense node indices ordered by original node id.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedGraph {
    pub function_name: String,
    pub address: String,
    pub provenance: Provenance,
    pub node_features: Vec<[f64; NUM_FEATURES]>,
    pub edge_index: Vec<EncodedEdge>,
    pub family_id: Option<u32>,
}

impl EncodedGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn op_slot(&self, node: usize) -> usize {
        self.node_features[node][OP_COLUMN] as usize
    }

    pub fn max_op_slot(&self) -> usize {
        (0..self.num_nodes()).map(|v| self.op_slot(v)).max().unwrap_or(0)
    }

    pub fn display_name(&self) -> String {
        crate::graph::display_name(&self.function_name, &self.address)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeError {
    Oversized {
        function: String,
        nodes: usize,
        max_nodes: usize,
    },
    DanglingEdge {
        function: String,
        id: u64,
    },
}

impl fmt::Display for EncodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodeError::Oversized {
                function,
                nodes,
                max_nodes,
            } => write!(
                f,
                "function `{function}` has {nodes} nodes, above the limit of {max_nodes}"
            ),
            EncodeError::DanglingEdge { function, id } => write!(
                f,
                "function `{function}` has an edge referencing missing node {id}"
            ),
        }
    }
}

impl core::error::Error for EncodeError {}

/// Encodes one graph. Node order is ascending original id, so the result does
/// not depend on the order nodes or edges are stored in.
pub fn encode(
    graph: &CodePropertyGraph,
    vocab: &OperatorVocabulary,
    max_nodes: usize,
) -> Result<EncodedGraph, EncodeError> {
    if graph.is_oversized(max_nodes) {
        return Err(EncodeError::Oversized {
            function: graph.function_name.clone(),
            nodes: graph.nodes.len(),
            max_nodes,
        });
    }
    let mut order: Vec<&crate::graph::CpgNode> = graph.nodes.iter().collect();
    order.sort_by_key(|n| n.id);
    let dense: BTreeMap<u64, usize> = order.iter().enumerate().map(|(i, n)| (n.id, i)).collect();

    let mut edge_index = Vec::with_capacity(graph.edges.len());
    for e in &graph.edges {
        let lookup = |id: u64| {
            dense.get(&id).copied().ok_or(EncodeError::DanglingEdge {
                function: graph.function_name.clone(),
                id,
            })
        };
        edge_index.push(EncodedEdge {
            src: lookup(e.src)?,
            dst: lookup(e.dst)?,
            etype: e.etype,
        });
    }
    edge_index.sort();
    edge_index.dedup();

    let mut out_degree = alloc::vec![0usize; order.len()];
    for e in &edge_index {
        out_degree[e.src] += 1;
    }

    let node_features = order
        .iter()
        .zip(&out_degree)
        .map(|(n, &deg)| {
            let mut row = [0.0; NUM_FEATURES];
            row[n.kind.index()] = 1.0;
            if n.kind == NodeKind::Literal {
                row[LITERAL_COLUMN] = 1.0;
            }
            row[DEGREE_COLUMN] = libm::log1p(deg as f64);
            row[OP_COLUMN] = f64::from(vocab.index_of(&n.op_token));
            row
        })
        .collect();

    Ok(EncodedGraph {
        function_name: graph.function_name.clone(),
        address: graph.address.clone(),
        provenance: graph.provenance.clone(),
        node_features,
        edge_index,
        family_id: None,
    })
}
