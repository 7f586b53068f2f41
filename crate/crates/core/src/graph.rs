//! In-memory code property graph model.
//!
//! A [`CodePropertyGraph`] holds one function: typed nodes carrying an operator or
//! callee token, and typed edges from the four CPG layers (syntax tree, control
//! flow, data dependence, control dependence).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Coarse syntactic role of a node. Exporter kinds outside this set map to
/// [`NodeKind::Unknown`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Method,
    Block,
    Call,
    Identifier,
    Literal,
    Operator,
    ControlStructure,
    Return,
    Param,
    Unknown,
}

impl NodeKind {
    pub const COUNT: usize = 10;

    pub const ALL: [NodeKind; Self::COUNT] = [
        NodeKind::Method,
        NodeKind::Block,
        NodeKind::Call,
        NodeKind::Identifier,
        NodeKind::Literal,
        NodeKind::Operator,
        NodeKind::ControlStructure,
        NodeKind::Return,
        NodeKind::Param,
        NodeKind::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Method => "METHOD",
            NodeKind::Block => "BLOCK",
            NodeKind::Call => "CALL",
            NodeKind::Identifier => "IDENTIFIER",
            NodeKind::Literal => "LITERAL",
            NodeKind::Operator => "OPERATOR",
            NodeKind::ControlStructure => "CONTROL_STRUCTURE",
            NodeKind::Return => "RETURN",
            NodeKind::Param => "PARAM",
            NodeKind::Unknown => "UNKNOWN",
        }
    }

    /// Parses a kind name; anything unrecognized becomes `Unknown`.
    pub fn parse(s: &str) -> NodeKind {
        NodeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .unwrap_or(NodeKind::Unknown)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    Ast,
    Cfg,
    Ddg,
    Cdg,
}

impl EdgeType {
    pub const COUNT: usize = 4;

    pub const ALL: [EdgeType; Self::COUNT] = [EdgeType::Ast, EdgeType::Cfg, EdgeType::Ddg, EdgeType::Cdg];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Ast => "AST",
            EdgeType::Cfg => "CFG",
            EdgeType::Ddg => "DDG",
            EdgeType::Cdg => "CDG",
        }
    }

    pub fn parse(s: &str) -> Option<EdgeType> {
        EdgeType::ALL.iter().copied().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpgNode {
    /// Unique within the graph; ids may be sparse.
    pub id: u64,
    pub kind: NodeKind,
    /// Operator or callee token, empty if the node has none.
    pub op_token: String,
    /// Source snippet. Informational only.
    pub code: String,
}

impl CpgNode {
    pub fn new(id: u64, kind: NodeKind, op_token: impl Into<String>) -> Self {
        CpgNode {
            id,
            kind,
            op_token: op_token.into(),
            code: String::new(),
        }
    }

    pub fn with_code(mut self, code: impl Into<String>) -> Self {
        self.code = code.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CpgEdge {
    pub src: u64,
    pub dst: u64,
    pub etype: EdgeType,
}

impl CpgEdge {
    pub fn new(src: u64, dst: u64, etype: EdgeType) -> Self {
        CpgEdge { src, dst, etype }
    }
}

/// Where a function came from: `project/architecture/optimization-level`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    pub project: String,
    pub architecture: String,
    pub opt_level: String,
}

impl Provenance {
    pub const UNKNOWN: &'static str = "unknown";

    pub fn new(
        project: impl Into<String>,
        architecture: impl Into<String>,
        opt_level: impl Into<String>,
    ) -> Self {
        Provenance {
            project: project.into(),
            architecture: architecture.into(),
            opt_level: opt_level.into(),
        }
    }

    pub fn unknown() -> Self {
        Provenance::new(Self::UNKNOWN, Self::UNKNOWN, Self::UNKNOWN)
    }
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance::unknown()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    NoNodes {
        function: String,
    },
    DuplicateNodeId {
        function: String,
        id: u64,
    },
    NoMethodRoot {
        function: String,
    },
    DanglingEdge {
        function: String,
        id: u64,
    },
    /// A node has more than one syntax-tree parent.
    AstMultipleParents {
        function: String,
        id: u64,
    },
    AstCycle {
        function: String,
        id: u64,
    },
    /// A syntax-tree root that is not a METHOD node.
    AstRootNotMethod {
        function: String,
        id: u64,
    },
    /// Ground truth does not cover exactly the corpus functions.
    TruthMismatch {
        function: String,
    },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::NoNodes { function } => write!(f, "function `{function}` has no nodes"),
            GraphError::DuplicateNodeId { function, id } => {
                write!(f, "function `{function}` has duplicate node id {id}")
            }
            GraphError::NoMethodRoot { function } => {
                write!(f, "function `{function}` has no METHOD node")
            }
            GraphError::DanglingEdge { function, id } => write!(
                f,
                "function `{function}` has an edge referencing missing node {id}"
            ),
            GraphError::AstMultipleParents { function, id } => {
                write!(f, "function `{function}`: node {id} has more than one AST parent")
            }
            GraphError::AstCycle { function, id } => {
                write!(f, "function `{function}`: AST cycle through node {id}")
            }
            GraphError::AstRootNotMethod { function, id } => {
                write!(f, "function `{function}`: AST root {id} is not a METHOD node")
            }
            GraphError::TruthMismatch { function } => {
                write!(f, "ground truth does not match corpus at function `{function}`")
            }
        }
    }
}

impl core::error::Error for GraphError {}

/// One function as a typed multigraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodePropertyGraph {
    pub function_name: String,
    /// Hex fragment such as `"154"`. Never used arithmetically.
    pub address: String,
    pub nodes: Vec<CpgNode>,
    pub edges: Vec<CpgEdge>,
    pub provenance: Provenance,
}

impl CodePropertyGraph {
    pub fn new(function_name: impl Into<String>, address: impl Into<String>) -> Self {
        CodePropertyGraph {
            function_name: function_name.into(),
            address: address.into(),
            nodes: Vec::new(),
            edges: Vec::new(),
            provenance: Provenance::unknown(),
        }
    }

    /// Name used in reports: the real name, or `function_<address>` when stripped.
    pub fn display_name(&self) -> String {
        display_name(&self.function_name, &self.address)
    }

    pub fn is_oversized(&self, max_nodes: usize) -> bool {
        self.nodes.len() > max_nodes
    }

    /// Removes repeated `(src, dst, etype)` triples, keeping first occurrences.
    pub fn dedup_edges(&mut self) {
        let mut seen = BTreeSet::new();
        self.edges.retain(|e| seen.insert(*e));
    }

    /// Sorts nodes by id and edges by `(src, dst, etype)`.
    pub fn canonicalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.edges.sort();
    }

    /// Equality up to node and edge ordering.
    pub fn structurally_eq(&self, other: &CodePropertyGraph) -> bool {
        if self.function_name != other.function_name
            || self.address != other.address
            || self.provenance != other.provenance
            || self.nodes.len() != other.nodes.len()
            || self.edges.len() != other.edges.len()
        {
            return false;
        }
        let mut a = self.clone();
        let mut b = other.clone();
        a.canonicalize();
        b.canonicalize();
        a.nodes == b.nodes && a.edges == b.edges
    }

    /// Out-degree over all edge types, keyed by node id.
    pub fn out_degrees(&self) -> BTreeMap<u64, usize> {
        let mut deg: BTreeMap<u64, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        for e in &self.edges {
            if let Some(d) = deg.get_mut(&e.src) {
                *d += 1;
            }
        }
        deg
    }

    pub fn node(&self, id: u64) -> Option<&CpgNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Checks every graph invariant: non-empty, unique ids, a METHOD root, valid
    /// edge endpoints, and an AST forest rooted at METHOD nodes.
    pub fn validate(&self) -> Result<(), GraphError> {
        let function = || self.function_name.clone();
        if self.nodes.is_empty() {
            return Err(GraphError::NoNodes { function: function() });
        }
        let mut kinds = BTreeMap::new();
        for n in &self.nodes {
            if kinds.insert(n.id, n.kind).is_some() {
                return Err(GraphError::DuplicateNodeId {
                    function: function(),
                    id: n.id,
                });
            }
        }
        if !self.nodes.iter().any(|n| n.kind == NodeKind::Method) {
            return Err(GraphError::NoMethodRoot { function: function() });
        }
        for e in &self.edges {
            for id in [e.src, e.dst] {
                if !kinds.contains_key(&id) {
                    return Err(GraphError::DanglingEdge {
                        function: function(),
                        id,
                    });
                }
            }
        }

        let mut parent: BTreeMap<u64, u64> = BTreeMap::new();
        let mut has_children = BTreeSet::new();
        for e in self.edges.iter().filter(|e| e.etype == EdgeType::Ast) {
            if parent.insert(e.dst, e.src).is_some_and(|p| p != e.src) {
                return Err(GraphError::AstMultipleParents {
                    function: function(),
                    id: e.dst,
                });
            }
            has_children.insert(e.src);
        }
        // With at most one parent per node, a cycle exists iff walking parents
        // from some node never reaches a root.
        let mut settled = BTreeSet::new();
        for &start in kinds.keys() {
            let mut path = BTreeSet::new();
            let mut cur = start;
            loop {
                if settled.contains(&cur) {
                    break;
                }
                if !path.insert(cur) {
                    return Err(GraphError::AstCycle {
                        function: function(),
                        id: cur,
                    });
                }
                match parent.get(&cur) {
                    Some(&p) => cur = p,
                    None => {
                        if has_children.contains(&cur) && kinds[&cur] != NodeKind::Method {
                            return Err(GraphError::AstRootNotMethod {
                                function: function(),
                                id: cur,
                            });
                        }
                        break;
                    }
                }
            }
            settled.extend(path);
        }
        Ok(())
    }
}

pub fn display_name(function_name: &str, address: &str) -> String {
    if function_name.is_empty() {
        format!("function_{address}")
    } else {
        function_name.to_string()
    }
}

/// A set of functions, optionally labeled with family ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FunctionCorpus {
    pub functions: Vec<CodePropertyGraph>,
    /// Function name to family id. Present only for labeled corpora.
    pub ground_truth: Option<BTreeMap<String, u32>>,
}

impl FunctionCorpus {
    pub fn new(functions: Vec<CodePropertyGraph>) -> Self {
        FunctionCorpus {
            functions,
            ground_truth: None,
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn family_of(&self, function_name: &str) -> Option<u32> {
        self.ground_truth.as_ref()?.get(function_name).copied()
    }

    /// Validates every graph and, when present, that the ground truth labels
    /// exactly the corpus functions.
    pub fn validate(&self) -> Result<(), GraphError> {
        for g in &self.functions {
            g.validate()?;
        }
        if let Some(truth) = &self.ground_truth {
            let names: BTreeSet<&str> = self.functions.iter().map(|g| g.function_name.as_str()).collect();
            if let Some(missing) = names.iter().find(|n| !truth.contains_key(**n)) {
                return Err(GraphError::TruthMismatch {
                    function: missing.to_string(),
                });
            }
            if let Some(extra) = truth.keys().find(|k| !names.contains(k.as_str())) {
                return Err(GraphError::TruthMismatch {
                    function: extra.clone(),
                });
            }
        }
        Ok(())
    }

    /// Equality up to function order inside the corpus and node/edge order
    /// inside each function.
    pub fn structurally_eq(&self, other: &FunctionCorpus) -> bool {
        if self.ground_truth != other.ground_truth || self.len() != other.len() {
            return false;
        }
        let mut used = alloc::vec![false; other.len()];
        self.functions.iter().all(|g| {
            let hit = other
                .functions
                .iter()
                .enumerate()
                .find(|(i, h)| !used[*i] && g.structurally_eq(h));
            match hit {
                Some((i, _)) => {
                    used[i] = true;
                    true
                }
                None => false,
            }
        })
    }

    /// Family labels derived from names: functions sharing a display name share
    /// a family. Used when a corpus carries real (unstripped) names.
    pub fn name_families(&self) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        for g in &self.functions {
            let next = out.len() as u32;
            out.entry(g.display_name()).or_insert(next);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny() -> CodePropertyGraph {
        let mut g = CodePropertyGraph::new("f", "10");
        g.nodes = vec![
            CpgNode::new(1, NodeKind::Method, ""),
            CpgNode::new(2, NodeKind::Call, "add"),
            CpgNode::new(7, NodeKind::Literal, ""),
        ];
        g.edges = vec![
            CpgEdge::new(1, 2, EdgeType::Ast),
            CpgEdge::new(2, 7, EdgeType::Ast),
            CpgEdge::new(1, 2, EdgeType::Cfg),
        ];
        g
    }

    #[test]
    fn kind_parse_maps_unknown() {
        assert_eq!(NodeKind::parse("CALL"), NodeKind::Call);
        assert_eq!(NodeKind::parse("METHOD_RETURN"), NodeKind::Unknown);
        for k in NodeKind::ALL {
            assert_eq!(NodeKind::parse(k.as_str()), k);
        }
        assert_eq!(EdgeType::parse("DDG"), Some(EdgeType::Ddg));
        assert_eq!(EdgeType::parse("REF"), None);
    }

    #[test]
    fn valid_graph_passes() {
        tiny().validate().unwrap();
    }

    #[test]
    fn single_method_node_is_legal() {
        let mut g = CodePropertyGraph::new("m", "0");
        g.nodes.push(CpgNode::new(0, NodeKind::Method, ""));
        g.validate().unwrap();
    }

    #[test]
    fn dangling_edge_names_missing_id() {
        let mut g = tiny();
        g.edges.push(CpgEdge::new(5, 1, EdgeType::Ddg));
        assert_eq!(
            g.validate(),
            Err(GraphError::DanglingEdge {
                function: "f".into(),
                id: 5
            })
        );
    }

    #[test]
    fn ast_cycle_detected() {
        let mut g = tiny();
        g.nodes.push(CpgNode::new(8, NodeKind::Block, ""));
        g.nodes.push(CpgNode::new(9, NodeKind::Block, ""));
        g.edges.push(CpgEdge::new(8, 9, EdgeType::Ast));
        g.edges.push(CpgEdge::new(9, 8, EdgeType::Ast));
        assert!(matches!(g.validate(), Err(GraphError::AstCycle { .. })));
    }

    #[test]
    fn ast_root_must_be_method() {
        let mut g = tiny();
        g.nodes.push(CpgNode::new(8, NodeKind::Block, ""));
        g.nodes.push(CpgNode::new(9, NodeKind::Block, ""));
        g.edges.push(CpgEdge::new(8, 9, EdgeType::Ast));
        assert_eq!(
            g.validate(),
            Err(GraphError::AstRootNotMethod {
                function: "f".into(),
                id: 8
            })
        );
    }

    #[test]
    fn two_ast_parents_rejected() {
        let mut g = tiny();
        g.edges.push(CpgEdge::new(1, 7, EdgeType::Ast));
        assert!(matches!(
            g.validate(),
            Err(GraphError::AstMultipleParents { id: 7, .. })
        ));
    }

    #[test]
    fn missing_method_and_duplicates() {
        let mut g = CodePropertyGraph::new("x", "0");
        assert!(matches!(g.validate(), Err(GraphError::NoNodes { .. })));
        g.nodes.push(CpgNode::new(0, NodeKind::Block, ""));
        assert!(matches!(g.validate(), Err(GraphError::NoMethodRoot { .. })));
        g.nodes.push(CpgNode::new(0, NodeKind::Method, ""));
        assert!(matches!(
            g.validate(),
            Err(GraphError::DuplicateNodeId { id: 0, .. })
        ));
    }

    #[test]
    fn dedup_and_degrees() {
        let mut g = tiny();
        g.edges.push(CpgEdge::new(1, 2, EdgeType::Cfg));
        g.edges.push(CpgEdge::new(1, 2, EdgeType::Ddg));
        g.dedup_edges();
        assert_eq!(g.edges.len(), 4);
        let d = g.out_degrees();
        assert_eq!(d[&1], 3);
        assert_eq!(d[&2], 1);
        assert_eq!(d[&7], 0);
    }

    #[test]
    fn structural_equality_ignores_order() {
        let a = tiny();
        let mut b = tiny();
        b.nodes.reverse();
        b.edges.reverse();
        assert!(a.structurally_eq(&b));
        b.nodes[0].op_token = "mul".into();
        assert!(!a.structurally_eq(&b));
    }

    #[test]
    fn stripped_names() {
        let g = CodePropertyGraph::new("", "154");
        assert_eq!(g.display_name(), "function_154");
        assert_eq!(tiny().display_name(), "f");
    }

    #[test]
    fn truth_must_partition() {
        let mut c = FunctionCorpus::new(vec![tiny()]);
        c.validate().unwrap();
        c.ground_truth = Some(BTreeMap::new());
        assert!(matches!(c.validate(), Err(GraphError::TruthMismatch { .. })));
        c.ground_truth = Some([("f".into(), 0)].into_iter().collect());
        c.validate().unwrap();
    }
}
