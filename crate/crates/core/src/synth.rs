//! Synthetic function families for desk-scale experiments.
//!
//! Each family starts from a random base graph (AST tree under a METHOD root, a
//! CFG chain over statement nodes, random data and control dependences). Every
//! variant is an independently perturbed copy. The base of a family depends only
//! on `(seed, family)` and each variant's perturbation only on
//! `(seed, family, variant)`, so changing perturbation rates never changes the
//! underlying bases.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{CodePropertyGraph, CpgEdge, CpgNode, EdgeType, FunctionCorpus, NodeKind};

pub const OPERATOR_POOL: [&str; 20] = [
    "<operator>.addition",
    "<operator>.subtraction",
    "<operator>.multiplication",
    "<operator>.division",
    "<operator>.modulo",
    "<operator>.assignment",
    "<operator>.assignmentPlus",
    "<operator>.assignmentMinus",
    "<operator>.lessThan",
    "<operator>.greaterThan",
    "<operator>.lessEqualsThan",
    "<operator>.greaterEqualsThan",
    "<operator>.equals",
    "<operator>.notEquals",
    "<operator>.and",
    "<operator>.or",
    "<operator>.xor",
    "<operator>.shiftLeft",
    "<operator>.arithmeticShiftRight",
    "<operator>.indirectFieldAccess",
];

pub const CALLEE_POOL: [&str; 16] = [
    "memcpy",
    "memset",
    "strlen",
    "strcmp",
    "malloc",
    "free",
    "printf",
    "puts",
    "read",
    "write",
    "open",
    "close",
    "abs",
    "__divsi3",
    "__aeabi_idiv",
    "__stack_chk_fail",
];

pub const CONTROL_POOL: [&str; 4] = ["IF", "WHILE", "FOR", "SWITCH"];

/// Per-element probabilities applied when deriving a variant from its base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub node_del_rate: f64,
    pub node_ins_rate: f64,
    pub op_swap_rate: f64,
    pub edge_rewire_rate: f64,
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation {
        node_del_rate: 0.0,
        node_ins_rate: 0.0,
        op_swap_rate: 0.0,
        edge_rewire_rate: 0.0,
    };

    /// Every rate multiplied by `factor`, clamped to `[0, 1]`.
    pub fn scaled(self, factor: f64) -> Perturbation {
        let s = |r: f64| (r * factor).clamp(0.0, 1.0);
        Perturbation {
            node_del_rate: s(self.node_del_rate),
            node_ins_rate: s(self.node_ins_rate),
            op_swap_rate: s(self.op_swap_rate),
            edge_rewire_rate: s(self.edge_rewire_rate),
        }
    }

    fn rates(&self) -> [(&'static str, f64); 4] {
        [
            ("node_del_rate", self.node_del_rate),
            ("node_ins_rate", self.node_ins_rate),
            ("op_swap_rate", self.op_swap_rate),
            ("edge_rewire_rate", self.edge_rewire_rate),
        ]
    }
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation::NONE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    RateOutOfRange { name: &'static str, value: f64 },
    ZeroCount { name: &'static str },
    BadNodeRange { min: usize, max: usize },
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::RateOutOfRange { name, value } => {
                write!(f, "{name} = {value} is outside [0, 1]")
            }
            SynthError::ZeroCount { name } => write!(f, "{name} must be at least 1"),
            SynthError::BadNodeRange { min, max } => {
                write!(f, "node range {min}..={max} is empty or below 2")
            }
        }
    }
}

impl core::error::Error for SynthError {}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub families: usize,
    pub variants_per_family: usize,
    pub perturbation: Perturbation,
    pub seed: u64,
    /// Inclusive bounds on base graph size.
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Prepended to generated function names, so corpora from different seeds
    /// can be merged without name clashes.
    pub name_prefix: String,
}

impl SynthConfig {
    pub fn new(families: usize, variants_per_family: usize, perturbation: Perturbation, seed: u64) -> Self {
        SynthConfig {
            families,
            variants_per_family,
            perturbation,
            seed,
            min_nodes: 12,
            max_nodes: 48,
            name_prefix: String::new(),
        }
    }

    pub fn with_node_range(mut self, min_nodes: usize, max_nodes: usize) -> Self {
        self.min_nodes = min_nodes;
        self.max_nodes = max_nodes;
        self
    }

    pub fn with_name_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.name_prefix = prefix.into();
        self
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.families == 0 {
            return Err(SynthError::ZeroCount { name: "families" });
        }
        if self.variants_per_family == 0 {
            return Err(SynthError::ZeroCount {
                name: "variants_per_family",
            });
        }
        for (name, value) in self.perturbation.rates() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::RateOutOfRange { name, value });
            }
        }
        if self.min_nodes < 2 || self.min_nodes > self.max_nodes {
            return Err(SynthError::BadNodeRange {
                min: self.min_nodes,
                max: self.max_nodes,
            });
        }
        Ok(())
    }
}

/// `families` bases with `variants_per_family` perturbed copies each, using the
/// default base size range.
pub fn synth_corpus(
    families: usize,
    variants_per_family: usize,
    perturbation: Perturbation,
    seed: u64,
) -> Result<FunctionCorpus, SynthError> {
    synth_corpus_with(&SynthConfig::new(
        families,
        variants_per_family,
        perturbation,
        seed,
    ))
}

pub fn synth_corpus_with(cfg: &SynthConfig) -> Result<FunctionCorpus, SynthError> {
    cfg.validate()?;
    let mut functions = Vec::with_capacity(cfg.families * cfg.variants_per_family);
    let mut truth = BTreeMap::new();
    for family in 0..cfg.families {
        let base = base_graph(cfg, family);
        for variant in 0..cfg.variants_per_family {
            let mut rng = stream_rng(cfg.seed, family as u64, variant as u64 + 1);
            let mut g = perturb(&base, &cfg.perturbation, &mut rng);
            let idx = functions.len();
            g.function_name = format!("{}fam{:04}_v{}", cfg.name_prefix, family, variant);
            g.address = format!("{:x}", 0x1000 + 0x40 * idx);
            truth.insert(g.function_name.clone(), family as u32);
            functions.push(g);
        }
    }
    Ok(FunctionCorpus {
        functions,
        ground_truth: Some(truth),
    })
}

/// Base graph of one family, before any perturbation. Exposed so tests can
/// compare variants against their base.
pub fn base_graph(cfg: &SynthConfig, family: usize) -> CodePropertyGraph {
    let mut rng = stream_rng(cfg.seed, family as u64, 0);
    let n = rng.gen_range(cfg.min_nodes..=cfg.max_nodes);
    let mut g = CodePropertyGraph::new(format!("{}fam{:04}", cfg.name_prefix, family), "0");

    g.nodes
        .push(CpgNode::new(0, NodeKind::Method, "").with_code("method"));
    for id in 1..n as u64 {
        let kind = random_kind(&mut rng);
        g.nodes.push(random_node(id, kind, &mut rng));
    }

    // Parents drawn from the most recent few nodes give trees of realistic depth.
    for id in 1..n as u64 {
        let lo = id.saturating_sub(6);
        let parent = rng.gen_range(lo..id);
        g.edges.push(CpgEdge::new(parent, id, EdgeType::Ast));
    }

    let stmts: Vec<u64> = g
        .nodes
        .iter()
        .filter(|n| is_statement(n.kind))
        .map(|n| n.id)
        .collect();
    let mut prev = 0u64;
    for &s in &stmts {
        g.edges.push(CpgEdge::new(prev, s, EdgeType::Cfg));
        prev = s;
    }
    for (pos, &s) in stmts.iter().enumerate() {
        if g.nodes[s as usize].kind != NodeKind::ControlStructure {
            continue;
        }
        if let Some(&target) = stmts.get(pos + 2) {
            g.edges.push(CpgEdge::new(s, target, EdgeType::Cfg));
        }
        let span = rng.gen_range(1..=3usize);
        for &dep in stmts.iter().skip(pos + 1).take(span) {
            g.edges.push(CpgEdge::new(s, dep, EdgeType::Cdg));
        }
    }

    let data: Vec<u64> = g
        .nodes
        .iter()
        .filter(|n| {
            matches!(
                n.kind,
                NodeKind::Identifier | NodeKind::Call | NodeKind::Operator | NodeKind::Param
            )
        })
        .map(|n| n.id)
        .collect();
    if data.len() >= 2 {
        for _ in 0..n / 3 {
            let a = *data.choose(&mut rng).unwrap();
            let b = *data.choose(&mut rng).unwrap();
            if a != b {
                g.edges.push(CpgEdge::new(a.min(b), a.max(b), EdgeType::Ddg));
            }
        }
    }
    g.dedup_edges();
    g
}

fn perturb(base: &CodePropertyGraph, p: &Perturbation, rng: &mut ChaCha8Rng) -> CodePropertyGraph {
    let mut g = base.clone();

    for node in g.nodes.iter_mut() {
        if node.op_token.is_empty() || !rng.gen_bool(p.op_swap_rate) {
            continue;
        }
        let pool: &[&str] = match node.kind {
            NodeKind::Call => &CALLEE_POOL,
            NodeKind::ControlStructure => &CONTROL_POOL,
            _ => &OPERATOR_POOL,
        };
        let others: Vec<&str> = pool.iter().copied().filter(|t| *t != node.op_token).collect();
        if let Some(t) = others.choose(rng) {
            node.op_token = t.to_string();
        }
    }

    if p.node_del_rate > 0.0 {
        let deleted: BTreeSet<u64> = g
            .nodes
            .iter()
            .filter(|n| n.kind != NodeKind::Method)
            .filter(|_| rng.gen_bool(p.node_del_rate))
            .map(|n| n.id)
            .collect();
        delete_nodes(&mut g, &deleted);
    }

    if p.node_ins_rate > 0.0 {
        let mut next_id = g.nodes.iter().map(|n| n.id).max().unwrap_or(0) + 1;
        let anchors: Vec<u64> = g.nodes.iter().map(|n| n.id).collect();
        for anchor in anchors {
            if !rng.gen_bool(p.node_ins_rate) {
                continue;
            }
            let kind = random_kind(rng);
            g.nodes.push(random_node(next_id, kind, rng));
            g.edges.push(CpgEdge::new(anchor, next_id, EdgeType::Ast));
            if is_statement(kind) {
                g.edges.push(CpgEdge::new(anchor, next_id, EdgeType::Cfg));
            }
            next_id += 1;
        }
    }

    if p.edge_rewire_rate > 0.0 && g.nodes.len() > 2 {
        let ids: Vec<u64> = g.nodes.iter().map(|n| n.id).collect();
        for e in g.edges.iter_mut() {
            if e.etype == EdgeType::Ast || !rng.gen_bool(p.edge_rewire_rate) {
                continue;
            }
            loop {
                let d = *ids.choose(rng).unwrap();
                if d != e.src {
                    e.dst = d;
                    break;
                }
            }
        }
    }

    g.dedup_edges();
    g.nodes.shuffle(rng);
    g.edges.shuffle(rng);
    g
}

/// Drops `deleted` nodes. AST children move to the nearest surviving ancestor
/// and CFG paths through deleted nodes are bridged; data and control
/// dependences touching a deleted node are dropped.
fn delete_nodes(g: &mut CodePropertyGraph, deleted: &BTreeSet<u64>) {
    if deleted.is_empty() {
        return;
    }
    let mut ast_parent = BTreeMap::new();
    let mut cfg_succ: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for e in &g.edges {
        match e.etype {
            EdgeType::Ast => {
                ast_parent.insert(e.dst, e.src);
            }
            EdgeType::Cfg => cfg_succ.entry(e.src).or_default().push(e.dst),
            _ => {}
        }
    }

    let mut edges = Vec::new();
    for e in &g.edges {
        match e.etype {
            EdgeType::Ast => {
                if deleted.contains(&e.dst) {
                    continue;
                }
                let mut p = e.src;
                while deleted.contains(&p) {
                    p = ast_parent[&p];
                }
                edges.push(CpgEdge::new(p, e.dst, EdgeType::Ast));
            }
            EdgeType::Cfg => {
                if deleted.contains(&e.src) {
                    continue;
                }
                // Follow successors through deleted nodes.
                let mut stack = alloc::vec![e.dst];
                let mut seen = BTreeSet::new();
                while let Some(d) = stack.pop() {
                    if !seen.insert(d) {
                        continue;
                    }
                    if deleted.contains(&d) {
                        if let Some(next) = cfg_succ.get(&d) {
                            stack.extend(next.iter().copied());
                        }
                    } else {
                        edges.push(CpgEdge::new(e.src, d, EdgeType::Cfg));
                    }
                }
            }
            EdgeType::Ddg | EdgeType::Cdg => {
                if !deleted.contains(&e.src) && !deleted.contains(&e.dst) {
                    edges.push(*e);
                }
            }
        }
    }
    g.edges = edges;
    g.nodes.retain(|n| !deleted.contains(&n.id));
}

fn stream_rng(seed: u64, family: u64, variant: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(family ^ splitmix(variant))));
    rng.set_stream(family);
    rng
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn is_statement(kind: NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::Call | NodeKind::Operator | NodeKind::ControlStructure | NodeKind::Return
    )
}

fn random_kind<R: Rng>(rng: &mut R) -> NodeKind {
    // Weights loosely follow kind frequencies in decompiled C.
    const TABLE: [(NodeKind, u32); 9] = [
        (NodeKind::Block, 2),
        (NodeKind::Call, 6),
        (NodeKind::Identifier, 9),
        (NodeKind::Literal, 4),
        (NodeKind::Operator, 9),
        (NodeKind::ControlStructure, 2),
        (NodeKind::Return, 1),
        (NodeKind::Param, 2),
        (NodeKind::Unknown, 1),
    ];
    let total: u32 = TABLE.iter().map(|(_, w)| w).sum();
    let mut pick = rng.gen_range(0..total);
    for (kind, w) in TABLE {
        if pick < w {
            return kind;
        }
        pick -= w;
    }
    unreachable!()
}

fn random_node<R: Rng>(id: u64, kind: NodeKind, rng: &mut R) -> CpgNode {
    let op = match kind {
        NodeKind::Operator => *OPERATOR_POOL.choose(rng).unwrap(),
        NodeKind::Call => *CALLEE_POOL.choose(rng).unwrap(),
        NodeKind::ControlStructure => *CONTROL_POOL.choose(rng).unwrap(),
        _ => "",
    };
    let code = match kind {
        NodeKind::Identifier | NodeKind::Param => format!("v{}", rng.gen_range(0..8)),
        NodeKind::Literal => format!("{}", rng.gen_range(0..256)),
        _ => op.to_string(),
    };
    CpgNode::new(id, kind, op).with_code(code)
}
