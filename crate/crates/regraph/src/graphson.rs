//! Importer for Joern's GraphSON export.
//!
//! The export is one graph for a whole decompiled file. Each METHOD vertex and
//! its syntax-tree descendants become one function; edges are kept when both
//! endpoints fall inside the same function. Label translation comes from
//! `data/joern_mapping.json`:
//!
//! * vertex labels map onto node kinds, anything unlisted is UNKNOWN; a CALL
//!   whose name starts with `<operator>` becomes OPERATOR;
//! * edge labels AST, CFG, CDG keep their name, REACHING_DEF becomes DDG, all
//!   other labels are dropped;
//! * `<global>` and external (library stub) methods are skipped.
//!
//! The function address is taken from the nearest `// Address range: 0x..`
//! comment above the method, falling back to the hex suffix of a
//! `function_<hex>` name.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regraph_core::graph::{CodePropertyGraph, CpgEdge, CpgNode, EdgeType, FunctionCorpus, NodeKind};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::graph_json::check_graph;

const MAPPING_JSON: &str = include_str!("../data/joern_mapping.json");

#[derive(Debug, Clone, Deserialize)]
pub struct JoernMapping {
    pub node_labels: BTreeMap<String, String>,
    pub operator_call_prefix: String,
    pub op_token_properties: BTreeMap<String, String>,
    pub edge_labels: BTreeMap<String, String>,
    pub skip_method_names: Vec<String>,
    pub address_comment_marker: String,
}

impl JoernMapping {
    pub fn shipped() -> JoernMapping {
        serde_json::from_str(MAPPING_JSON).expect("shipped mapping parses")
    }

    fn node_kind(&self, label: &str, name: &str) -> NodeKind {
        let kind = self
            .node_labels
            .get(label)
            .map_or(NodeKind::Unknown, |k| NodeKind::parse(k));
        if kind == NodeKind::Call && name.starts_with(&self.operator_call_prefix) {
            NodeKind::Operator
        } else {
            kind
        }
    }

    fn edge_type(&self, label: &str) -> Option<EdgeType> {
        self.edge_labels.get(label).and_then(|t| EdgeType::parse(t))
    }
}

/// Strips GraphSON `{"@type":..,"@value":..}` wrappers.
fn unwrap(v: &Value) -> &Value {
    match v {
        Value::Object(m) if m.contains_key("@value") => unwrap(&m["@value"]),
        _ => v,
    }
}

fn as_u64(v: &Value) -> Option<u64> {
    let v = unwrap(v);
    v.as_u64().or_else(|| v.as_str().and_then(|s| s.parse().ok()))
}

#[derive(Debug)]
struct Vertex {
    id: u64,
    label: String,
    props: BTreeMap<String, Value>,
}

impl Vertex {
    fn prop(&self, key: &str) -> Option<&Value> {
        self.props.get(key)
    }

    fn str_prop(&self, key: &str) -> &str {
        self.prop(key).and_then(Value::as_str).unwrap_or("")
    }

    fn line(&self) -> Option<u64> {
        self.prop("LINE_NUMBER").and_then(as_u64)
    }
}

/// Property value of a vertex, unwrapping the vertex-property record and a
/// single-element list.
fn prop_value(v: &Value) -> Value {
    let v = unwrap(v);
    let v = match v {
        Value::Object(m) if m.contains_key("value") => unwrap(&m["value"]),
        _ => v,
    };
    match v {
        Value::Array(items) if items.len() == 1 => prop_value(&items[0]),
        other => other.clone(),
    }
}

struct Edge {
    src: u64,
    dst: u64,
    label: String,
}

fn parse_graph(root: &Value, path: &Path) -> Result<(Vec<Vertex>, Vec<Edge>)> {
    let root = unwrap(root);
    let field = |name: &str| -> Result<&Vec<Value>> {
        root.get(name)
            .map(unwrap)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::malformed(path, format!("missing `{name}` array")))
    };
    let mut vertices = Vec::new();
    for v in field("vertices")? {
        let v = unwrap(v);
        let id = v
            .get("id")
            .and_then(as_u64)
            .ok_or_else(|| Error::malformed(path, "vertex without integer id"))?;
        let label = v.get("label").and_then(Value::as_str).unwrap_or("").to_string();
        let props = v
            .get("properties")
            .map(unwrap)
            .and_then(Value::as_object)
            .map(|m| m.iter().map(|(k, p)| (k.clone(), prop_value(p))).collect())
            .unwrap_or_default();
        vertices.push(Vertex { id, label, props });
    }
    let mut edges = Vec::new();
    for e in field("edges")? {
        let e = unwrap(e);
        let end = |key: &str| {
            e.get(key)
                .and_then(as_u64)
                .ok_or_else(|| Error::malformed(path, format!("edge without `{key}`")))
        };
        edges.push(Edge {
            src: end("outV")?,
            dst: end("inV")?,
            label: e.get("label").and_then(Value::as_str).unwrap_or("").to_string(),
        });
    }
    Ok((vertices, edges))
}

fn parse_hex_prefix(s: &str) -> Option<String> {
    let s = s.trim_start();
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"))?;
    let hex: String = digits.chars().take_while(|c| c.is_ascii_hexdigit()).collect();
    let trimmed = hex.trim_start_matches('0');
    match (hex.is_empty(), trimmed.is_empty()) {
        (true, _) => None,
        (false, true) => Some("0".into()),
        (false, false) => Some(trimmed.to_ascii_lowercase()),
    }
}

fn address_from_name(name: &str) -> Option<String> {
    let hex = name.strip_prefix("function_")?;
    (!hex.is_empty() && hex.chars().all(|c| c.is_ascii_hexdigit())).then(|| hex.to_ascii_lowercase())
}

/// Converts a parsed GraphSON document.
pub fn import_value(root: &Value, path: &Path, mapping: &JoernMapping) -> Result<FunctionCorpus> {
    let (vertices, edges) = parse_graph(root, path)?;
    let by_id: BTreeMap<u64, &Vertex> = vertices.iter().map(|v| (v.id, v)).collect();
    if by_id.len() != vertices.len() {
        return Err(Error::malformed(path, "duplicate vertex id"));
    }
    for e in &edges {
        for id in [e.src, e.dst] {
            if !by_id.contains_key(&id) {
                return Err(Error::DanglingEdge {
                    function: String::new(),
                    id,
                });
            }
        }
    }

    let mut ast_children: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for e in edges.iter().filter(|e| e.label == "AST") {
        ast_children.entry(e.src).or_default().push(e.dst);
    }

    // (line, address) of every address comment, by line.
    let comments: BTreeMap<u64, String> = vertices
        .iter()
        .filter(|v| v.label == "COMMENT")
        .filter_map(|v| {
            let code = v.str_prop("CODE");
            let at = code.find(&mapping.address_comment_marker)?;
            let addr = parse_hex_prefix(&code[at + mapping.address_comment_marker.len()..])?;
            Some((v.line()?, addr))
        })
        .collect();

    let mut functions = Vec::new();
    for m in vertices.iter().filter(|v| v.label == "METHOD") {
        let name = m.str_prop("NAME");
        if mapping.skip_method_names.iter().any(|s| s == name)
            || m.prop("IS_EXTERNAL").and_then(Value::as_bool) == Some(true)
        {
            continue;
        }
        let mut members = BTreeSet::new();
        let mut stack = vec![m.id];
        while let Some(id) = stack.pop() {
            if members.insert(id) {
                if let Some(kids) = ast_children.get(&id) {
                    stack.extend(kids.iter().copied());
                }
            }
        }

        let address = m
            .line()
            .and_then(|line| comments.range(..line).next_back().map(|(_, a)| a.clone()))
            .or_else(|| address_from_name(name))
            .unwrap_or_else(|| "unknown".into());
        let mut g = CodePropertyGraph::new(name, address);
        for id in &members {
            let v = by_id[id];
            let callee = v.str_prop("NAME");
            let kind = mapping.node_kind(&v.label, callee);
            let op = mapping
                .op_token_properties
                .get(&v.label)
                .map(|key| v.str_prop(key).to_string())
                .unwrap_or_default();
            g.nodes
                .push(CpgNode::new(*id, kind, op).with_code(v.str_prop("CODE")));
        }
        for e in &edges {
            if let Some(etype) = mapping.edge_type(&e.label) {
                if members.contains(&e.src) && members.contains(&e.dst) {
                    g.edges.push(CpgEdge::new(e.src, e.dst, etype));
                }
            }
        }
        g.dedup_edges();
        g.canonicalize();
        check_graph(&g)?;
        functions.push(g);
    }
    if functions.is_empty() {
        return Err(Error::EmptyExport(path.to_path_buf()));
    }
    Ok(FunctionCorpus::new(functions))
}

pub fn parse_graphson(text: &str, path: &Path) -> Result<FunctionCorpus> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::malformed(path, e))?;
    import_value(&root, path, &JoernMapping::shipped())
}

pub fn read_graphson(path: &Path) -> Result<FunctionCorpus> {
    parse_graphson(&fsutil::read_to_string(path)?, path)
}
