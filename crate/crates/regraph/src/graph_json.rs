//! The canonical corpus file: one JSON document holding every function graph.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use regraph_core::graph::{
    CodePropertyGraph, CpgEdge, CpgNode, EdgeType, FunctionCorpus, GraphError, NodeKind, Provenance,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FileDoc {
    version: u32,
    functions: Vec<FunctionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<BTreeMap<String, u32>>,
}

#[derive(Serialize, Deserialize)]
struct FunctionDoc {
    name: String,
    address: String,
    #[serde(default)]
    provenance: ProvenanceDoc,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceDoc {
    project: String,
    architecture: String,
    opt_level: String,
}

impl Default for ProvenanceDoc {
    fn default() -> Self {
        Provenance::unknown().into()
    }
}

impl From<Provenance> for ProvenanceDoc {
    fn from(p: Provenance) -> Self {
        ProvenanceDoc {
            project: p.project,
            architecture: p.architecture,
            opt_level: p.opt_level,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: u64,
    kind: String,
    #[serde(default)]
    op: String,
    #[serde(default)]
    code: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    src: u64,
    dst: u64,
    #[serde(rename = "type")]
    etype: String,
}

/// Checks a freshly imported graph, reporting dangling edges by node id.
pub(crate) fn check_graph(g: &CodePropertyGraph) -> Result<()> {
    match g.validate() {
        Ok(()) => Ok(()),
        Err(GraphError::DanglingEdge { function, id }) => Err(Error::DanglingEdge { function, id }),
        Err(e) => Err(e.into()),
    }
}

fn from_doc(doc: FunctionDoc, path: &Path) -> Result<CodePropertyGraph> {
    let mut g = CodePropertyGraph::new(doc.name, doc.address);
    g.provenance = Provenance::new(
        doc.provenance.project,
        doc.provenance.architecture,
        doc.provenance.opt_level,
    );
    g.nodes = doc
        .nodes
        .into_iter()
        .map(|n| CpgNode::new(n.id, NodeKind::parse(&n.kind), n.op).with_code(n.code))
        .collect();
    for e in doc.edges {
        let etype = EdgeType::parse(&e.etype)
            .ok_or_else(|| Error::malformed(path, format!("unknown edge type `{}`", e.etype)))?;
        g.edges.push(CpgEdge::new(e.src, e.dst, etype));
    }
    g.dedup_edges();
    check_graph(&g)?;
    Ok(g)
}

fn to_doc(g: &CodePropertyGraph) -> FunctionDoc {
    let mut g = g.clone();
    g.canonicalize();
    FunctionDoc {
        name: g.function_name,
        address: g.address,
        provenance: g.provenance.into(),
        nodes: g
            .nodes
            .into_iter()
            .map(|n| NodeDoc {
                id: n.id,
                kind: n.kind.as_str().to_string(),
                op: n.op_token,
                code: n.code,
            })
            .collect(),
        edges: g
            .edges
            .into_iter()
            .map(|e| EdgeDoc {
                src: e.src,
                dst: e.dst,
                etype: e.etype.as_str().to_string(),
            })
            .collect(),
    }
}

/// Parses corpus text; `path` only labels errors.
pub fn parse_corpus(text: &str, path: &Path) -> Result<FunctionCorpus> {
    let doc: FileDoc = serde_json::from_str(text).map_err(|e| Error::malformed(path, e))?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::malformed(
            path,
            format!("unsupported version {}", doc.version),
        ));
    }
    if doc.functions.is_empty() {
        return Err(Error::EmptyExport(path.to_path_buf()));
    }
    let functions = doc
        .functions
        .into_iter()
        .map(|f| from_doc(f, path))
        .collect::<Result<Vec<_>>>()?;
    let corpus = FunctionCorpus {
        functions,
        ground_truth: doc.ground_truth,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn read_corpus(path: &Path) -> Result<FunctionCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, path)
}

/// Canonical text: nodes by id, edges by `(src, dst, type)`, functions in
/// corpus order.
pub fn corpus_to_string(corpus: &FunctionCorpus) -> String {
    let doc = FileDoc {
        version: FORMAT_VERSION,
        functions: corpus.functions.iter().map(to_doc).collect(),
        ground_truth: corpus.ground_truth.clone(),
    };
    let mut s = serde_json::to_string(&doc).expect("corpus serializes");
    s.push('\n');
    s
}

pub fn write_corpus(corpus: &FunctionCorpus, path: &Path) -> Result<()> {
    corpus.validate()?;
    crate::fsutil::write_file(path, corpus_to_string(corpus).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<FunctionCorpus> {
        parse_corpus(text, Path::new("t.json"))
    }

    #[test]
    fn smallest_legal_graph() {
        let c = parse(
            r#"{"version":1,"functions":[{"name":"f","address":"10",
            "provenance":{"project":"p","architecture":"x86","opt_level":"O0"},
            "nodes":[{"id":0,"kind":"METHOD","op":"","code":""}],"edges":[]}]}"#,
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.functions[0].nodes.len(), 1);
    }

    #[test]
    fn dangling_edge_names_node() {
        let err = parse(
            r#"{"version":1,"functions":[{"name":"f","address":"10",
            "provenance":{"project":"p","architecture":"x86","opt_level":"O0"},
            "nodes":[{"id":0,"kind":"METHOD","op":"","code":""}],
            "edges":[{"src":5,"dst":0,"type":"CFG"}]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DanglingEdge { id: 5, .. }), "{err}");
    }

    #[test]
    fn unknown_kind_and_duplicate_edges() {
        let c = parse(
            r#"{"version":1,"functions":[{"name":"f","address":"10",
            "provenance":{"project":"p","architecture":"x86","opt_level":"O0"},
            "nodes":[{"id":0,"kind":"METHOD","op":"","code":""},
                     {"id":1,"kind":"JUMP_TARGET","op":"","code":""}],
            "edges":[{"src":0,"dst":1,"type":"AST"},{"src":0,"dst":1,"type":"AST"}]}]}"#,
        )
        .unwrap();
        let g = &c.functions[0];
        assert_eq!(g.nodes[1].kind, NodeKind::Unknown);
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn rejects_empty_and_garbage() {
        assert!(matches!(
            parse(r#"{"version":1,"functions":[]}"#),
            Err(Error::EmptyExport(_))
        ));
        assert!(matches!(parse("{"), Err(Error::MalformedFile { .. })));
        assert!(matches!(
            parse(r#"{"version":2,"functions":[]}"#),
            Err(Error::MalformedFile { .. })
        ));
    }
}
