//! JSONL datasets of encoded graphs.
//!
//! The first line is a header, every further line one graph:
//!
//! ```text
//! {"num_features":13,"vocab_version":1,"max_nodes":5000}
//! {"name":"f","address":"40","provenance":{..},"family":3,"features":[[..],..],"edges":[[0,1,"AST"],..]}
//! ```

use std::path::Path;

use regraph_core::graph::{EdgeType, Provenance};
use regraph_core::vocab::{EncodedEdge, EncodedGraph, NUM_FEATURES};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub num_features: usize,
    pub vocab_version: u32,
    pub max_nodes: usize,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceDoc {
    project: String,
    architecture: String,
    opt_level: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    name: String,
    address: String,
    provenance: ProvenanceDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<u32>,
    features: Vec<Vec<f64>>,
    edges: Vec<(usize, usize, String)>,
}

fn to_record(g: &EncodedGraph) -> Record {
    Record {
        name: g.function_name.clone(),
        address: g.address.clone(),
        provenance: ProvenanceDoc {
            project: g.provenance.project.clone(),
            architecture: g.provenance.architecture.clone(),
            opt_level: g.provenance.opt_level.clone(),
        },
        family: g.family_id,
        features: g.node_features.iter().map(|r| r.to_vec()).collect(),
        edges: g
            .edge_index
            .iter()
            .map(|e| (e.src, e.dst, e.etype.as_str().to_string()))
            .collect(),
    }
}

fn from_record(r: Record) -> std::result::Result<EncodedGraph, String> {
    let n = r.features.len();
    let node_features = r
        .features
        .into_iter()
        .map(|row| {
            <[f64; NUM_FEATURES]>::try_from(row.as_slice())
                .map_err(|_| format!("feature row of width {}", row.len()))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let edge_index = r
        .edges
        .into_iter()
        .map(|(src, dst, t)| {
            let etype = EdgeType::parse(&t).ok_or_else(|| format!("unknown edge type `{t}`"))?;
            if src >= n || dst >= n {
                return Err(format!("edge ({src}, {dst}) outside {n} nodes"));
            }
            Ok(EncodedEdge { src, dst, etype })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(EncodedGraph {
        function_name: r.name,
        address: r.address,
        provenance: Provenance::new(
            r.provenance.project,
            r.provenance.architecture,
            r.provenance.opt_level,
        ),
        node_features,
        edge_index,
        family_id: r.family,
    })
}

pub fn dataset_to_string(header: &DatasetHeader, graphs: &[EncodedGraph]) -> String {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, header).expect("header serializes");
    out.push(b'\n');
    for g in graphs {
        serde_json::to_writer(&mut out, &to_record(g)).expect("record serializes");
        out.push(b'\n');
    }
    String::from_utf8(out).expect("JSON is UTF-8")
}

pub fn write_dataset(path: &Path, header: &DatasetHeader, graphs: &[EncodedGraph]) -> Result<()> {
    fsutil::write_file(path, dataset_to_string(header, graphs).as_bytes())
}

/// Parses a dataset. With `expected_vocab` set, the header's vocabulary
/// version must equal it.
pub fn parse_dataset(
    text: &str,
    path: &Path,
    expected_vocab: Option<u32>,
) -> Result<(DatasetHeader, Vec<EncodedGraph>)> {
    let malformed = |line: usize, reason: String| Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| malformed(1, "missing header".into()))?;
    let header: DatasetHeader = serde_json::from_str(first).map_err(|e| malformed(1, e.to_string()))?;
    if header.num_features != NUM_FEATURES {
        return Err(malformed(
            1,
            format!(
                "{} features per node, expected {NUM_FEATURES}",
                header.num_features
            ),
        ));
    }
    if let Some(expected) = expected_vocab {
        if header.vocab_version != expected {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                expected,
                found: header.vocab_version,
            });
        }
    }
    let mut graphs = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| malformed(i + 1, e.to_string()))?;
        graphs.push(from_record(record).map_err(|e| malformed(i + 1, e))?);
    }
    Ok((header, graphs))
}

pub fn read_dataset(path: &Path, expected_vocab: Option<u32>) -> Result<(DatasetHeader, Vec<EncodedGraph>)> {
    parse_dataset(&fsutil::read_to_string(path)?, path, expected_vocab)
}
