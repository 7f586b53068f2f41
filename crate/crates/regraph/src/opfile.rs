//! The operator vocabulary file (`op_file`).
//!
//! ```json
//! {"version":1,"min_count":1,"operators":{"<operator>.addition":{"index":1,"count":42}}}
//! ```
//!
//! `version` is the vocabulary revision. Datasets and models record it, and
//! matching refuses an op file whose revision differs from the model's.

use std::collections::BTreeMap;
use std::path::Path;

use regraph_core::vocab::{OperatorVocabulary, VocabEntry};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Serialize, Deserialize)]
struct OpFileDoc {
    version: u32,
    min_count: u64,
    operators: BTreeMap<String, EntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    index: u32,
    count: u64,
}

pub fn vocab_to_string(vocab: &OperatorVocabulary) -> String {
    let doc = OpFileDoc {
        version: vocab.version,
        min_count: vocab.min_count,
        operators: vocab
            .entries()
            .iter()
            .map(|(tok, e)| {
                (
                    tok.clone(),
                    EntryDoc {
                        index: e.index,
                        count: e.count,
                    },
                )
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("op file serializes");
    s.push('\n');
    s
}

pub fn parse_vocab(text: &str, path: &Path) -> Result<OperatorVocabulary> {
    let doc: OpFileDoc = serde_json::from_str(text).map_err(|e| Error::malformed(path, e))?;
    if doc.version == 0 {
        return Err(Error::malformed(path, "version must be at least 1"));
    }
    let entries = doc
        .operators
        .into_iter()
        .map(|(tok, e)| {
            (
                tok,
                VocabEntry {
                    index: e.index,
                    count: e.count,
                },
            )
        })
        .collect();
    OperatorVocabulary::from_entries(doc.version, doc.min_count, entries)
        .map_err(|e| Error::malformed(path, e))
}

pub fn write_vocab(vocab: &OperatorVocabulary, path: &Path) -> Result<()> {
    fsutil::write_file(path, vocab_to_string(vocab).as_bytes())
}

pub fn read_vocab(path: &Path) -> Result<OperatorVocabulary> {
    parse_vocab(&fsutil::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use regraph_core::graph::{CodePropertyGraph, CpgNode, FunctionCorpus, NodeKind};

    fn corpus() -> FunctionCorpus {
        let mut g = CodePropertyGraph::new("f", "0");
        g.nodes.push(CpgNode::new(0, NodeKind::Method, ""));
        for (i, tok) in ["add", "add", "add", "mul"].iter().enumerate() {
            g.nodes.push(CpgNode::new(i as u64 + 1, NodeKind::Operator, *tok));
        }
        FunctionCorpus::new(vec![g])
    }

    #[test]
    fn round_trip() {
        let v = OperatorVocabulary::build(&corpus(), 1).unwrap();
        let text = vocab_to_string(&v);
        assert!(text.contains(r#""add": {"#));
        assert_eq!(parse_vocab(&text, Path::new("op")).unwrap(), v);
    }

    #[test]
    fn threshold_keeps_frequent_tokens() {
        let v = OperatorVocabulary::build(&corpus(), 2).unwrap();
        assert_eq!(v.index_of("add"), 1);
        assert_eq!(v.index_of("mul"), 0);
    }

    #[test]
    fn gaps_rejected() {
        let text = r#"{"version":1,"min_count":1,"operators":{"a":{"index":2,"count":1}}}"#;
        assert!(matches!(
            parse_vocab(text, Path::new("op")),
            Err(Error::MalformedFile { .. })
        ));
    }
}
