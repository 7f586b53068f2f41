//! Corpus loading, vocabulary building and dataset encoding.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use regraph_core::graph::FunctionCorpus;
use regraph_core::vocab::{encode, EncodeError, EncodedGraph, OperatorVocabulary, NUM_FEATURES};

use crate::dataset::DatasetHeader;
use crate::error::{Error, Result};
use crate::graph_json;

/// Graph files named by `paths`; directories contribute their `*.json` files
/// in name order.
pub fn corpus_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "json"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

/// Reads and concatenates corpora. Ground truth survives only when every
/// input carries it.
pub fn load_corpora(paths: &[PathBuf]) -> Result<FunctionCorpus> {
    let mut functions = Vec::new();
    let mut truth = Some(BTreeMap::new());
    for f in corpus_files(paths)? {
        let c = graph_json::read_corpus(&f)?;
        truth = match (truth, c.ground_truth) {
            (Some(mut all), Some(t)) => {
                all.extend(t);
                Some(all)
            }
            _ => None,
        };
        functions.extend(c.functions);
    }
    if functions.is_empty() {
        return Err(Error::EmptyCorpus("input"));
    }
    let corpus = FunctionCorpus {
        functions,
        ground_truth: truth,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn load_corpus(path: &Path) -> Result<FunctionCorpus> {
    load_corpora(&[path.to_path_buf()])
}

/// Family of each function: the corpus ground truth when present, otherwise
/// shared display names.
pub fn family_labels(corpus: &FunctionCorpus) -> Vec<Option<u32>> {
    match &corpus.ground_truth {
        Some(_) => corpus
            .functions
            .iter()
            .map(|g| corpus.family_of(&g.function_name))
            .collect(),
        None => {
            let fams = corpus.name_families();
            corpus
                .functions
                .iter()
                .map(|g| fams.get(&g.display_name()).copied())
                .collect()
        }
    }
}

/// Encodes every function in parallel, keeping corpus order. Each entry is
/// the encoded graph or the reason it could not be encoded.
pub fn encode_corpus(
    corpus: &FunctionCorpus,
    vocab: &OperatorVocabulary,
    max_nodes: usize,
) -> Vec<std::result::Result<EncodedGraph, EncodeError>> {
    let labels = family_labels(corpus);
    corpus
        .functions
        .par_iter()
        .zip(labels)
        .map(|(g, family)| {
            let mut e = encode(g, vocab, max_nodes)?;
            e.family_id = family;
            Ok(e)
        })
        .collect()
}

#[derive(Debug)]
pub struct Vectorized {
    pub vocab: OperatorVocabulary,
    pub header: DatasetHeader,
    pub graphs: Vec<EncodedGraph>,
    /// Names of functions left out because they exceed `max_nodes`.
    pub oversized: Vec<String>,
}

/// Builds (or reuses) a vocabulary and encodes the corpus, leaving out
/// oversized functions.
pub fn vectorize(
    corpus: &FunctionCorpus,
    vocab: Option<OperatorVocabulary>,
    min_count: u64,
    max_nodes: usize,
) -> Result<Vectorized> {
    let vocab = match vocab {
        Some(v) => v,
        None => OperatorVocabulary::build(corpus, min_count)?,
    };
    let mut graphs = Vec::with_capacity(corpus.len());
    let mut oversized = Vec::new();
    for (g, r) in corpus
        .functions
        .iter()
        .zip(encode_corpus(corpus, &vocab, max_nodes))
    {
        match r {
            Ok(e) => graphs.push(e),
            Err(EncodeError::Oversized { .. }) => {
                log::warn!("{}: more than {max_nodes} nodes, skipped", g.display_name());
                oversized.push(g.display_name());
            }
            Err(e) => return Err(e.into()),
        }
    }
    let header = DatasetHeader {
        num_features: NUM_FEATURES,
        vocab_version: vocab.version,
        max_nodes,
    };
    Ok(Vectorized {
        vocab,
        header,
        graphs,
        oversized,
    })
}
