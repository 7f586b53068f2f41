//! Top-K matching of target functions against candidate functions.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use regraph_core::graph::FunctionCorpus;
use regraph_core::model::GnnModel;
use regraph_core::rank::{rank_top_k, RankedFunction, ReportMetadata, SimilarityReport};
use regraph_core::vocab::{encode, EncodeError, OperatorVocabulary};

use crate::error::{Error, Result};

/// Counts embeddings computed during one match run.
#[derive(Debug, Default)]
pub struct EmbedCounter {
    targets: AtomicUsize,
    candidates: AtomicUsize,
}

impl EmbedCounter {
    pub fn targets(&self) -> usize {
        self.targets.load(Ordering::Relaxed)
    }

    pub fn candidates(&self) -> usize {
        self.candidates.load(Ordering::Relaxed)
    }
}

pub fn check_compatible(model: &GnnModel, vocab: &OperatorVocabulary) -> Result<()> {
    if vocab.version != model.hyper.vocab_version || vocab.len() > model.hyper.vocab_size {
        return Err(Error::VocabModelMismatch {
            op_file: vocab.version,
            model: model.hyper.vocab_version,
        });
    }
    Ok(())
}

/// Embeds every function in parallel, preserving corpus order. Functions over
/// `max_nodes` get no embedding.
pub fn embed_corpus(
    model: &GnnModel,
    vocab: &OperatorVocabulary,
    corpus: &FunctionCorpus,
    max_nodes: usize,
    counter: &AtomicUsize,
) -> Result<Vec<RankedFunction>> {
    corpus
        .functions
        .par_iter()
        .map(|g| {
            let embedding = match encode(g, vocab, max_nodes) {
                Ok(e) => {
                    counter.fetch_add(1, Ordering::Relaxed);
                    Some(model.embed_vector(&e)?)
                }
                Err(EncodeError::Oversized { .. }) => None,
                Err(e) => return Err(Error::from(e)),
            };
            Ok(RankedFunction {
                name: g.display_name(),
                address: g.address.clone(),
                embedding,
            })
        })
        .collect()
}

/// Ranks the top `k` candidates for every target. Candidates are embedded
/// once up front; targets are embedded in parallel.
pub fn match_corpora(
    model: &GnnModel,
    vocab: &OperatorVocabulary,
    targets: &FunctionCorpus,
    candidates: &FunctionCorpus,
    k: usize,
    max_nodes: usize,
    counter: &EmbedCounter,
) -> Result<SimilarityReport> {
    if k == 0 {
        return Err(Error::Config("top-k must be at least 1".into()));
    }
    check_compatible(model, vocab)?;
    if targets.is_empty() {
        return Err(Error::EmptyCorpus("target"));
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCorpus("candidate"));
    }
    let cands = embed_corpus(model, vocab, candidates, max_nodes, &counter.candidates)?;
    let tgts = embed_corpus(model, vocab, targets, max_nodes, &counter.targets)?;
    let metadata = ReportMetadata {
        model_version: regraph_core::model::MODEL_VERSION,
        vocab_version: vocab.version,
        k,
        timestamp: None,
    };
    // Ranking per target is independent; blocks are gathered in target order.
    let blocks: Vec<_> = tgts.par_iter().map(|t| rank_top_k(t, &cands, k)).collect();
    Ok(SimilarityReport {
        rows: blocks.into_iter().flatten().collect(),
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use regraph_core::model::Hyper;
    use regraph_core::synth::{synth_corpus, Perturbation};

    fn setup() -> (GnnModel, OperatorVocabulary, FunctionCorpus) {
        let c = synth_corpus(6, 1, Perturbation::NONE, 3).unwrap();
        let v = OperatorVocabulary::build(&c, 1).unwrap();
        let mut h = Hyper::new(8, 2, 4, v.len());
        h.seed = 1;
        (GnnModel::init(h), v, c)
    }

    #[test]
    fn self_match_and_single_candidate_pass() {
        let (m, v, c) = setup();
        let counter = EmbedCounter::default();
        let rep = match_corpora(&m, &v, &c, &c, 1, 5000, &counter).unwrap();
        assert_eq!(counter.candidates(), c.len());
        assert_eq!(counter.targets(), c.len());
        for (row, g) in rep.rows.iter().zip(&c.functions) {
            assert_eq!(row.candidate_function, g.function_name);
            assert!((row.score - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn k_clamped() {
        let (m, v, c) = setup();
        let rep = match_corpora(&m, &v, &c, &c, 50, 5000, &EmbedCounter::default()).unwrap();
        assert_eq!(rep.rows.len(), c.len() * c.len());
        assert!(rep.is_well_ordered());
    }

    #[test]
    fn oversized_rows_flagged_and_last() {
        let (m, v, c) = setup();
        let limit = c.functions.iter().map(|g| g.nodes.len()).min().unwrap();
        let rep = match_corpora(&m, &v, &c, &c, 50, limit, &EmbedCounter::default()).unwrap();
        for block in rep.blocks() {
            let first_flagged = block
                .iter()
                .position(|r| r.flags.oversized)
                .unwrap_or(block.len());
            assert!(block[first_flagged..].iter().all(|r| r.flags.oversized));
        }
    }

    #[test]
    fn version_mismatch() {
        let (m, v, c) = setup();
        let v2 = v.with_version(2);
        assert!(matches!(
            match_corpora(&m, &v2, &c, &c, 1, 5000, &EmbedCounter::default()),
            Err(Error::VocabModelMismatch { op_file: 2, model: 1 })
        ));
    }
}
