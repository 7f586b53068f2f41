//! Analytic gradients against central finite differences on small random
//! models and graphs.

use proptest::prelude::*;
use regraph_core::model::{gradient_check, GnnModel, Hyper};
use regraph_core::synth::{synth_corpus_with, Perturbation, SynthConfig};
use regraph_core::vocab::{encode, EncodedGraph, OperatorVocabulary};

const EPS: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn instance(seed: u64, dim: usize, rounds: usize) -> (GnnModel, Vec<EncodedGraph>) {
    let p = Perturbation {
        node_del_rate: 0.1,
        node_ins_rate: 0.1,
        op_swap_rate: 0.2,
        edge_rewire_rate: 0.1,
    };
    let cfg = SynthConfig::new(2, 2, p, seed).with_node_range(3, 8);
    let corpus = synth_corpus_with(&cfg).unwrap();
    let vocab = OperatorVocabulary::build(&corpus, 1).unwrap();
    let graphs = corpus
        .functions
        .iter()
        .map(|g| encode(g, &vocab, 100).unwrap())
        .collect();
    let mut hyper = Hyper::new(dim, rounds, 3, vocab.len());
    hyper.seed = seed;
    (GnnModel::init(hyper), graphs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_matches_numeric(
        seed in 0u64..1_000_000,
        dim in 4usize..=8,
        rounds in 1usize..=2,
        margin in 0.0f64..0.5,
    ) {
        let (model, gs) = instance(seed, dim, rounds);
        let report = gradient_check(&model, &gs[0], &gs[1], &[&gs[2], &gs[3]], margin, EPS).unwrap();
        prop_assert!(report.checked > 0);
        prop_assert!(
            report.max_relative_error < TOLERANCE,
            "max relative error {} at {:?}",
            report.max_relative_error,
            report.worst
        );
    }
}
