use super::*;
use crate::graph::{CodePropertyGraph, CpgEdge, CpgNode, NodeKind};
use crate::synth::{synth_corpus, Perturbation};
use crate::vocab::{encode, OperatorVocabulary};
use alloc::vec;

fn small_hyper(vocab_size: usize) -> Hyper {
    let mut h = Hyper::new(6, 2, 3, vocab_size);
    h.seed = 42;
    h
}

fn synth_graphs(n: usize, seed: u64) -> (OperatorVocabulary, Vec<EncodedGraph>) {
    let c = synth_corpus(n, 2, Perturbation::NONE, seed).unwrap();
    let v = OperatorVocabulary::build(&c, 1).unwrap();
    let gs = c.functions.iter().map(|g| encode(g, &v, 5000).unwrap()).collect();
    (v, gs)
}

#[test]
fn zero_model_gives_zero_vector() {
    let mut g = CodePropertyGraph::new("m", "0");
    g.nodes.push(CpgNode::new(0, NodeKind::Method, ""));
    let v = OperatorVocabulary::build(&crate::FunctionCorpus::new(vec![g.clone()]), 1).unwrap();
    let mut enc = encode(&g, &v, 10).unwrap();
    enc.node_features[0] = [0.0; crate::vocab::NUM_FEATURES];
    let model = GnnModel::zeros(Hyper::new(8, 3, 4, v.len()));
    let e = model.embed(&enc).unwrap();
    assert_eq!(e.vector, vec![0.0; 8]);
}

#[test]
fn traced_and_plain_forward_agree_bitwise() {
    let (v, gs) = synth_graphs(4, 3);
    let model = GnnModel::init(small_hyper(v.len()));
    for g in &gs {
        let (_, trace) = model.trace(g).unwrap();
        assert_eq!(trace.embedding, model.embed_vector(g).unwrap());
    }
}

#[test]
fn node_storage_order_does_not_matter() {
    let c = synth_corpus(3, 1, Perturbation::NONE, 9).unwrap();
    let v = OperatorVocabulary::build(&c, 1).unwrap();
    let model = GnnModel::init(small_hyper(v.len()));
    for g in &c.functions {
        let mut shuffled = g.clone();
        shuffled.nodes.reverse();
        shuffled.edges.reverse();
        let a = model.embed(&encode(g, &v, 5000).unwrap()).unwrap();
        let b = model.embed(&encode(&shuffled, &v, 5000).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn op_slot_beyond_vocab_rejected() {
    let (v, gs) = synth_graphs(2, 1);
    let model = GnnModel::init(small_hyper(v.len() - 1));
    let g = gs.iter().find(|g| g.max_op_slot() == v.len());
    if let Some(g) = g {
        assert!(matches!(model.embed(g), Err(ModelError::OpSlotOutOfRange { .. })));
    }
}

#[test]
fn check_shapes_detects_tampering() {
    let mut model = GnnModel::init(small_hyper(5));
    model.check_shapes().unwrap();
    model.params.w_self = crate::linalg::Matrix::zeros(2, 2);
    assert!(model.check_shapes().is_err());
}

#[test]
fn identical_pair_has_zero_loss_and_gradient() {
    let (v, gs) = synth_graphs(2, 5);
    let model = GnnModel::init(small_hyper(v.len()));
    let out = loss_and_gradients(&model, &gs[0], &gs[0], &[], 0.3).unwrap();
    assert!(out.stats.loss.abs() < 1e-24);
    for (name, m) in out.grads.tensors() {
        for x in m.data() {
            assert!(x.abs() < 1e-12, "{name} gradient {x}");
        }
    }
}

#[test]
fn negatives_below_margin_contribute_nothing() {
    let (v, gs) = synth_graphs(3, 6);
    let model = GnnModel::init(small_hyper(v.len()));
    let base = loss_and_gradients(&model, &gs[0], &gs[1], &[], 0.3).unwrap();
    let neg = &gs[4];
    let r = model
        .embed(&gs[0])
        .unwrap()
        .pearson(&model.embed(neg).unwrap())
        .unwrap();
    // Pick a margin above the observed score so the hinge is inactive.
    let margin = (r + 0.01).min(0.999);
    let with = loss_and_gradients(&model, &gs[0], &gs[1], &[neg], margin).unwrap();
    if r <= margin {
        assert_eq!(with.stats.loss, base.stats.loss);
        assert_eq!(with.grads, base.grads);
    }
    assert_eq!(with.stats.r_negatives.len(), 1);
}

#[test]
fn zero_variance_pairs_are_skipped() {
    let (v, gs) = synth_graphs(2, 2);
    let model = GnnModel::zeros(small_hyper(v.len()));
    let out = loss_and_gradients(&model, &gs[0], &gs[1], &[&gs[2]], 0.3).unwrap();
    assert_eq!(out.stats.skipped_pairs, 2);
    assert_eq!(out.stats.loss, 0.0);
    assert_eq!(out.grads, Params::zeros(&model.hyper));
}

#[test]
fn tensor_names_are_unique_and_complete() {
    let p = Params::zeros(&small_hyper(3));
    let names: Vec<_> = p.tensors().iter().map(|(n, _)| *n).collect();
    assert_eq!(names.len(), 2 + RELATIONS + 4);
    let mut sorted = names.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), names.len());
}

#[test]
fn glorot_bounds() {
    let h = small_hyper(10);
    let m = GnnModel::init(h);
    for (name, t) in m.params.tensors() {
        let limit = libm::sqrt(6.0 / (t.rows() + t.cols()) as f64);
        for x in t.data() {
            assert!(x.abs() <= limit, "{name}");
        }
    }
    assert!(m.params.bias.data().iter().all(|x| *x == 0.0));
    assert_eq!(GnnModel::init(h), m);
}

#[test]
fn reverse_relations_see_edges_backwards() {
    let mut g = CodePropertyGraph::new("f", "0");
    g.nodes = vec![
        CpgNode::new(0, NodeKind::Method, ""),
        CpgNode::new(1, NodeKind::Call, ""),
    ];
    g.edges = vec![CpgEdge::new(0, 1, EdgeType::Cfg)];
    let v = OperatorVocabulary::build(&crate::FunctionCorpus::new(vec![g.clone()]), 1).unwrap();
    let topo = GraphTopology::new(&encode(&g, &v, 10).unwrap());
    assert_eq!(topo.neighbors(relation_index(EdgeType::Cfg, false), 1), &[0]);
    assert_eq!(topo.neighbors(relation_index(EdgeType::Cfg, true), 0), &[1]);
    assert!(topo.neighbors(relation_index(EdgeType::Cfg, false), 0).is_empty());
}
