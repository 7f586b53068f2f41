//! Checks the model against a straight-line transcription of the update
//! equations, and pins a golden vector for a fixed graph and seed.
#![allow(clippy::needless_range_loop)]

use regraph_core::graph::{CodePropertyGraph, CpgEdge, CpgNode, EdgeType, FunctionCorpus, NodeKind};
use regraph_core::model::{relation_index, GnnModel, Hyper};
use regraph_core::vocab::{encode, EncodedGraph, OperatorVocabulary, DENSE_FEATURES, OP_COLUMN};

fn five_node_graph() -> CodePropertyGraph {
    let mut g = CodePropertyGraph::new("five", "40");
    g.nodes = vec![
        CpgNode::new(0, NodeKind::Method, ""),
        CpgNode::new(1, NodeKind::Param, ""),
        CpgNode::new(2, NodeKind::Call, "add"),
        CpgNode::new(3, NodeKind::Literal, ""),
        CpgNode::new(4, NodeKind::Return, "sub"),
    ];
    g.edges = vec![
        CpgEdge::new(0, 1, EdgeType::Ast),
        CpgEdge::new(0, 2, EdgeType::Ast),
        CpgEdge::new(2, 3, EdgeType::Ast),
        CpgEdge::new(0, 4, EdgeType::Ast),
        CpgEdge::new(0, 2, EdgeType::Cfg),
        CpgEdge::new(2, 4, EdgeType::Cfg),
        CpgEdge::new(1, 2, EdgeType::Ddg),
        CpgEdge::new(2, 4, EdgeType::Cdg),
    ];
    g
}

fn setup() -> (GnnModel, EncodedGraph) {
    let g = five_node_graph();
    let vocab = OperatorVocabulary::build(&FunctionCorpus::new(vec![g.clone()]), 1).unwrap();
    let enc = encode(&g, &vocab, 100).unwrap();
    let mut hyper = Hyper::new(4, 2, 3, vocab.len());
    hyper.seed = 7;
    (GnnModel::init(hyper), enc)
}

/// Direct transcription of the equations with scalar loops and no shared
/// helpers from the crate.
fn reference_embed(model: &GnnModel, g: &EncodedGraph) -> Vec<f64> {
    let p = &model.params;
    let d = model.hyper.dim;
    let e_dim = model.hyper.embed_dim;
    let n = g.num_nodes();
    let relu = |x: f64| if x > 0.0 { x } else { 0.0 };

    let mut h = vec![vec![0.0; d]; n];
    for v in 0..n {
        let mut z = g.node_features[v][..DENSE_FEATURES].to_vec();
        let slot = g.node_features[v][OP_COLUMN] as usize;
        for c in 0..e_dim {
            z.push(p.op_embedding.get(slot, c));
        }
        for j in 0..d {
            let mut s = 0.0;
            for (i, zi) in z.iter().enumerate() {
                s += zi * p.w_in.get(i, j);
            }
            h[v][j] = relu(s);
        }
    }

    for _ in 0..model.hyper.rounds {
        let mut next = vec![vec![0.0; d]; n];
        for v in 0..n {
            let mut pre: Vec<f64> = (0..d).map(|j| p.bias.get(0, j)).collect();
            for j in 0..d {
                for i in 0..d {
                    pre[j] += h[v][i] * p.w_self.get(i, j);
                }
            }
            for etype in EdgeType::ALL {
                for reverse in [false, true] {
                    let nbrs: Vec<usize> = g
                        .edge_index
                        .iter()
                        .filter(|e| e.etype == etype)
                        .filter_map(|e| match reverse {
                            false if e.dst == v => Some(e.src),
                            true if e.src == v => Some(e.dst),
                            _ => None,
                        })
                        .collect();
                    if nbrs.is_empty() {
                        continue;
                    }
                    let w = &p.w_rel[relation_index(etype, reverse)];
                    for j in 0..d {
                        for i in 0..d {
                            let mean: f64 = nbrs.iter().map(|&u| h[u][i]).sum::<f64>() / nbrs.len() as f64;
                            pre[j] += mean * w.get(i, j);
                        }
                    }
                }
            }
            next[v] = pre.into_iter().map(relu).collect();
        }
        h = next;
    }

    let mut e = vec![0.0; d];
    for hv in &h {
        for j in 0..d {
            let mut gate = 0.0;
            let mut out = 0.0;
            for i in 0..d {
                gate += hv[i] * p.w_gate.get(i, j);
                out += hv[i] * p.w_out.get(i, j);
            }
            e[j] += out / (1.0 + (-gate).exp());
        }
    }
    e
}

/// Produced by `reference_embed` for the five-node graph with seed 7.
const GOLDEN: [f64; 4] = [
    -0.4254188278904164,
    1.9404538582717312,
    -0.12934826547666367,
    0.6653429234617008,
];

#[test]
fn model_matches_reference() {
    let (model, g) = setup();
    let want = reference_embed(&model, &g);
    let got = model.embed(&g).unwrap().vector;
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn model_matches_golden() {
    let (model, g) = setup();
    let got = model.embed(&g).unwrap().vector;
    for (a, b) in got.iter().zip(&GOLDEN) {
        assert!((a - b).abs() < 1e-12, "{got:?}");
    }
}
