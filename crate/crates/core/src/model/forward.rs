use alloc::vec;
use alloc::vec::Vec;

use super::{relation_index, GnnModel, Params, RELATIONS};
use crate::linalg::{outer_acc, sigmoid, vec_mat_acc, vec_mat_t_acc, Matrix};
use crate::vocab::{EncodedGraph, DENSE_FEATURES};

/// Incoming neighbor lists per relation, each sorted ascending.
#[derive(Debug, Clone)]
pub struct GraphTopology {
    neighbors: Vec<Vec<Vec<usize>>>,
}

impl GraphTopology {
    pub fn new(g: &EncodedGraph) -> Self {
        let n = g.num_nodes();
        let mut neighbors = vec![vec![Vec::new(); n]; RELATIONS];
        for e in &g.edge_index {
            neighbors[relation_index(e.etype, false)][e.dst].push(e.src);
            neighbors[relation_index(e.etype, true)][e.src].push(e.dst);
        }
        for lists in neighbors.iter_mut() {
            for l in lists.iter_mut() {
                l.sort_unstable();
            }
        }
        GraphTopology { neighbors }
    }

    pub fn neighbors(&self, relation: usize, node: usize) -> &[usize] {
        &self.neighbors[relation][node]
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `[n × (F−1+E)]` input rows.
    pub input: Matrix,
    pub op_slots: Vec<usize>,
    /// `pre[0]` is the input projection, `pre[k]` round `k`.
    pub pre: Vec<Matrix>,
    pub h: Vec<Matrix>,
    /// `agg[k−1][r]`: mean neighbor state feeding round `k` along relation `r`.
    pub agg: Vec<Vec<Matrix>>,
    pub gate: Matrix,
    pub out: Matrix,
    pub embedding: Vec<f64>,
}

fn input_rows(model: &GnnModel, g: &EncodedGraph) -> (Matrix, Vec<usize>) {
    let n = g.num_nodes();
    let width = model.hyper.input_width();
    let mut input = Matrix::zeros(n, width);
    let mut slots = Vec::with_capacity(n);
    for v in 0..n {
        let slot = g.op_slot(v);
        let row = input.row_mut(v);
        row[..DENSE_FEATURES].copy_from_slice(&g.node_features[v][..DENSE_FEATURES]);
        row[DENSE_FEATURES..].copy_from_slice(model.params.op_embedding.row(slot));
        slots.push(slot);
    }
    (input, slots)
}

fn relu_in_place(m: &mut Matrix) {
    for x in m.data_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Mean of `h` rows over `list` written into `out`. Returns false when empty.
fn mean_into(h: &Matrix, list: &[usize], out: &mut [f64]) -> bool {
    if list.is_empty() {
        return false;
    }
    out.iter_mut().for_each(|x| *x = 0.0);
    for &u in list {
        for (o, x) in out.iter_mut().zip(h.row(u)) {
            *o += x;
        }
    }
    let inv = 1.0 / list.len() as f64;
    out.iter_mut().for_each(|x| *x *= inv);
    true
}

fn readout(p: &Params, hk: &Matrix, gate: &mut Matrix, out: &mut Matrix) -> Vec<f64> {
    let d = hk.cols();
    let mut e = vec![0.0; d];
    for v in 0..hk.rows() {
        let hv = hk.row(v);
        vec_mat_acc(hv, &p.w_gate, gate.row_mut(v));
        vec_mat_acc(hv, &p.w_out, out.row_mut(v));
        let g = gate.row_mut(v);
        g.iter_mut().for_each(|x| *x = sigmoid(*x));
        for ((acc, s), o) in e.iter_mut().zip(gate.row(v)).zip(out.row(v)) {
            *acc += s * o;
        }
    }
    e
}

pub(crate) fn forward(model: &GnnModel, g: &EncodedGraph, topo: &GraphTopology) -> Trace {
    let p = &model.params;
    let n = g.num_nodes();
    let d = model.hyper.dim;
    let (input, op_slots) = input_rows(model, g);

    let mut pre0 = Matrix::zeros(n, d);
    for v in 0..n {
        vec_mat_acc(input.row(v), &p.w_in, pre0.row_mut(v));
    }
    let mut h0 = pre0.clone();
    relu_in_place(&mut h0);
    let mut pre = vec![pre0];
    let mut h = vec![h0];
    let mut agg = Vec::with_capacity(model.hyper.rounds);

    for _ in 0..model.hyper.rounds {
        let prev = h.last().unwrap();
        let mut round_agg: Vec<Matrix> = (0..RELATIONS).map(|_| Matrix::zeros(n, d)).collect();
        let mut pk = Matrix::zeros(n, d);
        for v in 0..n {
            let row = pk.row_mut(v);
            row.copy_from_slice(p.bias.row(0));
            vec_mat_acc(prev.row(v), &p.w_self, row);
            for (r, a) in round_agg.iter_mut().enumerate() {
                if mean_into(prev, topo.neighbors(r, v), a.row_mut(v)) {
                    vec_mat_acc(a.row(v), &p.w_rel[r], pk.row_mut(v));
                }
            }
        }
        let mut hk = pk.clone();
        relu_in_place(&mut hk);
        pre.push(pk);
        h.push(hk);
        agg.push(round_agg);
    }

    let hk = h.last().unwrap();
    let mut gate = Matrix::zeros(n, d);
    let mut out = Matrix::zeros(n, d);
    let embedding = readout(p, hk, &mut gate, &mut out);
    Trace {
        input,
        op_slots,
        pre,
        h,
        agg,
        gate,
        out,
        embedding,
    }
}

/// Same arithmetic as [`forward`] in the same order, without keeping
/// intermediates.
pub(crate) fn embed_only(model: &GnnModel, g: &EncodedGraph, topo: &GraphTopology) -> Vec<f64> {
    let p = &model.params;
    let n = g.num_nodes();
    let d = model.hyper.dim;
    let (input, _) = input_rows(model, g);

    let mut h = Matrix::zeros(n, d);
    for v in 0..n {
        vec_mat_acc(input.row(v), &p.w_in, h.row_mut(v));
    }
    relu_in_place(&mut h);

    let mut next = Matrix::zeros(n, d);
    let mut scratch = vec![0.0; d];
    for _ in 0..model.hyper.rounds {
        for v in 0..n {
            let row = next.row_mut(v);
            row.copy_from_slice(p.bias.row(0));
            vec_mat_acc(h.row(v), &p.w_self, row);
            for r in 0..RELATIONS {
                if mean_into(&h, topo.neighbors(r, v), &mut scratch) {
                    vec_mat_acc(&scratch, &p.w_rel[r], next.row_mut(v));
                }
            }
        }
        relu_in_place(&mut next);
        core::mem::swap(&mut h, &mut next);
    }

    let mut gate = Matrix::zeros(n, d);
    let mut out = Matrix::zeros(n, d);
    readout(p, &h, &mut gate, &mut out)
}

/// Gradient through relu into `out`; false when it is all zero.
fn relu_grad(pre: &[f64], upstream: &[f64], out: &mut [f64]) -> bool {
    let mut any = false;
    for ((o, &p), &g) in out.iter_mut().zip(pre).zip(upstream) {
        *o = if p > 0.0 { g } else { 0.0 };
        any |= *o != 0.0;
    }
    any
}

/// Adds `∂L/∂θ` to `grads` given `∂L/∂e` for the traced graph.
pub(crate) fn backward(
    model: &GnnModel,
    topo: &GraphTopology,
    trace: &Trace,
    d_embedding: &[f64],
    grads: &mut Params,
) {
    let p = &model.params;
    let d = model.hyper.dim;
    let n = trace.input.rows();
    let rounds = model.hyper.rounds;
    let hk = &trace.h[rounds];

    // readout
    let mut dh = Matrix::zeros(n, d);
    let mut d_out = vec![0.0; d];
    let mut d_gate = vec![0.0; d];
    for v in 0..n {
        let s = trace.gate.row(v);
        let o = trace.out.row(v);
        for j in 0..d {
            d_out[j] = d_embedding[j] * s[j];
            d_gate[j] = d_embedding[j] * o[j] * s[j] * (1.0 - s[j]);
        }
        outer_acc(hk.row(v), &d_out, &mut grads.w_out);
        outer_acc(hk.row(v), &d_gate, &mut grads.w_gate);
        let row = dh.row_mut(v);
        vec_mat_t_acc(&d_out, &p.w_out, row);
        vec_mat_t_acc(&d_gate, &p.w_gate, row);
    }

    // message-passing rounds, last to first
    let mut d_pre = vec![0.0; d];
    let mut d_agg = vec![0.0; d];
    for k in (1..=rounds).rev() {
        let pre = &trace.pre[k];
        let prev = &trace.h[k - 1];
        let mut dh_prev = Matrix::zeros(n, d);
        for v in 0..n {
            let any = relu_grad(pre.row(v), dh.row(v), &mut d_pre);
            if !any {
                continue;
            }
            for (b, x) in grads.bias.row_mut(0).iter_mut().zip(&d_pre) {
                *b += x;
            }
            outer_acc(prev.row(v), &d_pre, &mut grads.w_self);
            vec_mat_t_acc(&d_pre, &p.w_self, dh_prev.row_mut(v));
            for r in 0..RELATIONS {
                let list = topo.neighbors(r, v);
                if list.is_empty() {
                    continue;
                }
                outer_acc(trace.agg[k - 1][r].row(v), &d_pre, &mut grads.w_rel[r]);
                d_agg.iter_mut().for_each(|x| *x = 0.0);
                vec_mat_t_acc(&d_pre, &p.w_rel[r], &mut d_agg);
                let inv = 1.0 / list.len() as f64;
                for &u in list {
                    for (t, x) in dh_prev.row_mut(u).iter_mut().zip(&d_agg) {
                        *t += x * inv;
                    }
                }
            }
        }
        dh = dh_prev;
    }

    // input projection and operator embedding
    let width = trace.input.cols();
    let mut d_input = vec![0.0; width];
    for v in 0..n {
        let any = relu_grad(trace.pre[0].row(v), dh.row(v), &mut d_pre);
        if !any {
            continue;
        }
        outer_acc(trace.input.row(v), &d_pre, &mut grads.w_in);
        d_input.iter_mut().for_each(|x| *x = 0.0);
        vec_mat_t_acc(&d_pre, &p.w_in, &mut d_input);
        let slot = trace.op_slots[v];
        for (t, x) in grads
            .op_embedding
            .row_mut(slot)
            .iter_mut()
            .zip(&d_input[DENSE_FEATURES..])
        {
            *t += x;
        }
    }
}
