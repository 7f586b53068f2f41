use alloc::vec;
use alloc::vec::Vec;

use super::forward::backward;
use super::{GnnModel, ModelError, Params};
use crate::pearson::{pearson_with_grad, SimilarityError};
use crate::vocab::EncodedGraph;

/// Loss bookkeeping for one anchor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    /// Pairs whose score was undefined (zero-variance embedding).
    pub skipped_pairs: usize,
    pub r_positive: Option<f64>,
    pub r_negatives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub stats: LossStats,
    pub grads: Params,
}

/// `L = (1 − r(a,p))² + Σₙ max(0, r(a,n) − m)²` with `r` the Pearson score of
/// the embeddings, and its exact gradient with respect to every parameter.
pub fn loss_and_gradients(
    model: &GnnModel,
    anchor: &EncodedGraph,
    positive: &EncodedGraph,
    negatives: &[&EncodedGraph],
    margin: f64,
) -> Result<LossOutput, ModelError> {
    let mut grads = Params::zeros(&model.hyper);
    let stats = accumulate_loss_and_gradients(model, anchor, positive, negatives, margin, &mut grads)?;
    Ok(LossOutput { stats, grads })
}

/// As [`loss_and_gradients`], adding the gradient into `grads`.
pub fn accumulate_loss_and_gradients(
    model: &GnnModel,
    anchor: &EncodedGraph,
    positive: &EncodedGraph,
    negatives: &[&EncodedGraph],
    margin: f64,
    grads: &mut Params,
) -> Result<LossStats, ModelError> {
    let d = model.hyper.dim;
    let (a_topo, a_trace) = model.trace(anchor)?;
    let mut others = Vec::with_capacity(1 + negatives.len());
    for g in core::iter::once(positive).chain(negatives.iter().copied()) {
        others.push(model.trace(g)?);
    }

    let mut stats = LossStats::default();
    let mut d_anchor = vec![0.0; d];
    let mut d_others = vec![vec![0.0; d]; others.len()];

    for (i, (_, trace)) in others.iter().enumerate() {
        let (r, dx, dy) = match pearson_with_grad(&a_trace.embedding, &trace.embedding) {
            Ok(v) => v,
            Err(SimilarityError::ZeroVariance) => {
                stats.skipped_pairs += 1;
                continue;
            }
            Err(SimilarityError::DimensionMismatch { left, right }) => {
                return Err(ModelError::DimensionMismatch {
                    what: "embedding",
                    expected: left,
                    found: right,
                })
            }
        };
        let coeff = if i == 0 {
            stats.r_positive = Some(r);
            stats.loss += (1.0 - r) * (1.0 - r);
            -2.0 * (1.0 - r)
        } else {
            stats.r_negatives.push(r);
            let excess = r - margin;
            if excess <= 0.0 {
                continue;
            }
            stats.loss += excess * excess;
            2.0 * excess
        };
        for (t, x) in d_anchor.iter_mut().zip(&dx) {
            *t += coeff * x;
        }
        for (t, y) in d_others[i].iter_mut().zip(&dy) {
            *t += coeff * y;
        }
    }

    let nonzero = |v: &[f64]| v.iter().any(|x| *x != 0.0);
    if nonzero(&d_anchor) {
        backward(model, &a_topo, &a_trace, &d_anchor, grads);
    }
    for ((topo, trace), de) in others.iter().zip(&d_others) {
        if nonzero(de) {
            backward(model, topo, trace, de, grads);
        }
    }
    Ok(stats)
}
