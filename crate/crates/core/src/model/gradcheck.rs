//! Central finite-difference check of the analytic loss gradient.

use alloc::vec::Vec;

use super::{loss_and_gradients, GnnModel, ModelError};
use crate::pearson::pearson;
use crate::vocab::EncodedGraph;

/// Smallest magnitude used in the relative-error denominator. Below it the
/// comparison is effectively absolute, since central differences carry about
/// `1e-10` of rounding noise.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    /// Scalars compared.
    pub checked: usize,
    /// Scalars whose `±eps` probes straddle a ReLU or hinge kink, where the
    /// loss has no derivative.
    pub skipped_kinks: usize,
    pub max_relative_error: f64,
    /// Tensor name and flat index of the worst scalar.
    pub worst: Option<(&'static str, usize)>,
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Sign of every pre-activation, hinge and degenerate pair at the current
/// parameters. Two parameter points with equal patterns lie on the same smooth
/// piece of the loss.
fn kink_pattern(model: &GnnModel, graphs: &[&EncodedGraph], margin: f64) -> Result<Vec<bool>, ModelError> {
    let mut pattern = Vec::new();
    let mut embeddings = Vec::with_capacity(graphs.len());
    for g in graphs {
        let (_, trace) = model.trace(g)?;
        for m in &trace.pre {
            pattern.extend(m.data().iter().map(|x| *x > 0.0));
        }
        embeddings.push(trace.embedding);
    }
    for (i, e) in embeddings.iter().enumerate().skip(1) {
        match pearson(&embeddings[0], e) {
            Ok(r) => pattern.push(i == 1 || r > margin),
            Err(_) => pattern.push(false),
        }
    }
    Ok(pattern)
}

/// Compares every analytic partial derivative of the triplet loss with the
/// central difference `(L(θ+eps) − L(θ−eps)) / 2eps`.
pub fn gradient_check(
    model: &GnnModel,
    anchor: &EncodedGraph,
    positive: &EncodedGraph,
    negatives: &[&EncodedGraph],
    margin: f64,
    eps: f64,
) -> Result<GradCheckReport, ModelError> {
    let analytic = loss_and_gradients(model, anchor, positive, negatives, margin)?.grads;
    let mut graphs = Vec::with_capacity(2 + negatives.len());
    graphs.push(anchor);
    graphs.push(positive);
    graphs.extend(negatives.iter().copied());

    let mut probe = model.clone();
    let mut report = GradCheckReport::default();
    let names: Vec<&'static str> = analytic.tensors().iter().map(|(n, _)| *n).collect();
    for (name, grad) in names
        .into_iter()
        .zip(analytic.tensors().into_iter().map(|(_, m)| m))
    {
        for i in 0..grad.data().len() {
            let original = probe.params.tensor_mut(name).expect("known tensor").data()[i];
            let eval = |probe: &mut GnnModel, value: f64| -> Result<(f64, Vec<bool>), ModelError> {
                probe.params.tensor_mut(name).expect("known tensor").data_mut()[i] = value;
                let loss = loss_and_gradients(probe, anchor, positive, negatives, margin)?
                    .stats
                    .loss;
                Ok((loss, kink_pattern(probe, &graphs, margin)?))
            };
            let (plus, p_plus) = eval(&mut probe, original + eps)?;
            let (minus, p_minus) = eval(&mut probe, original - eps)?;
            probe.params.tensor_mut(name).expect("known tensor").data_mut()[i] = original;
            if p_plus != p_minus {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(grad.data()[i], numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst = Some((name, i));
            }
        }
    }
    Ok(report)
}
