//! Siamese training with Adam.
//!
//! Each epoch visits every family that has at least two members once, in a
//! seeded random order. A visit draws an anchor and a distinct positive from
//! the family and `negative_ratio` negatives from other families. Triplets
//! are grouped into batches; the batch gradient is the mean of the per-triplet
//! gradients, summed in triplet order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{accumulate_loss_and_gradients, GnnModel, Hyper, LossStats, ModelError, Params};
use crate::vocab::EncodedGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub dim: usize,
    pub rounds: usize,
    pub embed_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub negative_ratio: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            dim: 64,
            rounds: 3,
            embed_dim: 32,
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-3,
            margin: 0.3,
            negative_ratio: 4,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("dim", self.dim),
            ("rounds", self.rounds),
            ("embed_dim", self.embed_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("negative_ratio", self.negative_ratio),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TrainError::InvalidConfig(name));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate"));
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err(TrainError::InvalidConfig("margin"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    InvalidConfig(&'static str),
    /// Fewer than two families with at least two members each.
    NoPositivePairs,
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        loss: f64,
    },
    NonFiniteParams {
        epoch: usize,
        step: usize,
    },
    Model(ModelError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::InvalidConfig(field) => write!(f, "invalid training setting `{field}`"),
            TrainError::NoPositivePairs => {
                f.write_str("no positive pairs: need at least two families with two or more functions each")
            }
            TrainError::NonFiniteLoss { epoch, step, loss } => {
                write!(f, "loss became {loss} at epoch {epoch}, step {step}")
            }
            TrainError::NonFiniteParams { epoch, step } => {
                write!(f, "parameters became non-finite at epoch {epoch}, step {step}")
            }
            TrainError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub triplets: usize,
    pub steps: usize,
    pub mean_loss: f64,
    pub mean_r_positive: f64,
    pub mean_r_negative: f64,
    pub skipped_pairs: usize,
}

/// Dataset indices of one training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(hyper: &Hyper, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Params::zeros(hyper),
            v: Params::zeros(hyper),
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - libm::pow(b1, f64::from(self.step));
        let c2 = 1.0 - libm::pow(b2, f64::from(self.step));
        let lr = self.learning_rate;
        let eps = self.eps;
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
            let it = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut());
            for (((p, g), m), v) in it {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
    }
}

/// Groups dataset indices by family id, ignoring unlabeled graphs.
pub fn families(dataset: &[EncodedGraph]) -> BTreeMap<u32, Vec<usize>> {
    let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, g) in dataset.iter().enumerate() {
        if let Some(f) = g.family_id {
            out.entry(f).or_default().push(i);
        }
    }
    out
}

/// Draws one epoch of triplets.
pub fn sample_epoch(
    fams: &BTreeMap<u32, Vec<usize>>,
    negative_ratio: usize,
    rng: &mut impl Rng,
) -> Vec<Triplet> {
    let ids: Vec<u32> = fams.keys().copied().collect();
    let mut eligible: Vec<u32> = fams
        .iter()
        .filter(|(_, m)| m.len() >= 2)
        .map(|(f, _)| *f)
        .collect();
    eligible.shuffle(rng);
    eligible
        .into_iter()
        .map(|f| {
            let members = &fams[&f];
            let pair: Vec<usize> = members.choose_multiple(rng, 2).copied().collect();
            let negatives = (0..negative_ratio)
                .map(|_| {
                    let other = loop {
                        let o = ids[rng.gen_range(0..ids.len())];
                        if o != f {
                            break o;
                        }
                    };
                    *fams[&other].choose(rng).unwrap()
                })
                .collect();
            Triplet {
                anchor: pair[0],
                positive: pair[1],
                negatives,
            }
        })
        .collect()
}

/// Gradient of one batch: per-triplet results must be combined in triplet
/// order for the run to be reproducible.
pub trait BatchGradient {
    fn batch(
        &self,
        model: &GnnModel,
        dataset: &[EncodedGraph],
        triplets: &[Triplet],
        margin: f64,
    ) -> Result<(Params, Vec<LossStats>), ModelError>;
}

/// Evaluates triplets one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchGradient for Sequential {
    fn batch(
        &self,
        model: &GnnModel,
        dataset: &[EncodedGraph],
        triplets: &[Triplet],
        margin: f64,
    ) -> Result<(Params, Vec<LossStats>), ModelError> {
        let mut grads = Params::zeros(&model.hyper);
        let mut stats = Vec::with_capacity(triplets.len());
        for t in triplets {
            let negs: Vec<&EncodedGraph> = t.negatives.iter().map(|&i| &dataset[i]).collect();
            stats.push(accumulate_loss_and_gradients(
                model,
                &dataset[t.anchor],
                &dataset[t.positive],
                &negs,
                margin,
                &mut grads,
            )?);
        }
        Ok((grads, stats))
    }
}

pub fn train(
    params: &TrainParams,
    dataset: &[EncodedGraph],
    vocab_size: usize,
    vocab_version: u32,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<GnnModel, TrainError> {
    train_with(&Sequential, params, dataset, vocab_size, vocab_version, on_epoch)
}

pub fn train_with(
    exec: &dyn BatchGradient,
    params: &TrainParams,
    dataset: &[EncodedGraph],
    vocab_size: usize,
    vocab_version: u32,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<GnnModel, TrainError> {
    params.validate()?;
    let fams = families(dataset);
    if fams.values().filter(|m| m.len() >= 2).count() < 2 {
        return Err(TrainError::NoPositivePairs);
    }

    let hyper = Hyper {
        dim: params.dim,
        rounds: params.rounds,
        embed_dim: params.embed_dim,
        vocab_size,
        vocab_version,
        seed: params.seed,
    };
    let mut model = GnnModel::init(hyper);
    for g in dataset {
        model.check_graph(g)?;
    }
    let mut adam = Adam::new(&hyper, params.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);

    for epoch in 0..params.epochs {
        let triplets = sample_epoch(&fams, params.negative_ratio, &mut rng);
        let mut stats = EpochStats {
            epoch,
            ..EpochStats::default()
        };
        let (mut pos_sum, mut pos_n, mut neg_sum, mut neg_n) = (0.0, 0usize, 0.0, 0usize);
        let mut loss_sum = 0.0;
        for (step, batch) in triplets.chunks(params.batch_size).enumerate() {
            let (mut grads, batch_stats) = exec.batch(&model, dataset, batch, params.margin)?;
            let batch_loss: f64 = batch_stats.iter().map(|s| s.loss).sum();
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    step,
                    loss: batch_loss,
                });
            }
            for s in &batch_stats {
                stats.skipped_pairs += s.skipped_pairs;
                if let Some(r) = s.r_positive {
                    pos_sum += r;
                    pos_n += 1;
                }
                neg_sum += s.r_negatives.iter().sum::<f64>();
                neg_n += s.r_negatives.len();
            }
            loss_sum += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.params, &grads);
            if !model.params.is_finite() {
                return Err(TrainError::NonFiniteParams { epoch, step });
            }
            stats.steps += 1;
        }
        stats.triplets = triplets.len();
        stats.mean_loss = loss_sum / triplets.len().max(1) as f64;
        stats.mean_r_positive = pos_sum / pos_n.max(1) as f64;
        stats.mean_r_negative = neg_sum / neg_n.max(1) as f64;
        on_epoch(&stats);
    }
    Ok(model)
}
