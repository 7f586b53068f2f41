//! Training runs driven by a [`TrainConfig`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use regraph_core::model::{loss_and_gradients, GnnModel, LossStats, ModelError, Params};
use regraph_core::train::{self, BatchGradient, EpochStats, Sequential, Triplet};
use regraph_core::vocab::{EncodedGraph, OperatorVocabulary};
use serde::Serialize;

use crate::config::TrainConfig;
use crate::error::Result;
use crate::{dataset, fsutil, model_file, opfile};

pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const OP_FILE: &str = "op_file.json";

/// Evaluates the triplets of a batch in parallel. Each triplet's gradient is
/// computed on its own and the results are summed in triplet order, so the
/// outcome does not depend on the number of threads.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParallelBatch;

impl BatchGradient for ParallelBatch {
    fn batch(
        &self,
        model: &GnnModel,
        dataset: &[EncodedGraph],
        triplets: &[Triplet],
        margin: f64,
    ) -> std::result::Result<(Params, Vec<LossStats>), ModelError> {
        let parts: Vec<_> = triplets
            .par_iter()
            .map(|t| {
                let negs: Vec<&EncodedGraph> = t.negatives.iter().map(|&i| &dataset[i]).collect();
                loss_and_gradients(model, &dataset[t.anchor], &dataset[t.positive], &negs, margin)
            })
            .collect::<std::result::Result<_, _>>()?;
        let mut grads = Params::zeros(&model.hyper);
        let mut stats = Vec::with_capacity(parts.len());
        for p in parts {
            grads.add_assign(&p.grads);
            stats.push(p.stats);
        }
        Ok((grads, stats))
    }
}

#[derive(Serialize)]
struct EpochLine {
    epoch: usize,
    triplets: usize,
    steps: usize,
    mean_loss: f64,
    mean_r_positive: f64,
    mean_r_negative: f64,
    skipped_pairs: usize,
}

impl From<&EpochStats> for EpochLine {
    fn from(s: &EpochStats) -> Self {
        EpochLine {
            epoch: s.epoch,
            triplets: s.triplets,
            steps: s.steps,
            mean_loss: s.mean_loss,
            mean_r_positive: s.mean_r_positive,
            mean_r_negative: s.mean_r_negative,
            skipped_pairs: s.skipped_pairs,
        }
    }
}

/// Default op file location: next to the dataset.
pub fn default_op_file(dataset_path: &Path) -> PathBuf {
    dataset_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(OP_FILE)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: GnnModel,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
    pub epochs: Vec<EpochStats>,
}

/// Trains in memory on an encoded dataset.
pub fn train_model(
    cfg: &TrainConfig,
    graphs: &[EncodedGraph],
    vocab: &OperatorVocabulary,
    parallel: bool,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<GnnModel> {
    cfg.validate()?;
    let exec: &dyn BatchGradient = if parallel { &ParallelBatch } else { &Sequential };
    let graphs: Vec<EncodedGraph> = graphs
        .iter()
        .filter(|g| g.num_nodes() <= cfg.max_nodes)
        .cloned()
        .collect();
    Ok(train::train_with(
        exec,
        &cfg.params(),
        &graphs,
        vocab.len(),
        vocab.version,
        &mut on_epoch,
    )?)
}

/// Reads the dataset and op file, trains, and writes the model and the
/// per-epoch log into `output_dir`.
pub fn run(cfg: &TrainConfig, op_file: Option<&Path>, parallel: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    let op_path = op_file.map_or_else(|| default_op_file(&cfg.dataset_path), Path::to_path_buf);
    let vocab = opfile::read_vocab(&op_path)?;
    let (_, graphs) = dataset::read_dataset(&cfg.dataset_path, Some(vocab.version))?;

    let mut epochs = Vec::new();
    let model = train_model(cfg, &graphs, &vocab, parallel, |s| {
        log::info!(
            "epoch {:>3}: loss {:.5} r+ {:.4} r- {:.4}",
            s.epoch,
            s.mean_loss,
            s.mean_r_positive,
            s.mean_r_negative
        );
        epochs.push(s.clone());
    })?;

    let model_path = cfg.output_dir.join(MODEL_FILE);
    model_file::save_model(&model, &model_path)?;
    let mut log = String::new();
    for s in &epochs {
        log.push_str(&serde_json::to_string(&EpochLine::from(s)).expect("log line serializes"));
        log.push('\n');
    }
    let log_path = cfg.output_dir.join(TRAIN_LOG_FILE);
    fsutil::write_file(&log_path, log.as_bytes())?;
    Ok(TrainOutcome {
        model,
        model_path,
        log_path,
        epochs,
    })
}
