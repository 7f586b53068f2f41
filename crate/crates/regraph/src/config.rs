//! `train_config.yaml`.

use std::path::{Path, PathBuf};

use regraph_core::train::TrainParams;
use regraph_core::DEFAULT_MAX_NODES;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset_path: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    #[serde(default = "defaults::embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::margin")]
    pub margin: f64,
    #[serde(default = "defaults::negative_ratio")]
    pub negative_ratio: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::max_nodes")]
    pub max_nodes: usize,
}

mod defaults {
    use super::*;

    fn p() -> TrainParams {
        TrainParams::default()
    }
    pub fn dim() -> usize {
        p().dim
    }
    pub fn rounds() -> usize {
        p().rounds
    }
    pub fn embed_dim() -> usize {
        p().embed_dim
    }
    pub fn epochs() -> usize {
        p().epochs
    }
    pub fn batch_size() -> usize {
        p().batch_size
    }
    pub fn learning_rate() -> f64 {
        p().learning_rate
    }
    pub fn margin() -> f64 {
        p().margin
    }
    pub fn negative_ratio() -> usize {
        p().negative_ratio
    }
    pub fn max_nodes() -> usize {
        DEFAULT_MAX_NODES
    }
}

impl TrainConfig {
    pub fn new(dataset_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let p = TrainParams::default();
        TrainConfig {
            dataset_path: dataset_path.into(),
            output_dir: output_dir.into(),
            dim: p.dim,
            rounds: p.rounds,
            embed_dim: p.embed_dim,
            epochs: p.epochs,
            batch_size: p.batch_size,
            learning_rate: p.learning_rate,
            margin: p.margin,
            negative_ratio: p.negative_ratio,
            seed: p.seed,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }

    pub fn params(&self) -> TrainParams {
        TrainParams {
            dim: self.dim,
            rounds: self.rounds,
            embed_dim: self.embed_dim,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            margin: self.margin,
            negative_ratio: self.negative_ratio,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if self.max_nodes == 0 {
            return Err(Error::Config("max_nodes must be positive".into()));
        }
        Ok(())
    }

    pub fn from_yaml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::ConfigNotFound(path.to_path_buf()));
        }
        Self::from_yaml(&fsutil::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let cfg = TrainConfig::from_yaml(
            "dataset_path: d.jsonl\noutput_dir: out\ndim: 16\nrounds: 2\nembed_dim: 8\nepochs: 3\n\
             batch_size: 4\nlearning_rate: 0.01\nmargin: 0.25\nnegative_ratio: 2\nseed: 9\nmax_nodes: 300\n",
        )
        .unwrap();
        assert_eq!(cfg.dim, 16);
        assert_eq!(cfg.max_nodes, 300);
        assert_eq!(TrainConfig::from_yaml(&cfg.to_yaml()).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = TrainConfig::from_yaml("dataset_path: d\noutput_dir: o\n").unwrap();
        assert_eq!(cfg, TrainConfig::new("d", "o"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_margin() {
        assert!(TrainConfig::from_yaml("dataset_path: d\noutput_dir: o\nlr: 1\n").is_err());
        assert!(TrainConfig::from_yaml("dataset_path: d\noutput_dir: o\nmargin: 1.5\n").is_err());
    }

    #[test]
    fn missing_file() {
        let err = TrainConfig::load(Path::new("definitely/missing.yaml")).unwrap_err();
        assert!(err.to_string().contains("config not found"));
    }
}
