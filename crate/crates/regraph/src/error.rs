use std::path::PathBuf;

use regraph_core::graph::GraphError;
use regraph_core::metrics::EvalError;
use regraph_core::model::ModelError;
use regraph_core::synth::SynthError;
use regraph_core::train::TrainError;
use regraph_core::vocab::{EncodeError, VocabError};

use crate::pipeline::Stage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: malformed file: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("{0}: export contains no functions")]
    EmptyExport(PathBuf),

    #[error("function `{function}`: edge references missing node {id}")]
    DanglingEdge { function: String, id: u64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(#[from] GraphError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: dataset built with vocabulary version {found}, expected {expected}")]
    VersionMismatch {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: unknown file version {version}")]
    VersionUnknown { path: PathBuf, version: u64 },

    #[error("{path}: corrupt file: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("{0}: no input files found")]
    EmptyRoot(PathBuf),

    #[error("{stage} failed for {job} with {status}: {stderr}")]
    ToolFailure {
        job: String,
        stage: Stage,
        status: String,
        stderr: String,
    },

    #[error("{stage} timed out for {job} after {secs}s")]
    Timeout { job: String, stage: Stage, secs: u64 },

    #[error("missing fixture artifact {0}")]
    MissingFixture(PathBuf),

    #[error("{stage} requires the output of the previous stage at {missing}")]
    StageOrder { stage: Stage, missing: PathBuf },

    #[error("all {0} jobs failed")]
    AllJobsFailed(usize),

    #[error("operator file version {op_file} does not match the model's vocabulary version {model}")]
    VocabModelMismatch { op_file: u32, model: u32 },

    #[error("{0} corpus is empty")]
    EmptyCorpus(&'static str),

    #[error("config not found: {0}")]
    ConfigNotFound(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Vocab(#[from] VocabError),

    #[error(transparent)]
    Encode(#[from] EncodeError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Train(#[from] TrainError),

    #[error(transparent)]
    Synth(#[from] SynthError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::CorruptFile {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
