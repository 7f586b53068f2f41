//! File formats, toolchain orchestration, matching and evaluation on top of
//! `regraph-core`.
//!
//! The flow from binaries to a similarity report:
//!
//! 1. [`pipeline::preprocess`] lifts, re-optimizes, decompiles and extracts a
//!    CPG for every binary, writing one [`graph_json`] corpus per binary.
//! 2. [`vectorize::vectorize`] builds the operator vocabulary ([`opfile`]) and
//!    encodes graphs into a [`dataset`].
//! 3. [`training::run`] trains a model and saves it with [`model_file`].
//! 4. [`matcher::match_corpora`] ranks candidates for every target function
//!    and [`report`] writes the result.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod graph_json;
pub mod graphson;
pub mod matcher;
pub mod model_file;
pub mod opfile;
pub mod pipeline;
pub mod report;
pub mod training;
pub mod vectorize;
pub mod workers;

pub use error::{Error, Result};
