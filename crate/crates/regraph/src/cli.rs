//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use regraph_core::graph::FunctionCorpus;
use regraph_core::synth::{synth_corpus_with, Perturbation, SynthConfig};
use regraph_core::DEFAULT_MAX_NODES;

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::pipeline::{self, CpgFormat, Layout, ToolchainConfig};
use crate::{
    dataset, eval, fsutil, graph_json, matcher, model_file, opfile, report, training, vectorize, workers,
};

#[derive(Debug, Parser)]
#[command(
    name = "regraph",
    version,
    about = "Binary function similarity over code property graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Lift, re-optimize, decompile and extract CPGs for a tree of binaries.
    Preprocess(PreprocessArgs),
    /// Build the operator vocabulary and encode corpora into a dataset.
    Vectorize(VectorizeArgs),
    /// Train a model from a train_config.yaml.
    Train(TrainArgs),
    /// Rank the top-K candidate functions for every target function.
    Match(MatchArgs),
    /// Evaluate retrieval quality or build an improvement table.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub families: usize,
    #[arg(long, default_value_t = 4)]
    pub variants: usize,
    #[arg(long, default_value_t = 0.0)]
    pub node_del: f64,
    #[arg(long, default_value_t = 0.0)]
    pub node_ins: f64,
    #[arg(long, default_value_t = 0.0)]
    pub op_swap: f64,
    #[arg(long, default_value_t = 0.0)]
    pub edge_rewire: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 48)]
    pub max_nodes: usize,
    /// Prefix for generated function names.
    #[arg(long, default_value = "")]
    pub name_prefix: String,
    /// Corpus file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also split off variant 0 of every family into this file, leaving the
    /// other variants in --out.
    #[arg(long)]
    pub queries_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    External,
    Fixture,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutArg {
    Tree,
    Flat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Graphson,
    GraphJson,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input root, `project/architecture/opt_level/<binary>` unless --layout flat.
    #[arg(long)]
    pub root: PathBuf,
    /// Directory receiving one graph file per binary.
    #[arg(long)]
    pub out: PathBuf,
    /// Toolchain YAML; overrides the flags below.
    #[arg(long)]
    pub toolchain: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendArg::Fixture)]
    pub backend: BackendArg,
    /// Fixture artifact root (defaults to --root).
    #[arg(long)]
    pub fixture_dir: Option<PathBuf>,
    #[arg(long, default_value = "regraph-work")]
    pub work_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = LayoutArg::Tree)]
    pub layout: LayoutArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Graphson)]
    pub cpg_format: FormatArg,
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    /// Corpus files or directories of corpus files.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Receives dataset.jsonl and, unless --op-file is given, op_file.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Encode against an existing vocabulary instead of building one.
    #[arg(long)]
    pub op_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    pub max_nodes: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults to op_file.json next to the dataset.
    #[arg(long)]
    pub op_file: Option<PathBuf>,
    /// Evaluate each batch's triplets on several threads. Results do not
    /// depend on the thread count but differ in rounding from a serial run.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Xlsx,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub op_file: PathBuf,
    /// Target corpus file or directory.
    #[arg(long)]
    pub target: PathBuf,
    /// Candidate corpus file or directory.
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub topk: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    pub max_nodes: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(subcommand)]
    pub mode: EvalMode,
}

#[derive(Debug, Subcommand)]
pub enum EvalMode {
    /// Recall@K and secs/100 functions for a target/candidate pair.
    Retrieval(RetrievalArgs),
    /// Before/after similarity table from score lists or corpus pairs.
    Improvement(ImprovementArgs),
}

#[derive(Debug, Args)]
pub struct RetrievalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub op_file: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    pub k: Vec<usize>,
    /// Timing runs; the best is reported.
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    pub max_nodes: usize,
    /// Write the machine-readable result here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImprovementArgs {
    /// JSON document with a `cells` list.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("JSON value serializes");
    s.push('\n');
    fsutil::write_file(path, s.as_bytes())
}

fn split_queries(corpus: FunctionCorpus) -> (FunctionCorpus, FunctionCorpus) {
    let truth = corpus.ground_truth.unwrap_or_default();
    let mut queries = FunctionCorpus::default();
    let mut rest = FunctionCorpus::default();
    let mut seen = std::collections::BTreeSet::new();
    for g in corpus.functions {
        let fam = truth.get(&g.function_name).copied();
        let side = if fam.is_some_and(|f| seen.insert(f)) {
            &mut queries
        } else {
            &mut rest
        };
        side.functions.push(g);
    }
    for side in [&mut queries, &mut rest] {
        side.ground_truth = Some(
            side.functions
                .iter()
                .filter_map(|g| truth.get(&g.function_name).map(|f| (g.function_name.clone(), *f)))
                .collect(),
        );
    }
    (queries, rest)
}

fn synth(a: &SynthArgs) -> Result<()> {
    let p = Perturbation {
        node_del_rate: a.node_del,
        node_ins_rate: a.node_ins,
        op_swap_rate: a.op_swap,
        edge_rewire_rate: a.edge_rewire,
    };
    let cfg = SynthConfig::new(a.families, a.variants, p, a.seed)
        .with_node_range(a.min_nodes, a.max_nodes)
        .with_name_prefix(a.name_prefix.clone());
    let corpus = synth_corpus_with(&cfg)?;
    match &a.queries_out {
        None => graph_json::write_corpus(&corpus, &a.out),
        Some(q) => {
            let (queries, rest) = split_queries(corpus);
            if rest.is_empty() {
                return Err(Error::Config("--queries-out needs at least 2 variants".into()));
            }
            graph_json::write_corpus(&queries, q)?;
            graph_json::write_corpus(&rest, &a.out)
        }
    }
}

fn preprocess(a: &PreprocessArgs) -> Result<()> {
    let cfg = match &a.toolchain {
        Some(path) => ToolchainConfig::load(path)?,
        None => {
            let mut cfg = ToolchainConfig::fixture(&a.work_dir, a.fixture_dir.clone());
            if let BackendArg::External = a.backend {
                return Err(Error::Config("the EXTERNAL backend needs --toolchain".into()));
            }
            cfg.layout = match a.layout {
                LayoutArg::Tree => Layout::DefaultTree,
                LayoutArg::Flat => Layout::Flat,
            };
            cfg.cpg_format = match a.cpg_format {
                FormatArg::Graphson => CpgFormat::JoernGraphson,
                FormatArg::GraphJson => CpgFormat::GraphJson,
            };
            cfg
        }
    };
    let out = pipeline::preprocess(&a.root, &cfg, &a.out)?;
    for (job, e) in &out.failures {
        eprintln!("skipped {}: {e}", job.relative_path.display());
    }
    println!(
        "{} functions from {} binaries written to {}",
        out.corpus.len(),
        out.outputs.len(),
        a.out.display()
    );
    Ok(())
}

fn vectorize(a: &VectorizeArgs) -> Result<()> {
    let corpus = vectorize::load_corpora(&a.inputs)?;
    let vocab = a.op_file.as_deref().map(opfile::read_vocab).transpose()?;
    let reuse = vocab.is_some();
    let v = vectorize::vectorize(&corpus, vocab, a.min_count, a.max_nodes)?;
    dataset::write_dataset(&a.out_dir.join("dataset.jsonl"), &v.header, &v.graphs)?;
    if !reuse {
        opfile::write_vocab(&v.vocab, &a.out_dir.join(training::OP_FILE))?;
    }
    println!(
        "{} graphs encoded ({} oversized skipped), {} operators",
        v.graphs.len(),
        v.oversized.len(),
        v.vocab.len()
    );
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let cfg = TrainConfig::load(&a.config)?;
    let out = training::run(&cfg, a.op_file.as_deref(), a.parallel)?;
    if let Some(last) = out.epochs.last() {
        println!(
            "trained {} epochs, final loss {:.5}, r+ {:.4}, r- {:.4}",
            out.epochs.len(),
            last.mean_loss,
            last.mean_r_positive,
            last.mean_r_negative
        );
    }
    println!("model written to {}", out.model_path.display());
    Ok(())
}

fn run_match(a: &MatchArgs) -> Result<()> {
    let model = model_file::load_model(&a.model)?;
    let vocab = opfile::read_vocab(&a.op_file)?;
    let targets = vectorize::load_corpus(&a.target)?;
    let candidates = vectorize::load_corpus(&a.candidate)?;
    let n = workers::worker_count(None);
    let counter = matcher::EmbedCounter::default();
    let rep = workers::with_pool(n, || {
        matcher::match_corpora(
            &model,
            &vocab,
            &targets,
            &candidates,
            a.topk as usize,
            a.max_nodes,
            &counter,
        )
    })?;
    match a.format {
        ReportFormat::Csv => report::write_csv(&rep, &a.out)?,
        #[cfg(feature = "xlsx")]
        ReportFormat::Xlsx => report::write_xlsx(&rep, &a.out)?,
        #[cfg(not(feature = "xlsx"))]
        ReportFormat::Xlsx => {
            return Err(Error::Config(
                "this build has no XLSX support (feature `xlsx`)".into(),
            ))
        }
    }
    println!("{} rows written to {}", rep.rows.len(), a.out.display());
    Ok(())
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    match &a.mode {
        EvalMode::Retrieval(r) => {
            let model = model_file::load_model(&r.model)?;
            let vocab = opfile::read_vocab(&r.op_file)?;
            let targets = vectorize::load_corpus(&r.target)?;
            let candidates = vectorize::load_corpus(&r.candidate)?;
            let n = workers::worker_count(None);
            let out = eval::retrieval(
                &model,
                &vocab,
                &targets,
                &candidates,
                &r.k,
                r.max_nodes,
                r.repeat,
                n,
            )?;
            print!("{}", eval::retrieval_text(&out));
            if let Some(path) = &r.json {
                write_json(path, &eval::retrieval_json(&out))?;
            }
        }
        EvalMode::Improvement(i) => {
            let text = fsutil::read_to_string(&i.input)?;
            let input: eval::ImprovementInput =
                serde_json::from_str(&text).map_err(|e| Error::malformed(&i.input, e))?;
            let base = i.input.parent().unwrap_or_else(|| Path::new("."));
            let table = eval::improvement_from_input(&input, base)?;
            print!("{}", eval::improvement_text(&table));
            if let Some(path) = &i.json {
                write_json(path, &eval::improvement_json(&table))?;
            }
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Vectorize(a) => vectorize(a),
        Command::Train(a) => train(a),
        Command::Match(a) => run_match(a),
        Command::Eval(a) => run_eval(a),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code:
/// 0 on success, 1 on a domain error, 2 on a usage error.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
