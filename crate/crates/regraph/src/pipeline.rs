//! Binary preprocessing: lift, re-optimize, decompile, extract CPGs.
//!
//! Every job gets a scratch directory `<work_dir>/<job>/` holding one artifact
//! per stage, and per-stage logs under `<work_dir>/logs/<job>/`. With the
//! FIXTURE backend, stage artifacts are copied from
//! `<fixture_dir>/<binary path without extension>/` instead of running tools.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use rayon::prelude::*;
use regraph_core::graph::{FunctionCorpus, Provenance};
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::{fsutil, graph_json, graphson, workers};

/// Optimization level requested from the optimizer, always the highest.
pub const REOPT_LEVEL: &str = "-O3";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Lift,
    Reopt,
    Decompile,
    ExtractCpg,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Lift, Stage::Reopt, Stage::Decompile, Stage::ExtractCpg];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Lift => "LIFT",
            Stage::Reopt => "REOPT",
            Stage::Decompile => "DECOMPILE",
            Stage::ExtractCpg => "EXTRACT_CPG",
        }
    }

    /// File name of the stage's output inside the job directory.
    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Lift => "lifted.ll",
            Stage::Reopt => "reopt.ll",
            Stage::Decompile => "decompiled.c",
            Stage::ExtractCpg => "cpg.json",
        }
    }

    pub fn previous(self) -> Option<Stage> {
        match self {
            Stage::Lift => None,
            Stage::Reopt => Some(Stage::Lift),
            Stage::Decompile => Some(Stage::Reopt),
            Stage::ExtractCpg => Some(Stage::Decompile),
        }
    }

    fn log_name(self) -> String {
        format!("{}.log", self.as_str().to_ascii_lowercase())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Backend {
    External,
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CpgFormat {
    GraphJson,
    #[default]
    JoernGraphson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Layout {
    /// `project/architecture/opt_level/<binary>` under the root.
    #[default]
    DefaultTree,
    /// Binaries directly under the root.
    Flat,
}

pub fn import_cpg_export(path: &Path, format: CpgFormat) -> Result<FunctionCorpus> {
    match format {
        CpgFormat::GraphJson => graph_json::read_corpus(path),
        CpgFormat::JoernGraphson => graphson::read_graphson(path),
    }
}

/// Command templates use `{in}`, `{out}` and, for the optimizer, `{level}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolchainConfig {
    #[serde(default)]
    pub lifter_cmd: String,
    #[serde(default)]
    pub optimizer_cmd: String,
    #[serde(default)]
    pub decompiler_cmd: String,
    #[serde(default)]
    pub cpg_extractor_cmd: String,
    pub work_dir: PathBuf,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    pub backend: Backend,
    /// Artifact root for the FIXTURE backend; defaults to the input root.
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    #[serde(default)]
    pub cpg_format: CpgFormat,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_timeout() -> u64 {
    600
}

impl ToolchainConfig {
    pub fn fixture(work_dir: impl Into<PathBuf>, fixture_dir: Option<PathBuf>) -> Self {
        ToolchainConfig {
            lifter_cmd: String::new(),
            optimizer_cmd: String::new(),
            decompiler_cmd: String::new(),
            cpg_extractor_cmd: String::new(),
            work_dir: work_dir.into(),
            timeout_secs: default_timeout(),
            backend: Backend::Fixture,
            fixture_dir,
            cpg_format: CpgFormat::JoernGraphson,
            layout: Layout::DefaultTree,
            workers: None,
        }
    }

    pub fn from_yaml(text: &str) -> Result<Self> {
        let cfg: ToolchainConfig = serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::ConfigNotFound(path.to_path_buf()));
        }
        Self::from_yaml(&fsutil::read_to_string(path)?)
    }

    pub fn command(&self, stage: Stage) -> &str {
        match stage {
            Stage::Lift => &self.lifter_cmd,
            Stage::Reopt => &self.optimizer_cmd,
            Stage::Decompile => &self.decompiler_cmd,
            Stage::ExtractCpg => &self.cpg_extractor_cmd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_secs == 0 {
            return Err(Error::Config("timeout_secs must be at least 1".into()));
        }
        if self.backend == Backend::External {
            for stage in Stage::ALL {
                if self.command(stage).trim().is_empty() {
                    return Err(Error::Config(format!("no command configured for {stage}")));
                }
            }
            let opt = &self.optimizer_cmd;
            if !opt.contains("{level}") && !opt.contains(REOPT_LEVEL) {
                return Err(Error::Config(format!(
                    "optimizer_cmd must request {REOPT_LEVEL} (directly or via {{level}})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryJob {
    pub input_path: PathBuf,
    /// Path relative to the discovery root.
    pub relative_path: PathBuf,
    pub provenance: Provenance,
}

impl BinaryJob {
    /// Relative path without extension, `/` replaced by `__`. Names the job's
    /// scratch directory, log directory and output file.
    pub fn name(&self) -> String {
        let stem = self.relative_path.with_extension("");
        stem.components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("__")
    }

    pub fn work_dir(&self, cfg: &ToolchainConfig) -> PathBuf {
        cfg.work_dir.join(self.name())
    }

    pub fn stage_output(&self, cfg: &ToolchainConfig, stage: Stage) -> PathBuf {
        self.work_dir(cfg).join(stage.artifact())
    }

    fn log_path(&self, cfg: &ToolchainConfig, stage: Stage) -> PathBuf {
        cfg.work_dir.join("logs").join(self.name()).join(stage.log_name())
    }

    fn fixture_dir(&self, cfg: &ToolchainConfig) -> PathBuf {
        let root = cfg.fixture_dir.clone().unwrap_or_else(|| {
            let mut root = self.input_path.clone();
            for _ in self.relative_path.components() {
                root.pop();
            }
            root
        });
        root.join(self.relative_path.with_extension(""))
    }
}

/// Lists input binaries in path order. Files are regular, non-empty and not
/// hidden; in the tree layout only files exactly three directories deep count.
pub fn discover_jobs(root: &Path, layout: Layout) -> Result<Vec<BinaryJob>> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input root is not a directory"),
        ));
    }
    let depth = match layout {
        Layout::DefaultTree => 4,
        Layout::Flat => 1,
    };
    let mut jobs = Vec::new();
    for entry in WalkDir::new(root)
        .min_depth(depth)
        .max_depth(depth)
        .sort_by_file_name()
    {
        let entry = entry.map_err(|e| Error::io(root, e.into()))?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !entry.file_type().is_file() || hidden {
            continue;
        }
        let len = entry
            .metadata()
            .map_err(|e| Error::io(entry.path(), e.into()))?
            .len();
        if len == 0 {
            log::warn!("skipping empty file {}", entry.path().display());
            continue;
        }
        let relative_path = entry.path().strip_prefix(root).expect("under root").to_path_buf();
        let provenance = match layout {
            Layout::DefaultTree => {
                let seg: Vec<String> = relative_path
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                Provenance::new(seg[0].clone(), seg[1].clone(), seg[2].clone())
            }
            Layout::Flat => Provenance::unknown(),
        };
        jobs.push(BinaryJob {
            input_path: entry.path().to_path_buf(),
            relative_path,
            provenance,
        });
    }
    if jobs.is_empty() {
        return Err(Error::EmptyRoot(root.to_path_buf()));
    }
    jobs.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
    Ok(jobs)
}

fn substitute(template: &str, input: &Path, output: &Path) -> Result<Vec<String>> {
    let words = shlex::split(template)
        .filter(|w| !w.is_empty())
        .ok_or_else(|| Error::Config(format!("cannot parse command `{template}`")))?;
    Ok(words
        .into_iter()
        .map(|w| {
            w.replace("{in}", &input.to_string_lossy())
                .replace("{out}", &output.to_string_lossy())
                .replace("{level}", REOPT_LEVEL)
        })
        .collect())
}

fn drain(mut pipe: impl Read + Send + 'static) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        buf
    })
}

fn run_external(
    job: &BinaryJob,
    stage: Stage,
    cfg: &ToolchainConfig,
    input: &Path,
    output: &Path,
) -> Result<()> {
    let argv = substitute(cfg.command(stage), input, output)?;
    let log_path = job.log_path(cfg, stage);
    log::debug!("{} {}: {}", job.name(), stage, argv.join(" "));
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::ToolFailure {
            job: job.name(),
            stage,
            status: "spawn error".into(),
            stderr: format!("{}: {e}", argv[0]),
        })?;
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));
    let status = child
        .wait_timeout(Duration::from_secs(cfg.timeout_secs))
        .map_err(|e| Error::io(&argv[0], e))?;
    let status = match status {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Timeout {
                job: job.name(),
                stage,
                secs: cfg.timeout_secs,
            });
        }
    };
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();

    let mut log = format!("$ {}\n", argv.join(" ")).into_bytes();
    log.extend_from_slice(b"--- stdout\n");
    log.extend_from_slice(&stdout);
    log.extend_from_slice(b"--- stderr\n");
    log.extend_from_slice(&stderr);
    log.extend_from_slice(format!("--- {status}\n").as_bytes());
    fsutil::write_file(&log_path, &log)?;

    if !status.success() {
        return Err(Error::ToolFailure {
            job: job.name(),
            stage,
            status: status.to_string(),
            stderr: String::from_utf8_lossy(&stderr).trim().to_string(),
        });
    }
    if !output.exists() {
        return Err(Error::ToolFailure {
            job: job.name(),
            stage,
            status: status.to_string(),
            stderr: format!("tool did not write {}", output.display()),
        });
    }
    Ok(())
}

/// Runs one stage of one job and returns the stage's output path. The
/// previous stage's output must already exist.
pub fn run_stage(job: &BinaryJob, stage: Stage, cfg: &ToolchainConfig) -> Result<PathBuf> {
    let input = match stage.previous() {
        None => job.input_path.clone(),
        Some(prev) => job.stage_output(cfg, prev),
    };
    if !input.is_file() {
        return Err(Error::StageOrder {
            stage,
            missing: input,
        });
    }
    let output = job.stage_output(cfg, stage);
    let dir = job.work_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    match cfg.backend {
        Backend::Fixture => {
            let src = job.fixture_dir(cfg).join(stage.artifact());
            if !src.is_file() {
                return Err(Error::MissingFixture(src));
            }
            fs::copy(&src, &output).map_err(|e| Error::io(&src, e))?;
            let note = format!("fixture {}\n", src.display());
            fsutil::write_file(&job.log_path(cfg, stage), note.as_bytes())?;
        }
        Backend::External => run_external(job, stage, cfg, &input, &output)?,
    }
    Ok(output)
}

/// Runs all stages for one job and imports its CPG export.
pub fn process_job(job: &BinaryJob, cfg: &ToolchainConfig) -> Result<FunctionCorpus> {
    let mut last = job.input_path.clone();
    for stage in Stage::ALL {
        last = run_stage(job, stage, cfg)?;
    }
    let mut corpus = import_cpg_export(&last, cfg.cpg_format)?;
    for g in &mut corpus.functions {
        g.provenance = job.provenance.clone();
    }
    Ok(corpus)
}

#[derive(Debug)]
pub struct PreprocessOutcome {
    pub corpus: FunctionCorpus,
    /// One canonical graph file per successful job, in job order.
    pub outputs: Vec<PathBuf>,
    pub failures: Vec<(BinaryJob, Error)>,
}

/// Preprocesses every binary under `root`. Failed jobs are logged and
/// skipped; only a run where every job fails is an error.
pub fn preprocess(root: &Path, cfg: &ToolchainConfig, out_dir: &Path) -> Result<PreprocessOutcome> {
    cfg.validate()?;
    let jobs = discover_jobs(root, cfg.layout)?;
    let n = workers::worker_count(cfg.workers);
    let results: Vec<Result<FunctionCorpus>> =
        workers::with_pool(n, || jobs.par_iter().map(|j| process_job(j, cfg)).collect());

    let mut functions = Vec::new();
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for (job, result) in jobs.into_iter().zip(results) {
        match result {
            Ok(corpus) => {
                let path = out_dir.join(format!("{}.json", job.name()));
                graph_json::write_corpus(&corpus, &path)?;
                outputs.push(path);
                functions.extend(corpus.functions);
            }
            Err(e) => {
                log::warn!("{}: {e}", job.relative_path.display());
                failures.push((job, e));
            }
        }
    }
    if outputs.is_empty() {
        return Err(Error::AllJobsFailed(failures.len()));
    }
    Ok(PreprocessOutcome {
        corpus: FunctionCorpus::new(functions),
        outputs,
        failures,
    })
}
