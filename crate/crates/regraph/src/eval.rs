//! Retrieval quality, embedding throughput and the before/after improvement
//! table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use regraph_core::graph::FunctionCorpus;
use regraph_core::metrics::{
    env_pair_scores, improvement_table, recall_at_k, round_decimal, CellInput, CellScore, EvalResult,
    ImprovementTable,
};
use regraph_core::model::GnnModel;
use regraph_core::vocab::{EncodedGraph, OperatorVocabulary};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::matcher::{match_corpora, EmbedCounter};
use crate::{vectorize, workers};

/// Best-of-N embedding time.
#[derive(Debug, Clone, PartialEq)]
pub struct Throughput {
    pub secs_per_100: f64,
    /// Seconds per 100 functions of every run, in run order.
    pub runs: Vec<f64>,
    pub workers: usize,
    /// Functions embedded per run.
    pub functions: usize,
}

/// Times embedding of already-encoded graphs on `workers` threads; loading
/// and encoding are outside the timed region.
pub fn throughput(
    model: &GnnModel,
    graphs: &[EncodedGraph],
    repeat: usize,
    workers: usize,
) -> Result<Throughput> {
    if graphs.is_empty() {
        return Err(Error::EmptyCorpus("throughput"));
    }
    let repeat = repeat.max(1);
    for g in graphs {
        model.check_graph(g)?;
    }
    let mut runs = Vec::with_capacity(repeat);
    workers::with_pool(workers, || {
        for _ in 0..repeat {
            let start = Instant::now();
            let done: usize = graphs
                .par_iter()
                .map(|g| {
                    let v = model.embed_vector(g).expect("graph checked");
                    std::hint::black_box(v);
                    1
                })
                .sum();
            let secs = start.elapsed().as_secs_f64();
            debug_assert_eq!(done, graphs.len());
            runs.push(secs * 100.0 / graphs.len() as f64);
        }
    });
    let best = runs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Throughput {
        secs_per_100: best,
        runs,
        workers,
        functions: graphs.len(),
    })
}

/// Family labels over the union of two corpora: their ground truth when both
/// carry one, otherwise shared display names.
pub fn combined_truth(targets: &FunctionCorpus, candidates: &FunctionCorpus) -> BTreeMap<String, u32> {
    match (&targets.ground_truth, &candidates.ground_truth) {
        (Some(a), Some(b)) => a.iter().chain(b).map(|(k, v)| (k.clone(), *v)).collect(),
        _ => {
            let mut all = targets.clone();
            all.functions.extend(candidates.functions.iter().cloned());
            all.name_families()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetrievalOutcome {
    pub result: EvalResult,
    pub throughput: Throughput,
}

/// Matches targets against candidates, scores Recall@K for each `k` and
/// measures embedding throughput over both corpora.
#[allow(clippy::too_many_arguments)]
pub fn retrieval(
    model: &GnnModel,
    vocab: &OperatorVocabulary,
    targets: &FunctionCorpus,
    candidates: &FunctionCorpus,
    ks: &[usize],
    max_nodes: usize,
    repeat: usize,
    worker_count: usize,
) -> Result<RetrievalOutcome> {
    let k_max = ks.iter().copied().max().unwrap_or(1).max(1);
    let truth = combined_truth(targets, candidates);
    let report = workers::with_pool(worker_count, || {
        match_corpora(
            model,
            vocab,
            targets,
            candidates,
            k_max,
            max_nodes,
            &EmbedCounter::default(),
        )
    })?;
    let mut recall_at = BTreeMap::new();
    for &k in ks {
        recall_at.insert(k, recall_at_k(&report, &truth, k)?);
    }

    let mut graphs = Vec::new();
    for corpus in [targets, candidates] {
        graphs.extend(
            vectorize::encode_corpus(corpus, vocab, max_nodes)
                .into_iter()
                .flatten(),
        );
    }
    let tp = throughput(model, &graphs, repeat, worker_count)?;
    Ok(RetrievalOutcome {
        result: EvalResult {
            recall_at,
            secs_per_100: tp.secs_per_100,
            num_queries: targets.len(),
            num_candidates: candidates.len(),
            workers: worker_count,
        },
        throughput: tp,
    })
}

pub fn retrieval_json(o: &RetrievalOutcome) -> serde_json::Value {
    let recall: BTreeMap<String, f64> = o
        .result
        .recall_at
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    json!({
        "recall_at": recall,
        "secs_per_100": o.result.secs_per_100,
        "num_queries": o.result.num_queries,
        "num_candidates": o.result.num_candidates,
        "workers": o.result.workers,
        "timing_runs": o.throughput.runs,
    })
}

pub fn retrieval_text(o: &RetrievalOutcome) -> String {
    let mut s = String::new();
    for (k, v) in &o.result.recall_at {
        s.push_str(&format!("Recall@{k:<3} {v:.3}\n"));
    }
    s.push_str(&format!(
        "secs/100 functions  {:.4}  (best of {}, {} workers)\n",
        o.result.secs_per_100,
        o.throughput.runs.len(),
        o.result.workers
    ));
    s.push_str(&format!(
        "queries {}  candidates {}\n",
        o.result.num_queries, o.result.num_candidates
    ));
    s
}

/// Score source for one side of an improvement cell: literal scores, or the
/// structural scores of same-named functions in two corpus files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreSource {
    Scores(Vec<f64>),
    Corpora {
        source_corpus: PathBuf,
        target_corpus: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSpec {
    pub source: String,
    pub target: String,
    pub before: ScoreSource,
    pub after: ScoreSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImprovementInput {
    pub cells: Vec<CellSpec>,
}

fn resolve(src: &ScoreSource, base: &Path) -> Result<Vec<f64>> {
    match src {
        ScoreSource::Scores(v) => Ok(v.clone()),
        ScoreSource::Corpora {
            source_corpus,
            target_corpus,
        } => {
            let a = vectorize::load_corpus(&base.join(source_corpus))?;
            let b = vectorize::load_corpus(&base.join(target_corpus))?;
            Ok(env_pair_scores(&a, &b))
        }
    }
}

/// Builds the table from an input document; corpus paths are relative to
/// `base`.
pub fn improvement_from_input(input: &ImprovementInput, base: &Path) -> Result<ImprovementTable> {
    let cells = input
        .cells
        .iter()
        .map(|c| {
            Ok(CellInput {
                source_env: c.source.clone(),
                target_env: c.target.clone(),
                before: resolve(&c.before, base)?,
                after: resolve(&c.after, base)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(improvement_table(&cells)?)
}

/// Scores at 3 decimals and increases at whole percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundedCell {
    pub before: f64,
    pub after: f64,
    pub inc_percent: Option<f64>,
}

pub fn rounded(c: &CellScore) -> RoundedCell {
    RoundedCell {
        before: round_decimal(c.before, 3),
        after: round_decimal(c.after, 3),
        inc_percent: c.inc_percent.map(|x| round_decimal(x, 0)),
    }
}

pub fn improvement_json(t: &ImprovementTable) -> serde_json::Value {
    let mut cells = Vec::new();
    for (r, row) in t.rows.iter().enumerate() {
        for (c, col) in t.columns.iter().enumerate() {
            if let Some(cell) = &t.cells[r][c] {
                cells.push(json!({
                    "source": row,
                    "target": col,
                    "before": cell.before,
                    "after": cell.after,
                    "inc_percent": cell.inc_percent,
                    "rounded": rounded(cell),
                }));
            }
        }
    }
    let avg = |label: &str, names: &[String], avgs: &[CellScore]| -> Vec<serde_json::Value> {
        names
            .iter()
            .zip(avgs)
            .map(|(n, a)| json!({ label: n, "before": a.before, "after": a.after, "inc_percent": a.inc_percent, "rounded": rounded(a) }))
            .collect()
    };
    json!({
        "cells": cells,
        "row_avg": avg("source", &t.rows, &t.row_avg),
        "col_avg": avg("target", &t.columns, &t.col_avg),
        "global": {
            "before": t.global.before,
            "after": t.global.after,
            "inc_percent": t.global.inc_percent,
            "rounded": rounded(&t.global),
        },
    })
}

fn fmt_cell(c: Option<&CellScore>) -> String {
    match c.map(rounded) {
        None => format!("{:>7} {:>7} {:>6}", "-", "-", "-"),
        Some(r) => {
            let inc = r
                .inc_percent
                .map_or_else(|| "n/a".to_string(), |x| format!("{x:.0}%"));
            format!("{:>7.3} {:>7.3} {:>6}", r.before, r.after, inc)
        }
    }
}

/// Plain-text table: sources as rows, targets as columns, averages last.
pub fn improvement_text(t: &ImprovementTable) -> String {
    let w = t.rows.iter().map(String::len).max().unwrap_or(3).max(3);
    let mut s = format!("{:w$}", "");
    for col in t.columns.iter().map(String::as_str).chain(["AVG"]) {
        s.push_str(&format!(" | {col:^22}"));
    }
    s.push('\n');
    for (r, row) in t.rows.iter().enumerate() {
        s.push_str(&format!("{row:w$}"));
        for c in 0..t.columns.len() {
            s.push_str(&format!(" | {}", fmt_cell(t.cells[r][c].as_ref())));
        }
        s.push_str(&format!(" | {}\n", fmt_cell(Some(&t.row_avg[r]))));
    }
    s.push_str(&format!("{:w$}", "AVG"));
    for a in &t.col_avg {
        s.push_str(&format!(" | {}", fmt_cell(Some(a))));
    }
    s.push_str(&format!(" | {}\n", fmt_cell(Some(&t.global))));
    s
}
