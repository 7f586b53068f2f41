//! Retrieval metrics and the before/after improvement table.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{CodePropertyGraph, EdgeType, FunctionCorpus, NodeKind};
use crate::rank::SimilarityReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    /// A target function has no ground-truth family.
    MissingTruth {
        function: String,
    },
    EmptyCell {
        source_env: String,
        target_env: String,
    },
    EmptyReport,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::MissingTruth { function } => {
                write!(f, "no ground truth for target function `{function}`")
            }
            EvalError::EmptyCell {
                source_env,
                target_env,
            } => write!(f, "cell {source_env} -> {target_env} has no scores"),
            EvalError::EmptyReport => f.write_str("report has no rows"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Fraction of targets whose true counterpart (a candidate of the same family)
/// appears within ranks `1..=k`. Candidates without a family never count.
pub fn recall_at_k(
    report: &SimilarityReport,
    truth: &BTreeMap<String, u32>,
    k: usize,
) -> Result<f64, EvalError> {
    let blocks = report.blocks();
    if blocks.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let mut hits = 0usize;
    for block in &blocks {
        let target = &block[0].target_function;
        let family = truth.get(target).ok_or_else(|| EvalError::MissingTruth {
            function: target.clone(),
        })?;
        let hit = block
            .iter()
            .filter(|r| r.rank <= k)
            .any(|r| truth.get(&r.candidate_function) == Some(family));
        hits += usize::from(hit);
    }
    Ok(hits as f64 / blocks.len() as f64)
}

/// Retrieval quality and speed of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub recall_at: BTreeMap<usize, f64>,
    pub secs_per_100: f64,
    pub num_queries: usize,
    pub num_candidates: usize,
    pub workers: usize,
}

/// One comparison cell's raw scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInput {
    pub source_env: String,
    pub target_env: String,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScore {
    pub before: f64,
    pub after: f64,
    /// `(after − before) / before × 100`; `None` when `before` is not positive.
    pub inc_percent: Option<f64>,
}

impl CellScore {
    fn from_means(before: f64, after: f64) -> Self {
        CellScore {
            before,
            after,
            inc_percent: increase(before, after),
        }
    }
}

fn increase(before: f64, after: f64) -> Option<f64> {
    (before > 0.0).then(|| (after - before) / before * 100.0)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Source environments as rows, target environments as columns.
///
/// Averages follow this layout:
/// * row average: mean before and mean after of the row's cells, increase
///   taken from those two means;
/// * column average: mean before and mean after of the column's cells,
///   increase is the mean of the cells' increases;
/// * global: mean before and after over all cells, increase is the mean of the
///   row-average increases.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[row][col]`, `None` where no comparison was supplied.
    pub cells: Vec<Vec<Option<CellScore>>>,
    pub row_avg: Vec<CellScore>,
    pub col_avg: Vec<CellScore>,
    pub global: CellScore,
}

impl ImprovementTable {
    pub fn cell(&self, source_env: &str, target_env: &str) -> Option<CellScore> {
        let r = self.rows.iter().position(|x| x == source_env)?;
        let c = self.columns.iter().position(|x| x == target_env)?;
        self.cells[r][c]
    }
}

/// Builds the table from per-cell score lists. Row and column order follow
/// first appearance in `inputs`; repeated cells are merged.
pub fn improvement_table(inputs: &[CellInput]) -> Result<ImprovementTable, EvalError> {
    let mut rows: Vec<String> = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    let mut merged: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for cell in inputs {
        if cell.before.is_empty() || cell.after.is_empty() {
            return Err(EvalError::EmptyCell {
                source_env: cell.source_env.clone(),
                target_env: cell.target_env.clone(),
            });
        }
        let r = position_or_push(&mut rows, &cell.source_env);
        let c = position_or_push(&mut columns, &cell.target_env);
        let slot = merged.entry((r, c)).or_default();
        slot.0.extend_from_slice(&cell.before);
        slot.1.extend_from_slice(&cell.after);
    }

    let mut cells = vec![vec![None; columns.len()]; rows.len()];
    for (&(r, c), (before, after)) in &merged {
        // Score lists are non-empty here.
        let b = mean(before.iter().copied()).unwrap_or(0.0);
        let a = mean(after.iter().copied()).unwrap_or(0.0);
        cells[r][c] = Some(CellScore::from_means(b, a));
    }

    let present =
        |it: &mut dyn Iterator<Item = Option<CellScore>>| -> Vec<CellScore> { it.flatten().collect() };

    let row_avg: Vec<CellScore> = cells
        .iter()
        .map(|row| {
            let cs = present(&mut row.iter().copied());
            let b = mean(cs.iter().map(|c| c.before)).unwrap_or(0.0);
            let a = mean(cs.iter().map(|c| c.after)).unwrap_or(0.0);
            CellScore::from_means(b, a)
        })
        .collect();

    let col_avg: Vec<CellScore> = (0..columns.len())
        .map(|c| {
            let cs = present(&mut cells.iter().map(|row| row[c]));
            CellScore {
                before: mean(cs.iter().map(|c| c.before)).unwrap_or(0.0),
                after: mean(cs.iter().map(|c| c.after)).unwrap_or(0.0),
                inc_percent: mean(cs.iter().filter_map(|c| c.inc_percent)),
            }
        })
        .collect();

    let all = present(&mut cells.iter().flat_map(|row| row.iter().copied()));
    let global = CellScore {
        before: mean(all.iter().map(|c| c.before)).unwrap_or(0.0),
        after: mean(all.iter().map(|c| c.after)).unwrap_or(0.0),
        inc_percent: mean(row_avg.iter().filter_map(|c| c.inc_percent)),
    };

    Ok(ImprovementTable {
        rows,
        columns,
        cells,
        row_avg,
        col_avg,
        global,
    })
}

fn position_or_push(list: &mut Vec<String>, item: &str) -> usize {
    match list.iter().position(|x| x == item) {
        Some(i) => i,
        None => {
            list.push(String::from(item));
            list.len() - 1
        }
    }
}

/// Rounds half away from zero at `digits` decimals. Scores are decimal data,
/// so a relative nudge absorbs binary representation error at exact ties
/// (0.6165 is stored as 0.61649999…).
pub fn round_decimal(x: f64, digits: i32) -> f64 {
    let scale = libm::pow(10.0, f64::from(digits));
    let scaled = x * scale;
    let nudged = scaled + scaled.signum() * scaled.abs().max(1.0) * 1e-9;
    libm::round(nudged) / scale
}

const DEGREE_BUCKETS: usize = 5;
const HISTOGRAM_WIDTH: usize = NodeKind::COUNT + 2 * DEGREE_BUCKETS;

/// Node-kind histogram followed by CFG out- and in-degree histograms
/// (degrees 0, 1, 2, 3, 4+).
pub fn structural_histogram(g: &CodePropertyGraph) -> [f64; HISTOGRAM_WIDTH] {
    let mut h = [0.0; HISTOGRAM_WIDTH];
    let mut out_deg: BTreeMap<u64, usize> = BTreeMap::new();
    let mut in_deg: BTreeMap<u64, usize> = BTreeMap::new();
    for e in g.edges.iter().filter(|e| e.etype == EdgeType::Cfg) {
        *out_deg.entry(e.src).or_default() += 1;
        *in_deg.entry(e.dst).or_default() += 1;
    }
    for n in &g.nodes {
        h[n.kind.index()] += 1.0;
        let o = out_deg.get(&n.id).copied().unwrap_or(0).min(DEGREE_BUCKETS - 1);
        let i = in_deg.get(&n.id).copied().unwrap_or(0).min(DEGREE_BUCKETS - 1);
        h[NodeKind::COUNT + o] += 1.0;
        h[NodeKind::COUNT + DEGREE_BUCKETS + i] += 1.0;
    }
    h
}

/// Cosine similarity of structural histograms, in `[0, 1]`. A cheap structural
/// scorer for before/after comparisons; it is not BinDiff.
pub fn structural_similarity(a: &CodePropertyGraph, b: &CodePropertyGraph) -> f64 {
    let ha = structural_histogram(a);
    let hb = structural_histogram(b);
    let dot: f64 = ha.iter().zip(&hb).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(ha.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(hb.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Structural scores of same-named functions present in both corpora, in
/// `source` order.
pub fn env_pair_scores(source: &FunctionCorpus, target: &FunctionCorpus) -> Vec<f64> {
    let by_name: BTreeMap<String, &CodePropertyGraph> =
        target.functions.iter().map(|g| (g.display_name(), g)).collect();
    source
        .functions
        .iter()
        .filter_map(|g| {
            by_name
                .get(&g.display_name())
                .map(|t| structural_similarity(g, t))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::{build_report, RankedFunction, ReportMetadata, ReportRow, RowFlags};
    use crate::synth::{synth_corpus, Perturbation};

    fn row(target: &str, rank: usize, cand: &str) -> ReportRow {
        ReportRow {
            target_function: target.into(),
            rank,
            candidate_function: cand.into(),
            candidate_address: String::new(),
            score: 1.0 - rank as f64 * 0.1,
            flags: RowFlags::default(),
        }
    }

    #[test]
    fn constructed_recall() {
        // 10 queries, the first 7 have their counterpart at rank 1 and the rest
        // at rank 2.
        let mut truth = BTreeMap::new();
        let mut rows = Vec::new();
        for q in 0..10u32 {
            let t = alloc::format!("t{q}");
            let good = alloc::format!("c{q}");
            let bad = alloc::format!("x{q}");
            truth.insert(t.clone(), q);
            truth.insert(good.clone(), q);
            truth.insert(bad.clone(), 100 + q);
            if q < 7 {
                rows.push(row(&t, 1, &good));
                rows.push(row(&t, 2, &bad));
            } else {
                rows.push(row(&t, 1, &bad));
                rows.push(row(&t, 2, &good));
            }
        }
        let rep = SimilarityReport {
            rows,
            metadata: ReportMetadata::default(),
        };
        assert_eq!(recall_at_k(&rep, &truth, 1).unwrap(), 0.7);
        assert_eq!(recall_at_k(&rep, &truth, 2).unwrap(), 1.0);
    }

    #[test]
    fn self_and_adversarial_recall() {
        let fs: Vec<RankedFunction> = (0..4)
            .map(|i| RankedFunction {
                name: alloc::format!("f{i}"),
                address: alloc::format!("{i}"),
                embedding: Some(vec![i as f64, 1.0, (i * i) as f64, -(i as f64)]),
            })
            .collect();
        let truth: BTreeMap<String, u32> = fs
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i as u32))
            .collect();
        let meta = ReportMetadata {
            k: 1,
            ..ReportMetadata::default()
        };
        let rep = build_report(&fs, &fs, meta);
        assert_eq!(recall_at_k(&rep, &truth, 1).unwrap(), 1.0);

        let wrong = SimilarityReport {
            rows: vec![row("f0", 1, "f1"), row("f1", 1, "f2")],
            metadata: ReportMetadata::default(),
        };
        assert_eq!(recall_at_k(&wrong, &truth, 1).unwrap(), 0.0);
    }

    #[test]
    fn missing_truth_reported() {
        let rep = SimilarityReport {
            rows: vec![row("ghost", 1, "f1")],
            metadata: ReportMetadata::default(),
        };
        assert_eq!(
            recall_at_k(&rep, &BTreeMap::new(), 1),
            Err(EvalError::MissingTruth {
                function: "ghost".into()
            })
        );
        assert_eq!(
            recall_at_k(&SimilarityReport::default(), &BTreeMap::new(), 1),
            Err(EvalError::EmptyReport)
        );
    }

    fn cell(s: &str, t: &str, before: &[f64], after: &[f64]) -> CellInput {
        CellInput {
            source_env: s.into(),
            target_env: t.into(),
            before: before.to_vec(),
            after: after.to_vec(),
        }
    }

    #[test]
    fn single_cell_increase() {
        let t = improvement_table(&[cell("O0-ARM", "O3-ARM", &[0.239], &[0.676])]).unwrap();
        let c = t.cell("O0-ARM", "O3-ARM").unwrap();
        assert_eq!(round_decimal(c.inc_percent.unwrap(), 0), 183.0);
    }

    #[test]
    fn unchanged_scores_have_zero_increase() {
        let t = improvement_table(&[
            cell("a", "x", &[0.2, 0.4], &[0.4, 0.2]),
            cell("a", "y", &[0.5], &[0.5]),
            cell("b", "x", &[0.1], &[0.1]),
        ])
        .unwrap();
        for c in t.cells.iter().flatten().flatten() {
            assert_eq!(c.inc_percent, Some(0.0));
        }
        for c in t.row_avg.iter().chain(&t.col_avg) {
            assert_eq!(c.inc_percent, Some(0.0));
        }
        assert_eq!(t.global.inc_percent, Some(0.0));
        assert_eq!(t.cell("b", "y"), None);
    }

    #[test]
    fn empty_cell_and_zero_before() {
        assert!(matches!(
            improvement_table(&[cell("a", "b", &[], &[0.3])]),
            Err(EvalError::EmptyCell { .. })
        ));
        let t = improvement_table(&[cell("a", "b", &[0.0], &[0.3])]).unwrap();
        assert_eq!(t.cell("a", "b").unwrap().inc_percent, None);
    }

    #[test]
    fn rounding_at_ties() {
        assert_eq!(round_decimal(0.6165, 3), 0.617);
        assert_eq!(round_decimal(0.4095, 3), 0.410);
        assert_eq!(round_decimal(0.65475, 3), 0.655);
        assert_eq!(round_decimal(182.85, 0), 183.0);
        assert_eq!(round_decimal(-0.0015, 3), -0.002);
    }

    #[test]
    fn structural_similarity_bounds() {
        let c = synth_corpus(3, 2, Perturbation::NONE, 1).unwrap();
        let g = &c.functions[0];
        assert!((structural_similarity(g, g) - 1.0).abs() < 1e-12);
        assert!((structural_similarity(g, &c.functions[1]) - 1.0).abs() < 1e-12);
        let s = structural_similarity(g, &c.functions[2]);
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn env_pairs_match_by_name() {
        let a = synth_corpus(3, 1, Perturbation::NONE, 1).unwrap();
        let mut b = a.clone();
        b.functions.truncate(2);
        let scores = env_pair_scores(&a, &b);
        assert_eq!(scores.len(), 2);
        assert!(scores.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }
}
