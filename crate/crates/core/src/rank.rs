//! Top-K ranking of candidate functions for each target.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::pearson::{pearson, SimilarityError};

/// Score given to rows whose similarity is undefined. It sits below the valid
/// Pearson range, so such rows always rank last.
pub const DEGENERATE_SCORE: f64 = -2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowFlags {
    pub oversized: bool,
    pub zero_variance: bool,
}

impl RowFlags {
    pub fn is_empty(&self) -> bool {
        !self.oversized && !self.zero_variance
    }

    /// `|`-separated flag names, empty when no flag is set.
    pub fn to_field(&self) -> String {
        let mut parts = Vec::new();
        if self.oversized {
            parts.push("oversized");
        }
        if self.zero_variance {
            parts.push("zero_variance");
        }
        parts.join("|")
    }

    /// Inverse of [`RowFlags::to_field`]; `None` for unknown names.
    pub fn parse(field: &str) -> Option<RowFlags> {
        let mut flags = RowFlags::default();
        for part in field.split('|').filter(|p| !p.is_empty()) {
            match part {
                "oversized" => flags.oversized = true,
                "zero_variance" => flags.zero_variance = true,
                _ => return None,
            }
        }
        Some(flags)
    }
}

/// A function prepared for ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFunction {
    /// Display name (real name or `function_<address>`).
    pub name: String,
    pub address: String,
    /// `None` when the function was too large to embed.
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub target_function: String,
    /// 1-based.
    pub rank: usize,
    pub candidate_function: String,
    pub candidate_address: String,
    pub score: f64,
    pub flags: RowFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReportMetadata {
    pub model_version: u32,
    pub vocab_version: u32,
    pub k: usize,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilarityReport {
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

impl SimilarityReport {
    /// Rows grouped per target, in report order. A block starts at rank 1.
    pub fn blocks(&self) -> Vec<&[ReportRow]> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.rows.len() {
            if i == self.rows.len() || self.rows[i].rank == 1 {
                if i > start {
                    out.push(&self.rows[start..i]);
                }
                start = i;
            }
        }
        out
    }

    /// Ranks run 1..K' per block and scores never increase with rank; equal
    /// scores are ordered by candidate address.
    pub fn is_well_ordered(&self) -> bool {
        self.blocks().iter().all(|b| {
            b.iter().enumerate().all(|(i, r)| r.rank == i + 1)
                && b.windows(2).all(|w| {
                    w[0].score > w[1].score
                        || (w[0].score == w[1].score && w[0].candidate_address <= w[1].candidate_address)
                })
        })
    }
}

fn score(target: &RankedFunction, cand: &RankedFunction) -> (f64, RowFlags) {
    let (Some(t), Some(c)) = (&target.embedding, &cand.embedding) else {
        return (
            DEGENERATE_SCORE,
            RowFlags {
                oversized: true,
                zero_variance: false,
            },
        );
    };
    match pearson(t, c) {
        Ok(r) => (r, RowFlags::default()),
        Err(SimilarityError::ZeroVariance) | Err(SimilarityError::DimensionMismatch { .. }) => (
            DEGENERATE_SCORE,
            RowFlags {
                oversized: false,
                zero_variance: true,
            },
        ),
    }
}

/// Orders by score descending, then candidate address, then name.
fn order(a: &(f64, &RankedFunction), b: &(f64, &RankedFunction)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| a.1.address.cmp(&b.1.address))
        .then_with(|| a.1.name.cmp(&b.1.name))
}

/// The `min(k, candidates)` best candidates for one target.
pub fn rank_top_k(target: &RankedFunction, candidates: &[RankedFunction], k: usize) -> Vec<ReportRow> {
    let mut scored: Vec<(f64, &RankedFunction, RowFlags)> = candidates
        .iter()
        .map(|c| {
            let (s, f) = score(target, c);
            (s, c, f)
        })
        .collect();
    scored.sort_by(|a, b| order(&(a.0, a.1), &(b.0, b.1)));
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (s, c, flags))| ReportRow {
            target_function: target.name.clone(),
            rank: i + 1,
            candidate_function: c.name.clone(),
            candidate_address: c.address.clone(),
            score: s,
            flags,
        })
        .collect()
}

pub fn build_report(
    targets: &[RankedFunction],
    candidates: &[RankedFunction],
    metadata: ReportMetadata,
) -> SimilarityReport {
    let rows = targets
        .iter()
        .flat_map(|t| rank_top_k(t, candidates, metadata.k))
        .collect();
    SimilarityReport { rows, metadata }
}
