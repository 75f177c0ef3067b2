//! From an optimal representation matrix to a ranked, diverse, outlier-free
//! set of representatives, plus stand-alone outlier scoring.
//!
//! All indices in results are sample indices (the row's candidate index),
//! never row positions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::solver::RepresentationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Rows with l2 norm at or below this count as zero.
    pub row_tol: f64,
    /// Normalized-similarity threshold for redundancy pruning, in `[0, 1]`.
    pub diversity_tau: f64,
    /// Outlier-probability threshold for rejection; above 1 disables it.
    pub outlier_theta: f64,
    pub max_k: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            row_tol: 0.0,
            diversity_tau: 0.95,
            outlier_theta: 0.9,
            max_k: None,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.row_tol >= 0.0) {
            return Err(Error::param("row_tol", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.diversity_tau) {
            return Err(Error::param("tau", "must lie in [0, 1]"));
        }
        if !(self.outlier_theta >= 0.0) {
            return Err(Error::param("theta", "must be non-negative"));
        }
        if self.max_k == Some(0) {
            return Err(Error::param("max_k", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedPair {
    pub index: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Descending influence, ties by ascending sample index.
    pub representatives: Vec<usize>,
    pub influence: BTreeMap<usize, f64>,
    pub op_scores: BTreeMap<usize, f64>,
    #[serde(rename = "pruned")]
    pub pruned_as_redundant: Vec<PrunedPair>,
    #[serde(rename = "outliers")]
    pub rejected_as_outliers: Vec<usize>,
}

/// Row positions whose l2 norm exceeds `row_tol`.
pub fn nonzero_rows(rep: &RepresentationMatrix, row_tol: f64) -> Vec<usize> {
    (0..rep.nrows())
        .filter(|&i| rep.row_norm(i) > row_tol)
        .collect()
}

fn rank_by_norm(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    entries
}

/// Nonzero rows as `(sample index, row norm)`, descending norm, ties by
/// ascending sample index.
pub fn influence_ranking(rep: &RepresentationMatrix) -> Vec<(usize, f64)> {
    influence_ranking_with_tol(rep, 0.0)
}

fn influence_ranking_with_tol(rep: &RepresentationMatrix, row_tol: f64) -> Vec<(usize, f64)> {
    let cand = rep.candidate_indices();
    rank_by_norm(
        nonzero_rows(rep, row_tol)
            .into_iter()
            .map(|i| (cand[i], rep.row_norm(i)))
            .collect(),
    )
}

/// Outlier probability `(n - ||row||_1 / ||row||_inf) / (n - 1)`.
///
/// `n` is the number of represented samples (the row length).
pub fn op_score(row: &[f64], n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("n", "outlier probability needs n >= 2"));
    }
    if row.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "row has {} entries, n = {n}",
            row.len()
        )));
    }
    let mut l1 = 0.0;
    let mut linf = 0f64;
    for &v in row {
        let a = v.abs();
        l1 += a;
        linf = linf.max(a);
    }
    if linf == 0.0 {
        return Err(Error::ZeroRow(usize::MAX));
    }
    let ratio = (l1 / linf).clamp(1.0, n as f64);
    Ok((n as f64 - ratio) / (n as f64 - 1.0))
}

fn normalized_similarity(kernel: &KernelMatrix, i: usize, j: usize) -> f64 {
    kernel.get(i, j) / (kernel.diag(i) * kernel.diag(j)).sqrt()
}

/// Greedy redundancy pruning in rank order: a candidate is dropped when an
/// already kept one has normalized similarity `k_ij / sqrt(k_ii k_jj) >= tau`.
/// Returns the kept sample indices (rank order) and the pruned pairs.
pub fn diversity_prune(
    ranked: &[usize],
    kernel: &KernelMatrix,
    tau: f64,
) -> Result<(Vec<usize>, Vec<PrunedPair>)> {
    for &c in ranked {
        if c >= kernel.n() {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: kernel.n(),
            });
        }
        let d = kernel.diag(c);
        if !(d > 0.0) {
            return Err(Error::DegenerateDiagonal { index: c, value: d });
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut pruned = Vec::new();
    for &c in ranked {
        match kept
            .iter()
            .find(|&&k| normalized_similarity(kernel, k, c) >= tau)
        {
            Some(&k) => pruned.push(PrunedPair { index: c, kept: k }),
            None => kept.push(c),
        }
    }
    Ok((kept, pruned))
}

/// Nonzero rows, influence ranking, diversity pruning, outlier rejection and
/// truncation to `max_k`, in that order.
pub fn select(
    kernel: &KernelMatrix,
    rep: &RepresentationMatrix,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    config.validate()?;
    if rep.ncols() != kernel.n() {
        return Err(Error::ShapeMismatch(format!(
            "representation has {} columns, kernel has {} samples",
            rep.ncols(),
            kernel.n()
        )));
    }
    let n = rep.ncols();
    let cand = rep.candidate_indices();
    let rows = nonzero_rows(rep, config.row_tol);
    if rows.is_empty() {
        return Ok(SelectionResult::default());
    }

    let mut influence = BTreeMap::new();
    let mut op_scores = BTreeMap::new();
    for &i in &rows {
        influence.insert(cand[i], rep.row_norm(i));
        if n >= 2 {
            op_scores.insert(cand[i], op_score(rep.row(i), n)?);
        }
    }
    let ranked: Vec<usize> = influence_ranking_with_tol(rep, config.row_tol)
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    let (kept, pruned) = diversity_prune(&ranked, kernel, config.diversity_tau)?;

    let mut representatives = Vec::new();
    let mut rejected = Vec::new();
    for c in kept {
        match op_scores.get(&c) {
            Some(&op) if op >= config.outlier_theta => rejected.push(c),
            _ => representatives.push(c),
        }
    }
    if let Some(k) = config.max_k {
        representatives.truncate(k);
    }
    Ok(SelectionResult {
        representatives,
        influence,
        op_scores,
        pruned_as_redundant: pruned,
        rejected_as_outliers: rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum OutlierMode {
    Threshold(f64),
    TopK(usize),
}

impl std::str::FromStr for OutlierMode {
    type Err = Error;

    /// `threshold:<theta>` or `topk:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("mode", format!("expected threshold:<theta> or topk:<k>, got `{s}`"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "threshold" => {
                let theta: f64 = value.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&theta) {
                    return Err(Error::param("theta", "must lie in [0, 1]"));
                }
                Ok(OutlierMode::Threshold(theta))
            }
            "topk" => Ok(OutlierMode::TopK(value.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSample {
    pub index: usize,
    pub op_score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutlierReport {
    /// Descending score, ties by ascending sample index.
    pub flagged: Vec<FlaggedSample>,
    /// Scores of every nonzero row.
    pub scores: BTreeMap<usize, f64>,
    pub warnings: Vec<String>,
}

/// Flags nonzero-row samples by outlier probability. Zero rows are never
/// flagged: they are inliers that simply do not act as representatives.
pub fn detect_outliers(rep: &RepresentationMatrix, mode: OutlierMode) -> Result<OutlierReport> {
    let n = rep.ncols();
    let cand = rep.candidate_indices();
    let rows = nonzero_rows(rep, 0.0);
    if rows.is_empty() {
        return Err(Error::NoNonzeroRows);
    }
    let mut scores = BTreeMap::new();
    for &i in &rows {
        scores.insert(cand[i], op_score(rep.row(i), n)?);
    }
    let mut ordered: Vec<FlaggedSample> = scores
        .iter()
        .map(|(&index, &op_score)| FlaggedSample { index, op_score })
        .collect();
    ordered.sort_by(|a, b| b.op_score.total_cmp(&a.op_score).then(a.index.cmp(&b.index)));

    let mut warnings = Vec::new();
    let flagged = match mode {
        OutlierMode::Threshold(theta) => {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::param("theta", "must lie in [0, 1]"));
            }
            ordered.into_iter().filter(|f| f.op_score >= theta).collect()
        }
        OutlierMode::TopK(k) => {
            if k > ordered.len() {
                warnings.push(format!(
                    "top-k of {k} exceeds the {} nonzero rows; flagging all of them",
                    ordered.len()
                ));
            }
            ordered.truncate(k);
            ordered
        }
    };
    Ok(OutlierReport {
        flagged,
        scores,
        warnings,
    })
}
