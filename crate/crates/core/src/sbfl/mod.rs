//! Spectrum-based fault localization.
//!
//! Statement spectra are tabulated from coverage runs, scored with one of
//! six formulas (optionally blended with the historical Histrum score),
//! averaged per file and ranked. Everything here is a pure function and is
//! generic over the float type.

mod formula;
mod io;
mod rank;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use formula::{histrum, hsfl_score, score, FormulaKind, DEFAULT_ALPHA, DEFAULT_DSTAR_POWER};
pub use io::{parse_history, parse_spectrum, render_history, render_spectrum};
pub use rank::{rank_files, RankedFile, Ranking, TiePolicy};

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum SbflError {
    #[error("spectrum has no failing run")]
    NoFailingRun,
    #[error("failing run `{0}` covers no statement")]
    EmptyFailingRun(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid statement `{0}`: expected <file>:<line> with line >= 1")]
    BadStatement(String),
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("DStar power must be at least 1")]
    BadPower,
    #[error("unknown formula `{0}`")]
    UnknownFormula(String),
}

/// A source line: file path plus 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StatementId {
    pub file: String,
    pub line: u32,
}

impl StatementId {
    pub fn new(file: impl Into<String>, line: u32) -> Result<Self, SbflError> {
        let file = crate::vcs::normalize_path(&file.into());
        if file.is_empty() || line == 0 || file.chars().any(char::is_whitespace) {
            return Err(SbflError::BadStatement(format!("{file}:{line}")));
        }
        Ok(StatementId { file, line })
    }
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

impl FromStr for StatementId {
    type Err = SbflError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SbflError::BadStatement(s.to_string());
        let (file, line) = s.rsplit_once(':').ok_or_else(bad)?;
        let line: u32 = line.parse().map_err(|_| bad())?;
        StatementId::new(file, line).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Passing,
    Failing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRun {
    pub label: String,
    pub outcome: Outcome,
    pub covered: BTreeSet<StatementId>,
}

/// Coverage tallies for one statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub ef: u64,
    pub ep: u64,
    pub nf: u64,
    pub np: u64,
}

impl Counts {
    pub fn totalf(&self) -> u64 {
        self.ef + self.nf
    }

    pub fn totalp(&self) -> u64 {
        self.ep + self.np
    }
}

/// Per-statement counts over a fixed set of runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectrumCounts {
    pub statements: BTreeMap<StatementId, Counts>,
    pub totalf: u64,
    pub totalp: u64,
}

impl SpectrumCounts {
    /// The statements covered by at least one failing run (the set 𝒜).
    pub fn failing_cover(&self) -> BTreeSet<StatementId> {
        self.statements
            .iter()
            .filter(|(_, c)| c.ef > 0)
            .map(|(s, _)| s.clone())
            .collect()
    }
}

/// Tabulates the spectrum of `runs`. The statement universe is the union of
/// the covered sets.
pub fn build_spectrum(runs: &[CoverageRun]) -> Result<SpectrumCounts, SbflError> {
    let totalf = runs.iter().filter(|r| r.outcome == Outcome::Failing).count() as u64;
    let totalp = runs.len() as u64 - totalf;
    if totalf == 0 {
        return Err(SbflError::NoFailingRun);
    }
    if let Some(r) = runs
        .iter()
        .find(|r| r.outcome == Outcome::Failing && r.covered.is_empty())
    {
        return Err(SbflError::EmptyFailingRun(r.label.clone()));
    }
    let mut statements: BTreeMap<StatementId, Counts> = BTreeMap::new();
    for run in runs {
        for s in &run.covered {
            let c = statements.entry(s.clone()).or_default();
            match run.outcome {
                Outcome::Failing => c.ef += 1,
                Outcome::Passing => c.ep += 1,
            }
        }
    }
    for c in statements.values_mut() {
        c.nf = totalf - c.ef;
        c.np = totalp - c.ep;
    }
    Ok(SpectrumCounts {
        statements,
        totalf,
        totalp,
    })
}

/// Historical modification counts for one statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HistoryEntry {
    pub induce: u64,
    pub noninduce: u64,
}

impl HistoryEntry {
    /// Membership in S_c: modified by the bug-inducing commit.
    pub fn in_sc(&self) -> bool {
        self.induce > 0
    }
}

/// Histrum inputs keyed by statement. Statements absent from the map are
/// outside S_c.
pub type HistoryStats = BTreeMap<StatementId, HistoryEntry>;

/// Statement-level scoring mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scoring<T> {
    Plain(FormulaKind),
    Hsfl { formula: FormulaKind, alpha: T },
}

/// Scores every statement in the spectrum.
pub fn score_statements<T: Scalar>(
    spectrum: &SpectrumCounts,
    scoring: Scoring<T>,
    history: &HistoryStats,
) -> BTreeMap<StatementId, T> {
    spectrum
        .statements
        .iter()
        .map(|(s, c)| {
            let v = match scoring {
                Scoring::Plain(kind) => score::<T>(kind, c),
                Scoring::Hsfl { formula, alpha } => {
                    let h = history.get(s).copied().unwrap_or_default();
                    hsfl_score(
                        score::<T>(formula, c),
                        histrum::<T>(&h),
                        alpha,
                        c.ef > 0,
                        h.in_sc(),
                    )
                }
            };
            (s.clone(), v)
        })
        .collect()
}

/// Mean score of the statements of `file` that appear in `failing_cover`,
/// or `None` when there are none (the file is then left out of the
/// ranking).
pub fn aggregate_file<T: Scalar>(
    file: &str,
    statement_scores: &BTreeMap<StatementId, T>,
    failing_cover: &BTreeSet<StatementId>,
) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0u64;
    for (s, v) in statement_scores.range(
        StatementId {
            file: file.to_string(),
            line: 0,
        }..,
    ) {
        if s.file != file {
            break;
        }
        if failing_cover.contains(s) {
            sum = sum + *v;
            n += 1;
        }
    }
    // +inf / n stays +inf, which is the intended sentinel behaviour
    (n > 0).then(|| sum / T::from_count(n))
}

/// Aggregated file scores plus the files excluded for lack of failing
/// coverage.
pub fn file_scores<T: Scalar>(
    statement_scores: &BTreeMap<StatementId, T>,
    failing_cover: &BTreeSet<StatementId>,
) -> (Vec<(String, T)>, Vec<String>) {
    let files: BTreeSet<&str> = statement_scores.keys().map(|s| s.file.as_str()).collect();
    let mut scored = Vec::new();
    let mut excluded = Vec::new();
    for f in files {
        match aggregate_file(f, statement_scores, failing_cover) {
            Some(v) => scored.push((f.to_string(), v)),
            None => {
                log::debug!("{f}: no statement covered by a failing run, excluded");
                excluded.push(f.to_string());
            }
        }
    }
    (scored, excluded)
}

/// Runs the whole pipeline: spectrum, statement scores, file aggregation
/// and ranking.
pub fn localize<T: Scalar>(
    runs: &[CoverageRun],
    scoring: Scoring<T>,
    history: &HistoryStats,
    tie_policy: TiePolicy,
) -> Result<Ranking<T>, SbflError> {
    let spectrum = build_spectrum(runs)?;
    let scores = score_statements(&spectrum, scoring, history);
    let (files, excluded) = file_scores(&scores, &spectrum.failing_cover());
    let mut ranking = rank_files(files, tie_policy);
    ranking.excluded = excluded;
    Ok(ranking)
}
