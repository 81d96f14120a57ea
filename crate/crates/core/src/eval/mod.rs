//! Evaluation metrics: Top-N, MFR, MAR and overlap between techniques.
//!
//! Ranked lists are scored with their score ties resolved by a
//! [`TiePolicy`]. Unordered file sets (the bisection technique's output)
//! are treated as one big tie group, so the worst-case policy ranks the
//! faulty file last among the `m` modified files.

mod io;
mod overlap;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use io::{load_results, output_from_json, parse_truth, render_truth, ResultSet, Runs};
pub use overlap::{overlap, OverlapTable, PairOverlap, Region};
pub use report::{evaluate, EvalOptions, Metric, MetricReport, OutputKind, TechniqueMetrics, DEFAULT_TOP_N};

use crate::sbfl::{Ranking, TiePolicy};
use crate::scalar::{mean, MeanScalar, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no ground truth for bug `{0}`")]
    MissingTruth(String),
    #[error("bug sets differ: {0}")]
    BugSetMismatch(String),
    #[error("MFR/MAR are not applicable to unordered file sets")]
    NotApplicable,
    #[error("nothing to evaluate: {0}")]
    Empty(String),
    #[error("overlap needs at least two techniques")]
    TooFewTechniques,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {message}")]
    Results { path: String, message: String },
    #[error("report invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub bug_id: String,
    pub faulty_files: BTreeSet<String>,
}

/// One technique's answer for one bug.
#[derive(Debug, Clone, PartialEq)]
pub enum TechniqueOutput<S> {
    RankedList(Ranking<S>),
    /// Files modified by the bug-inducing commit. Empty means no candidates
    /// (or an inconclusive bisection).
    UnorderedSet(BTreeSet<String>),
}

impl<S: Scalar> TechniqueOutput<S> {
    pub fn kind(&self) -> OutputKind {
        match self {
            TechniqueOutput::RankedList(_) => OutputKind::Ranked,
            TechniqueOutput::UnorderedSet(_) => OutputKind::Set,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TechniqueOutput::RankedList(r) => r.len(),
            TechniqueOutput::UnorderedSet(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rank of every listed file under `policy`.
    pub fn ranks(&self, policy: TiePolicy) -> BTreeMap<String, usize> {
        match self {
            TechniqueOutput::RankedList(r) => r
                .with_policy(policy)
                .entries
                .into_iter()
                .map(|e| (e.file, e.rank))
                .collect(),
            TechniqueOutput::UnorderedSet(files) => {
                let m = files.len();
                files
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let rank = match policy {
                            TiePolicy::BestCase => 1,
                            TiePolicy::WorstCase => m,
                            TiePolicy::Deterministic => i + 1,
                        };
                        (f.clone(), rank)
                    })
                    .collect()
            }
        }
    }
}

/// Best rank of any faulty file, or `None` when no faulty file is listed.
pub fn rank_of_first_fault<S: Scalar>(
    output: &TechniqueOutput<S>,
    truth: &GroundTruth,
    policy: TiePolicy,
) -> Option<usize> {
    let ranks = output.ranks(policy);
    truth.faulty_files.iter().filter_map(|f| ranks.get(f).copied()).min()
}

/// Rank of each faulty file, with unlisted files at `len + 1`.
pub fn faulty_ranks<S: Scalar>(output: &TechniqueOutput<S>, truth: &GroundTruth, policy: TiePolicy) -> Vec<usize> {
    let ranks = output.ranks(policy);
    let missing = output.len() + 1;
    truth
        .faulty_files
        .iter()
        .map(|f| ranks.get(f).copied().unwrap_or(missing))
        .collect()
}

fn truth_for<'a>(truths: &'a BTreeMap<String, GroundTruth>, bug: &str) -> Result<&'a GroundTruth, EvalError> {
    truths.get(bug).ok_or_else(|| EvalError::MissingTruth(bug.to_string()))
}

/// Number of bugs whose first faulty file ranks within the top `n`.
pub fn top_n<S: Scalar>(
    outputs: &BTreeMap<String, TechniqueOutput<S>>,
    truths: &BTreeMap<String, GroundTruth>,
    n: usize,
    policy: TiePolicy,
) -> Result<usize, EvalError> {
    let mut hits = 0;
    for (bug, out) in outputs {
        let truth = truth_for(truths, bug)?;
        if rank_of_first_fault(out, truth, policy).is_some_and(|r| r <= n) {
            hits += 1;
        }
    }
    Ok(hits)
}

fn ranked_only<S: Scalar>(outputs: &BTreeMap<String, TechniqueOutput<S>>) -> Result<(), EvalError> {
    if outputs.is_empty() {
        return Err(EvalError::Empty("no bugs".into()));
    }
    if outputs.values().any(|o| o.kind() == OutputKind::Set) {
        return Err(EvalError::NotApplicable);
    }
    Ok(())
}

/// Mean first-fault rank. Bugs with no faulty file listed count as
/// `len + 1`.
pub fn mfr<S: Scalar, T: MeanScalar>(
    outputs: &BTreeMap<String, TechniqueOutput<S>>,
    truths: &BTreeMap<String, GroundTruth>,
    policy: TiePolicy,
) -> Result<T, EvalError> {
    ranked_only(outputs)?;
    let mut per_bug = Vec::with_capacity(outputs.len());
    for (bug, out) in outputs {
        let truth = truth_for(truths, bug)?;
        let r = rank_of_first_fault(out, truth, policy).unwrap_or(out.len() + 1);
        per_bug.push(T::from_count(r as u64));
    }
    Ok(mean(&per_bug).expect("non-empty"))
}

/// Mean over bugs of the mean rank of all faulty files.
pub fn mar<S: Scalar, T: MeanScalar>(
    outputs: &BTreeMap<String, TechniqueOutput<S>>,
    truths: &BTreeMap<String, GroundTruth>,
    policy: TiePolicy,
) -> Result<T, EvalError> {
    ranked_only(outputs)?;
    let mut per_bug = Vec::with_capacity(outputs.len());
    for (bug, out) in outputs {
        let truth = truth_for(truths, bug)?;
        let ranks: Vec<T> = faulty_ranks(out, truth, policy)
            .into_iter()
            .map(|r| T::from_count(r as u64))
            .collect();
        per_bug.push(mean(&ranks).expect("ground truth is non-empty"));
    }
    Ok(mean(&per_bug).expect("non-empty"))
}
