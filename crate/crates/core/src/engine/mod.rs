//! Bug-inducing commit isolation.
//!
//! [`run_basic`] narrows the search space in three steps before looking at
//! individual commits:
//!
//! 1. the earliest failing major release becomes the bad boundary, the
//!    latest passing major before it the good boundary;
//! 2. minor releases inside that window tighten both boundaries;
//! 3. binary search over the first-parent commits in between finds the
//!    first failing commit.
//!
//! The files that commit touched, filtered by the case's source pattern, are
//! the fault candidates.
//!
//! Every oracle request goes through [`Basic::probe`], which memoizes
//! verdicts per commit and records them in the probe log, so
//! `oracle_calls == probe_log.len()` holds for every report.

mod case;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{CompileConfig, Oracle, OracleError, Revision, TestProgram, Verdict};
use crate::vcs::{
    filter_source_files, CommitId, History, HistoryRange, Release, ReleaseKind, VcsError,
};

pub use case::{
    load_case_file, retrieve_initial, BackendSpec, CaseFile, CheckSpec, CompileSpec, LoadedCase, ProgramSpec,
    SimReleaseEntry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Intake,
    Rough,
    Fine,
    Range,
    Bisect,
    Diff,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Intake => "intake",
            Stage::Rough => "rough range",
            Stage::Fine => "fine range",
            Stage::Range => "commit range",
            Stage::Bisect => "bisection",
            Stage::Diff => "differential analysis",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("intake failed: bad revision `{revision}` yields {verdict}, not FAIL")]
    IntakeFailed { revision: CommitId, verdict: Verdict },
    #[error("the bug already manifests at the oldest testable commit `{0}`")]
    BugPredatesHistory(CommitId),
    #[error("range unsound: `{commit}` expected {expected} but oracle says {actual}")]
    RangeUnsound {
        commit: CommitId,
        expected: &'static str,
        actual: Verdict,
    },
    #[error("probe budget of {0} oracle calls exhausted")]
    ProbeBudget(usize),
    #[error("{stage}: {source}")]
    Vcs {
        stage: Stage,
        #[source]
        source: VcsError,
    },
    #[error("{stage}: {source}")]
    Oracle {
        stage: Stage,
        #[source]
        source: OracleError,
    },
    #[error("case configuration: {0}")]
    ConfigParse(String),
}

impl EngineError {
    fn vcs(stage: Stage) -> impl FnOnce(VcsError) -> EngineError {
        move |source| EngineError::Vcs { stage, source }
    }
}

/// A reproducible bug: the failing revision plus everything needed to ask
/// the oracle about other revisions.
#[derive(Debug, Clone)]
pub struct BugCase {
    pub id: String,
    pub bad_revision: CommitId,
    pub config: CompileConfig,
    pub program: TestProgram,
    pub source_pattern: Regex,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Boundary {
    Release { label: String, commit: CommitId },
    Commit { commit: CommitId },
}

impl Boundary {
    pub fn commit(&self) -> &CommitId {
        match self {
            Boundary::Release { commit, .. } | Boundary::Commit { commit } => commit,
        }
    }

    fn of_release(r: &Release) -> Self {
        Boundary::Release {
            label: r.label.clone(),
            commit: r.commit.clone(),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Release { label, commit } => write!(f, "{label} ({commit})"),
            Boundary::Commit { commit } => write!(f, "{commit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub stage: Stage,
    pub revision: CommitId,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeResult {
    pub good: Boundary,
    pub bad: Boundary,
    /// Probes issued by the stage that produced this range.
    pub probes: Vec<Probe>,
    /// No major release passed; the good boundary fell back to the oldest
    /// passing commit of the history.
    pub no_passing_release: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BisectOutcome {
    Found(CommitId),
    /// Every commit left between the boundaries was unresolvable (or the
    /// probe budget ran out); the narrowed range is returned instead.
    Inconclusive(HistoryRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Found,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationReport {
    pub bug_id: String,
    pub status: ReportStatus,
    pub bic: Option<CommitId>,
    /// Narrowed range when the status is inconclusive.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub remaining: Option<HistoryRange>,
    /// Unordered; serialized in ascending path order.
    pub candidate_files: Vec<String>,
    pub no_candidates: bool,
    pub no_passing_release: bool,
    pub rough_range: (Boundary, Boundary),
    pub fine_range: (Boundary, Boundary),
    pub bisect_calls: usize,
    pub oracle_calls: usize,
    pub wall_time: f64,
    pub probe_log: Vec<Probe>,
}

impl IsolationReport {
    /// JSON with `wall_time` zeroed, for byte-level comparisons.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_time = 0.0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOptions {
    /// Probe every major release instead of stopping at the first failure.
    pub exhaustive_majors: bool,
    /// Upper bound on oracle calls for the whole run.
    pub max_probes: Option<usize>,
}

/// Single-run isolation engine over one bug case.
pub struct Basic<'a> {
    history: &'a dyn History,
    oracle: &'a dyn Oracle,
    case: &'a BugCase,
    options: EngineOptions,
    chain: Vec<CommitId>,
    position: HashMap<CommitId, usize>,
    known: HashMap<CommitId, Verdict>,
    log: Vec<Probe>,
}

impl<'a> Basic<'a> {
    pub fn new(
        history: &'a dyn History,
        oracle: &'a dyn Oracle,
        case: &'a BugCase,
        options: EngineOptions,
    ) -> Result<Self, EngineError> {
        let bad = history
            .resolve(&case.bad_revision)
            .map_err(EngineError::vcs(Stage::Intake))?;
        let chain = history
            .first_parent_chain(&bad)
            .map_err(EngineError::vcs(Stage::Intake))?;
        let position = chain.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Basic {
            history,
            oracle,
            case,
            options,
            chain,
            position,
            known: HashMap::new(),
            log: Vec::new(),
        })
    }

    /// The bisection window between two range boundaries.
    pub fn window(&self, good: &CommitId, bad: &CommitId) -> Result<HistoryRange, EngineError> {
        self.history
            .commits_between(good, bad)
            .map_err(EngineError::vcs(Stage::Range))
    }

    pub fn probe_log(&self) -> &[Probe] {
        &self.log
    }

    pub fn oracle_calls(&self) -> usize {
        self.log.len()
    }

    fn pos(&self, commit: &CommitId) -> Option<usize> {
        self.position.get(commit).copied()
    }

    fn bad_commit(&self) -> &CommitId {
        self.chain.last().expect("chain contains the bad revision")
    }

    fn check_budget(&self) -> Result<(), EngineError> {
        match self.options.max_probes {
            Some(max) if self.log.len() >= max => Err(EngineError::ProbeBudget(max)),
            _ => Ok(()),
        }
    }

    fn record(&mut self, stage: Stage, revision: &Revision, verdict: Verdict) {
        self.known.insert(revision.commit.clone(), verdict.clone());
        self.log.push(Probe {
            stage,
            revision: revision.commit.clone(),
            label: revision.label.clone(),
            verdict,
        });
    }

    /// Verdict for `revision`, asking the oracle only on the first request.
    pub fn probe(&mut self, revision: &Revision, stage: Stage) -> Result<Verdict, EngineError> {
        if let Some(v) = self.known.get(&revision.commit) {
            return Ok(v.clone());
        }
        self.check_budget()?;
        let verdict = self
            .oracle
            .evaluate(revision, &self.case.config, &self.case.program)
            .map_err(|source| EngineError::Oracle { stage, source })?;
        self.record(stage, revision, verdict.clone());
        Ok(verdict)
    }

    fn probe_commit(&mut self, commit: &CommitId, stage: Stage) -> Result<Verdict, EngineError> {
        self.probe(&Revision::commit(commit.clone()), stage)
    }

    fn probe_release(&mut self, r: &Release, stage: Stage) -> Result<Verdict, EngineError> {
        self.probe(&Revision::release(r.commit.clone(), r.label.clone()), stage)
    }

    /// Checks that the bad revision reproduces the bug.
    pub fn intake(&mut self) -> Result<(), EngineError> {
        let bad = self.bad_commit().clone();
        match self.probe_commit(&bad, Stage::Intake)? {
            Verdict::Fail => Ok(()),
            verdict => Err(EngineError::IntakeFailed {
                revision: bad,
                verdict,
            }),
        }
    }

    /// Releases of `kind` on the bad revision's first-parent chain, oldest
    /// first. Releases off the chain (or after the bad revision) cannot
    /// bound the search and are skipped.
    fn on_chain(&self, releases: &[Release], kind: ReleaseKind) -> Vec<(usize, Release)> {
        let mut out: Vec<(usize, Release)> = releases
            .iter()
            .filter(|r| r.kind == kind)
            .filter_map(|r| match self.pos(&r.commit) {
                Some(p) => Some((p, r.clone())),
                None => {
                    log::debug!("release {} is not an ancestor of the bad revision", r.label);
                    None
                }
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.date.cmp(&b.1.date)));
        out
    }

    fn probe_majors(&mut self, majors: &[(usize, Release)]) -> Result<Vec<Verdict>, EngineError> {
        if !self.options.exhaustive_majors {
            let mut verdicts = Vec::new();
            for (_, r) in majors {
                let v = self.probe_release(r, Stage::Rough)?;
                let stop = v.is_fail();
                verdicts.push(v);
                if stop {
                    break;
                }
            }
            return Ok(verdicts);
        }
        // independent releases: evaluate concurrently, log in date order
        let pending: Vec<&Release> = majors
            .iter()
            .map(|(_, r)| r)
            .filter(|r| !self.known.contains_key(&r.commit))
            .collect();
        if let Some(max) = self.options.max_probes {
            if self.log.len() + pending.len() > max {
                return Err(EngineError::ProbeBudget(max));
            }
        }
        let (oracle, case) = (self.oracle, self.case);
        let results: Vec<(Revision, Result<Verdict, OracleError>)> = std::thread::scope(|s| {
            let handles: Vec<_> = pending
                .iter()
                .map(|r| {
                    let rev = Revision::release(r.commit.clone(), r.label.clone());
                    s.spawn(move || {
                        let v = oracle.evaluate(&rev, &case.config, &case.program);
                        (rev, v)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("probe thread")).collect()
        });
        for (rev, v) in results {
            let v = v.map_err(|source| EngineError::Oracle {
                stage: Stage::Rough,
                source,
            })?;
            self.record(Stage::Rough, &rev, v);
        }
        majors
            .iter()
            .map(|(_, r)| self.probe_release(r, Stage::Rough))
            .collect()
    }

    /// Good/bad boundaries from major releases.
    pub fn rough_range(&mut self, releases: &[Release]) -> Result<RangeResult, EngineError> {
        let start = self.log.len();
        let majors = self.on_chain(releases, ReleaseKind::Major);
        let verdicts = self.probe_majors(&majors)?;

        let first_fail = verdicts.iter().position(Verdict::is_fail);
        let bad = match first_fail {
            Some(i) => Boundary::of_release(&majors[i].1),
            None => Boundary::Commit {
                commit: self.bad_commit().clone(),
            },
        };
        let limit = first_fail.unwrap_or(verdicts.len());
        let good = verdicts[..limit]
            .iter()
            .rposition(Verdict::is_pass)
            .map(|i| Boundary::of_release(&majors[i].1));

        let (good, no_passing_release) = match good {
            Some(g) => (g, false),
            None => (self.oldest_passing(bad.commit())?, true),
        };
        Ok(RangeResult {
            good,
            bad,
            probes: self.log[start..].to_vec(),
            no_passing_release,
        })
    }

    /// First resolvable commit from the root, which must pass.
    fn oldest_passing(&mut self, bad: &CommitId) -> Result<Boundary, EngineError> {
        let end = self.pos(bad).expect("bad boundary on chain");
        for i in 0..end {
            let c = self.chain[i].clone();
            match self.probe_commit(&c, Stage::Rough)? {
                Verdict::Pass => return Ok(Boundary::Commit { commit: c }),
                Verdict::Fail => return Err(EngineError::BugPredatesHistory(c)),
                Verdict::Unresolvable(_) => continue,
            }
        }
        Err(EngineError::BugPredatesHistory(self.chain[end].clone()))
    }

    /// Tightens `rough` with the minor releases strictly inside it.
    pub fn fine_range(
        &mut self,
        rough: &RangeResult,
        releases: &[Release],
    ) -> Result<RangeResult, EngineError> {
        let start = self.log.len();
        let lo = self.pos(rough.good.commit()).expect("good boundary on chain");
        let hi = self.pos(rough.bad.commit()).expect("bad boundary on chain");
        let minors: Vec<(usize, Release)> = self
            .on_chain(releases, ReleaseKind::Minor)
            .into_iter()
            .filter(|(p, _)| *p > lo && *p <= hi)
            .collect();

        let mut verdicts = Vec::with_capacity(minors.len());
        for (_, r) in &minors {
            verdicts.push(self.probe_release(r, Stage::Fine)?);
        }

        let first_fail = verdicts.iter().position(Verdict::is_fail);
        let bad = first_fail
            .map(|i| Boundary::of_release(&minors[i].1))
            .unwrap_or_else(|| rough.bad.clone());
        let limit = first_fail.unwrap_or(verdicts.len());
        let good = verdicts[..limit]
            .iter()
            .rposition(Verdict::is_pass)
            .map(|i| Boundary::of_release(&minors[i].1))
            .unwrap_or_else(|| rough.good.clone());

        Ok(RangeResult {
            good,
            bad,
            probes: self.log[start..].to_vec(),
            no_passing_release: rough.no_passing_release,
        })
    }

    fn expect(&mut self, commit: &CommitId, pass: bool) -> Result<(), EngineError> {
        let v = self.probe_commit(commit, Stage::Bisect)?;
        let ok = if pass { v.is_pass() } else { v.is_fail() };
        if ok {
            Ok(())
        } else {
            Err(EngineError::RangeUnsound {
                commit: commit.clone(),
                expected: if pass { "PASS" } else { "FAIL" },
                actual: v,
            })
        }
    }

    /// Binary search for the first failing commit of `range`.
    ///
    /// An unresolvable midpoint is replaced by its nearest neighbours,
    /// alternating after/before and moving outward, like `git bisect skip`.
    pub fn bisect(&mut self, range: &HistoryRange) -> Result<BisectOutcome, EngineError> {
        self.expect(&range.good, true)?;
        self.expect(&range.bad, false)?;

        // slot 0 is the good boundary, slot n the bad one
        let slots: Vec<&CommitId> = std::iter::once(&range.good).chain(&range.commits).collect();
        let (mut lo, mut hi) = (0usize, slots.len() - 1);
        let mut skipped: HashSet<usize> = HashSet::new();

        'search: while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let width = hi - lo;
            for step in 0..2 * width {
                let offset = (step / 2 + step % 2) as isize * if step % 2 == 1 { 1 } else { -1 };
                let at = mid as isize + offset;
                if at <= lo as isize || at >= hi as isize {
                    continue;
                }
                let at = at as usize;
                if skipped.contains(&at) {
                    continue;
                }
                let verdict = match self.probe_commit(slots[at], Stage::Bisect) {
                    Err(EngineError::ProbeBudget(_)) => break 'search,
                    other => other?,
                };
                match verdict {
                    Verdict::Fail => hi = at,
                    Verdict::Pass => lo = at,
                    Verdict::Unresolvable(_) => {
                        skipped.insert(at);
                        continue;
                    }
                }
                continue 'search;
            }
            break;
        }

        if hi - lo == 1 {
            Ok(BisectOutcome::Found(slots[hi].clone()))
        } else {
            Ok(BisectOutcome::Inconclusive(HistoryRange {
                good: slots[lo].clone(),
                bad: slots[hi].clone(),
                commits: slots[lo + 1..=hi].iter().map(|c| (*c).clone()).collect(),
            }))
        }
    }
}

/// Source files modified by `bic` relative to its first parent.
pub fn differential_analysis(
    history: &dyn History,
    bic: &CommitId,
    pattern: &Regex,
) -> Result<Vec<String>, VcsError> {
    let diff = history.diff_files(bic)?;
    Ok(filter_source_files(&diff, pattern))
}

/// Full pipeline: intake, rough range, fine range, bisection, differential
/// analysis.
pub fn run_basic(
    history: &dyn History,
    oracle: &dyn Oracle,
    case: &BugCase,
    options: EngineOptions,
) -> Result<IsolationReport, EngineError> {
    let started = Instant::now();
    let mut engine = Basic::new(history, oracle, case, options)?;
    engine.intake()?;
    let releases = history.list_releases().map_err(EngineError::vcs(Stage::Rough))?;
    let rough = engine.rough_range(&releases)?;
    let fine = engine.fine_range(&rough, &releases)?;
    let range = engine.window(fine.good.commit(), fine.bad.commit())?;
    let before_bisect = engine.oracle_calls();
    let outcome = engine.bisect(&range)?;
    let bisect_calls = engine.oracle_calls() - before_bisect;

    let (status, bic, remaining, mut files) = match outcome {
        BisectOutcome::Found(bic) => {
            let files = differential_analysis(history, &bic, &case.source_pattern)
                .map_err(EngineError::vcs(Stage::Diff))?;
            (ReportStatus::Found, Some(bic), None, files)
        }
        BisectOutcome::Inconclusive(r) => (ReportStatus::Inconclusive, None, Some(r), Vec::new()),
    };
    files.sort();
    files.dedup();

    Ok(IsolationReport {
        bug_id: case.id.clone(),
        status,
        no_candidates: status == ReportStatus::Found && files.is_empty(),
        bic,
        remaining,
        candidate_files: files,
        no_passing_release: rough.no_passing_release,
        rough_range: (rough.good, rough.bad),
        fine_range: (fine.good, fine.bad),
        bisect_calls,
        oracle_calls: engine.oracle_calls(),
        wall_time: started.elapsed().as_secs_f64(),
        probe_log: engine.log,
    })
}

#[cfg(test)]
mod tests;
