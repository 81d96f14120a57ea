//! Version-control access: releases, first-parent commit ranges and
//! per-commit file diffs.
//!
//! Every backend implements [`History`]. Ordering always comes from the
//! backend's first-parent linearization, never from comparing commit ids.

mod git;
pub mod manifest;
mod sim;
mod svn;

use std::collections::HashSet;
use std::fmt;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use git::GitBackend;
pub use sim::{make_sim_history, sim_commit_id, SimCommit, SimHistory, SimReleaseSpec, FAULTY_PATH, SIM_SOURCE_PATTERN};
pub use svn::SvnBackend;

#[derive(Debug, Error)]
pub enum VcsError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("release manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("invalid release set: {0}")]
    InvalidReleases(String),
    #[error("unknown commit `{0}`")]
    UnknownCommit(CommitId),
    #[error("`{good}` is not a first-parent ancestor of `{bad}`")]
    NotAncestor { good: CommitId, bad: CommitId },
    #[error("commit `{0}` has no parent")]
    RootCommit(CommitId),
    #[error("`{command}` failed with {status}: {stderr}")]
    BackendFailure {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("bad source pattern: {0}")]
    BadPattern(#[from] regex::Error),
    #[error("bad simulated history index: {0}")]
    BadIndex(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Opaque revision identifier: a hash or a numeric svn revision.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommitId(String);

impl CommitId {
    pub fn new(value: impl Into<String>) -> Result<Self, VcsError> {
        let value = value.into();
        if value.trim().is_empty() || value.chars().any(char::is_whitespace) {
            return Err(VcsError::UnknownCommit(CommitId(value)));
        }
        Ok(CommitId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseKind {
    Major,
    Minor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Release {
    pub label: String,
    pub kind: ReleaseKind,
    pub commit: CommitId,
    pub date: NaiveDate,
}

impl Release {
    /// Leading dot-separated component of the label: "9" for "9.2.0".
    pub fn series(&self) -> &str {
        self.label.split('.').next().unwrap_or(&self.label)
    }
}

/// Checks release-set invariants and sorts by date (label breaks ties).
///
/// Labels and commits must be unique and every minor release must belong to
/// exactly one major release series.
pub fn validate_releases(mut releases: Vec<Release>) -> Result<Vec<Release>, VcsError> {
    let mut labels = HashSet::new();
    let mut commits = HashSet::new();
    for r in &releases {
        if r.label.is_empty() {
            return Err(VcsError::InvalidReleases("empty release label".into()));
        }
        if !labels.insert(r.label.as_str()) {
            return Err(VcsError::InvalidReleases(format!("duplicate label `{}`", r.label)));
        }
        if !commits.insert(&r.commit) {
            return Err(VcsError::InvalidReleases(format!(
                "commit `{}` bound to more than one release",
                r.commit
            )));
        }
    }
    for r in releases.iter().filter(|r| r.kind == ReleaseKind::Minor) {
        let owners = releases
            .iter()
            .filter(|m| m.kind == ReleaseKind::Major && m.series() == r.series())
            .count();
        if owners != 1 {
            return Err(VcsError::InvalidReleases(format!(
                "minor release `{}` matches {owners} major releases",
                r.label
            )));
        }
    }
    releases.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.label.cmp(&b.label)));
    Ok(releases)
}

/// Commits after `good` up to and including `bad`, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRange {
    pub good: CommitId,
    pub bad: CommitId,
    pub commits: Vec<CommitId>,
}

impl HistoryRange {
    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Modified,
    Added,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub change: ChangeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub commit: CommitId,
    pub paths: Vec<FileChange>,
}

impl FileDiff {
    /// Builds a diff, normalizing separators and dropping duplicate paths
    /// (first occurrence wins).
    pub fn new(commit: CommitId, changes: impl IntoIterator<Item = FileChange>) -> Self {
        let mut seen = HashSet::new();
        let paths = changes
            .into_iter()
            .map(|c| FileChange {
                path: normalize_path(&c.path),
                change: c.change,
            })
            .filter(|c| !c.path.is_empty() && seen.insert(c.path.clone()))
            .collect();
        FileDiff { commit, paths }
    }
}

/// Forward slashes, no leading `./`, no trailing separator.
pub fn normalize_path(path: &str) -> String {
    let p = path.trim().replace('\\', "/");
    let p = p.trim_start_matches("./");
    p.trim_end_matches('/').to_string()
}

/// Read access to a compiler repository.
///
/// Implementations must be safe to share between threads; read operations
/// may run concurrently.
pub trait History: Send + Sync {
    /// Releases sorted by date, oldest first.
    fn list_releases(&self) -> Result<Vec<Release>, VcsError>;

    /// Canonical form of `id` (full hash for git). Fails for unknown ids.
    fn resolve(&self, id: &CommitId) -> Result<CommitId, VcsError>;

    /// First-parent chain from the root commit up to and including `tip`.
    fn first_parent_chain(&self, tip: &CommitId) -> Result<Vec<CommitId>, VcsError>;

    /// Files changed between `commit` and its first parent.
    fn diff_files(&self, commit: &CommitId) -> Result<FileDiff, VcsError>;

    fn commits_between(&self, good: &CommitId, bad: &CommitId) -> Result<HistoryRange, VcsError> {
        let good = self.resolve(good)?;
        let bad = self.resolve(bad)?;
        let chain = self.first_parent_chain(&bad)?;
        let start = chain
            .iter()
            .position(|c| *c == good)
            .ok_or_else(|| VcsError::NotAncestor {
                good: good.clone(),
                bad: bad.clone(),
            })?;
        let commits = chain[start + 1..].to_vec();
        if commits.is_empty() {
            return Err(VcsError::NotAncestor { good, bad });
        }
        Ok(HistoryRange { good, bad, commits })
    }
}

/// Named source-file filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternPreset {
    /// C sources directly under `gcc/`; excludes the testsuite.
    Gcc,
    /// C++ sources under `llvm/lib/`.
    Llvm,
    /// Sources in simulated histories.
    Sim,
}

impl PatternPreset {
    pub fn pattern(self) -> &'static str {
        match self {
            PatternPreset::Gcc => r"^gcc/[A-Za-z\-]+\.c$",
            PatternPreset::Llvm => r"^llvm/lib/.*\.cpp$",
            PatternPreset::Sim => SIM_SOURCE_PATTERN,
        }
    }

    pub fn regex(self) -> Regex {
        Regex::new(self.pattern()).expect("preset pattern compiles")
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gcc" => Some(PatternPreset::Gcc),
            "llvm" => Some(PatternPreset::Llvm),
            "sim" => Some(PatternPreset::Sim),
            _ => None,
        }
    }
}

pub fn compile_pattern(pattern: &str) -> Result<Regex, VcsError> {
    Ok(Regex::new(pattern)?)
}

/// Paths of `diff` matching `pattern`, in diff order. Deleted files are
/// never fault candidates and are dropped.
pub fn filter_source_files(diff: &FileDiff, pattern: &Regex) -> Vec<String> {
    diff.paths
        .iter()
        .filter(|c| c.change != ChangeKind::Deleted && pattern.is_match(&c.path))
        .map(|c| c.path.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn change(path: &str, change: ChangeKind) -> FileChange {
        FileChange {
            path: path.into(),
            change,
        }
    }

    fn id(s: &str) -> CommitId {
        CommitId::new(s).unwrap()
    }

    #[test]
    fn gcc_filter_drops_testsuite() {
        let diff = FileDiff::new(
            id("206418"),
            [
                change("gcc/ree.c", ChangeKind::Modified),
                change("gcc/testsuite/pr59747.c", ChangeKind::Added),
            ],
        );
        assert_eq!(
            filter_source_files(&diff, &PatternPreset::Gcc.regex()),
            vec!["gcc/ree.c"]
        );
    }

    #[test]
    fn llvm_filter_keeps_both_cpp() {
        let diff = FileDiff::new(
            id("15d5c59"),
            [
                change("llvm/lib/Analysis/InstructionSimplify.cpp", ChangeKind::Modified),
                change("llvm/lib/Transforms/InstCombine/InstCombineCompares.cpp", ChangeKind::Modified),
                change("llvm/test/Transforms/InstCombine/icmp.ll", ChangeKind::Modified),
            ],
        );
        assert_eq!(
            filter_source_files(&diff, &PatternPreset::Llvm.regex()),
            vec![
                "llvm/lib/Analysis/InstructionSimplify.cpp",
                "llvm/lib/Transforms/InstCombine/InstCombineCompares.cpp"
            ]
        );
    }

    #[test]
    fn filter_excludes_deleted_and_empty_match() {
        let diff = FileDiff::new(
            id("c1"),
            [change("a.c", ChangeKind::Deleted), change("b.c", ChangeKind::Modified)],
        );
        assert_eq!(filter_source_files(&diff, &Regex::new(r"\.c$").unwrap()), vec!["b.c"]);
        assert!(filter_source_files(&diff, &Regex::new(r"\.rs$").unwrap()).is_empty());
    }

    #[test]
    fn bad_pattern_is_reported() {
        assert!(matches!(compile_pattern("(unclosed"), Err(VcsError::BadPattern(_))));
    }

    #[test]
    fn diff_dedups_and_normalizes() {
        let diff = FileDiff::new(
            id("c1"),
            [
                change(".\\src\\a.c", ChangeKind::Modified),
                change("src/a.c", ChangeKind::Added),
            ],
        );
        assert_eq!(diff.paths, vec![change("src/a.c", ChangeKind::Modified)]);
    }

    #[test]
    fn commit_id_rejects_blank() {
        assert!(CommitId::new("").is_err());
        assert!(CommitId::new("a b").is_err());
    }

    fn release(label: &str, kind: ReleaseKind, commit: &str, day: u32) -> Release {
        Release {
            label: label.into(),
            kind,
            commit: id(commit),
            date: NaiveDate::from_ymd_opt(2020, 1, day).unwrap(),
        }
    }

    #[test]
    fn releases_sorted_and_validated() {
        let out = validate_releases(vec![
            release("2.0", ReleaseKind::Major, "c30", 30),
            release("1.1", ReleaseKind::Minor, "c14", 14),
            release("1.0", ReleaseKind::Major, "c10", 10),
        ])
        .unwrap();
        let labels: Vec<_> = out.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["1.0", "1.1", "2.0"]);

        assert!(validate_releases(vec![release("3.1", ReleaseKind::Minor, "c1", 1)]).is_err());
        assert!(validate_releases(vec![
            release("1.0", ReleaseKind::Major, "c1", 1),
            release("1.0", ReleaseKind::Major, "c2", 2),
        ])
        .is_err());
        assert!(validate_releases(vec![
            release("1.0", ReleaseKind::Major, "c1", 1),
            release("2.0", ReleaseKind::Major, "c1", 2),
        ])
        .is_err());
    }
}
