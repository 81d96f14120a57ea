//! In-memory simulated repository.
//!
//! Commits are linear and named `c0`, `c1`, ... Each simulated history may
//! carry an injected bug-inducing commit; the paired simulated oracle fails
//! on that commit and every later one.

use std::collections::{BTreeSet, HashMap};

use chrono::{Duration, NaiveDate};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    validate_releases, ChangeKind, CommitId, FileChange, FileDiff, History, Release, ReleaseKind,
    VcsError,
};

/// Path the injected bug-inducing commit always touches.
pub const FAULTY_PATH: &str = "src/faulty.c";

/// Source filter matching the C files of simulated histories.
pub const SIM_SOURCE_PATTERN: &str = r"^src/[a-z0-9_]+\.c$";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCommit {
    pub id: CommitId,
    pub changes: Vec<FileChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReleaseSpec {
    pub label: String,
    pub kind: ReleaseKind,
    pub index: usize,
}

impl SimReleaseSpec {
    pub fn new(label: impl Into<String>, kind: ReleaseKind, index: usize) -> Self {
        SimReleaseSpec {
            label: label.into(),
            kind,
            index,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimHistory {
    commits: Vec<SimCommit>,
    index: HashMap<CommitId, usize>,
    releases: Vec<Release>,
    bic_index: Option<usize>,
    unresolvable: BTreeSet<usize>,
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

pub fn sim_commit_id(index: usize) -> CommitId {
    CommitId::new(format!("c{index}")).expect("non-empty id")
}

impl SimHistory {
    /// History from explicit commits. Release dates follow commit order.
    pub fn from_commits(
        commits: Vec<SimCommit>,
        releases: &[SimReleaseSpec],
        bic_index: Option<usize>,
    ) -> Result<Self, VcsError> {
        let n = commits.len();
        if let Some(b) = bic_index {
            if b >= n {
                return Err(VcsError::BadIndex(format!("bic index {b} >= {n} commits")));
            }
        }
        let mut index = HashMap::with_capacity(n);
        for (i, c) in commits.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(VcsError::BadIndex(format!("duplicate commit id `{}`", c.id)));
            }
        }
        let mut rel = Vec::with_capacity(releases.len());
        for spec in releases {
            if spec.index >= n {
                return Err(VcsError::BadIndex(format!(
                    "release `{}` at index {} >= {n} commits",
                    spec.label, spec.index
                )));
            }
            rel.push(Release {
                label: spec.label.clone(),
                kind: spec.kind,
                commit: commits[spec.index].id.clone(),
                date: epoch() + Duration::days(spec.index as i64),
            });
        }
        let releases = validate_releases(rel)?;
        Ok(SimHistory {
            commits,
            index,
            releases,
            bic_index,
            unresolvable: BTreeSet::new(),
        })
    }

    /// Marks commits whose simulated build fails.
    pub fn with_unresolvable(mut self, indices: impl IntoIterator<Item = usize>) -> Self {
        self.unresolvable.extend(indices);
        self
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }

    pub fn bic_index(&self) -> Option<usize> {
        self.bic_index
    }

    pub fn commit(&self, index: usize) -> Option<&SimCommit> {
        self.commits.get(index)
    }

    pub fn commits(&self) -> &[SimCommit] {
        &self.commits
    }

    pub fn head(&self) -> Option<&CommitId> {
        self.commits.last().map(|c| &c.id)
    }

    pub fn root(&self) -> Option<&CommitId> {
        self.commits.first().map(|c| &c.id)
    }

    pub fn index_of(&self, id: &CommitId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_unresolvable(&self, index: usize) -> bool {
        self.unresolvable.contains(&index)
    }

    /// Simulated bug presence: true at and after the injected commit.
    pub fn manifests_bug(&self, index: usize) -> bool {
        self.bic_index.is_some_and(|b| index >= b)
    }

    /// Human-readable listing, one commit per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.commits {
            out.push_str(c.id.as_str());
            for ch in &c.changes {
                let tag = match ch.change {
                    ChangeKind::Modified => 'M',
                    ChangeKind::Added => 'A',
                    ChangeKind::Deleted => 'D',
                };
                out.push_str(&format!(" {tag}:{}", ch.path));
            }
            out.push('\n');
        }
        out
    }
}

fn pool_path(i: usize) -> String {
    match i % 4 {
        0 | 1 => format!("src/mod_{i}.c"),
        2 => format!("include/mod_{i}.h"),
        _ => format!("docs/note_{i}.md"),
    }
}

/// Deterministic linear history with an injected bug-inducing commit.
///
/// Each commit touches `files_per_commit` distinct paths drawn from a fixed
/// pool; the bug-inducing commit additionally touches [`FAULTY_PATH`].
pub fn make_sim_history(
    num_commits: usize,
    bic_index: usize,
    releases: &[SimReleaseSpec],
    files_per_commit: usize,
    seed: u64,
) -> Result<SimHistory, VcsError> {
    if num_commits == 0 {
        return Err(VcsError::BadIndex("history needs at least one commit".into()));
    }
    if files_per_commit == 0 {
        return Err(VcsError::BadIndex("files_per_commit must be positive".into()));
    }
    if bic_index >= num_commits {
        return Err(VcsError::BadIndex(format!(
            "bic index {bic_index} >= {num_commits} commits"
        )));
    }
    let pool = (4 * files_per_commit).max(16);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let commits = (0..num_commits)
        .map(|i| {
            let kind = if i == 0 { ChangeKind::Added } else { ChangeKind::Modified };
            let mut picks: Vec<usize> = sample(&mut rng, pool, files_per_commit).into_vec();
            picks.sort_unstable();
            let mut changes: Vec<FileChange> = picks
                .into_iter()
                .map(|p| FileChange {
                    path: pool_path(p),
                    change: kind,
                })
                .collect();
            if i == bic_index {
                changes.push(FileChange {
                    path: FAULTY_PATH.into(),
                    change: kind,
                });
            }
            SimCommit {
                id: sim_commit_id(i),
                changes,
            }
        })
        .collect();
    SimHistory::from_commits(commits, releases, Some(bic_index))
}

impl History for SimHistory {
    fn list_releases(&self) -> Result<Vec<Release>, VcsError> {
        Ok(self.releases.clone())
    }

    fn resolve(&self, id: &CommitId) -> Result<CommitId, VcsError> {
        if self.index.contains_key(id) {
            Ok(id.clone())
        } else {
            Err(VcsError::UnknownCommit(id.clone()))
        }
    }

    fn first_parent_chain(&self, tip: &CommitId) -> Result<Vec<CommitId>, VcsError> {
        let end = self
            .index_of(tip)
            .ok_or_else(|| VcsError::UnknownCommit(tip.clone()))?;
        Ok(self.commits[..=end].iter().map(|c| c.id.clone()).collect())
    }

    fn diff_files(&self, commit: &CommitId) -> Result<FileDiff, VcsError> {
        let i = self
            .index_of(commit)
            .ok_or_else(|| VcsError::UnknownCommit(commit.clone()))?;
        if i == 0 {
            return Err(VcsError::RootCommit(commit.clone()));
        }
        Ok(FileDiff::new(commit.clone(), self.commits[i].changes.clone()))
    }
}
