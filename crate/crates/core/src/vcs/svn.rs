//! `svn` subprocess adapter.
//!
//! * `svn log -q -r 1:<tip> <url>`: `r<N> | author | date` lines between
//!   dashed separators.
//! * `svn diff --summarize -c <N> <url>`: seven status columns, one space,
//!   then the path relative to `url`.
//!
//! Revisions are plain numbers; an optional leading `r` is accepted.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Mutex;

use super::{
    manifest::read_manifest, ChangeKind, CommitId, FileChange, FileDiff, History, Release,
    VcsError,
};

#[derive(Debug)]
pub struct SvnBackend {
    url: String,
    manifest: Option<PathBuf>,
    launch: Mutex<()>,
}

impl SvnBackend {
    /// `url` may be a repository URL or a working copy path.
    pub fn open(url: impl Into<String>, manifest: Option<PathBuf>) -> Result<Self, VcsError> {
        let backend = SvnBackend {
            url: url.into(),
            manifest,
            launch: Mutex::new(()),
        };
        backend
            .svn(&["info", "--show-item", "revision"])
            .map_err(|e| VcsError::BackendUnavailable(e.to_string()))?;
        Ok(backend)
    }

    fn svn(&self, args: &[&str]) -> Result<String, VcsError> {
        let _guard = self.launch.lock().unwrap_or_else(|e| e.into_inner());
        let out = Command::new("svn")
            .args(args)
            .arg(&self.url)
            .output()
            .map_err(|e| VcsError::BackendUnavailable(format!("cannot launch svn: {e}")))?;
        if !out.status.success() {
            return Err(VcsError::BackendFailure {
                command: format!("svn {} {}", args.join(" "), self.url),
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}

pub(crate) fn revision_number(id: &CommitId) -> Option<u64> {
    id.as_str().trim_start_matches('r').parse().ok()
}

pub(crate) fn parse_log_revisions(text: &str) -> Vec<CommitId> {
    text.lines()
        .filter_map(|l| {
            let head = l.split('|').next()?.trim();
            let n: u64 = head.strip_prefix('r')?.parse().ok()?;
            CommitId::new(n.to_string()).ok()
        })
        .collect()
}

pub(crate) fn parse_summarize(commit: &CommitId, text: &str) -> FileDiff {
    let changes = text.lines().filter_map(|line| {
        if line.len() <= 8 {
            return None;
        }
        let (status, path) = line.split_at(8);
        let change = match status.chars().next()? {
            'A' => ChangeKind::Added,
            'D' => ChangeKind::Deleted,
            'M' | 'R' => ChangeKind::Modified,
            // property-only changes
            _ => return None,
        };
        Some(FileChange {
            path: path.trim().to_string(),
            change,
        })
    });
    FileDiff::new(commit.clone(), changes)
}

impl History for SvnBackend {
    fn list_releases(&self) -> Result<Vec<Release>, VcsError> {
        let Some(path) = &self.manifest else {
            return Ok(Vec::new());
        };
        let mut releases = read_manifest(path)?;
        for r in &mut releases {
            r.commit = self.resolve(&r.commit)?;
        }
        Ok(releases)
    }

    fn resolve(&self, id: &CommitId) -> Result<CommitId, VcsError> {
        let n = revision_number(id).ok_or_else(|| VcsError::UnknownCommit(id.clone()))?;
        let rev = n.to_string();
        let out = self.svn(&["log", "-q", "-r", &rev])?;
        parse_log_revisions(&out)
            .into_iter()
            .next()
            .ok_or_else(|| VcsError::UnknownCommit(id.clone()))
    }

    fn first_parent_chain(&self, tip: &CommitId) -> Result<Vec<CommitId>, VcsError> {
        let tip = self.resolve(tip)?;
        let out = self.svn(&["log", "-q", "-r", &format!("1:{tip}")])?;
        Ok(parse_log_revisions(&out))
    }

    fn diff_files(&self, commit: &CommitId) -> Result<FileDiff, VcsError> {
        let commit = self.resolve(commit)?;
        if revision_number(&commit) == Some(1) {
            return Err(VcsError::RootCommit(commit));
        }
        let out = self.svn(&["diff", "--summarize", "-c", commit.as_str()])?;
        Ok(parse_summarize(&commit, &out))
    }
}
