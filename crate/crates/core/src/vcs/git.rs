//! `git` subprocess adapter.
//!
//! Subcommands used and the output shapes they are parsed from:
//!
//! * `git rev-parse --verify --quiet <id>^{commit}`: one full hash.
//! * `git rev-list --first-parent --reverse <tip>`: one hash per line, root first.
//! * `git diff --name-status --no-renames <c>^1 <c>`: `<status>\t<path>` per line.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use super::{
    manifest::read_manifest, ChangeKind, CommitId, FileChange, FileDiff, History, Release,
    VcsError,
};

#[derive(Debug)]
pub struct GitBackend {
    repo: PathBuf,
    manifest: Option<PathBuf>,
    // process launches are serialized per working directory
    launch: Mutex<()>,
}

impl GitBackend {
    pub fn open(repo: impl Into<PathBuf>, manifest: Option<PathBuf>) -> Result<Self, VcsError> {
        let repo = repo.into();
        if !repo.is_dir() {
            return Err(VcsError::BackendUnavailable(format!(
                "{} is not a directory",
                repo.display()
            )));
        }
        let backend = GitBackend {
            repo,
            manifest,
            launch: Mutex::new(()),
        };
        backend
            .git(&["rev-parse", "--git-dir"])
            .map_err(|e| VcsError::BackendUnavailable(e.to_string()))?;
        Ok(backend)
    }

    pub fn repo(&self) -> &Path {
        &self.repo
    }

    fn git(&self, args: &[&str]) -> Result<String, VcsError> {
        let _guard = self.launch.lock().unwrap_or_else(|e| e.into_inner());
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args(["-c", "core.quotepath=off"])
            .args(args)
            .output()
            .map_err(|e| VcsError::BackendUnavailable(format!("cannot launch git: {e}")))?;
        if !out.status.success() {
            return Err(VcsError::BackendFailure {
                command: format!("git {}", args.join(" ")),
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    fn try_resolve(&self, spec: &str) -> Option<CommitId> {
        let out = self.git(&["rev-parse", "--verify", "--quiet", spec]).ok()?;
        CommitId::new(out.trim()).ok()
    }
}

pub(crate) fn parse_name_status(commit: &CommitId, text: &str) -> FileDiff {
    let changes = text.lines().filter_map(|line| {
        let (status, path) = line.split_once('\t')?;
        let change = match status.chars().next()? {
            'A' => ChangeKind::Added,
            'D' => ChangeKind::Deleted,
            _ => ChangeKind::Modified,
        };
        Some(FileChange {
            path: path.to_string(),
            change,
        })
    });
    FileDiff::new(commit.clone(), changes)
}

impl History for GitBackend {
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
        self.try_resolve(&format!("{id}^{{commit}}"))
            .ok_or_else(|| VcsError::UnknownCommit(id.clone()))
    }

    fn first_parent_chain(&self, tip: &CommitId) -> Result<Vec<CommitId>, VcsError> {
        let tip = self.resolve(tip)?;
        let out = self.git(&["rev-list", "--first-parent", "--reverse", tip.as_str()])?;
        out.lines().map(|l| CommitId::new(l.trim())).collect()
    }

    fn diff_files(&self, commit: &CommitId) -> Result<FileDiff, VcsError> {
        let commit = self.resolve(commit)?;
        let parent = format!("{commit}^1");
        if self.try_resolve(&parent).is_none() {
            return Err(VcsError::RootCommit(commit));
        }
        let out = self.git(&["diff", "--name-status", "--no-renames", &parent, commit.as_str()])?;
        Ok(parse_name_status(&commit, &out))
    }
}
