//! Compiler binary resolution.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::process::{run_captured, RunStatus};
use super::{OracleError, Revision};

pub const REV_PLACEHOLDER: &str = "{rev}";

/// Where the compiler for a revision comes from. Every template must
/// contain `{rev}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinarySource {
    /// Existing install. `{rev}` is the release label when probing a release,
    /// the commit id otherwise.
    Prebuilt { template: String },
    /// Build with `<build_script> <commit> <prefix>` and use
    /// `<prefix>/<compiler>`. `{rev}` in `install_prefix` is the commit id.
    BuildOnDemand {
        build_script: PathBuf,
        install_prefix: String,
        compiler: String,
    },
    /// Whitespace-separated command line acting as the compiler. `{rev}` is
    /// the commit id.
    Scripted { command: String },
}

impl BinarySource {
    pub fn validate(&self) -> Result<(), OracleError> {
        let template = match self {
            BinarySource::Prebuilt { template } => template,
            BinarySource::BuildOnDemand { install_prefix, .. } => install_prefix,
            BinarySource::Scripted { command } => command,
        };
        if template.contains(REV_PLACEHOLDER) {
            Ok(())
        } else {
            Err(OracleError::BadTemplate(template.clone()))
        }
    }
}

/// An invocable compiler: the program followed by leading arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompilerHandle {
    pub argv: Vec<String>,
}

impl CompilerHandle {
    pub fn executable(path: &Path) -> Self {
        CompilerHandle {
            argv: vec![path.to_string_lossy().into_owned()],
        }
    }

    pub fn command(&self) -> Command {
        let mut cmd = Command::new(&self.argv[0]);
        cmd.args(&self.argv[1..]);
        cmd
    }
}

fn substitute(template: &str, value: &str) -> String {
    template.replace(REV_PLACEHOLDER, value)
}

/// Environment and limits for on-demand builds.
#[derive(Debug, Clone)]
pub struct BuildEnv {
    pub timeout: Duration,
    pub vars: Vec<(String, String)>,
}

impl Default for BuildEnv {
    fn default() -> Self {
        BuildEnv {
            timeout: Duration::from_secs(3600),
            vars: Vec::new(),
        }
    }
}

/// Resolves a single source. See [`BinaryResolver`] for fallback chains.
pub fn resolve_binary(
    revision: &Revision,
    source: &BinarySource,
    env: &BuildEnv,
) -> Result<CompilerHandle, OracleError> {
    source.validate()?;
    let commit = revision.commit.as_str();
    match source {
        BinarySource::Prebuilt { template } => {
            let key = revision.label.as_deref().unwrap_or(commit);
            let path = PathBuf::from(substitute(template, key));
            if path.is_file() {
                Ok(CompilerHandle::executable(&path))
            } else {
                Err(OracleError::NotFound(path.display().to_string()))
            }
        }
        BinarySource::BuildOnDemand {
            build_script,
            install_prefix,
            compiler,
        } => {
            let prefix = PathBuf::from(substitute(install_prefix, commit));
            let exe = prefix.join(compiler);
            if exe.is_file() {
                return Ok(CompilerHandle::executable(&exe));
            }
            build(commit, build_script, &prefix, &exe, env)?;
            Ok(CompilerHandle::executable(&exe))
        }
        BinarySource::Scripted { command } => {
            let argv: Vec<String> = substitute(command, commit)
                .split_whitespace()
                .map(str::to_string)
                .collect();
            if argv.is_empty() {
                return Err(OracleError::NotFound(command.clone()));
            }
            Ok(CompilerHandle { argv })
        }
    }
}

fn build(
    commit: &str,
    script: &Path,
    prefix: &Path,
    exe: &Path,
    env: &BuildEnv,
) -> Result<(), OracleError> {
    if !script.is_file() {
        return Err(OracleError::NotFound(script.display().to_string()));
    }
    let parent = prefix.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)?;
    let lock_path = prefix.with_extension("lock");
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lock_path)?;
    lock.lock()?;
    // another process may have finished the build while we waited
    if exe.is_file() {
        return Ok(());
    }
    let logs = tempfile::tempdir()?;
    let out_log = logs.path().join("build.out");
    let err_log = logs.path().join("build.err");
    let mut cmd = Command::new(script);
    cmd.arg(commit)
        .arg(prefix)
        .env("BISECTFL_REV", commit)
        .env("BISECTFL_PREFIX", prefix);
    for (k, v) in &env.vars {
        cmd.env(k, v);
    }
    let status = run_captured(cmd, env.timeout, &out_log, &err_log)?;
    let log = format!(
        "{}{}",
        std::fs::read_to_string(&out_log).unwrap_or_default(),
        std::fs::read_to_string(&err_log).unwrap_or_default()
    );
    let ok = matches!(status, RunStatus::Exited(0)) && exe.is_file();
    if ok {
        Ok(())
    } else {
        Err(OracleError::BuildFailed {
            rev: commit.to_string(),
            log: format!("{status:?}\n{log}"),
        })
    }
}

/// Ordered fallback chain of binary sources. A source that reports
/// `NotFound` hands over to the next one; build failures do not.
#[derive(Debug, Clone, Default)]
pub struct BinaryResolver {
    pub sources: Vec<BinarySource>,
    pub build_env: BuildEnv,
}

impl BinaryResolver {
    pub fn new(sources: Vec<BinarySource>) -> Result<Self, OracleError> {
        for s in &sources {
            s.validate()?;
        }
        Ok(BinaryResolver {
            sources,
            build_env: BuildEnv::default(),
        })
    }

    pub fn resolve(&self, revision: &Revision) -> Result<CompilerHandle, OracleError> {
        let mut missing = Vec::new();
        for source in &self.sources {
            match resolve_binary(revision, source, &self.build_env) {
                Err(OracleError::NotFound(what)) => missing.push(what),
                other => return other,
            }
        }
        Err(OracleError::NotFound(if missing.is_empty() {
            "no binary source configured".into()
        } else {
            missing.join(", ")
        }))
    }
}
