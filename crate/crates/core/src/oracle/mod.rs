//! Bug-manifestation oracle.
//!
//! An [`Oracle`] answers whether the bug shows up for a revision, compile
//! configuration and test program. Failures that prevent an answer (the
//! compiler does not build, the test binary hangs) fold into
//! [`Verdict::Unresolvable`] so callers can skip the revision.

mod binary;
mod cache;
mod process;
mod sim;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vcs::CommitId;

pub use binary::{resolve_binary, BinaryResolver, BinarySource, CompilerHandle};
pub use cache::{CacheKey, CachedOracle, VerdictCache};
pub use process::{Limits, ProcessOracle};
pub use sim::SimOracle;

pub const ENV_TOOLCHAIN_TIMEOUT: &str = "BISECTFL_TOOLCHAIN_TIMEOUT_S";
pub const ENV_RUN_TIMEOUT: &str = "BISECTFL_RUN_TIMEOUT_S";
pub const ENV_CACHE: &str = "BISECTFL_CACHE";

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no compiler available for revision `{0}`")]
    ToolchainMissing(String),
    #[error("compiler binary not found: {0}")]
    NotFound(String),
    #[error("building revision `{rev}` failed:\n{log}")]
    BuildFailed { rev: String, log: String },
    #[error("binary source template `{0}` lacks the {{rev}} placeholder")]
    BadTemplate(String),
    #[error("invalid compile flag `{0}`")]
    BadFlag(String),
    #[error("cannot read test program {path}: {source}")]
    ProgramUnreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("revision `{0}` is unknown to the oracle")]
    UnknownRevision(CommitId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Cxx,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompileConfig {
    pub flags: Vec<String>,
    pub language: Language,
}

impl CompileConfig {
    pub fn new<S: Into<String>>(
        flags: impl IntoIterator<Item = S>,
        language: Language,
    ) -> Result<Self, OracleError> {
        let flags: Vec<String> = flags.into_iter().map(Into::into).collect();
        if let Some(bad) = flags
            .iter()
            .find(|f| f.is_empty() || f.chars().any(char::is_whitespace))
        {
            return Err(OracleError::BadFlag(bad.clone()));
        }
        Ok(CompileConfig { flags, language })
    }

    pub fn flags_string(&self) -> String {
        self.flags.join(" ")
    }
}

/// How a test run is judged.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureCheck {
    /// Pass iff stdout matches byte-for-byte and the exit code matches.
    ExpectedOutput { stdout: String, exit_code: i32 },
    /// Pass iff stdout and exit status agree with a build under `baseline`.
    DifferentialBaseline { baseline: CompileConfig },
    /// Fail iff the test binary dies from a signal or hangs.
    AbnormalTermination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestProgram {
    pub source: PathBuf,
    pub check: FailureCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Unresolvable(String),
}

impl Verdict {
    pub fn unresolvable(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        let reason = reason.split_whitespace().collect::<Vec<_>>().join(" ");
        if reason.is_empty() {
            Verdict::Unresolvable("unknown".into())
        } else {
            Verdict::Unresolvable(reason)
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail)
    }

    pub fn is_resolved(&self) -> bool {
        !matches!(self, Verdict::Unresolvable(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail => f.write_str("FAIL"),
            Verdict::Unresolvable(r) => write!(f, "UNRESOLVABLE {r}"),
        }
    }
}

/// A revision to test; releases carry their label so prebuilt binaries can
/// be keyed by it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Revision {
    pub commit: CommitId,
    pub label: Option<String>,
}

impl Revision {
    pub fn commit(commit: CommitId) -> Self {
        Revision {
            commit,
            label: None,
        }
    }

    pub fn release(commit: CommitId, label: impl Into<String>) -> Self {
        Revision {
            commit,
            label: Some(label.into()),
        }
    }
}

impl fmt::Display for Revision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{l} ({})", self.commit),
            None => write!(f, "{}", self.commit),
        }
    }
}

pub trait Oracle: Send + Sync {
    fn evaluate(
        &self,
        revision: &Revision,
        config: &CompileConfig,
        program: &TestProgram,
    ) -> Result<Verdict, OracleError>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn evaluate(
        &self,
        revision: &Revision,
        config: &CompileConfig,
        program: &TestProgram,
    ) -> Result<Verdict, OracleError> {
        (**self).evaluate(revision, config, program)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn evaluate(
        &self,
        revision: &Revision,
        config: &CompileConfig,
        program: &TestProgram,
    ) -> Result<Verdict, OracleError> {
        (**self).evaluate(revision, config, program)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_without_whitespace() {
        assert!(CompileConfig::new(["-m64", "-Os"], Language::C).is_ok());
        assert!(CompileConfig::new(Vec::<String>::new(), Language::C).is_ok());
        assert!(matches!(
            CompileConfig::new(["-O2 -g"], Language::C),
            Err(OracleError::BadFlag(_))
        ));
    }

    #[test]
    fn unresolvable_reason_never_empty() {
        assert_eq!(Verdict::unresolvable("  "), Verdict::Unresolvable("unknown".into()));
        assert_eq!(
            Verdict::unresolvable("build\nfailed"),
            Verdict::Unresolvable("build failed".into())
        );
    }
}
