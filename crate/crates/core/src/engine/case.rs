//! Bug case files.
//!
//! A case file is TOML. Relative paths are resolved against the directory
//! containing the case file.
//!
//! ```toml
//! id = "gcc-59747"
//! bad_revision = "206472"
//! pattern_preset = "gcc"            # or: pattern = '^gcc/[A-Za-z\-]+\.c$'
//!
//! [backend]
//! kind = "svn"                      # git | svn | sim
//! path = "svn://gcc.gnu.org/svn/gcc/trunk"
//! manifest = "releases.txt"
//!
//! [compile]
//! flags = ["-m64", "-Os"]
//! language = "c"
//!
//! [program]
//! source = "small.c"
//! check = { kind = "expected_output", stdout = "0\n", exit_code = 0 }
//!
//! [[binary]]
//! kind = "prebuilt"
//! template = "/opt/gcc/{rev}/bin/gcc"
//! ```
//!
//! A `sim` backend takes `num_commits`, `bic_index`, `seed`,
//! `files_per_commit`, `releases` and `unresolvable` instead of a path, and
//! needs no `[[binary]]` entries.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BugCase, EngineError, Stage};
use crate::config::GlobalConfig;
use crate::oracle::{
    BinaryResolver, BinarySource, CachedOracle, CompileConfig, FailureCheck, Language, Oracle,
    ProcessOracle, Revision, SimOracle, TestProgram, Verdict, VerdictCache,
};
use crate::vcs::{
    compile_pattern, make_sim_history, CommitId, GitBackend, History, PatternPreset, ReleaseKind,
    SimReleaseSpec, SvnBackend,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimReleaseEntry {
    pub label: String,
    pub kind: ReleaseKind,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendSpec {
    Git {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        manifest: Option<PathBuf>,
    },
    Svn {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        manifest: Option<PathBuf>,
    },
    Sim {
        num_commits: usize,
        bic_index: usize,
        seed: u64,
        #[serde(default = "default_files_per_commit")]
        files_per_commit: usize,
        #[serde(default)]
        releases: Vec<SimReleaseEntry>,
        #[serde(default)]
        unresolvable: Vec<usize>,
    },
}

fn default_files_per_commit() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileSpec {
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default = "default_language")]
    pub language: String,
}

fn default_language() -> String {
    "c".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    ExpectedOutput {
        stdout: String,
        #[serde(default)]
        exit_code: i32,
    },
    DifferentialBaseline {
        baseline_flags: Vec<String>,
    },
    AbnormalTermination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramSpec {
    pub source: PathBuf,
    pub check: CheckSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub id: String,
    /// Defaults to the head of a simulated history.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bad_revision: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_preset: Option<String>,
    pub backend: BackendSpec,
    pub compile: CompileSpec,
    pub program: ProgramSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub binary: Vec<BinarySource>,
}

fn parse_language(s: &str) -> Language {
    match s.to_ascii_lowercase().as_str() {
        "c" => Language::C,
        "c++" | "cxx" | "cpp" => Language::Cxx,
        other => Language::Other(other.to_string()),
    }
}

fn config_err(e: impl ToString) -> EngineError {
    EngineError::ConfigParse(e.to_string())
}

pub fn load_case_file(path: &Path) -> Result<CaseFile, EngineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// A case bound to its backend and oracle.
pub struct LoadedCase {
    pub case: BugCase,
    pub history: Arc<dyn History>,
    pub oracle: Box<dyn Oracle>,
    /// Set when the verdict cache file was corrupt and has been reset.
    pub cache_warning: Option<String>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn resolve_template(base: &Path, t: &str) -> String {
    if Path::new(t).is_absolute() || t.starts_with('{') {
        t.to_string()
    } else {
        base.join(t).to_string_lossy().into_owned()
    }
}

fn pattern_for(file: &CaseFile, global: &GlobalConfig) -> Result<regex::Regex, EngineError> {
    match (&file.pattern, &file.pattern_preset) {
        (Some(_), Some(_)) => Err(config_err("give either `pattern` or `pattern_preset`, not both")),
        (Some(p), None) => compile_pattern(p).map_err(config_err),
        (None, Some(name)) => {
            if let Some(p) = global.presets.get(name) {
                return compile_pattern(p).map_err(config_err);
            }
            PatternPreset::from_name(name)
                .map(PatternPreset::regex)
                .ok_or_else(|| config_err(format!("unknown pattern preset `{name}`")))
        }
        (None, None) => match file.backend {
            BackendSpec::Sim { .. } => Ok(PatternPreset::Sim.regex()),
            _ => Err(config_err("missing `pattern` or `pattern_preset`")),
        },
    }
}

/// Loads a case file, wires its backend and oracle, and confirms the bad
/// revision actually fails.
pub fn retrieve_initial(path: &Path, global: &GlobalConfig) -> Result<LoadedCase, EngineError> {
    let file = load_case_file(path)?;
    // absolute, so build scripts and repositories work from any cwd
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let base = base.canonicalize().unwrap_or_else(|_| base.to_path_buf());
    let source_pattern = pattern_for(&file, global)?;

    let language = parse_language(&file.compile.language);
    let config = CompileConfig::new(file.compile.flags.clone(), language.clone()).map_err(config_err)?;
    let check = match &file.program.check {
        CheckSpec::ExpectedOutput { stdout, exit_code } => FailureCheck::ExpectedOutput {
            stdout: stdout.clone(),
            exit_code: *exit_code,
        },
        CheckSpec::DifferentialBaseline { baseline_flags } => FailureCheck::DifferentialBaseline {
            baseline: CompileConfig::new(baseline_flags.clone(), language).map_err(config_err)?,
        },
        CheckSpec::AbnormalTermination => FailureCheck::AbnormalTermination,
    };
    let program = TestProgram {
        source: resolve(&base, &file.program.source),
        check,
    };
    if !program.source.is_file() {
        return Err(config_err(format!(
            "test program {} does not exist",
            program.source.display()
        )));
    }

    let mut cache_warning = None;
    let mut open_cache = || -> Result<VerdictCache, EngineError> {
        match &global.cache {
            Some(p) => {
                let (cache, warn) = VerdictCache::open(p).map_err(config_err)?;
                cache_warning = warn;
                Ok(cache)
            }
            None => Ok(VerdictCache::in_memory()),
        }
    };

    let (history, oracle, default_bad): (Arc<dyn History>, Box<dyn Oracle>, Option<CommitId>) =
        match &file.backend {
            BackendSpec::Sim {
                num_commits,
                bic_index,
                seed,
                files_per_commit,
                releases,
                unresolvable,
            } => {
                let specs: Vec<SimReleaseSpec> = releases
                    .iter()
                    .map(|r| SimReleaseSpec::new(r.label.clone(), r.kind, r.index))
                    .collect();
                let sim = make_sim_history(*num_commits, *bic_index, &specs, *files_per_commit, *seed)
                    .map_err(config_err)?
                    .with_unresolvable(unresolvable.iter().copied());
                let head = sim.head().cloned();
                let sim = Arc::new(sim);
                // commit names repeat across simulated histories, so
                // simulated verdicts never go to the shared cache file
                let oracle = CachedOracle::new(SimOracle::new(sim.clone()), VerdictCache::in_memory());
                (sim, Box::new(oracle), head)
            }
            BackendSpec::Git { path, manifest } => {
                let repo = resolve(&base, path);
                let backend = GitBackend::open(&repo, manifest.as_ref().map(|m| resolve(&base, m)))
                    .map_err(|source| EngineError::Vcs {
                        stage: Stage::Intake,
                        source,
                    })?;
                let oracle = process_oracle(&file, &base, global)?
                    .with_build_var("BISECTFL_REPO", repo.to_string_lossy());
                (
                    Arc::new(backend),
                    Box::new(CachedOracle::new(oracle, open_cache()?)),
                    None,
                )
            }
            BackendSpec::Svn { path, manifest } => {
                let backend = SvnBackend::open(path.clone(), manifest.as_ref().map(|m| resolve(&base, m)))
                    .map_err(|source| EngineError::Vcs {
                        stage: Stage::Intake,
                        source,
                    })?;
                let oracle = process_oracle(&file, &base, global)?.with_build_var("BISECTFL_REPO", path);
                (
                    Arc::new(backend),
                    Box::new(CachedOracle::new(oracle, open_cache()?)),
                    None,
                )
            }
        };

    let bad_revision = match (&file.bad_revision, default_bad) {
        (Some(b), _) => CommitId::new(b.clone()).map_err(config_err)?,
        (None, Some(head)) => head,
        (None, None) => return Err(config_err("missing `bad_revision`")),
    };
    let bad_revision = history.resolve(&bad_revision).map_err(|source| EngineError::Vcs {
        stage: Stage::Intake,
        source,
    })?;

    let case = BugCase {
        id: file.id.clone(),
        bad_revision: bad_revision.clone(),
        config,
        program,
        source_pattern,
    };
    let verdict = oracle
        .evaluate(&Revision::commit(bad_revision.clone()), &case.config, &case.program)
        .map_err(|source| EngineError::Oracle {
            stage: Stage::Intake,
            source,
        })?;
    if verdict != Verdict::Fail {
        return Err(EngineError::IntakeFailed {
            revision: bad_revision,
            verdict,
        });
    }
    Ok(LoadedCase {
        case,
        history,
        oracle,
        cache_warning,
    })
}

fn process_oracle(file: &CaseFile, base: &Path, global: &GlobalConfig) -> Result<ProcessOracle, EngineError> {
    if file.binary.is_empty() {
        return Err(config_err("no [[binary]] source configured"));
    }
    let sources = file
        .binary
        .iter()
        .map(|s| match s {
            BinarySource::Prebuilt { template } => BinarySource::Prebuilt {
                template: resolve_template(base, template),
            },
            BinarySource::BuildOnDemand {
                build_script,
                install_prefix,
                compiler,
            } => BinarySource::BuildOnDemand {
                build_script: resolve(base, build_script),
                install_prefix: resolve_template(base, install_prefix),
                compiler: compiler.clone(),
            },
            BinarySource::Scripted { command } => BinarySource::Scripted {
                command: command.clone(),
            },
        })
        .collect();
    let resolver = BinaryResolver::new(sources).map_err(config_err)?;
    Ok(ProcessOracle::new(resolver, global.limits()))
}
