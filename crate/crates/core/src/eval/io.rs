//! Ground-truth files and result directories.
//!
//! Ground truth:
//!
//! ```text
//! BUG 59747
//! FAULTY gcc/ree.c
//! ```
//!
//! Results: `<dir>/<technique>/<bug>.json` for a single run, or
//! `<dir>/<technique>/<run>/<bug>.json` for repeated runs. Each file holds
//! either an isolation report (read as an unordered file set) or a ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{EvalError, GroundTruth, TechniqueOutput};
use crate::engine::{IsolationReport, ReportStatus};
use crate::sbfl::Ranking;
use crate::scalar::Scalar;
use crate::vcs::normalize_path;

/// Run name to per-bug outputs. A single-run technique has one run named `""`.
pub type Runs<S> = BTreeMap<String, BTreeMap<String, TechniqueOutput<S>>>;

/// Technique name to its runs.
pub type ResultSet<S> = BTreeMap<String, Runs<S>>;

pub fn parse_truth(text: &str) -> Result<BTreeMap<String, GroundTruth>, EvalError> {
    let mut truths: BTreeMap<String, GroundTruth> = BTreeMap::new();
    let mut current: Option<(usize, String)> = None;
    let err = |line: usize, message: String| EvalError::Parse { line, message };
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["BUG", id] => {
                if let Some((at, prev)) = &current {
                    if truths[prev].faulty_files.is_empty() {
                        return Err(err(*at, format!("bug `{prev}` lists no FAULTY file")));
                    }
                }
                if truths.contains_key(*id) {
                    return Err(err(lineno, format!("duplicate bug `{id}`")));
                }
                truths.insert(
                    id.to_string(),
                    GroundTruth {
                        bug_id: id.to_string(),
                        faulty_files: BTreeSet::new(),
                    },
                );
                current = Some((lineno, id.to_string()));
            }
            ["FAULTY", path] => {
                let Some((_, id)) = &current else {
                    return Err(err(lineno, "FAULTY before any BUG".into()));
                };
                let path = normalize_path(path);
                if path.is_empty() {
                    return Err(err(lineno, "empty path".into()));
                }
                truths.get_mut(id).expect("current bug").faulty_files.insert(path);
            }
            _ => return Err(err(lineno, format!("unrecognized record `{line}`"))),
        }
    }
    if let Some((at, id)) = &current {
        if truths[id].faulty_files.is_empty() {
            return Err(err(*at, format!("bug `{id}` lists no FAULTY file")));
        }
    }
    Ok(truths)
}

pub fn render_truth(truths: &BTreeMap<String, GroundTruth>) -> String {
    let mut out = String::new();
    for t in truths.values() {
        let _ = writeln!(out, "BUG {}", t.bug_id);
        for f in &t.faulty_files {
            let _ = writeln!(out, "FAULTY {f}");
        }
    }
    out
}

/// Reads one result file body. Objects with an `entries` key are rankings;
/// anything else must be an isolation report.
pub fn output_from_json<S: Scalar>(text: &str) -> Result<TechniqueOutput<S>, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if value.get("entries").is_some() {
        let ranking: Ranking<S> = serde_json::from_value(value).map_err(|e| e.to_string())?;
        return Ok(TechniqueOutput::RankedList(ranking));
    }
    let report: IsolationReport = serde_json::from_value(value).map_err(|e| e.to_string())?;
    let files = match report.status {
        ReportStatus::Found => report.candidate_files.iter().map(|f| normalize_path(f)).collect(),
        ReportStatus::Inconclusive => BTreeSet::new(),
    };
    Ok(TechniqueOutput::UnorderedSet(files))
}

fn results_err(path: &Path, message: impl ToString) -> EvalError {
    EvalError::Results {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::fs::DirEntry>, EvalError> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| results_err(dir, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| results_err(dir, e))?;
    entries.retain(|e| !e.file_name().to_string_lossy().starts_with('.'));
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

fn load_run<S: Scalar>(dir: &Path) -> Result<BTreeMap<String, TechniqueOutput<S>>, EvalError> {
    let mut outputs = BTreeMap::new();
    for e in sorted_entries(dir)? {
        let path = e.path();
        if path.extension().and_then(|x| x.to_str()) != Some("json") || !path.is_file() {
            continue;
        }
        let bug = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| results_err(&path, "file name is not UTF-8"))?
            .to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| results_err(&path, e))?;
        let out = output_from_json(&text).map_err(|e| results_err(&path, e))?;
        outputs.insert(bug, out);
    }
    Ok(outputs)
}

/// Loads every technique directory under `dir`.
pub fn load_results<S: Scalar>(dir: &Path) -> Result<ResultSet<S>, EvalError> {
    let mut results = ResultSet::new();
    for tech in sorted_entries(dir)? {
        let tdir = tech.path();
        if !tdir.is_dir() {
            continue;
        }
        let name = tech.file_name().to_string_lossy().into_owned();
        let subdirs: Vec<_> = sorted_entries(&tdir)?.into_iter().filter(|e| e.path().is_dir()).collect();
        let direct = load_run(&tdir)?;
        let mut runs = Runs::new();
        match (direct.is_empty(), subdirs.is_empty()) {
            (false, false) => {
                return Err(results_err(&tdir, "mixes per-bug files with run directories"));
            }
            (false, true) => {
                runs.insert(String::new(), direct);
            }
            (true, _) => {
                for run in subdirs {
                    let outputs = load_run(&run.path())?;
                    if !outputs.is_empty() {
                        runs.insert(run.file_name().to_string_lossy().into_owned(), outputs);
                    }
                }
            }
        }
        if runs.is_empty() {
            return Err(results_err(&tdir, "no result files"));
        }
        results.insert(name, runs);
    }
    if results.is_empty() {
        return Err(results_err(dir, "no technique directories with results"));
    }
    Ok(results)
}
