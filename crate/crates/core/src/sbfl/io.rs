//! Text formats for spectra and history stats.
//!
//! Spectrum:
//!
//! ```text
//! # comment
//! RUN t1 FAIL
//! COV src/fold.c:12
//! COV src/fold.c:13
//!
//! RUN t2 PASS
//! COV src/fold.c:12
//! ```
//!
//! History:
//!
//! ```text
//! MOD src/fold.c:12 1 0
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{CoverageRun, HistoryEntry, HistoryStats, Outcome, SbflError, StatementId};

fn parse_err(line: usize, message: impl Into<String>) -> SbflError {
    SbflError::Parse {
        line,
        message: message.into(),
    }
}

fn statement(lineno: usize, tok: &str) -> Result<StatementId, SbflError> {
    tok.parse().map_err(|e: SbflError| parse_err(lineno, e.to_string()))
}

pub fn parse_spectrum(text: &str) -> Result<Vec<CoverageRun>, SbflError> {
    let mut runs: Vec<CoverageRun> = Vec::new();
    let mut labels = BTreeSet::new();
    let mut open = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            open = false;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["RUN", label, outcome] => {
                let outcome = match *outcome {
                    "PASS" => Outcome::Passing,
                    "FAIL" => Outcome::Failing,
                    other => return Err(parse_err(lineno, format!("outcome `{other}` is not PASS or FAIL"))),
                };
                if !labels.insert(label.to_string()) {
                    return Err(parse_err(lineno, format!("duplicate run label `{label}`")));
                }
                runs.push(CoverageRun {
                    label: label.to_string(),
                    outcome,
                    covered: BTreeSet::new(),
                });
                open = true;
            }
            ["COV", stmt] => {
                if !open {
                    return Err(parse_err(lineno, "COV record outside a RUN block"));
                }
                let s = statement(lineno, stmt)?;
                runs.last_mut().expect("open run").covered.insert(s);
            }
            _ => return Err(parse_err(lineno, format!("unrecognized record `{line}`"))),
        }
    }
    Ok(runs)
}

pub fn render_spectrum(runs: &[CoverageRun]) -> String {
    let mut out = String::new();
    for (i, r) in runs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let outcome = match r.outcome {
            Outcome::Passing => "PASS",
            Outcome::Failing => "FAIL",
        };
        let _ = writeln!(out, "RUN {} {outcome}", r.label);
        for s in &r.covered {
            let _ = writeln!(out, "COV {s}");
        }
    }
    out
}

/// Parses `MOD` records. A statement with `induce = 1` belongs to S_c;
/// larger induce counts are rejected since a bug has one inducing commit.
pub fn parse_history(text: &str) -> Result<HistoryStats, SbflError> {
    let mut stats = HistoryStats::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let ["MOD", stmt, induce, noninduce] = toks.as_slice() else {
            return Err(parse_err(lineno, format!("unrecognized record `{line}`")));
        };
        let s = statement(lineno, stmt)?;
        let count = |t: &str| {
            t.parse::<u64>()
                .map_err(|_| parse_err(lineno, format!("`{t}` is not a count")))
        };
        let entry = HistoryEntry {
            induce: count(induce)?,
            noninduce: count(noninduce)?,
        };
        if entry.induce > 1 {
            return Err(parse_err(lineno, "induce count must be 0 or 1"));
        }
        if stats.insert(s, entry).is_some() {
            return Err(parse_err(lineno, format!("duplicate statement `{stmt}`")));
        }
    }
    Ok(stats)
}

pub fn render_history(stats: &HistoryStats) -> String {
    let mut out = String::new();
    for (s, h) in stats {
        let _ = writeln!(out, "MOD {s} {} {}", h.induce, h.noninduce);
    }
    out
}
