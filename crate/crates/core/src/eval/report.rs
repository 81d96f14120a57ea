use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use super::{
    faulty_ranks, overlap, rank_of_first_fault, EvalError, GroundTruth, OverlapTable, ResultSet, TechniqueOutput,
};
use crate::sbfl::TiePolicy;
use crate::scalar::{mean, MeanScalar, Scalar};

pub const DEFAULT_TOP_N: [usize; 4] = [1, 5, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Ranked,
    Set,
}

impl OutputKind {
    /// Ranked lists get the best case within ties, file sets the worst.
    pub fn default_policy(self) -> TiePolicy {
        match self {
            OutputKind::Ranked => TiePolicy::BestCase,
            OutputKind::Set => TiePolicy::WorstCase,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metric<T> {
    Value(T),
    NotApplicable,
}

impl<T: MeanScalar> Metric<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Metric::Value(v) => Some(v),
            Metric::NotApplicable => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Metric::Value(v) => v.to_json(),
            Metric::NotApplicable => Value::Null,
        }
    }

    fn render(&self) -> String {
        match self {
            Metric::Value(v) => v.render(),
            Metric::NotApplicable => "N/A".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Overrides the per-kind default tie policy for every output.
    pub policy: Option<TiePolicy>,
    pub top_n: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            policy: None,
            top_n: DEFAULT_TOP_N.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueMetrics<T> {
    pub name: String,
    pub kind: OutputKind,
    pub policy: TiePolicy,
    pub runs: Vec<String>,
    /// `(n, bugs within top n)`, averaged over runs.
    pub top: Vec<(usize, T)>,
    pub mfr: Metric<T>,
    pub mar: Metric<T>,
    /// First-fault rank per bug and run; `None` when not found.
    pub first_ranks: BTreeMap<String, Vec<Option<usize>>>,
}

impl<T: MeanScalar> TechniqueMetrics<T> {
    pub fn top(&self, n: usize) -> Option<&T> {
        self.top.iter().find(|(k, _)| *k == n).map(|(_, v)| v)
    }

    /// Bugs ranked first in more than half of the runs.
    pub fn top1_successes(&self) -> BTreeSet<String> {
        self.first_ranks
            .iter()
            .filter(|(_, ranks)| 2 * ranks.iter().filter(|r| **r == Some(1)).count() > ranks.len())
            .map(|(b, _)| b.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<T> {
    pub bugs: Vec<String>,
    pub techniques: Vec<TechniqueMetrics<T>>,
    pub overlap: Option<OverlapTable>,
}

fn technique_kind<S: Scalar>(runs: &BTreeMap<String, BTreeMap<String, TechniqueOutput<S>>>) -> OutputKind {
    let any_set = runs
        .values()
        .flat_map(|r| r.values())
        .any(|o| o.kind() == OutputKind::Set);
    if any_set {
        OutputKind::Set
    } else {
        OutputKind::Ranked
    }
}

/// Computes every metric for every technique over a shared bug set.
pub fn evaluate<S: Scalar, T: MeanScalar>(
    results: &ResultSet<S>,
    truths: &BTreeMap<String, GroundTruth>,
    options: &EvalOptions,
) -> Result<MetricReport<T>, EvalError> {
    let mut ns = options.top_n.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.first() == Some(&0) {
        return Err(EvalError::Empty("Top-N needs n >= 1".into()));
    }

    let mut bugs: Option<(String, BTreeSet<String>)> = None;
    for (tech, runs) in results {
        if runs.is_empty() {
            return Err(EvalError::Empty(format!("technique `{tech}` has no runs")));
        }
        for (run, outputs) in runs {
            let here: BTreeSet<String> = outputs.keys().cloned().collect();
            let at = if run.is_empty() { tech.clone() } else { format!("{tech}/{run}") };
            match &bugs {
                None => bugs = Some((at, here)),
                Some((first, expected)) if *expected != here => {
                    let extra: Vec<_> = here.symmetric_difference(expected).cloned().collect();
                    return Err(EvalError::BugSetMismatch(format!(
                        "`{at}` and `{first}` differ on {}",
                        extra.join(", ")
                    )));
                }
                _ => {}
            }
        }
    }
    let Some((_, bugs)) = bugs else {
        return Err(EvalError::Empty("no results".into()));
    };
    if bugs.is_empty() {
        return Err(EvalError::Empty("no bugs".into()));
    }
    if let Some(b) = bugs.iter().find(|b| !truths.contains_key(*b)) {
        return Err(EvalError::MissingTruth(b.clone()));
    }

    let mut techniques = Vec::new();
    for (name, runs) in results {
        let kind = technique_kind(runs);
        let policy = options.policy.unwrap_or(kind.default_policy());
        let mut first_ranks: BTreeMap<String, Vec<Option<usize>>> = BTreeMap::new();
        let mut mfr_runs = Vec::new();
        let mut mar_runs = Vec::new();
        for outputs in runs.values() {
            let mut firsts = Vec::new();
            let mut avgs = Vec::new();
            for (bug, out) in outputs {
                let truth = &truths[bug];
                let pol = options.policy.unwrap_or(out.kind().default_policy());
                let first = rank_of_first_fault(out, truth, pol);
                first_ranks.entry(bug.clone()).or_default().push(first);
                firsts.push(T::from_count(first.unwrap_or(out.len() + 1) as u64));
                let all: Vec<T> = faulty_ranks(out, truth, pol)
                    .into_iter()
                    .map(|r| T::from_count(r as u64))
                    .collect();
                avgs.push(mean(&all).expect("ground truth is non-empty"));
            }
            mfr_runs.push(mean(&firsts).expect("non-empty"));
            mar_runs.push(mean(&avgs).expect("non-empty"));
        }
        let top = ns
            .iter()
            .map(|&n| {
                let per_run: Vec<T> = (0..runs.len())
                    .map(|i| {
                        let hits = first_ranks
                            .values()
                            .filter(|r| r[i].is_some_and(|r| r <= n))
                            .count();
                        T::from_count(hits as u64)
                    })
                    .collect();
                (n, mean(&per_run).expect("non-empty"))
            })
            .collect();
        let (mfr, mar) = match kind {
            OutputKind::Set => (Metric::NotApplicable, Metric::NotApplicable),
            OutputKind::Ranked => (
                Metric::Value(mean(&mfr_runs).expect("non-empty")),
                Metric::Value(mean(&mar_runs).expect("non-empty")),
            ),
        };
        techniques.push(TechniqueMetrics {
            name: name.clone(),
            kind,
            policy,
            runs: runs.keys().cloned().collect(),
            top,
            mfr,
            mar,
            first_ranks,
        });
    }

    let overlap = if techniques.len() >= 2 {
        let successes = techniques
            .iter()
            .map(|t| (t.name.clone(), t.top1_successes()))
            .collect();
        let universe = techniques.iter().map(|t| (t.name.clone(), bugs.clone())).collect();
        Some(overlap(&successes, &universe)?)
    } else {
        None
    };

    let report = MetricReport {
        bugs: bugs.into_iter().collect(),
        techniques,
        overlap,
    };
    report.check()?;
    Ok(report)
}

impl<T: MeanScalar> MetricReport<T> {
    pub fn technique(&self, name: &str) -> Option<&TechniqueMetrics<T>> {
        self.techniques.iter().find(|t| t.name == name)
    }

    /// Top-N monotone in N and bounded by the bug count; overlap regions
    /// sum to the union.
    pub fn check(&self) -> Result<(), EvalError> {
        let total = T::from_count(self.bugs.len() as u64);
        for t in &self.techniques {
            for w in t.top.windows(2) {
                if w[0].1 > w[1].1 {
                    return Err(EvalError::Invariant(format!("{}: Top-{} > Top-{}", t.name, w[0].0, w[1].0)));
                }
            }
            if t.top.iter().any(|(_, v)| *v > total) {
                return Err(EvalError::Invariant(format!("{}: Top-N exceeds bug count", t.name)));
            }
            if t.kind == OutputKind::Set && t.mfr != Metric::NotApplicable {
                return Err(EvalError::Invariant(format!("{}: MFR on a file set", t.name)));
            }
        }
        if let Some(o) = &self.overlap {
            if let Some(regions) = &o.regions {
                let sum: usize = regions.iter().map(|r| r.count).sum();
                if sum != o.union {
                    return Err(EvalError::Invariant(format!("overlap regions sum to {sum}, union is {}", o.union)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let techniques: Vec<Value> = self
            .techniques
            .iter()
            .map(|t| {
                let top: serde_json::Map<String, Value> =
                    t.top.iter().map(|(n, v)| (format!("top{n}"), v.to_json())).collect();
                json!({
                    "name": t.name,
                    "kind": t.kind,
                    "policy": t.policy,
                    "runs": t.runs,
                    "top": top,
                    "mfr": t.mfr.to_json(),
                    "mar": t.mar.to_json(),
                    "first_ranks": t.first_ranks,
                })
            })
            .collect();
        json!({
            "bugs": self.bugs,
            "techniques": techniques,
            "overlap": self.overlap,
        })
    }

    /// Aligned plain text: one row per technique, then the Top-1 overlap.
    pub fn to_text(&self) -> String {
        let ns: Vec<usize> = self
            .techniques
            .first()
            .map(|t| t.top.iter().map(|(n, _)| *n).collect())
            .unwrap_or_default();
        let mut header = vec!["Technique".to_string()];
        header.extend(ns.iter().map(|n| format!("Top-{n}")));
        header.push("MFR".into());
        header.push("MAR".into());
        let mut rows = vec![header];
        for t in &self.techniques {
            let mut row = vec![t.name.clone()];
            row.extend(t.top.iter().map(|(_, v)| v.render()));
            row.push(t.mfr.render());
            row.push(t.mar.render());
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "{} bugs", self.bugs.len());
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        if let Some(o) = &self.overlap {
            let _ = writeln!(out, "\nTop-1 overlap");
            for p in &o.pairs {
                let _ = writeln!(
                    out,
                    "{} vs {}: only {} {}, only {} {}, both {}",
                    p.x,
                    p.y,
                    p.x,
                    p.only_x.len(),
                    p.y,
                    p.only_y.len(),
                    p.both.len()
                );
            }
            if let Some(regions) = &o.regions {
                for r in regions {
                    let _ = writeln!(out, "{}: {}", r.members.join(" & "), r.count);
                }
            }
            let _ = writeln!(out, "union: {}", o.union);
        }
        out
    }
}
