use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

/// How tied scores map to ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Every member of a tie group gets the group's first position.
    BestCase,
    /// Every member gets the group's last position.
    WorstCase,
    /// Ties are broken by path ascending; ranks are list positions.
    Deterministic,
}

impl TiePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            TiePolicy::BestCase => "best",
            TiePolicy::WorstCase => "worst",
            TiePolicy::Deterministic => "deterministic",
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best" | "best_case" => Ok(TiePolicy::BestCase),
            "worst" | "worst_case" => Ok(TiePolicy::WorstCase),
            "deterministic" => Ok(TiePolicy::Deterministic),
            _ => Err(format!("unknown tie policy `{s}` (expected worst, best or deterministic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedFile<T> {
    pub file: String,
    pub score: T,
    pub rank: usize,
}

/// Files ordered by non-increasing score.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking<T> {
    pub entries: Vec<RankedFile<T>>,
    pub tie_policy: TiePolicy,
    /// Files left out because no failing run covered them.
    pub excluded: Vec<String>,
}

/// Descending score, NaN last; +inf sorts first.
pub(crate) fn by_score_desc<T: Scalar>(a: T, b: T) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => b.partial_cmp(&a).unwrap_or(Ordering::Equal),
    }
}

/// Start and end (exclusive) of each run of equal scores in a sorted list.
pub(crate) fn tie_groups<T: Scalar>(scores: &[T]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=scores.len() {
        if i == scores.len() || by_score_desc(scores[start], scores[i]) != Ordering::Equal {
            groups.push((start, i));
            start = i;
        }
    }
    groups
}

pub fn rank_files<T: Scalar>(file_scores: Vec<(String, T)>, tie_policy: TiePolicy) -> Ranking<T> {
    let mut sorted = file_scores;
    sorted.sort_by(|(fa, a), (fb, b)| by_score_desc(*a, *b).then_with(|| fa.cmp(fb)));
    let scores: Vec<T> = sorted.iter().map(|(_, s)| *s).collect();
    let mut entries: Vec<RankedFile<T>> = sorted
        .into_iter()
        .map(|(file, score)| RankedFile { file, score, rank: 0 })
        .collect();
    for (start, end) in tie_groups(&scores) {
        for (i, e) in entries[start..end].iter_mut().enumerate() {
            e.rank = match tie_policy {
                TiePolicy::BestCase => start + 1,
                TiePolicy::WorstCase => end,
                TiePolicy::Deterministic => start + i + 1,
            };
        }
    }
    Ranking {
        entries,
        tie_policy,
        excluded: Vec::new(),
    }
}

impl<T: Scalar> Ranking<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ranks recomputed from the scores under another policy.
    pub fn with_policy(&self, tie_policy: TiePolicy) -> Ranking<T> {
        let mut r = rank_files(
            self.entries.iter().map(|e| (e.file.clone(), e.score)).collect(),
            tie_policy,
        );
        r.excluded = self.excluded.clone();
        r
    }
}

/// JSON has no infinity, so the sentinel travels as the string `"inf"`.
fn score_to_json<T: Scalar>(v: T) -> serde_json::Value {
    if v.is_infinite() {
        serde_json::Value::String(if v > T::zero() { "inf" } else { "-inf" }.into())
    } else {
        serde_json::json!(v.to_f64().unwrap_or(f64::NAN))
    }
}

fn score_from_json<T: Scalar>(v: &serde_json::Value) -> Result<T, String> {
    let f = match v {
        serde_json::Value::String(s) if s == "inf" => f64::INFINITY,
        serde_json::Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        serde_json::Value::Number(n) => n.as_f64().ok_or("score out of range")?,
        other => return Err(format!("bad score {other}")),
    };
    T::from_f64(f).ok_or_else(|| format!("score {f} not representable"))
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    file: String,
    score: serde_json::Value,
    rank: usize,
}

#[derive(Serialize, Deserialize)]
struct RawRanking {
    tie_policy: TiePolicy,
    entries: Vec<RawEntry>,
    #[serde(default)]
    excluded: Vec<String>,
}

impl<T: Scalar> Serialize for Ranking<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawRanking {
            tie_policy: self.tie_policy,
            entries: self
                .entries
                .iter()
                .map(|e| RawEntry {
                    file: e.file.clone(),
                    score: score_to_json(e.score),
                    rank: e.rank,
                })
                .collect(),
            excluded: self.excluded.clone(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Ranking<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawRanking::deserialize(d)?;
        let mut entries = Vec::with_capacity(raw.entries.len());
        for e in raw.entries {
            if e.rank == 0 {
                return Err(serde::de::Error::custom("ranks are 1-based"));
            }
            let score = score_from_json(&e.score).map_err(serde::de::Error::custom)?;
            entries.push(RankedFile {
                file: crate::vcs::normalize_path(&e.file),
                score,
                rank: e.rank,
            });
        }
        if entries
            .windows(2)
            .any(|w| by_score_desc(w[0].score, w[1].score) == Ordering::Greater)
        {
            return Err(serde::de::Error::custom("ranking scores are not non-increasing"));
        }
        Ok(Ranking {
            entries,
            tie_policy: raw.tie_policy,
            excluded: raw.excluded,
        })
    }
}
