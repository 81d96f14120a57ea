use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::EvalError;

/// Region tables are produced for at most this many techniques.
pub const MAX_REGION_TECHNIQUES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairOverlap {
    pub x: String,
    pub y: String,
    pub only_x: Vec<String>,
    pub only_y: Vec<String>,
    pub both: Vec<String>,
}

/// Bugs solved by exactly the techniques in `members`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Region {
    pub members: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapTable {
    pub techniques: Vec<String>,
    pub pairs: Vec<PairOverlap>,
    /// Every non-empty membership combination; absent above four
    /// techniques.
    pub regions: Option<Vec<Region>>,
    pub union: usize,
}

/// Overlap of per-technique success sets. `universe` maps each technique
/// to the bugs it was evaluated on; all must agree.
pub fn overlap(
    successes: &BTreeMap<String, BTreeSet<String>>,
    universe: &BTreeMap<String, BTreeSet<String>>,
) -> Result<OverlapTable, EvalError> {
    if successes.len() < 2 {
        return Err(EvalError::TooFewTechniques);
    }
    let mut shared: Option<(&String, &BTreeSet<String>)> = None;
    for (name, bugs) in universe {
        match shared {
            None => shared = Some((name, bugs)),
            Some((first, expected)) if expected != bugs => {
                return Err(EvalError::BugSetMismatch(format!(
                    "`{first}` and `{name}` were evaluated on different bugs"
                )))
            }
            _ => {}
        }
    }
    for (name, solved) in successes {
        let bugs = universe
            .get(name)
            .ok_or_else(|| EvalError::BugSetMismatch(format!("no bug set for `{name}`")))?;
        if !solved.is_subset(bugs) {
            return Err(EvalError::BugSetMismatch(format!(
                "`{name}` reports successes outside its bug set"
            )));
        }
    }

    let names: Vec<String> = successes.keys().cloned().collect();
    let mut pairs = Vec::new();
    for (i, x) in names.iter().enumerate() {
        for y in &names[i + 1..] {
            let (sx, sy) = (&successes[x], &successes[y]);
            pairs.push(PairOverlap {
                x: x.clone(),
                y: y.clone(),
                only_x: sx.difference(sy).cloned().collect(),
                only_y: sy.difference(sx).cloned().collect(),
                both: sx.intersection(sy).cloned().collect(),
            });
        }
    }

    let union: BTreeSet<&String> = successes.values().flatten().collect();
    let regions = (names.len() <= MAX_REGION_TECHNIQUES).then(|| {
        let mut counts = vec![0usize; 1 << names.len()];
        for bug in &union {
            let mask = names
                .iter()
                .enumerate()
                .filter(|(_, n)| successes[*n].contains(*bug))
                .fold(0usize, |m, (i, _)| m | (1 << i));
            counts[mask] += 1;
        }
        (1..counts.len())
            .map(|mask| Region {
                members: names
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, n)| n.clone())
                    .collect(),
                count: counts[mask],
            })
            .collect()
    });

    Ok(OverlapTable {
        techniques: names,
        pairs,
        regions,
        union: union.len(),
    })
}
