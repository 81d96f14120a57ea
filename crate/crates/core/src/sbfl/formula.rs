use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Counts, HistoryEntry, SbflError};
use crate::scalar::Scalar;

pub const DEFAULT_DSTAR_POWER: u32 = 2;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum FormulaKind {
    Ochiai,
    Tarantula,
    Ochiai2,
    Op2,
    Barinel,
    #[serde(rename = "dstar")]
    DStar { star: u32 },
}

impl FormulaKind {
    pub const NAMES: [&'static str; 6] = ["ochiai", "tarantula", "ochiai2", "op2", "barinel", "dstar"];

    /// Parses a formula name; `power` applies to DStar only.
    pub fn from_name(name: &str, power: u32) -> Result<Self, SbflError> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "ochiai" => FormulaKind::Ochiai,
            "tarantula" => FormulaKind::Tarantula,
            "ochiai2" => FormulaKind::Ochiai2,
            "op2" => FormulaKind::Op2,
            "barinel" => FormulaKind::Barinel,
            "dstar" => {
                if power == 0 {
                    return Err(SbflError::BadPower);
                }
                FormulaKind::DStar { star: power }
            }
            _ => return Err(SbflError::UnknownFormula(name.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FormulaKind::Ochiai => "ochiai",
            FormulaKind::Tarantula => "tarantula",
            FormulaKind::Ochiai2 => "ochiai2",
            FormulaKind::Op2 => "op2",
            FormulaKind::Barinel => "barinel",
            FormulaKind::DStar { .. } => "dstar",
        }
    }
}

impl fmt::Display for FormulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaKind::DStar { star } => write!(f, "dstar{star}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for FormulaKind {
    type Err = SbflError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormulaKind::from_name(s, DEFAULT_DSTAR_POWER)
    }
}

fn ratio<T: Scalar>(num: T, den: T) -> T {
    if den == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

/// Suspiciousness of one statement.
///
/// Zero denominators: Ochiai, Ochiai2 and Barinel give 0 (their numerator
/// vanishes there too); DStar gives +inf when `ef > 0` and 0 otherwise;
/// Tarantula reads an undefined pass ratio (no passing runs) as 0.
pub fn score<T: Scalar>(kind: FormulaKind, c: &Counts) -> T {
    let n = T::from_count;
    let (ef, ep, nf, np) = (n(c.ef), n(c.ep), n(c.nf), n(c.np));
    match kind {
        FormulaKind::Ochiai => ratio(ef, ((ef + nf) * (ef + ep)).sqrt()),
        FormulaKind::Tarantula => {
            let f = ratio(ef, n(c.totalf()));
            let p = ratio(ep, n(c.totalp()));
            ratio(f, f + p)
        }
        FormulaKind::Ochiai2 => ratio(ef * np, ((ef + ep) * (nf + np) * (ef + nf) * (ep + np)).sqrt()),
        FormulaKind::Op2 => ef - ep / (n(c.totalp()) + T::one()),
        FormulaKind::Barinel => {
            if c.ef + c.ep == 0 {
                T::zero()
            } else {
                T::one() - ep / (ep + ef)
            }
        }
        FormulaKind::DStar { star } => {
            let num = ef.powi(star as i32);
            let den = ep + nf;
            if den == T::zero() {
                if c.ef > 0 {
                    T::infinity()
                } else {
                    T::zero()
                }
            } else {
                num / den
            }
        }
    }
}

/// `induce / sqrt(induce + noninduce)`, and 0 outside S_c.
pub fn histrum<T: Scalar>(h: &HistoryEntry) -> T {
    if !h.in_sc() {
        return T::zero();
    }
    T::from_count(h.induce) / T::from_count(h.induce + h.noninduce).sqrt()
}

/// Blended score: 0 outside 𝒜, `(1-a)*sbfl` in 𝒜 but not S_c, and
/// `(1-a)*sbfl + a*histrum` in both.
pub fn hsfl_score<T: Scalar>(sbfl: T, histrum: T, alpha: T, in_a: bool, in_sc: bool) -> T {
    if !in_a {
        return T::zero();
    }
    // at alpha = 1 the SBFL term vanishes even when it is +inf
    let base = if alpha == T::one() {
        T::zero()
    } else {
        (T::one() - alpha) * sbfl
    };
    if in_sc {
        base + alpha * histrum
    } else {
        base
    }
}
