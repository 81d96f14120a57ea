use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num};

/// Floating point scalar for suspiciousness scores: `f32` or `f64`.
///
/// Scores need square roots and a positive infinity sentinel, so rationals
/// do not qualify here.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Scalar that can carry the mean of a list of integer ranks.
///
/// Implemented for the float types and for `Ratio<i64>`, which gives exact
/// metric values.
pub trait MeanScalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    fn from_count(n: u64) -> Self;

    fn to_f64(&self) -> f64;

    /// JSON form: a number for floats, `"n/d"` (or a bare integer) for
    /// rationals.
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self.to_f64())
    }

    /// Text form used in aligned tables.
    fn render(&self) -> String {
        let v = self.to_f64();
        if v.fract() == 0.0 {
            format!("{v:.0}")
        } else {
            format!("{v:.2}")
        }
    }
}

impl MeanScalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl MeanScalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl MeanScalar for num_rational::Ratio<i64> {
    fn from_count(n: u64) -> Self {
        num_rational::Ratio::from_integer(i64::try_from(n).expect("count fits in i64"))
    }

    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }

    fn to_json(&self) -> serde_json::Value {
        if self.is_integer() {
            serde_json::json!(self.numer())
        } else {
            serde_json::json!(self.to_string())
        }
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

/// Arithmetic mean of `values`, or `None` for an empty slice.
pub fn mean<T: MeanScalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().cloned().fold(T::zero(), |acc, v| acc + v);
    Some(sum / T::from_count(values.len() as u64))
}
