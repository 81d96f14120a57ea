//! Compiler fault isolation toolkit.
//!
//! The crate bisects a compiler's version history to find the commit that
//! introduced a reported bug, reports the source files touched by that
//! commit as fault candidates, and ships a spectrum-based fault
//! localization (SBFL) engine plus the evaluation metrics needed to compare
//! the two approaches.
//!
//! Module map:
//!
//! * [`vcs`]: releases, first-parent commit ranges and per-commit diffs over
//!   git, svn or an in-memory simulated repository.
//! * [`oracle`]: Pass / Fail / Unresolvable verdicts for a revision, with a
//!   persistent verdict cache and compiler binary resolution.
//! * [`engine`]: rough and fine release ranges, bisection and differential
//!   analysis, composed into [`engine::run_basic`].
//! * [`sbfl`]: suspiciousness formulas, historical spectra, file aggregation
//!   and ranking. Generic over the floating point type.
//! * [`eval`]: Top-N, MFR, MAR and overlap analysis. Means are generic over
//!   the scalar so they can be computed exactly with rationals.
//! * [`cli`]: the `bisectfl` command line front end.

pub mod cli;
pub mod config;
pub mod engine;
pub mod eval;
pub mod oracle;
pub mod sbfl;
pub mod scalar;
pub mod vcs;

pub use scalar::{MeanScalar, Scalar};

/// Default floating point type used across the command line tools.
pub type Real = f64;

/// Exact rational scalar, used for metric means when bit-exactness matters.
pub type Exact = num_rational::Ratio<i64>;

/// File ranking over [`Real`] scores.
pub type Ranking = sbfl::Ranking<Real>;

/// Metric report over [`Real`] means.
pub type MetricReport = eval::MetricReport<Real>;

/// Metric report with exact rational means.
pub type ExactMetricReport = eval::MetricReport<Exact>;
