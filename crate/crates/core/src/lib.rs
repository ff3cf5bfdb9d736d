//! Weighted conformal p-values and multiple-testing engines for
//! FDR-controlled candidate screening under covariate shift.
//!
//! The library is organized around a small pipeline:
//!
//! 1. build nonconformity scores ([`scores`]) and wrap calibration/test
//!    units with their covariate-shift weights ([`data`]),
//! 2. turn them into weighted conformal p-values ([`pvalues`]),
//! 3. feed the p-values to a selection engine ([`selection`]): plain BH,
//!    weighted conformalized selection with one of three pruning rules,
//!    or its hypothesis-conditional variant,
//! 4. evaluate the outcome ([`metrics`]).
//!
//! All randomized quantities (tie-breaking uniforms, pruning variables)
//! are drawn from counter-based streams keyed by `(seed, unit index)`,
//! so results do not depend on iteration order or thread count.

pub mod data;
pub mod error;
pub mod metrics;
pub mod pvalues;
pub mod rng;
pub mod scores;
pub mod selection;

pub use data::{
    Method, Pruning, ScoreKind, ScoreSpec, SelectionConfig, WeightedCalibration, WeightedTest,
};
pub use error::Error;
pub use pvalues::{AuxPValueMatrix, PValueKind, PValueVector};
pub use selection::SelectionResult;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
