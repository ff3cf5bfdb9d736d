//! Simulation laboratory: synthetic data generators, a trial runner, and
//! Monte-Carlo verifiers for the selection guarantees.
//!
//! Three scenario families are covered:
//!
//! * counterfactual screening with treated/control covariate shift
//!   ([`ite`]),
//! * outlier detection with shifted calibration inliers ([`outlier`]),
//! * binary screening with rejection-sampled calibration
//!   ([`covshift`]).
//!
//! All fitted models are replaced by analytically known synthetic
//! functions, so every check is reproducible without training anything.
//! [`prds`] reproduces the two-unit construction whose conditional
//! probabilities witness that weighted conformal p-values are not PRDS,
//! and [`superuniformity`] verifies super-uniformity and exact oracle uniformity.

pub mod covshift;
pub mod ite;
pub mod superuniformity;
pub mod outlier;
pub mod prds;
pub mod runner;
pub mod spec;

pub use runner::{run_trials, stability_study, MethodSummary, RunOutput, RunSummary, TrialRecord};
pub use spec::{Coupling, Covariance, GeneratedTrial, Scenario, ScoreChoice, SimulationSpec};

/// Stream domains used by the generators; disjoint from the core
/// library's tie-break/pruning domains so a trial seed can be shared.
pub(crate) mod domains {
    pub const GEN: u64 = 16;
    pub const CENTERS: u64 = 17;
    pub const EST_WEIGHTS: u64 = 18;
    pub const PRDS: u64 = 19;
    pub const SUPERUNIFORMITY: u64 = 20;
}

/// Generates one trial of the requested scenario.
pub fn generate_trial(
    spec: &SimulationSpec,
    trial_index: usize,
) -> confsel::Result<GeneratedTrial> {
    spec.validate()?;
    match spec.scenario {
        Scenario::Ite1 | Scenario::Ite2 | Scenario::Ite3 => ite::gen_ite(spec, trial_index),
        Scenario::Outlier => outlier::gen_outlier(spec, trial_index),
        Scenario::CovshiftBinary => covshift::gen_covshift_binary(spec, trial_index),
    }
}
