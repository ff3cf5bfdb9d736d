//! Scenario descriptors and the per-trial data bundle.

use confsel::{Error, WeightedCalibration, WeightedTest};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Ite1,
    Ite2,
    Ite3,
    Outlier,
    CovshiftBinary,
}

/// Coupling between the two potential-outcome noise variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Independent,
    Positive,
    Negative,
}

/// Covariate covariance: identity or AR(1) with coefficient 0.9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    Identity,
    Ar09,
}

/// Analytic score used by the counterfactual scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreChoice {
    /// True conditional CDF of the missing outcome (oracle).
    OracleCdf,
    /// Residual against the true conditional median; continuous scores.
    CqrMedian,
}

/// Scenario descriptor; one value drives a whole study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub scenario: Scenario,
    pub coupling: Coupling,
    pub covariance: Covariance,
    /// Training-fold size for scenarios that estimate a centering
    /// constant from it; scenarios with fully analytic scores ignore it.
    pub n_train: usize,
    /// Calibration size (exact for all generators).
    pub n_calib: usize,
    /// Test size (exact for all generators).
    pub m: usize,
    /// Outlier signal strength `a` (the outlier scenario only).
    pub signal_a: f64,
    /// Outlier fraction in the test set (the outlier scenario only).
    pub rho: f64,
    pub q: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub score: ScoreChoice,
    /// When set, the algorithms run on weights perturbed by a factor
    /// `exp(eta)`, `eta ~ Unif[-ln gamma, ln gamma]` per unit.
    pub weight_gamma: Option<f64>,
    /// Redraw the outlier center set every trial instead of holding it
    /// fixed for the study.
    pub fresh_centers_per_trial: bool,
}

impl SimulationSpec {
    /// A reasonable base: counterfactual setting 1, independent
    /// coupling, identity covariance, oracle score.
    pub fn ite_defaults() -> Self {
        Self {
            scenario: Scenario::Ite1,
            coupling: Coupling::Independent,
            covariance: Covariance::Identity,
            n_train: 750,
            n_calib: 250,
            m: 100,
            signal_a: 3.0,
            rho: 0.3,
            q: 0.1,
            trials: 500,
            master_seed: 20240901,
            score: ScoreChoice::OracleCdf,
            weight_gamma: None,
            fresh_centers_per_trial: false,
        }
    }

    /// Outlier-detection base matching the fixed design: 1000/1000
    /// calibration/test, signal 3, outlier fraction 0.3.
    pub fn outlier_defaults() -> Self {
        Self {
            scenario: Scenario::Outlier,
            n_calib: 1000,
            m: 1000,
            ..Self::ite_defaults()
        }
    }

    pub fn validate(&self) -> confsel::Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidProbability {
                name: "q",
                value: self.q,
            });
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidProbability {
                name: "rho",
                value: self.rho,
            });
        }
        if self.scenario == Scenario::Outlier && !(self.signal_a >= 0.0 && self.signal_a.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "signal_a must be finite and >= 0 (got {})",
                self.signal_a
            )));
        }
        if let Some(gamma) = self.weight_gamma {
            if !gamma.is_finite() || gamma < 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight_gamma must be >= 1 (got {gamma})"
                )));
            }
        }
        Ok(())
    }
}

/// Per-unit diagnostics exposed by the counterfactual generator so tests
/// can check the noise-coupling and propensity contracts directly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IteDiagnostics {
    /// Threshold-side noise for the test units.
    pub test_eps0: Vec<f64>,
    /// Outcome-side noise for the test units.
    pub test_eps1: Vec<f64>,
    /// Treated-outcome regression mean for the test units.
    pub test_mu1: Vec<f64>,
    /// Propensity values for the test units.
    pub test_propensity: Vec<f64>,
    /// Propensity values for the calibration units.
    pub calib_propensity: Vec<f64>,
}

/// Alternative inputs for the hypothesis-conditional algorithm when a
/// scenario supports both calibration regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct HcPath {
    pub calibration: WeightedCalibration,
    pub test: WeightedTest,
    /// True (unperturbed) weights of the restricted calibration set.
    pub true_calib_weights: Vec<f64>,
}

/// One generated trial: algorithm inputs plus evaluation-only truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrial {
    /// Calibration units as the algorithms see them (perturbed weights
    /// when `weight_gamma` is set).
    pub calibration: WeightedCalibration,
    /// Test units with evaluation null flags.
    pub test: WeightedTest,
    /// True covariate-shift weights of the calibration units.
    pub true_calib_weights: Vec<f64>,
    /// True covariate-shift weights of the test units.
    pub true_test_weights: Vec<f64>,
    /// True-outcome scores `V(X, Y)` for the test units, when the
    /// scenario defines them.
    pub oracle_test_scores: Option<Vec<f64>>,
    pub diagnostics: Option<IteDiagnostics>,
    /// Restricted-calibration inputs for the hypothesis-conditional
    /// algorithm, when the scenario provides them.
    pub hc: Option<HcPath>,
}
