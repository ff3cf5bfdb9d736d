//! Domain types: weighted calibration/test samples, selection
//! configuration, and score specifications.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

fn check_scores(scores: &[f64]) -> Result<()> {
    for (i, &v) in scores.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidScore { index: i, value: v });
        }
    }
    Ok(())
}

fn check_weights(weights: &[f64]) -> Result<()> {
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::InvalidWeight { index: i, value: w });
        }
    }
    Ok(())
}

/// Calibration units: nonconformity scores `V_i` paired with strictly
/// positive covariate-shift weights `w(X_i)`.
///
/// Construction sorts the scores once and keeps a prefix-sum table of the
/// weights, so "total weight strictly below `v`" is a binary search plus
/// one lookup for every later query.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCalibration {
    scores: Vec<f64>,
    weights: Vec<f64>,
    sorted_scores: Vec<f64>,
    // prefix_weights[k] = sum of the k smallest-score weights; length n + 1.
    prefix_weights: Vec<f64>,
}

impl WeightedCalibration {
    /// Validates scores (finite) and weights (finite, > 0), then builds
    /// the sorted/prefix-sum index.
    pub fn new(scores: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if scores.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: weights.len(),
            });
        }
        check_scores(&scores)?;
        check_weights(&weights)?;

        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let sorted_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let mut prefix_weights = Vec::with_capacity(scores.len() + 1);
        let mut acc = 0.0;
        prefix_weights.push(0.0);
        for &i in &order {
            acc += weights[i];
            prefix_weights.push(acc);
        }

        Ok(Self {
            scores,
            weights,
            sorted_scores,
            prefix_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores in insertion order.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Weights in insertion order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total calibration weight.
    pub fn total_weight(&self) -> f64 {
        *self.prefix_weights.last().unwrap()
    }

    /// Total weight of calibration scores strictly below `v` and total
    /// weight tied with `v`, under the tie tolerance: a score counts as
    /// tied when `|V_i - v| <= tol` and strictly below when `V_i < v - tol`.
    pub fn weight_below_and_tied(&self, v: f64, tol: f64) -> (f64, f64) {
        let lo = self.sorted_scores.partition_point(|&s| s < v - tol);
        let hi = self.sorted_scores.partition_point(|&s| s <= v + tol);
        let below = self.prefix_weights[lo];
        let tied = self.prefix_weights[hi] - self.prefix_weights[lo];
        (below, tied)
    }

    /// Total weight of calibration scores strictly below `v`.
    pub fn weight_below(&self, v: f64, tol: f64) -> f64 {
        let lo = self.sorted_scores.partition_point(|&s| s < v - tol);
        self.prefix_weights[lo]
    }
}

/// Test units: scores `V(X_{n+j}, c_{n+j})`, weights `w(X_{n+j})`, and
/// optional evaluation-only null flags (`true` means the outcome fell at
/// or below its threshold).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTest {
    scores: Vec<f64>,
    weights: Vec<f64>,
    null_flags: Option<Vec<bool>>,
}

impl WeightedTest {
    pub fn new(scores: Vec<f64>, weights: Vec<f64>, null_flags: Option<Vec<bool>>) -> Result<Self> {
        if scores.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: weights.len(),
            });
        }
        if let Some(flags) = &null_flags {
            if flags.len() != scores.len() {
                return Err(Error::LengthMismatch {
                    left: scores.len(),
                    right: flags.len(),
                });
            }
        }
        check_scores(&scores)?;
        check_weights(&weights)?;
        Ok(Self {
            scores,
            weights,
            null_flags,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn null_flags(&self) -> Option<&[bool]> {
        self.null_flags.as_deref()
    }
}

/// Second-stage pruning rule of the conformalized selection algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pruning {
    /// Per-unit i.i.d. uniforms `xi_j`.
    Hete,
    /// One shared uniform `xi`.
    Homo,
    /// No randomness (`xi = 1`).
    Dtm,
}

/// Selection method.
///
/// `Wcs*` run the two-step calibrated selection on threshold-substituted
/// scores; `HcWcs*` run the identical computation on scores evaluated at
/// full observations (the hypothesis-conditional variant). `Bh` is plain
/// step-up on caller-provided p-values and is not accepted by
/// [`crate::selection::select`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bh,
    Wbh,
    WcsHete,
    WcsHomo,
    WcsDtm,
    HcWcsHete,
    HcWcsHomo,
    HcWcsDtm,
}

impl Method {
    /// Pruning rule for the WCS-family methods.
    pub fn pruning(&self) -> Option<Pruning> {
        match self {
            Method::WcsHete | Method::HcWcsHete => Some(Pruning::Hete),
            Method::WcsHomo | Method::HcWcsHomo => Some(Pruning::Homo),
            Method::WcsDtm | Method::HcWcsDtm => Some(Pruning::Dtm),
            Method::Bh | Method::Wbh => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bh => "bh",
            Method::Wbh => "wbh",
            Method::WcsHete => "wcs-hete",
            Method::WcsHomo => "wcs-homo",
            Method::WcsDtm => "wcs-dtm",
            Method::HcWcsHete => "hc-wcs-hete",
            Method::HcWcsHomo => "hc-wcs-homo",
            Method::HcWcsDtm => "hc-wcs-dtm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Configuration for a selection run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Nominal FDR level, in (0, 1).
    pub q: f64,
    pub method: Method,
    /// Whether `Wbh` uses randomized (tie-broken) p-values. The
    /// WCS-family methods always use the non-randomized ones.
    pub randomized_pvalues: bool,
    /// Master seed for tie-breaking and pruning draws.
    pub seed: u64,
    /// Scores within this distance count as tied; the default 0 means
    /// exact float equality.
    pub tie_tolerance: f64,
}

impl SelectionConfig {
    pub fn new(q: f64, method: Method) -> Result<Self> {
        let config = Self {
            q,
            method,
            randomized_pvalues: true,
            seed: 0,
            tie_tolerance: 0.0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidProbability {
                name: "q",
                value: self.q,
            });
        }
        if !self.tie_tolerance.is_finite() || self.tie_tolerance < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tie_tolerance must be finite and >= 0 (got {})",
                self.tie_tolerance
            )));
        }
        Ok(())
    }
}

/// Nonconformity score family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// `V(x, y) = y - mu_hat(x)`.
    Res,
    /// `V(x, y) = M 1{y > c} + c 1{y <= c} - mu_hat(x)`.
    Clip,
    /// `V(x, y) = y - q_beta_hat(x)`.
    Cqr,
    /// The caller supplies fitted conditional-CDF values directly.
    CdfPassthrough,
}

/// Score specification: a kind plus its kind-dependent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    pub kind: ScoreKind,
    /// Clip constant `M`; `None` asks for the data-driven default
    /// `2 * max(|mu_hat| v |c|) + 1` at resolution time.
    pub clip_m: Option<f64>,
    /// Quantile level tag for `Cqr`.
    pub cqr_beta: Option<f64>,
}

impl ScoreSpec {
    pub fn res() -> Self {
        Self {
            kind: ScoreKind::Res,
            clip_m: None,
            cqr_beta: None,
        }
    }

    pub fn clip(m: Option<f64>) -> Self {
        Self {
            kind: ScoreKind::Clip,
            clip_m: m,
            cqr_beta: None,
        }
    }

    pub fn cqr(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidProbability {
                name: "cqr beta",
                value: beta,
            });
        }
        Ok(Self {
            kind: ScoreKind::Cqr,
            clip_m: None,
            cqr_beta: Some(beta),
        })
    }

    pub fn cdf_passthrough() -> Self {
        Self {
            kind: ScoreKind::CdfPassthrough,
            clip_m: None,
            cqr_beta: None,
        }
    }

    /// Resolves the clip constant against the supplied prediction and
    /// threshold rows: a stored `M` is validated, `None` yields the
    /// default `2 * max(|mu_hat| v |c|) + 1`.
    pub fn resolve_clip_m(&self, mu_hats: &[f64], thresholds: &[f64]) -> Result<f64> {
        if self.kind != ScoreKind::Clip {
            return Err(Error::InvalidParameter(
                "resolve_clip_m applies to clip scores only".into(),
            ));
        }
        match self.clip_m {
            Some(m) => {
                crate::scores::validate_clip_m(m, mu_hats)?;
                Ok(m)
            }
            None => Ok(crate::scores::clip_default_m(mu_hats, thresholds)),
        }
    }
}
