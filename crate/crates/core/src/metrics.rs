//! Evaluation metrics and the estimated-weight FDR bound.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Per-trial evaluation summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub fdp: f64,
    pub power: f64,
    pub weighted_fdp: f64,
    pub n_selected: usize,
    /// `|R delta R_ref| / |R_ref|` against a reference rule, when one was
    /// supplied.
    pub discrepancy: Option<f64>,
}

impl TrialMetrics {
    /// Computes all metrics for a selection against evaluation flags.
    pub fn compute(
        selected: &[usize],
        null_flags: &[bool],
        test_weights: &[f64],
        reference: Option<&[usize]>,
    ) -> Result<Self> {
        Ok(Self {
            fdp: fdp(selected, null_flags)?,
            power: power(selected, null_flags)?,
            weighted_fdp: weighted_fdp(selected, null_flags, test_weights)?,
            n_selected: selected.len(),
            discrepancy: reference.map(|r| selection_discrepancy(selected, r)),
        })
    }
}

fn check_selected(selected: &[usize], len: usize) -> Result<()> {
    for &j in selected {
        if j >= len {
            return Err(Error::IndexOutOfRange { index: j, len });
        }
    }
    Ok(())
}

/// False discovery proportion `#{j in R : null_j} / max{1, |R|}`.
///
/// Empty selections score 0 by the `max{1, |R|}` convention.
pub fn fdp(selected: &[usize], null_flags: &[bool]) -> Result<f64> {
    check_selected(selected, null_flags.len())?;
    let false_hits = selected.iter().filter(|&&j| null_flags[j]).count();
    Ok(false_hits as f64 / selected.len().max(1) as f64)
}

/// Empirical power `#{j in R : non-null_j} / #{j : non-null_j}`.
///
/// Returns 0 when there are no non-nulls, keeping aggregates conservative.
pub fn power(selected: &[usize], null_flags: &[bool]) -> Result<f64> {
    check_selected(selected, null_flags.len())?;
    let non_nulls = null_flags.iter().filter(|&&is_null| !is_null).count();
    if non_nulls == 0 {
        return Ok(0.0);
    }
    let true_hits = selected.iter().filter(|&&j| !null_flags[j]).count();
    Ok(true_hits as f64 / non_nulls as f64)
}

/// Weighted false discovery proportion
/// `sum_{j in R} 1{null_j} / w_j / max{1, |R|}`.
pub fn weighted_fdp(selected: &[usize], null_flags: &[bool], test_weights: &[f64]) -> Result<f64> {
    check_selected(selected, null_flags.len())?;
    if null_flags.len() != test_weights.len() {
        return Err(Error::LengthMismatch {
            left: null_flags.len(),
            right: test_weights.len(),
        });
    }
    let mut sum = 0.0;
    for &j in selected {
        let w = test_weights[j];
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::InvalidWeight { index: j, value: w });
        }
        if null_flags[j] {
            sum += 1.0 / w;
        }
    }
    Ok(sum / selected.len().max(1) as f64)
}

/// Symmetric-difference discrepancy `|R delta R_ref| / |R_ref|`.
///
/// Both empty gives 0; a nonempty `R` against an empty reference returns
/// the `+inf` sentinel.
pub fn selection_discrepancy(selected: &[usize], reference: &[usize]) -> f64 {
    if reference.is_empty() {
        return if selected.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let sym_diff = symmetric_difference(selected, reference);
    sym_diff as f64 / reference.len() as f64
}

/// Discrepancy with the `max{1, |R_ref|}` denominator, convenient when
/// the reference may be empty.
pub fn selection_discrepancy_capped(selected: &[usize], reference: &[usize]) -> f64 {
    let sym_diff = symmetric_difference(selected, reference);
    sym_diff as f64 / reference.len().max(1) as f64
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> usize {
    let in_both = a.iter().filter(|x| b.contains(x)).count();
    (a.len() - in_both) + (b.len() - in_both)
}

/// FDR bound under a weight function estimated with multiplicative error
/// at most `gamma_hat`: `q gamma^2 / (1 + q (gamma^2 - 1) / m)`.
pub fn estimated_weight_bound(q: f64, gamma_hat: f64, m: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidProbability { name: "q", value: q });
    }
    if !gamma_hat.is_finite() || gamma_hat < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma_hat must be >= 1 (got {gamma_hat})"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    let g2 = gamma_hat * gamma_hat;
    Ok(q * g2 / (1.0 + q * (g2 - 1.0) / m as f64))
}

/// Empirical multiplicative weight error
/// `max_i max(est_i / true_i, true_i / est_i)` over the evaluation
/// points; a lower bound of the population quantity.
pub fn gamma_hat(true_weights: &[f64], est_weights: &[f64]) -> Result<f64> {
    if true_weights.len() != est_weights.len() {
        return Err(Error::LengthMismatch {
            left: true_weights.len(),
            right: est_weights.len(),
        });
    }
    if true_weights.is_empty() {
        return Err(Error::InvalidParameter(
            "gamma_hat needs at least one evaluation point".into(),
        ));
    }
    let mut gamma = 1.0_f64;
    for (i, (&w, &w_hat)) in true_weights.iter().zip(est_weights).enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::InvalidWeight { index: i, value: w });
        }
        if !w_hat.is_finite() || w_hat <= 0.0 {
            return Err(Error::InvalidWeight {
                index: i,
                value: w_hat,
            });
        }
        gamma = gamma.max((w_hat / w).max(w / w_hat));
    }
    Ok(gamma)
}

/// Empirical plug-in of the budget factor `E[(n+1) / (sum_i w_i + w)]`
/// appearing in the weighted-FDR bound for unweighted p-values under
/// covariate shift: averages `(n+1) / (sum_i w_i + w_j)` over test units.
pub fn weighted_fdr_bound_plugin(
    q: f64,
    calib_weights: &[f64],
    test_weights: &[f64],
) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidProbability { name: "q", value: q });
    }
    if test_weights.is_empty() {
        return Err(Error::InvalidParameter(
            "plug-in needs at least one test unit".into(),
        ));
    }
    let total: f64 = calib_weights.iter().sum();
    let n_plus_1 = (calib_weights.len() + 1) as f64;
    let mean = test_weights
        .iter()
        .map(|&w| n_plus_1 / (total + w))
        .sum::<f64>()
        / test_weights.len() as f64;
    Ok(q * mean)
}
