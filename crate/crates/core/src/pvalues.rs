//! Weighted conformal p-values.
//!
//! Four flavors share one skeleton: compare a test score against the
//! weighted empirical distribution of the calibration scores.
//!
//! * randomized: ties and the test unit's own mass are broken by a
//!   per-unit uniform `U_j`;
//! * non-randomized: the test unit's full mass counts against it, which
//!   is what the selection algorithm consumes;
//! * auxiliary: for an anchor unit `j`, the p-values of the other units
//!   recomputed as if `j` were the only extra mass;
//! * oracle: the non-randomized formula evaluated at true-outcome scores,
//!   available in simulations only.
//!
//! Every `sum of w_i over {V_i < v}` is answered from the calibration's
//! sorted prefix-sum table, so a full vector costs `O((n + m) log n)`.
//! The direct-summation route is kept in [`naive`] as a correctness
//! oracle.

use crate::data::{WeightedCalibration, WeightedTest};
use crate::error::Error;
use crate::rng::{self, DOMAIN_TIEBREAK};
use crate::Result;

/// Provenance of a p-value vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueKind {
    Randomized,
    Nonrandomized,
    Auxiliary,
    Oracle,
    Unweighted,
}

/// Per-test-unit p-values with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector {
    values: Vec<f64>,
    kind: PValueKind,
    seed_used: Option<u64>,
}

impl PValueVector {
    /// Wraps caller-provided values, checking they lie in `[0, 1]`.
    pub fn new(values: Vec<f64>, kind: PValueKind, seed_used: Option<u64>) -> Result<Self> {
        for &p in &values {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability {
                    name: "p-value",
                    value: p,
                });
            }
        }
        Ok(Self {
            values,
            kind,
            seed_used,
        })
    }

    pub(crate) fn from_computed(values: Vec<f64>, kind: PValueKind, seed_used: Option<u64>) -> Self {
        debug_assert!(values.iter().all(|&p| (0.0..=1.0).contains(&p)));
        Self {
            values,
            kind,
            seed_used,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PValueKind {
        self.kind
    }

    pub fn seed_used(&self) -> Option<u64> {
        self.seed_used
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_uniforms(u: &[f64], m: usize) -> Result<()> {
    if u.len() != m {
        return Err(Error::LengthMismatch {
            left: m,
            right: u.len(),
        });
    }
    for &v in u {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidProbability {
                name: "tie-break uniform",
                value: v,
            });
        }
    }
    Ok(())
}

/// Non-randomized weighted conformal p-values:
/// `p_j = (sum_i w_i 1{V_i < Vhat_j} + w_j) / (sum_i w_i + w_j)`.
///
/// An empty calibration set yields `p_j = 1` for every unit.
pub fn wcp_nonrandomized(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    tie_tolerance: f64,
) -> PValueVector {
    let total = calib.total_weight();
    let values = test
        .scores()
        .iter()
        .zip(test.weights())
        .map(|(&v, &w)| {
            let below = calib.weight_below(v, tie_tolerance);
            ((below + w) / (total + w)).min(1.0)
        })
        .collect();
    PValueVector::from_computed(values, PValueKind::Nonrandomized, None)
}

/// Randomized weighted conformal p-values with caller-supplied uniforms:
/// `p_j = (sum_i w_i 1{V_i < Vhat_j} + (w_j + sum_i w_i 1{V_i = Vhat_j}) U_j)
///        / (sum_i w_i + w_j)`.
pub fn wcp_randomized_with(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    u: &[f64],
    tie_tolerance: f64,
) -> Result<PValueVector> {
    check_uniforms(u, test.len())?;
    let total = calib.total_weight();
    let values = test
        .scores()
        .iter()
        .zip(test.weights())
        .zip(u)
        .map(|((&v, &w), &uj)| {
            let (below, tied) = calib.weight_below_and_tied(v, tie_tolerance);
            ((below + (w + tied) * uj) / (total + w)).min(1.0)
        })
        .collect();
    Ok(PValueVector::from_computed(
        values,
        PValueKind::Randomized,
        None,
    ))
}

/// Randomized weighted conformal p-values with `U_j` drawn from the
/// per-unit stream `(seed, j)`, so the output is independent of
/// evaluation order.
pub fn wcp_randomized(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    seed: u64,
    tie_tolerance: f64,
) -> PValueVector {
    let u: Vec<f64> = (0..test.len())
        .map(|j| rng::uniform(seed, DOMAIN_TIEBREAK, j as u64))
        .collect();
    let mut out = wcp_randomized_with(calib, test, &u, tie_tolerance)
        .expect("generated uniforms are always valid");
    out.seed_used = Some(seed);
    out
}

/// All auxiliary p-values, materialized as an `m x m` row-major matrix:
/// row `j` holds `p_l^(j)` for `l != j`, with the diagonal set to zero —
/// exactly the vector the per-anchor step-up consumes. The shared
/// numerators `sum_i w_i 1{V_i < Vhat_l}` are computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxPValueMatrix {
    values: Vec<f64>,
    m: usize,
}

impl AuxPValueMatrix {
    pub fn compute(calib: &WeightedCalibration, test: &WeightedTest, tie_tolerance: f64) -> Self {
        let m = test.len();
        let total = calib.total_weight();
        let below: Vec<f64> = test
            .scores()
            .iter()
            .map(|&v| calib.weight_below(v, tie_tolerance))
            .collect();
        let mut values = vec![0.0; m * m];
        for anchor in 0..m {
            let w_anchor = test.weights()[anchor];
            let v_anchor = test.scores()[anchor];
            let denom = total + w_anchor;
            for (l, &v) in test.scores().iter().enumerate() {
                if l == anchor {
                    continue;
                }
                let extra = if v_anchor < v - tie_tolerance {
                    w_anchor
                } else {
                    0.0
                };
                values[anchor * m + l] = ((below[l] + extra) / denom).min(1.0);
            }
        }
        Self { values, m }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Row for anchor `j`: the auxiliary p-values with a zero reserved at
    /// the anchor's own position.
    pub fn row(&self, anchor: usize) -> &[f64] {
        &self.values[anchor * self.m..(anchor + 1) * self.m]
    }
}

/// Auxiliary p-values for anchor `j`:
/// `p_l^(j) = (sum_i w_i 1{V_i < Vhat_l} + w_j 1{Vhat_j < Vhat_l})
///            / (sum_i w_i + w_j)`, for `l != j` in increasing `l` order.
pub fn aux_pvalues(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    anchor: usize,
    tie_tolerance: f64,
) -> Result<Vec<f64>> {
    if anchor >= test.len() {
        return Err(Error::IndexOutOfRange {
            index: anchor,
            len: test.len(),
        });
    }
    Ok(aux_pvalues_with_anchor_score(
        calib,
        test,
        anchor,
        test.scores()[anchor],
        tie_tolerance,
    ))
}

/// Auxiliary p-values for anchor `j` with the anchor's comparison score
/// overridden (the oracle counterpart substitutes the true-outcome score
/// here while keeping everything else fixed).
pub fn aux_pvalues_with_anchor_score(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    anchor: usize,
    anchor_score: f64,
    tie_tolerance: f64,
) -> Vec<f64> {
    let total = calib.total_weight();
    let w_anchor = test.weights()[anchor];
    let denom = total + w_anchor;
    test.scores()
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != anchor)
        .map(|(_, &v)| {
            let below = calib.weight_below(v, tie_tolerance);
            let extra = if anchor_score < v - tie_tolerance {
                w_anchor
            } else {
                0.0
            };
            ((below + extra) / denom).min(1.0)
        })
        .collect()
}

/// Unweighted conformal p-values:
/// `p_j = (#{V_i < Vhat_j} + U_j (1 + #{V_i = Vhat_j})) / (n + 1)`.
pub fn unweighted_pvalues(
    calib_scores: &[f64],
    test_scores: &[f64],
    u: &[f64],
) -> Result<PValueVector> {
    check_uniforms(u, test_scores.len())?;
    let n = calib_scores.len();
    let denom = (n + 1) as f64;
    let mut sorted = calib_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let values = test_scores
        .iter()
        .zip(u)
        .map(|(&v, &uj)| {
            let below = sorted.partition_point(|&s| s < v) as f64;
            let tied = sorted.partition_point(|&s| s <= v) as f64 - below;
            ((below + (1.0 + tied) * uj) / denom).min(1.0)
        })
        .collect();
    Ok(PValueVector::from_computed(
        values,
        PValueKind::Unweighted,
        None,
    ))
}

/// Oracle p-values: the non-randomized formula evaluated at true-outcome
/// scores `V(X_{n+j}, Y_{n+j})`. Simulation/test harness only.
pub fn oracle_pvalues(
    calib: &WeightedCalibration,
    oracle_scores: &[f64],
    test_weights: &[f64],
    tie_tolerance: f64,
) -> Result<PValueVector> {
    let test = WeightedTest::new(oracle_scores.to_vec(), test_weights.to_vec(), None)?;
    let nr = wcp_nonrandomized(calib, &test, tie_tolerance);
    Ok(PValueVector::from_computed(
        nr.values,
        PValueKind::Oracle,
        None,
    ))
}

/// Direct-summation implementations of the same formulas, kept as a
/// correctness oracle for the sorted/prefix-sum fast path.
pub mod naive {
    use super::*;

    fn below_and_tied(
        scores: &[f64],
        weights: &[f64],
        v: f64,
        tol: f64,
    ) -> (f64, f64) {
        let mut below = 0.0;
        let mut tied = 0.0;
        for (&s, &w) in scores.iter().zip(weights) {
            if s < v - tol {
                below += w;
            } else if s <= v + tol {
                tied += w;
            }
        }
        (below, tied)
    }

    /// Direct-summation counterpart of [`super::wcp_nonrandomized`].
    pub fn wcp_nonrandomized(
        calib: &WeightedCalibration,
        test: &WeightedTest,
        tie_tolerance: f64,
    ) -> PValueVector {
        let total: f64 = calib.weights().iter().sum();
        let values = test
            .scores()
            .iter()
            .zip(test.weights())
            .map(|(&v, &w)| {
                let (below, _) =
                    below_and_tied(calib.scores(), calib.weights(), v, tie_tolerance);
                ((below + w) / (total + w)).min(1.0)
            })
            .collect();
        PValueVector::from_computed(values, PValueKind::Nonrandomized, None)
    }

    /// Direct-summation counterpart of [`super::wcp_randomized_with`].
    pub fn wcp_randomized_with(
        calib: &WeightedCalibration,
        test: &WeightedTest,
        u: &[f64],
        tie_tolerance: f64,
    ) -> Result<PValueVector> {
        super::check_uniforms(u, test.len())?;
        let total: f64 = calib.weights().iter().sum();
        let values = test
            .scores()
            .iter()
            .zip(test.weights())
            .zip(u)
            .map(|((&v, &w), &uj)| {
                let (below, tied) =
                    below_and_tied(calib.scores(), calib.weights(), v, tie_tolerance);
                ((below + (w + tied) * uj) / (total + w)).min(1.0)
            })
            .collect();
        Ok(PValueVector::from_computed(
            values,
            PValueKind::Randomized,
            None,
        ))
    }

    /// Direct-summation counterpart of [`super::aux_pvalues`].
    pub fn aux_pvalues(
        calib: &WeightedCalibration,
        test: &WeightedTest,
        anchor: usize,
        tie_tolerance: f64,
    ) -> Result<Vec<f64>> {
        if anchor >= test.len() {
            return Err(Error::IndexOutOfRange {
                index: anchor,
                len: test.len(),
            });
        }
        let total: f64 = calib.weights().iter().sum();
        let w_anchor = test.weights()[anchor];
        let v_anchor = test.scores()[anchor];
        let denom = total + w_anchor;
        Ok(test
            .scores()
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != anchor)
            .map(|(_, &v)| {
                let (below, _) =
                    below_and_tied(calib.scores(), calib.weights(), v, tie_tolerance);
                let extra = if v_anchor < v - tie_tolerance {
                    w_anchor
                } else {
                    0.0
                };
                ((below + extra) / denom).min(1.0)
            })
            .collect())
    }
}
