//! Monte-Carlo verification of the positive-dependence counterexample.
//!
//! The construction: `n = 2` calibration draws from
//! `P = Unif([1/2, 3/2])` with weight function `w(x) = x`, two test draws
//! from `Q` with density `q(x) = x` on `[1/2, 3/2]`, and score
//! `V(x, y) = -w(x)`. With `F(s, t) = P(p_1 <= s | p_2 >= t)`, the exact
//! conditional probabilities are `F(1/10, 3/5) = 533/7200` and
//! `F(1/10, 9/10) = 547/7200`; the increase in `t` raising `F` is what
//! rules out PRDS.

use confsel::rng::substream;
use confsel::Error;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domains;

/// Exact value of `F(1/10, 3/5)`.
pub const EXACT_F_35: f64 = 533.0 / 7200.0;
/// Exact value of `F(1/10, 9/10)`.
pub const EXACT_F_910: f64 = 547.0 / 7200.0;

/// Conditional-probability estimate for one `(s, t)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub s: f64,
    pub t: f64,
    /// `#{p_1 <= s, p_2 >= t}`.
    pub joint_count: u64,
    /// `#{p_2 >= t}`.
    pub condition_count: u64,
    /// `None` when the conditioning event never occurred.
    pub estimate: Option<f64>,
    /// Binomial standard error given the conditioning count.
    pub se: Option<f64>,
}

/// Full report of the counterexample check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrdsReport {
    pub n_draws: u64,
    pub seed: u64,
    pub f_35: PairEstimate,
    pub f_910: PairEstimate,
    pub exact_f_35: f64,
    pub exact_f_910: f64,
    /// Whether `F(1/10, 3/5) < F(1/10, 9/10)` holds at 3-SE resolution.
    pub ordering_confirmed: bool,
}

/// One draw of the randomized p-value pair `(p_1, p_2)`.
fn draw_pvalue_pair(rng: &mut impl Rng) -> (f64, f64) {
    // Calibration weights W_i = w(X_i) = X_i ~ Unif(1/2, 3/2).
    let w1 = 0.5 + rng.random::<f64>();
    let w2 = 0.5 + rng.random::<f64>();
    // Test weights from Q by inverse CDF: F_Q(x) = (x^2 - 1/4) / 2.
    let q1 = (2.0 * rng.random::<f64>() + 0.25).sqrt();
    let q2 = (2.0 * rng.random::<f64>() + 0.25).sqrt();
    let u1 = rng.random::<f64>();
    let u2 = rng.random::<f64>();
    // Scores are V = -w(x), so V_i < V_j iff W_i > W_j; ties have
    // probability zero.
    let p = |qt: f64, u: f64| {
        let below = if w1 > qt { w1 } else { 0.0 } + if w2 > qt { w2 } else { 0.0 };
        (below + u * qt) / (w1 + w2 + qt)
    };
    (p(q1, u1), p(q2, u2))
}

/// Estimates `P(p_1 <= s | p_2 >= t)` for each requested pair by one
/// Monte-Carlo sweep.
pub fn prds_conditional_estimates(
    pairs: &[(f64, f64)],
    n_draws: u64,
    seed: u64,
) -> confsel::Result<Vec<PairEstimate>> {
    if n_draws == 0 {
        return Err(Error::InvalidParameter("n_draws must be >= 1".into()));
    }
    let mut rng = substream(seed, domains::PRDS, 0);
    let mut joint = vec![0u64; pairs.len()];
    let mut cond = vec![0u64; pairs.len()];
    for _ in 0..n_draws {
        let (p1, p2) = draw_pvalue_pair(&mut rng);
        for (k, &(s, t)) in pairs.iter().enumerate() {
            if p2 >= t {
                cond[k] += 1;
                if p1 <= s {
                    joint[k] += 1;
                }
            }
        }
    }
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, &(s, t))| {
            let (estimate, se) = if cond[k] == 0 {
                (None, None)
            } else {
                let f = joint[k] as f64 / cond[k] as f64;
                (Some(f), Some((f * (1.0 - f) / cond[k] as f64).sqrt()))
            };
            PairEstimate {
                s,
                t,
                joint_count: joint[k],
                condition_count: cond[k],
                estimate,
                se,
            }
        })
        .collect())
}

/// Runs the canonical check against the exact constants.
pub fn prds_counterexample_mc(n_draws: u64, seed: u64) -> confsel::Result<PrdsReport> {
    let estimates =
        prds_conditional_estimates(&[(0.1, 0.6), (0.1, 0.9)], n_draws, seed)?;
    let f_35 = estimates[0];
    let f_910 = estimates[1];
    let ordering_confirmed = match (f_35.estimate, f_35.se, f_910.estimate, f_910.se) {
        (Some(a), Some(sa), Some(b), Some(sb)) => {
            let gap_se = (sa * sa + sb * sb).sqrt();
            gap_se > 0.0 && (b - a) > 3.0 * gap_se
        }
        _ => false,
    };
    Ok(PrdsReport {
        n_draws,
        seed,
        f_35,
        f_910,
        exact_f_35: EXACT_F_35,
        exact_f_910: EXACT_F_910,
        ordering_confirmed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_draws() {
        assert!(prds_counterexample_mc(0, 1).is_err());
    }

    #[test]
    fn full_threshold_has_unit_conditional_probability() {
        // p_1 <= 1 always, so F(1, t) = 1 whenever the condition occurs.
        let est = prds_conditional_estimates(&[(1.0, 0.5)], 20_000, 3).unwrap();
        assert_eq!(est[0].estimate, Some(1.0));
        assert!(est[0].condition_count > 0);
    }

    #[test]
    fn report_is_deterministic() {
        let a = prds_counterexample_mc(10_000, 42).unwrap();
        let b = prds_counterexample_mc(10_000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimates_approach_the_exact_constants() {
        let report = prds_counterexample_mc(400_000, 7).unwrap();
        let f35 = report.f_35.estimate.unwrap();
        let f910 = report.f_910.estimate.unwrap();
        assert!((f35 - EXACT_F_35).abs() < 0.01, "f35 = {f35}");
        assert!((f910 - EXACT_F_910).abs() < 0.01, "f910 = {f910}");
    }

    #[test]
    fn single_draw_reports_without_confirming() {
        let report = prds_counterexample_mc(1, 5).unwrap();
        assert!(!report.ordering_confirmed);
    }

    #[test]
    fn oracle_pvalues_are_exactly_uniform_under_correct_weights() {
        // The marginal of p_1 is Unif[0, 1] by weighted exchangeability;
        // check the empirical CDF against the DKW band at level 1e-3.
        let n = 100_000u64;
        let mut rng = substream(11, domains::PRDS, 1);
        let mut samples: Vec<f64> = (0..n).map(|_| draw_pvalue_pair(&mut rng).0).collect();
        samples.sort_by(f64::total_cmp);
        let nf = n as f64;
        let mut stat = 0.0f64;
        for (i, &p) in samples.iter().enumerate() {
            stat = stat.max(p - i as f64 / nf).max((i + 1) as f64 / nf - p);
        }
        let bound = ((2.0f64 / 1e-3).ln() / (2.0 * nf)).sqrt();
        assert!(stat <= bound, "DKW stat {stat} exceeds {bound}");
    }
}
