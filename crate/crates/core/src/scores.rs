//! Monotone nonconformity-score constructors.
//!
//! Each constructor takes the hypothesized outcome `y` together with
//! caller-supplied prediction columns; the library never fits models.
//! All constructors are nondecreasing in `y` for fixed remaining
//! arguments, which is what the p-value guarantees require.

use crate::error::Error;
use crate::Result;

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite (got {v})"
        )))
    }
}

/// Residual score `y - mu_hat`.
pub fn score_res(y: f64, mu_hat: f64) -> Result<f64> {
    check_finite("y", y)?;
    check_finite("mu_hat", mu_hat)?;
    Ok(y - mu_hat)
}

/// Clipped score `M 1{y > c} + c 1{y <= c} - mu_hat`.
///
/// `M` should dominate the predictions (see [`clip_default_m`] and
/// [`validate_clip_m`]); then every above-threshold score exceeds every
/// at-or-below-threshold score regardless of the prediction values.
pub fn score_clip(y: f64, c: f64, m_const: f64, mu_hat: f64) -> Result<f64> {
    check_finite("y", y)?;
    check_finite("c", c)?;
    check_finite("M", m_const)?;
    check_finite("mu_hat", mu_hat)?;
    let base = if y > c { m_const } else { c };
    Ok(base - mu_hat)
}

/// Quantile-residual score `y - q_beta_hat`.
pub fn score_cqr(y: f64, q_beta_hat: f64) -> Result<f64> {
    check_finite("y", y)?;
    check_finite("q_beta_hat", q_beta_hat)?;
    Ok(y - q_beta_hat)
}

/// Default clip constant for the supplied rows:
/// `2 * max_i(|mu_hat_i| v |c_i|) + 1`.
pub fn clip_default_m(mu_hats: &[f64], thresholds: &[f64]) -> f64 {
    let sup = mu_hats
        .iter()
        .chain(thresholds.iter())
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    2.0 * sup + 1.0
}

/// Checks `M > 2 * max_i |mu_hat_i|` over the supplied rows.
pub fn validate_clip_m(m_const: f64, mu_hats: &[f64]) -> Result<()> {
    let sup = mu_hats.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    if m_const > 2.0 * sup {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "clip constant M = {m_const} must exceed 2 * max|mu_hat| = {}",
            2.0 * sup
        )))
    }
}

/// First pair of rows contradicting monotonicity within a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneViolation {
    /// Index of the offending group.
    pub group: usize,
    /// Row positions (0-based, within the group) of the offending pair.
    pub row_a: usize,
    pub row_b: usize,
}

/// Checks that within each group of `(y, V(x, y))` rows the score is
/// nondecreasing in `y`; ties in `V` are allowed. Returns the first
/// violating pair, or `None` when every group is consistent.
///
/// Groups with fewer than two rows are trivially consistent.
pub fn validate_monotone(groups: &[Vec<(f64, f64)>]) -> Option<MonotoneViolation> {
    for (g, rows) in groups.iter().enumerate() {
        for a in 0..rows.len() {
            for b in (a + 1)..rows.len() {
                let (ya, va) = rows[a];
                let (yb, vb) = rows[b];
                let bad = (ya <= yb && va > vb) || (yb <= ya && vb > va);
                if bad {
                    return Some(MonotoneViolation {
                        group: g,
                        row_a: a,
                        row_b: b,
                    });
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn res_examples() {
        assert_eq!(score_res(5.0, 2.0).unwrap(), 3.0);
        assert_eq!(score_res(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(score_res(1.5, 2.5).unwrap(), -1.0);
        assert!(score_res(f64::NAN, 0.0).is_err());
        assert!(score_res(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn clip_examples() {
        assert_eq!(score_clip(1.0, 0.0, 100.0, 0.3).unwrap(), 99.7);
        assert_eq!(score_clip(0.0, 0.0, 100.0, 0.3).unwrap(), -0.3);
        assert_eq!(score_clip(3.0, 5.0, 100.0, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn cqr_examples() {
        assert_eq!(score_cqr(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(score_cqr(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(score_cqr(-1.0, 0.5).unwrap(), -1.5);
    }

    #[test]
    fn default_m_is_validated() {
        let mu = [0.4, -1.2, 0.9];
        let c = [0.0, 2.0];
        let m = clip_default_m(&mu, &c);
        assert_eq!(m, 5.0);
        assert!(validate_clip_m(m, &mu).is_ok());
        assert!(validate_clip_m(2.0, &mu).is_err());
    }

    #[test]
    fn monotone_examples() {
        assert_eq!(validate_monotone(&[vec![(1.0, 0.5), (2.0, 0.7)]]), None);
        let v = validate_monotone(&[vec![(1.0, 0.9), (2.0, 0.7)]]).unwrap();
        assert_eq!((v.group, v.row_a, v.row_b), (0, 0, 1));
        // Ties in V are allowed.
        assert_eq!(validate_monotone(&[vec![(1.0, 0.5), (2.0, 0.5)]]), None);
        // Equal y with different V is contradictory.
        assert!(validate_monotone(&[vec![(1.0, 0.5), (1.0, 0.6)]]).is_some());
    }

    #[test]
    fn clip_separates_above_from_below() {
        // With M above the validated floor, every y > c score beats every
        // y <= c score.
        let mu = [0.7, -0.4, 0.1];
        let c = 0.5;
        let m = clip_default_m(&mu, &[c]);
        let above: Vec<f64> = mu.iter().map(|&u| score_clip(1.0, c, m, u).unwrap()).collect();
        let below: Vec<f64> = mu.iter().map(|&u| score_clip(0.0, c, m, u).unwrap()).collect();
        let min_above = above.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_below = below.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min_above > max_below);
    }

    proptest! {
        #[test]
        fn clip_separation_holds_above_the_stated_floor(
            mu in proptest::collection::vec(-20.0f64..20.0, 1..8),
            c in -20.0f64..20.0,
            slack in 0.001f64..5.0,
        ) {
            // M > 2 max(|mu|, |c|) + |c| guarantees the separation.
            let sup = mu.iter().fold(c.abs(), |acc, &v| acc.max(v.abs()));
            let m = 2.0 * sup + c.abs() + slack;
            let min_above = mu
                .iter()
                .map(|&u| score_clip(c + 1.0, c, m, u).unwrap())
                .fold(f64::INFINITY, f64::min);
            let max_below = mu
                .iter()
                .map(|&u| score_clip(c, c, m, u).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min_above > max_below);
        }

        #[test]
        fn constructors_are_monotone_in_y(
            ys in proptest::collection::vec(-50.0f64..50.0, 2..8),
            mu in -20.0f64..20.0,
            c in -20.0f64..20.0,
        ) {
            let m = clip_default_m(&[mu], &[c]);
            let res_rows: Vec<(f64, f64)> =
                ys.iter().map(|&y| (y, score_res(y, mu).unwrap())).collect();
            let clip_rows: Vec<(f64, f64)> =
                ys.iter().map(|&y| (y, score_clip(y, c, m, mu).unwrap())).collect();
            let cqr_rows: Vec<(f64, f64)> =
                ys.iter().map(|&y| (y, score_cqr(y, mu).unwrap())).collect();
            prop_assert!(validate_monotone(&[res_rows, clip_rows, cqr_rows]).is_none());
        }
    }
}
