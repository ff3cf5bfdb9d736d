//! Super-uniformity checks for the randomized p-value.
//!
//! Replicates an exchangeable screening problem (`w = 1`): fresh
//! calibration pairs, one test unit with an independent random threshold,
//! residual score. Across replicates the joint frequency
//! `P(p <= t, null)` must stay below `t`, and the oracle p-value (score
//! evaluated at the true outcome) must be exactly uniform.

use confsel::pvalues::wcp_randomized_with;
use confsel::rng::{child_seed, substream};
use confsel::{WeightedCalibration, WeightedTest};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domains;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperuniformityReport {
    pub replicates: usize,
    pub t_grid: Vec<f64>,
    /// Empirical `P(p <= t, null)` per grid point.
    pub joint_freq: Vec<f64>,
    /// Binomial standard error `sqrt(t (1 - t) / N)` per grid point.
    pub binomial_se: Vec<f64>,
    /// `max_t (freq - t)`; super-uniformity keeps this near or below 0.
    pub max_violation: f64,
    /// Whether `freq <= t + 3 se` holds on the whole grid.
    pub superuniform_ok: bool,
    /// Kolmogorov statistic of the oracle p-value sample against `Unif[0,1]`.
    pub dkw_stat: f64,
    /// DKW band at confidence level `1 - 1e-3`.
    pub dkw_bound: f64,
    pub dkw_ok: bool,
}

/// Runs the exchangeable check with `replicates` independent problems of
/// `n_calib` calibration pairs each.
pub fn exchangeable_superuniformity_check(replicates: usize, n_calib: usize, seed: u64) -> SuperuniformityReport {
    let t_grid: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    let mut joint_counts = vec![0usize; t_grid.len()];
    let mut oracle_samples = Vec::with_capacity(replicates);

    for r in 0..replicates {
        let mut rng = substream(child_seed(seed, r as u64), domains::SUPERUNIFORMITY, 0);
        let mut calib_scores = Vec::with_capacity(n_calib);
        for _ in 0..n_calib {
            let x: f64 = rng.sample(StandardNormal);
            let noise: f64 = rng.sample(StandardNormal);
            let y = x + noise;
            calib_scores.push(y - x);
        }
        let x: f64 = rng.sample(StandardNormal);
        let noise: f64 = rng.sample(StandardNormal);
        let y = x + noise;
        let c: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();

        let calib = WeightedCalibration::new(calib_scores, vec![1.0; n_calib])
            .expect("unit weights are valid");
        let observed = WeightedTest::new(vec![c - x], vec![1.0], None).unwrap();
        let oracle = WeightedTest::new(vec![y - x], vec![1.0], None).unwrap();
        let p = wcp_randomized_with(&calib, &observed, &[u], 0.0).unwrap().values()[0];
        let p_oracle = wcp_randomized_with(&calib, &oracle, &[u], 0.0).unwrap().values()[0];

        let is_null = y <= c;
        if is_null {
            for (k, &t) in t_grid.iter().enumerate() {
                if p <= t {
                    joint_counts[k] += 1;
                }
            }
        }
        oracle_samples.push(p_oracle);
    }

    let n = replicates as f64;
    let joint_freq: Vec<f64> = joint_counts.iter().map(|&c| c as f64 / n).collect();
    let binomial_se: Vec<f64> = t_grid.iter().map(|&t| (t * (1.0 - t) / n).sqrt()).collect();
    let max_violation = t_grid
        .iter()
        .zip(&joint_freq)
        .map(|(&t, &f)| f - t)
        .fold(f64::NEG_INFINITY, f64::max);
    let superuniform_ok = t_grid
        .iter()
        .zip(&joint_freq)
        .zip(&binomial_se)
        .all(|((&t, &f), &se)| f <= t + 3.0 * se);

    oracle_samples.sort_by(f64::total_cmp);
    let mut dkw_stat = 0.0f64;
    for (i, &p) in oracle_samples.iter().enumerate() {
        dkw_stat = dkw_stat
            .max(p - i as f64 / n)
            .max((i + 1) as f64 / n - p);
    }
    let dkw_bound = ((2.0f64 / 1e-3).ln() / (2.0 * n)).sqrt();

    SuperuniformityReport {
        replicates,
        t_grid,
        joint_freq,
        binomial_se,
        max_violation,
        superuniform_ok,
        dkw_stat,
        dkw_ok: dkw_stat <= dkw_bound,
        dkw_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_superuniform() {
        let report = exchangeable_superuniformity_check(4_000, 20, 99);
        assert!(report.superuniform_ok, "max violation {}", report.max_violation);
        assert!(report.dkw_ok, "dkw {} > {}", report.dkw_stat, report.dkw_bound);
    }

    #[test]
    fn report_is_deterministic() {
        let a = exchangeable_superuniformity_check(500, 10, 3);
        let b = exchangeable_superuniformity_check(500, 10, 3);
        assert_eq!(a, b);
    }
}
