//! Outlier detection with a covariate shift between calibration and test
//! inliers.
//!
//! A fixed set of 50 centers `W ~ Unif([-3, 3]^50)` is drawn once per
//! study. Test inliers are `X = V + W`, outliers `X = sqrt(a) V + W`
//! (`V ~ N(0, I_50)`), and the calibration inliers follow the tilted
//! distribution `P` with `dQ/dP(x) = w(x) ~ sigmoid(x' theta)`,
//! `theta_j = 0.1 1{j <= 5}`.
//!
//! `P` is sampled exactly: tilting a Gaussian-mixture `Q` by
//! `1 + exp(-x' theta)` is again a Gaussian mixture, with one extra
//! component `N(c - theta, I)` of weight `exp(-theta' c + |theta|^2 / 2)`
//! per center `c`.

use confsel::rng::{child_seed, substream};
use confsel::{WeightedCalibration, WeightedTest};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::domains;
use crate::spec::{GeneratedTrial, SimulationSpec};

const DIM: usize = 50;
const N_CENTERS: usize = 50;
const THETA_COORD: f64 = 0.1;
const THETA_SUPPORT: usize = 5;

fn theta_dot(x: &[f64]) -> f64 {
    x.iter().take(THETA_SUPPORT).sum::<f64>() * THETA_COORD
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Covariate-shift weight supplied to the selection algorithms.
pub fn shift_weight(x: &[f64]) -> f64 {
    sigmoid(theta_dot(x))
}

/// Negative distance to the nearest center; outliers sit farther out, so
/// they receive smaller scores and hence smaller p-values.
pub fn outlyingness_score(x: &[f64], centers: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for c in centers {
        let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best {
            best = d2;
        }
    }
    -best.sqrt()
}

fn draw_centers(rng: &mut ChaCha12Rng) -> Vec<Vec<f64>> {
    (0..N_CENTERS)
        .map(|_| (0..DIM).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect()
}

fn gaussian_around(rng: &mut ChaCha12Rng, center: &[f64], scale: f64) -> Vec<f64> {
    center
        .iter()
        .map(|&c| c + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// One draw from the test-inlier distribution `Q`.
fn draw_q(rng: &mut ChaCha12Rng, centers: &[Vec<f64>], scale: f64) -> Vec<f64> {
    let k = rng.random_range(0..centers.len());
    gaussian_around(rng, &centers[k], scale)
}

/// One draw from the tilted calibration distribution `P`.
fn draw_p(rng: &mut ChaCha12Rng, centers: &[Vec<f64>], shifted_log_weights: &[f64]) -> Vec<f64> {
    // Components: (center, unshifted) with weight 1, (center, shifted)
    // with weight exp(-theta'c + |theta|^2/2).
    let total: f64 = centers.len() as f64 + shifted_log_weights.iter().map(|lw| lw.exp()).sum::<f64>();
    let mut pick = rng.random::<f64>() * total;
    for (k, c) in centers.iter().enumerate() {
        pick -= 1.0;
        if pick < 0.0 {
            return gaussian_around(rng, c, 1.0);
        }
        pick -= shifted_log_weights[k].exp();
        if pick < 0.0 {
            let shifted: Vec<f64> = c
                .iter()
                .enumerate()
                .map(|(j, &cj)| if j < THETA_SUPPORT { cj - THETA_COORD } else { cj })
                .collect();
            return gaussian_around(rng, &shifted, 1.0);
        }
    }
    // Rounding remainder lands on the last shifted component.
    let c = &centers[centers.len() - 1];
    let shifted: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(j, &cj)| if j < THETA_SUPPORT { cj - THETA_COORD } else { cj })
        .collect();
    gaussian_around(rng, &shifted, 1.0)
}

/// Generates one outlier-detection trial. The first `round(m * rho)`
/// test units are outliers; null flags mark the inliers.
pub fn gen_outlier(spec: &SimulationSpec, trial_index: usize) -> confsel::Result<GeneratedTrial> {
    let centers_seed = if spec.fresh_centers_per_trial {
        child_seed(spec.master_seed, trial_index as u64)
    } else {
        spec.master_seed
    };
    let mut centers_rng = substream(centers_seed, domains::CENTERS, 0);
    let centers = draw_centers(&mut centers_rng);
    let theta_norm2 = THETA_COORD * THETA_COORD * THETA_SUPPORT as f64;
    let shifted_log_weights: Vec<f64> = centers
        .iter()
        .map(|c| -theta_dot(c) + theta_norm2 / 2.0)
        .collect();

    let trial_seed = child_seed(spec.master_seed, trial_index as u64);
    let mut rng = substream(trial_seed, domains::GEN, 0);

    let m = spec.m;
    let n_out = (m as f64 * spec.rho).round() as usize;
    let signal_scale = spec.signal_a.sqrt();

    let mut test_scores = Vec::with_capacity(m);
    let mut test_weights = Vec::with_capacity(m);
    let mut null_flags = Vec::with_capacity(m);
    for j in 0..m {
        let is_outlier = j < n_out;
        let x = if is_outlier {
            draw_q(&mut rng, &centers, signal_scale)
        } else {
            draw_q(&mut rng, &centers, 1.0)
        };
        test_scores.push(outlyingness_score(&x, &centers));
        test_weights.push(shift_weight(&x));
        null_flags.push(!is_outlier);
    }

    let mut calib_scores = Vec::with_capacity(spec.n_calib);
    let mut calib_weights = Vec::with_capacity(spec.n_calib);
    for _ in 0..spec.n_calib {
        let x = draw_p(&mut rng, &centers, &shifted_log_weights);
        calib_scores.push(outlyingness_score(&x, &centers));
        calib_weights.push(shift_weight(&x));
    }

    Ok(GeneratedTrial {
        calibration: WeightedCalibration::new(calib_scores, calib_weights.clone())?,
        test: WeightedTest::new(test_scores, test_weights.clone(), Some(null_flags))?,
        true_calib_weights: calib_weights,
        true_test_weights: test_weights,
        oracle_test_scores: None,
        diagnostics: None,
        hc: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Scenario;

    fn base_spec() -> SimulationSpec {
        SimulationSpec {
            scenario: Scenario::Outlier,
            n_calib: 80,
            m: 60,
            rho: 0.3,
            signal_a: 3.0,
            ..SimulationSpec::ite_defaults()
        }
    }

    #[test]
    fn outlier_count_is_exact() {
        let trial = gen_outlier(&base_spec(), 0).unwrap();
        let nulls = trial.test.null_flags().unwrap();
        assert_eq!(nulls.iter().filter(|&&f| !f).count(), 18);

        let mut spec = base_spec();
        spec.rho = 0.0;
        let trial = gen_outlier(&spec, 0).unwrap();
        assert!(trial.test.null_flags().unwrap().iter().all(|&f| f));
    }

    #[test]
    fn unit_signal_coincides_with_inlier_law() {
        // sqrt(1) V + W is the inlier construction itself: with the same
        // stream state, both branches produce identical points.
        let mut spec = base_spec();
        spec.signal_a = 1.0;
        spec.rho = 1.0;
        let all_out = gen_outlier(&spec, 4).unwrap();
        spec.rho = 0.0;
        let all_in = gen_outlier(&spec, 4).unwrap();
        assert_eq!(all_out.test.scores(), all_in.test.scores());
        assert_eq!(all_out.test.weights(), all_in.test.weights());
    }

    #[test]
    fn centers_are_shared_across_trials_by_default() {
        let spec = base_spec();
        let a = gen_outlier(&spec, 0).unwrap();
        let b = gen_outlier(&spec, 1).unwrap();
        // Different draws...
        assert_ne!(a.test.scores(), b.test.scores());
        // ...but refreshing centers per trial changes trial 1 relative to
        // the shared-center run.
        let mut fresh = base_spec();
        fresh.fresh_centers_per_trial = true;
        let c = gen_outlier(&fresh, 1).unwrap();
        assert_ne!(b.test.scores(), c.test.scores());
        // Trial 0 with fresh centers keyed by the master seed differs too.
        let d = gen_outlier(&fresh, 0).unwrap();
        assert_ne!(a.test.scores(), d.test.scores());
    }

    #[test]
    fn weights_are_valid_and_deterministic() {
        let spec = base_spec();
        let a = gen_outlier(&spec, 2).unwrap();
        let b = gen_outlier(&spec, 2).unwrap();
        assert_eq!(a, b);
        for &w in a.test.weights().iter().chain(a.calibration.weights()) {
            assert!(w.is_finite() && w > 0.0 && w < 1.0);
        }
    }
}
