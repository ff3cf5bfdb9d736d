//! Binary screening with rejection-sampled calibration data.
//!
//! A synthetic logistic model stands in for the fitted predictor: with
//! `mu(x) = x' beta`, outcomes follow `Y ~ Bern(sigmoid(mu(x)))` and a
//! unit enters the calibration pool with probability
//! `p(x) = min(0.8, sigmoid(mu(x) - mu_bar))`, inducing the shift
//! `w(x) = 1 / p(x)` between calibration and test covariates.
//!
//! The trial carries both calibration regimes: the full pool with the
//! clipped score (threshold-substitution path) and the negative-only
//! pool with the score `-mu(x)` (hypothesis-conditional path).

use confsel::rng::{child_seed, substream};
use confsel::scores::{clip_default_m, score_clip};
use confsel::{Error, WeightedCalibration, WeightedTest};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::domains;
use crate::spec::{GeneratedTrial, HcPath, SimulationSpec};

const DIM: usize = 4;
const BETA: [f64; DIM] = [1.0, 0.5, -0.5, 0.25];
const P_CAP: f64 = 0.8;

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn mu(x: &[f64; DIM]) -> f64 {
    x.iter().zip(BETA.iter()).map(|(a, b)| a * b).sum()
}

fn draw_x(rng: &mut ChaCha12Rng) -> [f64; DIM] {
    let mut x = [0.0; DIM];
    for v in &mut x {
        *v = rng.sample(StandardNormal);
    }
    x
}

/// Selection-into-calibration probability, capped at 0.8.
pub fn selection_prob(mu_x: f64, mu_bar: f64) -> f64 {
    sigmoid(mu_x - mu_bar).min(P_CAP)
}

/// Generates one binary covariate-shift trial.
pub fn gen_covshift_binary(
    spec: &SimulationSpec,
    trial_index: usize,
) -> confsel::Result<GeneratedTrial> {
    let trial_seed = child_seed(spec.master_seed, trial_index as u64);
    let mut rng = substream(trial_seed, domains::GEN, 0);

    // Centering constant from a training fold.
    let n_train = spec.n_train.max(1);
    let mu_bar = (0..n_train).map(|_| mu(&draw_x(&mut rng))).sum::<f64>() / n_train as f64;

    // Calibration pool by rejection sampling.
    let n = spec.n_calib;
    let mut calib_mu = Vec::with_capacity(n);
    let mut calib_y = Vec::with_capacity(n);
    let mut calib_weights = Vec::with_capacity(n);
    let max_draws = 200 * n + 1_000;
    let mut draws = 0usize;
    while calib_mu.len() < n {
        draws += 1;
        if draws > max_draws {
            return Err(Error::InvalidParameter(
                "rejection sampler failed to fill the calibration pool".into(),
            ));
        }
        let x = draw_x(&mut rng);
        let mu_x = mu(&x);
        let y = rng.random::<f64>() < sigmoid(mu_x);
        let p = selection_prob(mu_x, mu_bar);
        if rng.random::<f64>() < p {
            calib_mu.push(mu_x);
            calib_y.push(y);
            calib_weights.push(1.0 / p);
        }
    }

    // Test units straight from the population.
    let m = spec.m;
    let mut test_mu = Vec::with_capacity(m);
    let mut test_weights = Vec::with_capacity(m);
    let mut null_flags = Vec::with_capacity(m);
    for _ in 0..m {
        let x = draw_x(&mut rng);
        let mu_x = mu(&x);
        let y = rng.random::<f64>() < sigmoid(mu_x);
        test_mu.push(mu_x);
        test_weights.push(1.0 / selection_prob(mu_x, mu_bar));
        null_flags.push(!y);
    }

    // Clipped score with the data-driven constant over all supplied rows.
    let all_mu: Vec<f64> = calib_mu.iter().chain(test_mu.iter()).copied().collect();
    let m_const = clip_default_m(&all_mu, &[0.0]);
    let calib_scores: Vec<f64> = calib_mu
        .iter()
        .zip(&calib_y)
        .map(|(&mu_x, &y)| score_clip(if y { 1.0 } else { 0.0 }, 0.0, m_const, mu_x).unwrap())
        .collect();
    let test_scores: Vec<f64> = test_mu
        .iter()
        .map(|&mu_x| score_clip(0.0, 0.0, m_const, mu_x).unwrap())
        .collect();
    let oracle_scores: Vec<f64> = test_mu
        .iter()
        .zip(&null_flags)
        .map(|(&mu_x, &is_null)| {
            score_clip(if is_null { 0.0 } else { 1.0 }, 0.0, m_const, mu_x).unwrap()
        })
        .collect();

    // Negatives-only path: plain score -mu(x) on covariates alone.
    let hc_calib_scores: Vec<f64> = calib_mu
        .iter()
        .zip(&calib_y)
        .filter(|&(_, &y)| !y)
        .map(|(&mu_x, _)| -mu_x)
        .collect();
    let hc_calib_weights: Vec<f64> = calib_weights
        .iter()
        .zip(&calib_y)
        .filter(|&(_, &y)| !y)
        .map(|(&w, _)| w)
        .collect();
    let hc_test_scores: Vec<f64> = test_mu.iter().map(|&mu_x| -mu_x).collect();
    let hc = HcPath {
        calibration: WeightedCalibration::new(hc_calib_scores, hc_calib_weights.clone())?,
        test: WeightedTest::new(
            hc_test_scores,
            test_weights.clone(),
            Some(null_flags.clone()),
        )?,
        true_calib_weights: hc_calib_weights,
    };

    Ok(GeneratedTrial {
        calibration: WeightedCalibration::new(calib_scores, calib_weights.clone())?,
        test: WeightedTest::new(test_scores, test_weights.clone(), Some(null_flags))?,
        true_calib_weights: calib_weights,
        true_test_weights: test_weights,
        oracle_test_scores: Some(oracle_scores),
        diagnostics: None,
        hc: Some(hc),
    })
}
