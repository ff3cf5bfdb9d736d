//! Counterfactual screening scenarios.
//!
//! Units `(X, O(0), O(1), T)` are drawn from a synthetic
//! super-population; treated units form the calibration set (their
//! treated outcome is observed), control units form the test set (their
//! control outcome is the threshold). The induced covariate shift is
//! `w(x) = (1 - e(x)) / e(x)` for the propensity `e`.
//!
//! Units are routed from one i.i.d. stream until both folds are full, so
//! the folds are exactly i.i.d. draws from the treated and control
//! populations with the stated sizes.

use confsel::rng::{child_seed, substream};
use confsel::{Error, WeightedCalibration, WeightedTest};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domains;
use crate::spec::{
    Coupling, Covariance, GeneratedTrial, IteDiagnostics, Scenario, ScoreChoice, SimulationSpec,
};

const DIM: usize = 10;
const AR_COEFF: f64 = 0.9;

fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// CDF of Beta(2, 4) as the closed-form binomial tail
/// `P(Bin(5, x) >= 2)`.
fn beta24_cdf(x: f64) -> f64 {
    let one_minus = 1.0 - x;
    1.0 - one_minus.powi(5) - 5.0 * x * one_minus.powi(4)
}

fn propensity(x1: f64) -> f64 {
    (1.0 + beta24_cdf(x1)) / 4.0
}

/// First two copula covariates; the remaining coordinates do not enter
/// the outcome or weight models but are drawn for fidelity.
fn covariates(rng: &mut impl Rng, covariance: Covariance) -> (f64, f64) {
    let mut z_prev = 0.0;
    let mut x1 = 0.0;
    let mut x2 = 0.0;
    for k in 0..DIM {
        let z: f64 = rng.sample(StandardNormal);
        let raw = match covariance {
            Covariance::Identity => z,
            Covariance::Ar09 => {
                if k == 0 {
                    z
                } else {
                    AR_COEFF * z_prev + (1.0 - AR_COEFF * AR_COEFF).sqrt() * z
                }
            }
        };
        z_prev = raw;
        // Guard against CDF underflow in the extreme tail.
        let x = phi(raw).clamp(1e-15, 1.0 - 1e-15);
        if k == 0 {
            x1 = x;
        } else if k == 1 {
            x2 = x;
        }
    }
    (x1, x2)
}

#[derive(Debug, Clone, Copy)]
struct OutcomeParams {
    mu1: f64,
    sigma1: f64,
    mu0: f64,
}

fn outcome_params(scenario: Scenario, x1: f64, x2: f64) -> OutcomeParams {
    let sigma1 = 0.2 - x1.ln();
    match scenario {
        Scenario::Ite1 | Scenario::Ite2 => {
            let mu1 = 4.0 / ((1.0 + (-12.0 * x1 - 0.5).exp()) * (1.0 + (-12.0 * x2 - 0.5).exp()));
            OutcomeParams {
                mu1,
                sigma1,
                mu0: 0.0,
            }
        }
        Scenario::Ite3 => {
            let mu0 = 2.0 / ((1.0 + (-3.0 * x1 - 0.5).exp()) * (1.0 + (-3.0 * x2 - 0.5).exp()));
            OutcomeParams {
                mu1: 0.1 + 1.5 * mu0,
                sigma1,
                mu0,
            }
        }
        _ => unreachable!("not a counterfactual scenario"),
    }
}

/// Mixture weight of the deterministic-effect branch in `Ite2`.
const MIX_PROB: f64 = 0.1;
const MIX_SHIFT: f64 = -0.5;
const MIX_GAP: f64 = 0.05;

/// Conditional CDF `P(O(1) <= y | X = x)`; the oracle score.
fn oracle_cdf(scenario: Scenario, params: OutcomeParams, y: f64) -> f64 {
    let trunc_normal = if y < 0.0 {
        0.0
    } else {
        phi((y - params.mu1) / params.sigma1)
    };
    match scenario {
        Scenario::Ite1 | Scenario::Ite3 => trunc_normal,
        Scenario::Ite2 => MIX_PROB * phi((y - MIX_SHIFT) / 0.1) + (1.0 - MIX_PROB) * trunc_normal,
        _ => unreachable!(),
    }
}

/// Conditional median of `O(1) | X = x`, solved from the known CDF.
fn conditional_median(scenario: Scenario, params: OutcomeParams) -> f64 {
    if oracle_cdf(scenario, params, 0.0) >= 0.5 {
        // The point mass at zero carries the median.
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = params.mu1 + 40.0 * params.sigma1 + 1.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if oracle_cdf(scenario, params, mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn score(choice: ScoreChoice, scenario: Scenario, params: OutcomeParams, y: f64) -> f64 {
    match choice {
        ScoreChoice::OracleCdf => oracle_cdf(scenario, params, y),
        ScoreChoice::CqrMedian => y - conditional_median(scenario, params),
    }
}

struct RawUnit {
    treated: bool,
    o0: f64,
    o1: f64,
    eps0: f64,
    eps1: f64,
    params: OutcomeParams,
    prop: f64,
    weight: f64,
}

fn draw_unit(
    rng: &mut impl Rng,
    scenario: Scenario,
    coupling: Coupling,
    covariance: Covariance,
    sigma1_scale: f64,
) -> RawUnit {
    let (x1, x2) = covariates(rng, covariance);
    let params = outcome_params(scenario, x1, x2);
    let eps0: f64 = rng.sample(StandardNormal);
    let indep: f64 = rng.sample(StandardNormal);
    let eps1 = match coupling {
        Coupling::Independent => indep,
        Coupling::Positive => eps0,
        Coupling::Negative => -eps0,
    };
    let mix: f64 = rng.random();
    let (o0, o1) = if scenario == Scenario::Ite2 && mix < MIX_PROB {
        let o1 = 0.1 * eps0 + MIX_SHIFT;
        (o1 + MIX_GAP, o1)
    } else {
        let o1 = (params.mu1 + sigma1_scale * params.sigma1 * eps1).max(0.0);
        let o0 = match scenario {
            Scenario::Ite3 => params.mu0 + 0.1 * eps0,
            _ => 0.1 * eps0,
        };
        (o0, o1)
    };
    let prop = propensity(x1);
    let treated = rng.random::<f64>() < prop;
    RawUnit {
        treated,
        o0,
        o1,
        eps0,
        eps1,
        params,
        prop,
        weight: (1.0 - prop) / prop,
    }
}

fn gen_ite_impl(
    spec: &SimulationSpec,
    trial_index: usize,
    sigma1_scale: f64,
) -> confsel::Result<GeneratedTrial> {
    let trial_seed = child_seed(spec.master_seed, trial_index as u64);
    let mut rng = substream(trial_seed, domains::GEN, 0);

    let n = spec.n_calib;
    let m = spec.m;
    let mut calib_scores = Vec::with_capacity(n);
    let mut calib_weights = Vec::with_capacity(n);
    let mut test_scores = Vec::with_capacity(m);
    let mut test_weights = Vec::with_capacity(m);
    let mut oracle_scores = Vec::with_capacity(m);
    let mut null_flags = Vec::with_capacity(m);
    let mut diag = IteDiagnostics::default();

    let max_draws = 50 * (n + m) + 1_000;
    let mut draws = 0usize;
    while calib_scores.len() < n || test_scores.len() < m {
        draws += 1;
        if draws > max_draws {
            return Err(Error::InvalidParameter(
                "counterfactual generator failed to fill both folds".into(),
            ));
        }
        let unit = draw_unit(&mut rng, spec.scenario, spec.coupling, spec.covariance, sigma1_scale);
        if unit.treated {
            if calib_scores.len() < n {
                calib_scores.push(score(spec.score, spec.scenario, unit.params, unit.o1));
                calib_weights.push(unit.weight);
                diag.calib_propensity.push(unit.prop);
            }
        } else if test_scores.len() < m {
            test_scores.push(score(spec.score, spec.scenario, unit.params, unit.o0));
            oracle_scores.push(score(spec.score, spec.scenario, unit.params, unit.o1));
            test_weights.push(unit.weight);
            null_flags.push(unit.o1 <= unit.o0);
            diag.test_eps0.push(unit.eps0);
            diag.test_eps1.push(unit.eps1);
            diag.test_mu1.push(unit.params.mu1);
            diag.test_propensity.push(unit.prop);
        }
    }

    let (alg_calib_weights, alg_test_weights) = match spec.weight_gamma {
        None => (calib_weights.clone(), test_weights.clone()),
        Some(gamma) => {
            let mut wrng = substream(trial_seed, domains::EST_WEIGHTS, 0);
            let log_g = gamma.ln();
            let perturb = |w: &f64, rng: &mut rand_chacha::ChaCha12Rng| {
                w * rng.random_range(-log_g..=log_g).exp()
            };
            let cw: Vec<f64> = calib_weights.iter().map(|w| perturb(w, &mut wrng)).collect();
            let tw: Vec<f64> = test_weights.iter().map(|w| perturb(w, &mut wrng)).collect();
            (cw, tw)
        }
    };

    Ok(GeneratedTrial {
        calibration: WeightedCalibration::new(calib_scores, alg_calib_weights)?,
        test: WeightedTest::new(test_scores, alg_test_weights, Some(null_flags))?,
        true_calib_weights: calib_weights,
        true_test_weights: test_weights,
        oracle_test_scores: Some(oracle_scores),
        diagnostics: Some(diag),
        hc: None,
    })
}

/// Generates one counterfactual trial (settings 1-3).
pub fn gen_ite(spec: &SimulationSpec, trial_index: usize) -> confsel::Result<GeneratedTrial> {
    gen_ite_impl(spec, trial_index, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use confsel::metrics::gamma_hat;
    use confsel::scores::validate_monotone;

    fn base_spec() -> SimulationSpec {
        SimulationSpec {
            n_calib: 60,
            m: 30,
            trials: 1,
            ..SimulationSpec::ite_defaults()
        }
    }

    #[test]
    fn beta24_cdf_matches_quadrature() {
        // 20 * integral of t (1-t)^3 evaluated in closed form at 0.5.
        assert!((beta24_cdf(0.5) - 0.8125).abs() < 1e-12);
        assert_eq!(beta24_cdf(0.0), 0.0);
        assert_eq!(beta24_cdf(1.0), 1.0);
    }

    #[test]
    fn propensity_stays_in_band() {
        let trial = gen_ite(&base_spec(), 0).unwrap();
        let diag = trial.diagnostics.unwrap();
        for &e in diag.test_propensity.iter().chain(&diag.calib_propensity) {
            assert!((0.25..=0.5).contains(&e));
        }
    }

    #[test]
    fn sizes_are_exact_and_weights_match_propensity() {
        let trial = gen_ite(&base_spec(), 3).unwrap();
        assert_eq!(trial.calibration.len(), 60);
        assert_eq!(trial.test.len(), 30);
        let diag = trial.diagnostics.unwrap();
        for (w, e) in trial
            .true_test_weights
            .iter()
            .zip(&diag.test_propensity)
        {
            assert!((w - (1.0 - e) / e).abs() < 1e-15);
        }
    }

    #[test]
    fn coupling_contracts() {
        for scenario in [Scenario::Ite1, Scenario::Ite2, Scenario::Ite3] {
            let mut spec = base_spec();
            spec.scenario = scenario;
            spec.coupling = Coupling::Positive;
            let diag = gen_ite(&spec, 1).unwrap().diagnostics.unwrap();
            for (a, b) in diag.test_eps0.iter().zip(&diag.test_eps1) {
                assert_eq!(a, b);
            }
            spec.coupling = Coupling::Negative;
            let diag = gen_ite(&spec, 1).unwrap().diagnostics.unwrap();
            for (a, b) in diag.test_eps0.iter().zip(&diag.test_eps1) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn trials_are_bit_identical_for_fixed_seed() {
        let spec = base_spec();
        let a = gen_ite(&spec, 7).unwrap();
        let b = gen_ite(&spec, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_ite(&spec, 8).unwrap();
        assert_ne!(a.test.scores(), c.test.scores());
    }

    #[test]
    fn degenerate_noise_pins_the_null_set() {
        // With sigma1 suppressed, O(1) = max(0, mu1), so nulls are exactly
        // the units with max(0, mu1) <= 0.1 eps0.
        let mut spec = base_spec();
        spec.coupling = Coupling::Positive;
        let trial = gen_ite_impl(&spec, 5, 0.0).unwrap();
        let diag = trial.diagnostics.unwrap();
        let flags = trial.test.null_flags().unwrap();
        for (j, &flag) in flags.iter().enumerate() {
            let expected = diag.test_mu1[j].max(0.0) <= 0.1 * diag.test_eps0[j];
            assert_eq!(flag, expected);
        }
    }

    #[test]
    fn scores_are_monotone_in_y() {
        let ys: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.5).collect();
        for scenario in [Scenario::Ite1, Scenario::Ite2, Scenario::Ite3] {
            for choice in [ScoreChoice::OracleCdf, ScoreChoice::CqrMedian] {
                let mut groups = Vec::new();
                for (x1, x2) in [(0.2, 0.8), (0.5, 0.5), (0.9, 0.1)] {
                    let params = outcome_params(scenario, x1, x2);
                    groups.push(
                        ys.iter()
                            .map(|&y| (y, score(choice, scenario, params, y)))
                            .collect(),
                    );
                }
                assert!(validate_monotone(&groups).is_none());
            }
        }
    }

    #[test]
    fn median_solves_the_cdf() {
        for scenario in [Scenario::Ite1, Scenario::Ite2, Scenario::Ite3] {
            for (x1, x2) in [(0.3, 0.6), (0.7, 0.2)] {
                let params = outcome_params(scenario, x1, x2);
                let med = conditional_median(scenario, params);
                assert!(oracle_cdf(scenario, params, med) >= 0.5 - 1e-9);
                assert!(oracle_cdf(scenario, params, med - 1e-6) <= 0.5 + 1e-6);
            }
        }
    }

    #[test]
    fn perturbed_weights_respect_gamma() {
        let mut spec = base_spec();
        spec.weight_gamma = Some(1.5);
        let trial = gen_ite(&spec, 2).unwrap();
        let g_calib =
            gamma_hat(&trial.true_calib_weights, trial.calibration.weights()).unwrap();
        let g_test = gamma_hat(&trial.true_test_weights, trial.test.weights()).unwrap();
        assert!(g_calib <= 1.5 && g_test <= 1.5);
        assert!(g_calib > 1.0);
    }
}
