//! Trial runner: generates, selects, scores, and aggregates.

use confsel::metrics::{self, TrialMetrics};
use confsel::rng::child_seed;
use confsel::selection::{select, SelectionResult};
use confsel::{Method, SelectionConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::generate_trial;
use crate::spec::{Scenario, ScoreChoice, SimulationSpec};

/// Methods evaluated per scenario. Counterfactual scenarios run the
/// threshold-substitution algorithm; outlier detection runs the
/// hypothesis-conditional one (its scores carry no thresholds); the
/// binary scenario supports both calibration regimes.
pub fn methods_for(scenario: Scenario) -> Vec<Method> {
    match scenario {
        Scenario::Ite1 | Scenario::Ite2 | Scenario::Ite3 => vec![
            Method::Wbh,
            Method::WcsHete,
            Method::WcsHomo,
            Method::WcsDtm,
        ],
        Scenario::Outlier => vec![
            Method::Wbh,
            Method::HcWcsHete,
            Method::HcWcsHomo,
            Method::HcWcsDtm,
        ],
        Scenario::CovshiftBinary => vec![
            Method::Wbh,
            Method::WcsHete,
            Method::WcsHomo,
            Method::WcsDtm,
            Method::HcWcsHete,
            Method::HcWcsHomo,
            Method::HcWcsDtm,
        ],
    }
}

/// One method's outcome in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub n_selected: usize,
    pub fdp: f64,
    pub power: f64,
    pub weighted_fdp: f64,
    /// `|R delta R_wbh| / max{1, |R_wbh|}` against the BH baseline of the
    /// same trial.
    pub discrepancy_vs_wbh: Option<f64>,
}

/// Aggregate over trials for one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    /// Mean FDP, i.e. the empirical FDR.
    pub fdr: f64,
    pub fdr_se: f64,
    pub power: f64,
    pub power_se: f64,
    pub weighted_fdr: f64,
    pub mean_selected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub spec: SimulationSpec,
    pub n_trials: usize,
    pub methods: Vec<MethodSummary>,
    /// Mean plug-in of the weighted-FDR budget factor
    /// `q E[(n+1) / (sum w + w)]` across trials.
    pub weighted_fdr_bound_plugin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<TrialRecord>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

struct TrialOutcome {
    records: Vec<TrialRecord>,
    plugin: f64,
}

fn run_one_trial(spec: &SimulationSpec, t: usize) -> confsel::Result<TrialOutcome> {
    let trial = generate_trial(spec, t)?;
    let trial_seed = child_seed(spec.master_seed, t as u64);
    let null_flags = trial
        .test
        .null_flags()
        .expect("generators attach null flags")
        .to_vec();

    let mut records = Vec::new();
    let mut wbh_selected: Option<Vec<usize>> = None;
    for method in methods_for(spec.scenario) {
        let uses_hc_path = trial.hc.is_some()
            && matches!(
                method,
                Method::HcWcsHete | Method::HcWcsHomo | Method::HcWcsDtm
            );
        let (calib, test) = if uses_hc_path {
            let hc = trial.hc.as_ref().unwrap();
            (&hc.calibration, &hc.test)
        } else {
            (&trial.calibration, &trial.test)
        };
        let config = SelectionConfig {
            q: spec.q,
            method,
            randomized_pvalues: true,
            seed: trial_seed,
            tie_tolerance: 0.0,
        };
        let result: SelectionResult = select(calib, test, &config)?;
        let metrics = TrialMetrics::compute(
            &result.selected,
            &null_flags,
            &trial.true_test_weights,
            None,
        )?;
        let discrepancy_vs_wbh = wbh_selected
            .as_ref()
            .map(|r| metrics::selection_discrepancy_capped(&result.selected, r));
        if method == Method::Wbh {
            wbh_selected = Some(result.selected.clone());
        }
        records.push(TrialRecord {
            trial: t,
            method,
            n_selected: metrics.n_selected,
            fdp: metrics.fdp,
            power: metrics.power,
            weighted_fdp: metrics.weighted_fdp,
            discrepancy_vs_wbh,
        });
    }
    let plugin = metrics::weighted_fdr_bound_plugin(
        spec.q,
        &trial.true_calib_weights,
        &trial.true_test_weights,
    )?;
    Ok(TrialOutcome { records, plugin })
}

/// Runs `spec.trials` independent trials (in parallel; per-trial keyed
/// streams make the output independent of scheduling) and aggregates
/// per-method empirical FDR, power, and standard errors.
pub fn run_trials(spec: &SimulationSpec) -> confsel::Result<RunOutput> {
    spec.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_one_trial(spec, t))
        .collect::<confsel::Result<_>>()?;

    let mut records = Vec::with_capacity(spec.trials * 4);
    for outcome in &outcomes {
        records.extend(outcome.records.iter().copied());
    }

    let mut methods = Vec::new();
    for method in methods_for(spec.scenario) {
        let of_method: Vec<&TrialRecord> =
            records.iter().filter(|r| r.method == method).collect();
        if of_method.is_empty() {
            continue;
        }
        let fdps: Vec<f64> = of_method.iter().map(|r| r.fdp).collect();
        let powers: Vec<f64> = of_method.iter().map(|r| r.power).collect();
        let wfdps: Vec<f64> = of_method.iter().map(|r| r.weighted_fdp).collect();
        let sizes: Vec<f64> = of_method.iter().map(|r| r.n_selected as f64).collect();
        let (fdr, fdr_se) = mean_and_se(&fdps);
        let (power, power_se) = mean_and_se(&powers);
        let (weighted_fdr, _) = mean_and_se(&wfdps);
        let (mean_selected, _) = mean_and_se(&sizes);
        methods.push(MethodSummary {
            method,
            trials: of_method.len(),
            fdr,
            fdr_se,
            power,
            power_se,
            weighted_fdr,
            mean_selected,
        });
    }
    let plugin = if outcomes.is_empty() {
        None
    } else {
        Some(outcomes.iter().map(|o| o.plugin).sum::<f64>() / outcomes.len() as f64)
    };

    Ok(RunOutput {
        summary: RunSummary {
            spec: *spec,
            n_trials: spec.trials,
            methods,
            weighted_fdr_bound_plugin: plugin,
        },
        records,
    })
}

/// One sample-size point of the stability study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub n_calib: usize,
    pub trials: usize,
    /// Fraction of trials with `R_BH = R_homo = R^(1)`.
    pub agree_fraction: f64,
    /// Median of `|R_homo delta R_BH| / max{1, |R_BH|}`.
    pub median_discrepancy: f64,
}

/// Agreement between homogeneous-pruning selection and the BH baseline
/// as the calibration size grows, in a continuous-score counterfactual
/// setting with `m` fixed.
pub fn stability_study(
    n_values: &[usize],
    m: usize,
    trials: usize,
    q: f64,
    master_seed: u64,
) -> confsel::Result<Vec<StabilityPoint>> {
    let mut points = Vec::with_capacity(n_values.len());
    for (block, &n) in n_values.iter().enumerate() {
        let spec = SimulationSpec {
            n_calib: n,
            m,
            q,
            trials,
            master_seed: child_seed(master_seed, block as u64),
            score: ScoreChoice::CqrMedian,
            ..SimulationSpec::ite_defaults()
        };
        let results: Vec<(bool, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| -> confsel::Result<(bool, f64)> {
                let trial = generate_trial(&spec, t)?;
                let trial_seed = child_seed(spec.master_seed, t as u64);
                let wbh = select(
                    &trial.calibration,
                    &trial.test,
                    &SelectionConfig {
                        q,
                        method: Method::Wbh,
                        randomized_pvalues: true,
                        seed: trial_seed,
                        tie_tolerance: 0.0,
                    },
                )?;
                let homo = select(
                    &trial.calibration,
                    &trial.test,
                    &SelectionConfig {
                        q,
                        method: Method::WcsHomo,
                        randomized_pvalues: true,
                        seed: trial_seed,
                        tie_tolerance: 0.0,
                    },
                )?;
                let agree =
                    wbh.selected == homo.selected && homo.selected == homo.first_step;
                let disc =
                    metrics::selection_discrepancy_capped(&homo.selected, &wbh.selected);
                Ok((agree, disc))
            })
            .collect::<confsel::Result<_>>()?;
        let agree_fraction =
            results.iter().filter(|(a, _)| *a).count() as f64 / trials.max(1) as f64;
        let mut discs: Vec<f64> = results.iter().map(|(_, d)| *d).collect();
        discs.sort_by(f64::total_cmp);
        let median_discrepancy = if discs.is_empty() {
            0.0
        } else if discs.len() % 2 == 1 {
            discs[discs.len() / 2]
        } else {
            0.5 * (discs[discs.len() / 2 - 1] + discs[discs.len() / 2])
        };
        points.push(StabilityPoint {
            n_calib: n,
            trials,
            agree_fraction,
            median_discrepancy,
        });
    }
    Ok(points)
}
