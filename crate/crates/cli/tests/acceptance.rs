//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). Thresholds and
//! tolerances are pinned here, not configurable.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use confsel::metrics::estimated_weight_bound;
use confsel::pvalues::{self, unweighted_pvalues, wcp_nonrandomized, wcp_randomized_with};
use confsel::selection::{ebh, evalues_from_wcs, naive, wcs};
use confsel::{Method, SelectionConfig, WeightedCalibration, WeightedTest};
use confsel_simlab::superuniformity::exchangeable_superuniformity_check;
use confsel_simlab::{run_trials, stability_study, SimulationSpec};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} [{name}]: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} [{name}] failed: {detail}");
}

/// Criterion 1: the conditional probabilities of the PRDS counterexample
/// match the exact constants 533/7200 and 547/7200 within +-0.002 at
/// 10^7 draws, with the ordering confirmed at 3-SE resolution.
#[test]
fn criterion_1_prds_counterexample() {
    let out = Command::new(env!("CARGO_BIN_EXE_confsel"))
        .args(["prds-check", "--draws", "10000000", "--seed", "1"])
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let f35 = value["report"]["f_35"]["estimate"].as_f64().unwrap();
    let f910 = value["report"]["f_910"]["estimate"].as_f64().unwrap();
    let confirmed = value["report"]["ordering_confirmed"].as_bool().unwrap();
    let exact_35 = 533.0 / 7200.0;
    let exact_910 = 547.0 / 7200.0;
    let pass =
        (f35 - exact_35).abs() <= 0.002 && (f910 - exact_910).abs() <= 0.002 && confirmed;
    report(
        1,
        "prds-counterexample",
        pass,
        &format!(
            "F(1/10,3/5) = {f35:.6} (exact {exact_35:.6}), F(1/10,9/10) = {f910:.6} \
             (exact {exact_910:.6}), ordering confirmed: {confirmed}"
        ),
    );
}

/// Criterion 2: finite-sample FDR control in the counterfactual setting
/// (oracle score, calibration 250, test 100): empirical FDR <= q + 3 SE
/// for wbh and all three prunings at q in {0.1, 0.2}, 500 trials.
#[test]
fn criterion_2_finite_sample_fdr_control() {
    let mut detail = String::new();
    let mut pass = true;
    for q in [0.1, 0.2] {
        let spec = SimulationSpec {
            q,
            trials: 500,
            master_seed: 1002,
            ..SimulationSpec::ite_defaults()
        };
        let out = run_trials(&spec).unwrap();
        for s in &out.summary.methods {
            let ok = s.fdr <= q + 3.0 * s.fdr_se;
            pass &= ok;
            detail.push_str(&format!(
                "[q={q} {} fdr={:.4} se={:.4}] ",
                s.method, s.fdr, s.fdr_se
            ));
        }
    }
    report(2, "finite-sample-fdr", pass, detail.trim());
}

/// Criterion 3: hypothesis-conditional FDR bound in the outlier scenario:
/// empirical FDR <= (1 - rho) q + 3 SE for the three prunings at
/// rho in {0.2, 0.5}, q = 0.1, signal 3, 500 trials.
#[test]
fn criterion_3_hypothesis_conditional_bound() {
    let mut detail = String::new();
    let mut pass = true;
    for rho in [0.2, 0.5] {
        let spec = SimulationSpec {
            rho,
            q: 0.1,
            signal_a: 3.0,
            trials: 500,
            master_seed: 1003,
            ..SimulationSpec::outlier_defaults()
        };
        let bound = (1.0 - rho) * spec.q;
        let out = run_trials(&spec).unwrap();
        for s in &out.summary.methods {
            if s.method == Method::Wbh {
                continue;
            }
            let ok = s.fdr <= bound + 3.0 * s.fdr_se;
            pass &= ok;
            detail.push_str(&format!(
                "[rho={rho} {} fdr={:.4} se={:.4} bound={bound:.3}] ",
                s.method, s.fdr, s.fdr_se
            ));
        }
    }
    report(3, "hypothesis-conditional-bound", pass, detail.trim());
}

fn random_instance(rng: &mut ChaCha12Rng) -> (WeightedCalibration, WeightedTest, f64) {
    let n = rng.random_range(0..=50);
    let m = rng.random_range(1..=30);
    let cs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let cw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..10.0)).collect();
    let ts: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
    let tw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..10.0)).collect();
    let q = rng.random_range(0.05..0.9);
    (
        WeightedCalibration::new(cs, cw).unwrap(),
        WeightedTest::new(ts, tw, None).unwrap(),
        q,
    )
}

/// Criterion 4: deterministic pruning coincides with eBH on the attached
/// e-values, on 1000 fuzzed instances.
#[test]
fn criterion_4_ebh_equivalence() {
    let mut rng = ChaCha12Rng::seed_from_u64(1004);
    for i in 0..1000 {
        let (calib, test, q) = random_instance(&mut rng);
        let config = SelectionConfig {
            q,
            method: Method::WcsDtm,
            randomized_pvalues: false,
            seed: i,
            tie_tolerance: 0.0,
        };
        let r = wcs(&calib, &test, &config).unwrap();
        let p = wcp_nonrandomized(&calib, &test, 0.0);
        let e = evalues_from_wcs(p.values(), &r.rhat_sizes, q, test.len()).unwrap();
        let ebh_set = ebh(&e, q).unwrap();
        assert_eq!(ebh_set, r.selected, "instance {i}");
    }
    report(4, "ebh-equivalence", true, "R_dtm = eBH(e) on 1000 fuzzed instances");
}

/// Criterion 5: pruning-set inclusions and anchor self-membership on
/// 1000 fuzzed instances and seeds.
#[test]
fn criterion_5_set_inclusions() {
    let mut rng = ChaCha12Rng::seed_from_u64(1005);
    let is_subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.contains(x));
    for i in 0..1000 {
        let (calib, test, q) = random_instance(&mut rng);
        let mk = |method| {
            let config = SelectionConfig {
                q,
                method,
                randomized_pvalues: false,
                seed: i,
                tie_tolerance: 0.0,
            };
            wcs(&calib, &test, &config).unwrap()
        };
        let hete = mk(Method::WcsHete);
        let homo = mk(Method::WcsHomo);
        let dtm = mk(Method::WcsDtm);
        assert!(is_subset(&dtm.selected, &hete.selected), "instance {i}");
        assert!(is_subset(&dtm.selected, &homo.selected), "instance {i}");
        assert!(is_subset(&hete.selected, &hete.first_step), "instance {i}");
        assert!(is_subset(&homo.selected, &homo.first_step), "instance {i}");
        assert!(is_subset(&dtm.selected, &dtm.first_step), "instance {i}");
        assert!(dtm.rhat_sizes.iter().all(|&k| k >= 1), "instance {i}");
    }
    report(
        5,
        "set-inclusions",
        true,
        "R_dtm in R_hete/R_homo in R^(1), anchors self-reject, on 1000 instances",
    );
}

/// Criterion 6: with all weights equal, randomized weighted p-values
/// reduce to the unweighted formula within 1e-12 (bitwise at weight 1),
/// on 1000 fuzzed instances.
#[test]
fn criterion_6_unweighted_reduction() {
    let mut rng = ChaCha12Rng::seed_from_u64(1006);
    for i in 0..1000usize {
        let n = rng.random_range(0..=50);
        let m = rng.random_range(1..=30);
        let cs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ts: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let u: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let lambda = if i % 4 == 0 { 1.0 } else { rng.random_range(0.1..10.0) };
        let calib = WeightedCalibration::new(cs.clone(), vec![lambda; n]).unwrap();
        let test = WeightedTest::new(ts.clone(), vec![lambda; m], None).unwrap();
        let weighted = wcp_randomized_with(&calib, &test, &u, 0.0).unwrap();
        let unweighted = unweighted_pvalues(&cs, &ts, &u).unwrap();
        for (a, b) in weighted.values().iter().zip(unweighted.values()) {
            if lambda == 1.0 {
                assert_eq!(a, b, "instance {i}: bitwise reduction at unit weights");
            } else {
                assert!((a - b).abs() <= 1e-12, "instance {i}: {a} vs {b}");
            }
        }
    }
    report(
        6,
        "unweighted-reduction",
        true,
        "equal-weight randomized p-values match the unweighted formula on 1000 instances",
    );
}

/// Criterion 7: super-uniformity of the randomized p-value in an
/// exchangeable simulation with 10^5 replicates, and exact uniformity of
/// the oracle p-value within the DKW band at level 1e-3.
#[test]
fn criterion_7_super_uniformity() {
    let r = exchangeable_superuniformity_check(100_000, 20, 1007);
    let pass = r.superuniform_ok && r.dkw_ok;
    report(
        7,
        "super-uniformity",
        pass,
        &format!(
            "max (freq - t) = {:.5}, DKW stat {:.5} vs band {:.5}",
            r.max_violation, r.dkw_stat, r.dkw_bound
        ),
    );
}

/// Criterion 8: with m = 20 fixed and continuous scores, the fraction of
/// trials where BH, homogeneous pruning, and the first step coincide is
/// nondecreasing in n and at least 0.95 at n = 10000; the median
/// discrepancy at the largest n is at most 0.05. 300 trials per size.
#[test]
fn criterion_8_stability() {
    let points = stability_study(&[100, 1000, 10_000], 20, 300, 0.1, 1008).unwrap();
    let fractions: Vec<f64> = points.iter().map(|p| p.agree_fraction).collect();
    let monotone = fractions.windows(2).all(|w| w[1] >= w[0]);
    let final_ok = fractions[2] >= 0.95;
    let median_ok = points[2].median_discrepancy <= 0.05;
    let pass = monotone && final_ok && median_ok;
    report(
        8,
        "stability",
        pass,
        &format!(
            "agreement {:?} (monotone: {monotone}), median discrepancy at n=10000: {:.4}",
            fractions, points[2].median_discrepancy
        ),
    );
}

/// Criterion 9: with weights perturbed at gamma = 1.5, the empirical FDR
/// of every pruning stays below the estimated-weight bound + 3 SE at
/// q = 0.1, m = 100, over 500 trials.
#[test]
fn criterion_9_estimated_weight_bound() {
    let spec = SimulationSpec {
        q: 0.1,
        trials: 500,
        master_seed: 1009,
        weight_gamma: Some(1.5),
        ..SimulationSpec::ite_defaults()
    };
    let bound = estimated_weight_bound(0.1, 1.5, spec.m).unwrap();
    let out = run_trials(&spec).unwrap();
    let mut detail = format!("bound = {bound:.4}; ");
    let mut pass = true;
    for s in &out.summary.methods {
        if s.method == Method::Wbh {
            continue;
        }
        let ok = s.fdr <= bound + 3.0 * s.fdr_se;
        pass &= ok;
        detail.push_str(&format!("[{} fdr={:.4} se={:.4}] ", s.method, s.fdr, s.fdr_se));
    }
    report(9, "estimated-weight-bound", pass, detail.trim());
}

/// Criterion 10a: all base and auxiliary p-values plus the full two-step
/// selection for n = 50000, m = 2000 complete within 10 seconds on the
/// sorted/prefix-sum path.
#[test]
fn criterion_10_performance_envelope() {
    let mut rng = ChaCha12Rng::seed_from_u64(1010);
    let n = 50_000;
    let m = 2_000;
    let cs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let cw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..10.0)).collect();
    let ts: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
    let tw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..10.0)).collect();

    let start = Instant::now();
    let calib = WeightedCalibration::new(cs, cw).unwrap();
    let test = WeightedTest::new(ts, tw, None).unwrap();
    let u: Vec<f64> = (0..m).map(|j| confsel::rng::uniform(7, 0, j as u64)).collect();
    let p_rand = wcp_randomized_with(&calib, &test, &u, 0.0).unwrap();
    let p_plain = wcp_nonrandomized(&calib, &test, 0.0);
    let mut selected_sizes = Vec::new();
    for method in [Method::WcsHete, Method::WcsHomo, Method::WcsDtm] {
        let config = SelectionConfig {
            q: 0.2,
            method,
            randomized_pvalues: false,
            seed: 7,
            tie_tolerance: 0.0,
        };
        let r = wcs(&calib, &test, &config).unwrap();
        selected_sizes.push(r.selected.len());
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(p_rand.len(), m);
    assert_eq!(p_plain.len(), m);
    let pass = elapsed < 10.0;
    report(
        10,
        "performance-envelope",
        pass,
        &format!(
            "n=50000, m=2000 p-values + 3 pruned selections in {elapsed:.2}s \
             (selected sizes {selected_sizes:?})"
        ),
    );
}

/// Criterion 10b: the fast path is bit-identical to the direct-summation
/// oracle on 200 fuzzed instances with exactly representable inputs.
#[test]
fn criterion_10_fast_path_matches_naive_bitwise() {
    let mut rng = ChaCha12Rng::seed_from_u64(10102);
    for i in 0..200 {
        // Dyadic scores, weights, and uniforms keep every sum exact, so
        // summation order cannot hide a counting or indexing bug.
        let n = rng.random_range(0..=40);
        let m = rng.random_range(1..=25);
        let dy = |rng: &mut ChaCha12Rng, lo: i64, hi: i64, scale: f64| {
            rng.random_range(lo..=hi) as f64 / scale
        };
        let cs: Vec<f64> = (0..n).map(|_| dy(&mut rng, -40, 40, 8.0)).collect();
        let cw: Vec<f64> = (0..n).map(|_| dy(&mut rng, 1, 64, 8.0)).collect();
        let ts: Vec<f64> = (0..m).map(|_| dy(&mut rng, -40, 40, 8.0)).collect();
        let tw: Vec<f64> = (0..m).map(|_| dy(&mut rng, 1, 64, 8.0)).collect();
        let u: Vec<f64> = (0..m).map(|_| dy(&mut rng, 0, 64, 64.0)).collect();
        let q = rng.random_range(0.05..0.9);

        let calib = WeightedCalibration::new(cs, cw).unwrap();
        let test = WeightedTest::new(ts, tw, None).unwrap();
        let fast_r = wcp_randomized_with(&calib, &test, &u, 0.0).unwrap();
        let slow_r = pvalues::naive::wcp_randomized_with(&calib, &test, &u, 0.0).unwrap();
        assert_eq!(fast_r.values(), slow_r.values(), "instance {i}: randomized");
        let fast_n = wcp_nonrandomized(&calib, &test, 0.0);
        let slow_n = pvalues::naive::wcp_nonrandomized(&calib, &test, 0.0);
        assert_eq!(fast_n.values(), slow_n.values(), "instance {i}: plain");
        for j in 0..m {
            let fast = pvalues::aux_pvalues(&calib, &test, j, 0.0).unwrap();
            let slow = pvalues::naive::aux_pvalues(&calib, &test, j, 0.0).unwrap();
            assert_eq!(fast, slow, "instance {i}: aux anchor {j}");
        }
        for method in [Method::WcsHete, Method::WcsHomo, Method::WcsDtm] {
            let config = SelectionConfig {
                q,
                method,
                randomized_pvalues: false,
                seed: i,
                tie_tolerance: 0.0,
            };
            let fast = wcs(&calib, &test, &config).unwrap();
            let slow = naive::wcs(&calib, &test, &config).unwrap();
            assert_eq!(fast, slow, "instance {i}: {method}");
        }
    }
    report(
        10,
        "fast-path-bitwise",
        true,
        "fast path bitwise-identical to the naive oracle on 200 dyadic instances",
    );
}
