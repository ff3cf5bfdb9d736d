//! Multiple-testing engines.
//!
//! * [`bh`]: Benjamini-Hochberg step-up on explicit p-values.
//! * [`wcs`]: two-step weighted conformalized selection. For every unit
//!   `j`, BH over the auxiliary p-values (with a zero at `j`) calibrates a
//!   per-unit threshold `s_j = q |Rhat_{j->0}| / m`; units with
//!   `p_j <= s_j` form the first-step set, which a second pass prunes to
//!   size `r* = max{r : #{j : p_j <= s_j, xi_j |Rhat_{j->0}| <= r} >= r}`.
//! * [`hc_wcs`]: the hypothesis-conditional variant; the arithmetic is
//!   identical, the difference is that its inputs carry scores evaluated
//!   on full observations rather than threshold-substituted ones.
//! * [`ebh`] and [`evalues_from_wcs`]: the e-value formulation whose
//!   deterministic-pruning equivalence is a useful cross-check.
//!
//! Per-anchor BH runs are served from one global sort of the test scores:
//! all auxiliary p-values of an anchor share the numerators
//! `A(l) = sum_i w_i 1{V_i < Vhat_l}` and are nondecreasing along that
//! sort, so each anchor costs `O(m)` after preprocessing. The literal
//! per-anchor construction survives in [`naive`] as a correctness oracle.

use serde::{Deserialize, Serialize};

use crate::data::{Method, Pruning, SelectionConfig, WeightedCalibration, WeightedTest};
use crate::error::Error;
use crate::pvalues;
use crate::rng::{self, DOMAIN_XI_HETE, DOMAIN_XI_HOMO};
use crate::Result;

/// Outcome of a selection run, with per-unit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    /// Selected test units, ascending.
    pub selected: Vec<usize>,
    /// First-step set `R^(1)` (equals `selected` for BH-style methods).
    pub first_step: Vec<usize>,
    /// Per-unit thresholds `s_j = q |Rhat_{j->0}| / m`; empty for
    /// BH-style methods.
    pub s: Vec<f64>,
    /// Per-unit `|Rhat_{j->0}|`; empty for BH-style methods.
    pub rhat_sizes: Vec<usize>,
    /// Pruning cutoff; equals `selected.len()` for the WCS family.
    pub r_star: Option<usize>,
    /// Step-up count for BH-style methods.
    pub bh_kstar: Option<usize>,
    pub seed: Option<u64>,
}

impl SelectionResult {
    fn empty(method: Method) -> Self {
        Self {
            method,
            selected: Vec::new(),
            first_step: Vec::new(),
            s: Vec::new(),
            rhat_sizes: Vec::new(),
            r_star: method.pruning().map(|_| 0),
            bh_kstar: match method {
                Method::Bh | Method::Wbh => Some(0),
                _ => None,
            },
            seed: None,
        }
    }
}

/// Nonnegative e-values for the eBH procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EValueVector {
    values: Vec<f64>,
}

impl EValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for &e in &values {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "e-values must be finite and >= 0 (got {e})"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name: "q", value: q })
    }
}

/// Benjamini-Hochberg step-up at level `q`: rejects
/// `{j : p_j <= q k*/m}` where `k* = max{k : #{j : p_j <= q k/m} >= k}`.
pub fn bh(pvalues: &[f64], q: f64) -> Result<SelectionResult> {
    check_q(q)?;
    for &p in pvalues {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability {
                name: "p-value",
                value: p,
            });
        }
    }
    let m = pvalues.len();
    if m == 0 {
        return Ok(SelectionResult::empty(Method::Bh));
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m_f = m as f64;
    let mut kstar = 0;
    for k in (1..=m).rev() {
        if sorted[k - 1] <= q * k as f64 / m_f {
            kstar = k;
            break;
        }
    }
    let selected = if kstar == 0 {
        Vec::new()
    } else {
        let threshold = q * kstar as f64 / m_f;
        (0..m).filter(|&j| pvalues[j] <= threshold).collect()
    };
    Ok(SelectionResult {
        method: Method::Bh,
        first_step: selected.clone(),
        selected,
        s: Vec::new(),
        rhat_sizes: Vec::new(),
        r_star: None,
        bh_kstar: Some(kstar),
        seed: None,
    })
}

/// Generalized e-values attached to a WCS run:
/// `e_j = 1{p_j <= q |Rhat_{j->0}| / m} / (q |Rhat_{j->0}| / m)`.
pub fn evalues_from_wcs(
    pvalues: &[f64],
    rhat_sizes: &[usize],
    q: f64,
    m: usize,
) -> Result<EValueVector> {
    check_q(q)?;
    if pvalues.len() != rhat_sizes.len() {
        return Err(Error::LengthMismatch {
            left: pvalues.len(),
            right: rhat_sizes.len(),
        });
    }
    let m_f = m as f64;
    let mut values = Vec::with_capacity(pvalues.len());
    for (&p, &size) in pvalues.iter().zip(rhat_sizes) {
        if size == 0 {
            return Err(Error::InvalidParameter(
                "|Rhat_{j->0}| must be >= 1".into(),
            ));
        }
        let s = q * size as f64 / m_f;
        values.push(if p <= s { m_f / (q * size as f64) } else { 0.0 });
    }
    EValueVector::new(values)
}

/// eBH procedure: rejects `{j : e_j >= m / (q khat)}` where
/// `khat = max{k : #{j : e_j >= m / (q k)} >= k}`.
pub fn ebh(evalues: &EValueVector, q: f64) -> Result<Vec<usize>> {
    check_q(q)?;
    let m = evalues.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let e = evalues.values();
    let mut sorted = e.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m_f = m as f64;
    let mut khat = 0;
    for k in (1..=m).rev() {
        let threshold = m_f / (q * k as f64);
        let count = m - sorted.partition_point(|&x| x < threshold);
        if count >= k {
            khat = k;
            break;
        }
    }
    if khat == 0 {
        return Ok(Vec::new());
    }
    let threshold = m_f / (q * khat as f64);
    Ok((0..m).filter(|&j| e[j] >= threshold).collect())
}

/// Per-unit `|Rhat_{j->0}|` for every anchor, from one global sort of the
/// test scores.
///
/// For anchor `j`, the auxiliary p-values are nondecreasing along the
/// sorted test order, so the BH step-up count is found by scanning ranks
/// once; no per-anchor sort is needed.
fn rhat_sizes_all(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    q: f64,
    tol: f64,
) -> Vec<usize> {
    let m = test.len();
    let m_f = m as f64;
    let total = calib.total_weight();
    let scores = test.scores();
    let weights = test.weights();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos = vec![0usize; m];
    for (r, &j) in order.iter().enumerate() {
        pos[j] = r;
    }
    let v_ord: Vec<f64> = order.iter().map(|&j| scores[j]).collect();
    let a_ord: Vec<f64> = v_ord.iter().map(|&v| calib.weight_below(v, tol)).collect();

    let mut sizes = vec![0usize; m];
    for j in 0..m {
        let w_j = weights[j];
        let v_j = scores[j];
        let denom = total + w_j;
        // First rank whose score the anchor strictly undercuts; scores
        // are finite, so this is the complement of `v_j < v - tol`.
        let flip = v_ord.partition_point(|&v| v_j >= v - tol);
        let r_j = pos[j];
        // i-th smallest auxiliary p-value (0-based), skipping the anchor.
        let aux_at = |i: usize| -> f64 {
            let r = if i < r_j { i } else { i + 1 };
            let extra = if r >= flip { w_j } else { 0.0 };
            ((a_ord[r] + extra) / denom).min(1.0)
        };
        // k* = max{k : (k == 1) or aux_(k-1) <= q k / m}; the zero at the
        // anchor position makes k = 1 always feasible.
        let mut kstar = 1usize;
        for k in (2..=m).rev() {
            if aux_at(k - 2) <= q * k as f64 / m_f {
                kstar = k;
                break;
            }
        }
        sizes[j] = kstar;
    }
    sizes
}

fn xi_values(pruning: Pruning, seed: u64, m: usize) -> Vec<f64> {
    match pruning {
        Pruning::Hete => (0..m)
            .map(|j| rng::uniform(seed, DOMAIN_XI_HETE, j as u64))
            .collect(),
        Pruning::Homo => {
            let xi = rng::uniform(seed, DOMAIN_XI_HOMO, 0);
            vec![xi; m]
        }
        Pruning::Dtm => vec![1.0; m],
    }
}

/// Second-step pruning shared by the fast and naive paths: returns
/// `(r_star, selected)`.
fn prune(
    pvalues: &[f64],
    s: &[f64],
    sizes: &[usize],
    xi: &[f64],
) -> (usize, Vec<usize>) {
    let m = pvalues.len();
    let mut keys: Vec<f64> = (0..m)
        .filter(|&j| pvalues[j] <= s[j])
        .map(|j| xi[j] * sizes[j] as f64)
        .collect();
    keys.sort_by(f64::total_cmp);
    let mut r_star = 0usize;
    for r in (0..=m).rev() {
        let count = keys.partition_point(|&k| k <= r as f64);
        if count >= r {
            r_star = r;
            break;
        }
    }
    let selected = (0..m)
        .filter(|&j| pvalues[j] <= s[j] && xi[j] * sizes[j] as f64 <= r_star as f64)
        .collect();
    (r_star, selected)
}

fn wcs_engine(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    config: &SelectionConfig,
    xi_override: Option<&[f64]>,
) -> Result<SelectionResult> {
    config.validate()?;
    let pruning = config.method.pruning().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "method {} is not a WCS-family method",
            config.method
        ))
    })?;
    let m = test.len();
    if m == 0 {
        let mut empty = SelectionResult::empty(config.method);
        empty.r_star = Some(0);
        return Ok(empty);
    }
    let tol = config.tie_tolerance;
    let p = pvalues::wcp_nonrandomized(calib, test, tol);
    let p = p.values();
    let sizes = rhat_sizes_all(calib, test, config.q, tol);
    let m_f = m as f64;
    let s: Vec<f64> = sizes.iter().map(|&k| config.q * k as f64 / m_f).collect();
    let first_step: Vec<usize> = (0..m).filter(|&j| p[j] <= s[j]).collect();

    let xi_storage;
    let xi: &[f64] = match xi_override {
        Some(values) => {
            if values.len() != m {
                return Err(Error::LengthMismatch {
                    left: m,
                    right: values.len(),
                });
            }
            for &x in values {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidProbability {
                        name: "xi",
                        value: x,
                    });
                }
            }
            values
        }
        None => {
            xi_storage = xi_values(pruning, config.seed, m);
            &xi_storage
        }
    };

    let (r_star, selected) = prune(p, &s, &sizes, xi);
    debug_assert_eq!(r_star, selected.len());

    Ok(SelectionResult {
        method: config.method,
        selected,
        first_step,
        s,
        rhat_sizes: sizes,
        r_star: Some(r_star),
        bh_kstar: None,
        seed: match pruning {
            Pruning::Dtm => None,
            _ => Some(config.seed),
        },
    })
}

/// Weighted conformalized selection (methods `wcs-hete`, `wcs-homo`,
/// `wcs-dtm`).
pub fn wcs(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    match config.method {
        Method::WcsHete | Method::WcsHomo | Method::WcsDtm => {
            wcs_engine(calib, test, config, None)
        }
        other => Err(Error::InvalidParameter(format!(
            "wcs expects a wcs-* method (got {other})"
        ))),
    }
}

/// Same engine with caller-pinned pruning variables; intended for tests
/// and reproductions (e.g. forcing `xi = 0` recovers the first-step set).
pub fn wcs_with_xi(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    config: &SelectionConfig,
    xi: &[f64],
) -> Result<SelectionResult> {
    wcs_engine(calib, test, config, Some(xi))
}

/// Hypothesis-conditional weighted conformalized selection (methods
/// `hc-wcs-*`). Identical arithmetic to [`wcs`]; inputs carry scores
/// evaluated on full observations, with no threshold substitution.
pub fn hc_wcs(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    match config.method {
        Method::HcWcsHete | Method::HcWcsHomo | Method::HcWcsDtm => {
            wcs_engine(calib, test, config, None)
        }
        other => Err(Error::InvalidParameter(format!(
            "hc_wcs expects an hc-wcs-* method (got {other})"
        ))),
    }
}

/// Dispatches on `config.method`: `wbh` runs BH over the weighted
/// conformal p-values (randomized by default), the WCS family runs the
/// two-step procedure.
pub fn select(
    calib: &WeightedCalibration,
    test: &WeightedTest,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    config.validate()?;
    match config.method {
        Method::Bh => Err(Error::InvalidParameter(
            "method bh takes explicit p-values; call bh() directly".into(),
        )),
        Method::Wbh => {
            let (p, seed) = if config.randomized_pvalues {
                (
                    pvalues::wcp_randomized(calib, test, config.seed, config.tie_tolerance),
                    Some(config.seed),
                )
            } else {
                (
                    pvalues::wcp_nonrandomized(calib, test, config.tie_tolerance),
                    None,
                )
            };
            let mut result = bh(p.values(), config.q)?;
            result.method = Method::Wbh;
            result.seed = seed;
            Ok(result)
        }
        _ => wcs_engine(calib, test, config, None),
    }
}

/// Literal per-anchor construction, kept as the correctness oracle for
/// the shared-sort fast path.
pub mod naive {
    use super::*;

    /// Builds every anchor's auxiliary vector explicitly (zero at the
    /// anchor), runs the generic step-up on each, and prunes by scanning
    /// the defining inequality.
    pub fn wcs_with_xi(
        calib: &WeightedCalibration,
        test: &WeightedTest,
        config: &SelectionConfig,
        xi_override: Option<&[f64]>,
    ) -> Result<SelectionResult> {
        config.validate()?;
        let pruning = config.method.pruning().ok_or_else(|| {
            Error::InvalidParameter(format!(
                "method {} is not a WCS-family method",
                config.method
            ))
        })?;
        let m = test.len();
        if m == 0 {
            let mut empty = SelectionResult::empty(config.method);
            empty.r_star = Some(0);
            return Ok(empty);
        }
        let tol = config.tie_tolerance;
        let p = pvalues::naive::wcp_nonrandomized(calib, test, tol);
        let p = p.values();

        let mut sizes = Vec::with_capacity(m);
        for j in 0..m {
            let mut vec_j = pvalues::naive::aux_pvalues(calib, test, j, tol)?;
            vec_j.insert(j, 0.0);
            let result = bh(&vec_j, config.q)?;
            sizes.push(result.selected.len());
        }
        let m_f = m as f64;
        let s: Vec<f64> = sizes.iter().map(|&k| config.q * k as f64 / m_f).collect();
        let first_step: Vec<usize> = (0..m).filter(|&j| p[j] <= s[j]).collect();

        let xi = match xi_override {
            Some(values) => values.to_vec(),
            None => super::xi_values(pruning, config.seed, m),
        };

        let mut r_star = 0usize;
        for r in (0..=m).rev() {
            let count = (0..m)
                .filter(|&j| p[j] <= s[j] && xi[j] * sizes[j] as f64 <= r as f64)
                .count();
            if count >= r {
                r_star = r;
                break;
            }
        }
        let selected: Vec<usize> = (0..m)
            .filter(|&j| p[j] <= s[j] && xi[j] * sizes[j] as f64 <= r_star as f64)
            .collect();

        Ok(SelectionResult {
            method: config.method,
            selected,
            first_step,
            s,
            rhat_sizes: sizes,
            r_star: Some(r_star),
            bh_kstar: None,
            seed: match pruning {
                Pruning::Dtm => None,
                _ => Some(config.seed),
            },
        })
    }

    pub fn wcs(
        calib: &WeightedCalibration,
        test: &WeightedTest,
        config: &SelectionConfig,
    ) -> Result<SelectionResult> {
        wcs_with_xi(calib, test, config, None)
    }
}
