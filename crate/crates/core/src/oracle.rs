//! Exact covariances, spectral constants and limit targets.
//!
//! Each chain has a spectral measure `ρ` on `[-1, 1]` with
//! `cov(ξ_0, ξ_k) = ∫ t^|k| ρ(dt)`:
//!
//! * MH: `ρ` is the image of `g² π` under `t = 1 − |x|`, which gives
//!   `cov(k) = a B(2q+a, k+1)`.
//! * Gaussian–Hermite: atoms `(r^j, c_j² j!)`.
//! * Cyclic walk: atoms `(ν̂(j), |f̂(j)|²)`.
//!
//! From `ρ` come `2πf(0) = ∫(1+t)/(1−t) dρ = Σ_k cov(k)`, the blocked constant
//! `2πh(0) = 4 ∫(1+t)/(1−t) dρ`, and the projection sums `Γ_j`. Every series
//! is truncated against an exact or integral-comparison tail bound.

use serde::Serialize;

use crate::coefficients::CoefficientFamily;
use crate::error::{invalid, Error, Result};
use crate::innovations::{
    spectral_atoms, Atom, ChainSpec, GaussianChainSpec, GroupWalkSpec, MhChainSpec, SpectralAtoms,
    ATOM_MERGE_TOL,
};
use crate::special::{beta, factorial, Neumaier};

/// Largest number of series terms any oracle will sum.
pub const MAX_SERIES_TERMS: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceModel {
    Mh { a: f64, q: f64 },
    /// Atoms `(r^j, c_j² j!)`, `j = 1..=J`.
    Hermite { r: f64, weights: Vec<f64> },
    GroupAtoms { atoms: Vec<Atom> },
}

impl CovarianceModel {
    pub fn mh(spec: &MhChainSpec) -> Self {
        Self::Mh { a: spec.a(), q: spec.q() }
    }

    pub fn hermite(spec: &GaussianChainSpec) -> Self {
        let weights = spec
            .hermite()
            .iter()
            .enumerate()
            .map(|(l, c)| c * c * factorial(l + 1))
            .collect();
        Self::Hermite { r: spec.r(), weights }
    }

    pub fn atoms(atoms: &SpectralAtoms) -> Self {
        Self::GroupAtoms { atoms: atoms.atoms.clone() }
    }

    pub fn from_chain(chain: &ChainSpec) -> Result<Self> {
        Ok(match chain {
            ChainSpec::Mh(s) => Self::mh(s),
            ChainSpec::Gaussian(s) => Self::hermite(s),
            ChainSpec::Group(s) => Self::atoms(&spectral_atoms(s)?),
        })
    }

    fn hermite_atoms(r: f64, weights: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
        weights
            .iter()
            .enumerate()
            .map(move |(l, &w)| (r.powi(l as i32 + 1), w))
    }

    /// `cov(ξ_0, ξ_k)`, symmetric in `k`.
    pub fn cov(&self, k: i64) -> f64 {
        let k = k.unsigned_abs();
        match self {
            Self::Mh { a, q } => a * beta(2.0 * q + a, k as f64 + 1.0),
            Self::Hermite { r, weights } => Self::hermite_atoms(*r, weights)
                .map(|(t, w)| w * pow_u(t, k))
                .sum(),
            Self::GroupAtoms { atoms } => atoms.iter().map(|at| at.w * pow_u(at.t, k)).sum(),
        }
    }

    /// `cov(0), …, cov(k_max)`; MH uses the exact ratio recurrence.
    pub fn cov_sequence(&self, k_max: usize) -> Vec<f64> {
        match self {
            Self::Mh { a, q } => {
                let s = 2.0 * q + a;
                let mut out = Vec::with_capacity(k_max + 1);
                let mut c = self.cov(0);
                for k in 0..=k_max {
                    if k % 4096 == 0 {
                        // refresh from the closed form to stop error drift
                        c = self.cov(k as i64);
                    }
                    out.push(c);
                    c *= (k as f64 + 1.0) / (k as f64 + 1.0 + s);
                }
                out
            }
            Self::Hermite { r, weights } => {
                let atoms: Vec<(f64, f64)> = Self::hermite_atoms(*r, weights).collect();
                geometric_sequence(&atoms, k_max)
            }
            Self::GroupAtoms { atoms } => {
                let atoms: Vec<(f64, f64)> = atoms.iter().map(|a| (a.t, a.w)).collect();
                geometric_sequence(&atoms, k_max)
            }
        }
    }

    /// Upper bound on `Σ_{k>K} |cov(k)|`; infinite when not summable.
    pub fn abs_tail(&self, k: usize) -> f64 {
        match self {
            // Σ_{k≥m} B(s, k+1) = B(s−1, m+1) by B(x, y) = B(x+1, y) + B(x, y+1)
            Self::Mh { a, q } => a * beta(2.0 * q + a - 1.0, k as f64 + 2.0),
            Self::Hermite { r, weights } => Self::hermite_atoms(*r, weights)
                .map(|(t, w)| w * pow_u(t, k as u64 + 1) / (1.0 - t))
                .sum(),
            Self::GroupAtoms { atoms } => atoms
                .iter()
                .map(|at| {
                    let t = at.t.abs();
                    if t >= 1.0 - ATOM_MERGE_TOL {
                        f64::INFINITY
                    } else {
                        at.w * pow_u(t, k as u64 + 1) / (1.0 - t)
                    }
                })
                .sum(),
        }
    }

    pub fn is_summable(&self) -> bool {
        self.abs_tail(0).is_finite()
    }

    /// `Σ_{k≥0} |cov(k)|`.
    pub fn abs_cov_sum(&self) -> f64 {
        self.cov(0).abs() + self.abs_tail(0)
    }

    /// `∫ 1/(1−t) ρ(dt)`.
    pub fn sr_integral(&self) -> f64 {
        match self {
            Self::Mh { a, q } => a / (2.0 * q + a - 1.0),
            Self::Hermite { r, weights } => {
                Self::hermite_atoms(*r, weights).map(|(t, w)| w / (1.0 - t)).sum()
            }
            Self::GroupAtoms { atoms } => atoms.iter().map(|at| at.w / (1.0 - at.t)).sum(),
        }
    }

    /// `∫ (1+t)/(1−t) ρ(dt)` in closed form.
    pub fn sigma2_closed_form(&self) -> f64 {
        match self {
            Self::Mh { a, q } => {
                let s = 2.0 * q + a;
                a * (2.0 / (s - 1.0) - 1.0 / s)
            }
            Self::Hermite { r, weights } => Self::hermite_atoms(*r, weights)
                .map(|(t, w)| w * (1.0 + t) / (1.0 - t))
                .sum(),
            Self::GroupAtoms { atoms } => spectral_ratio_sum(atoms),
        }
    }

    fn has_unit_atom(&self) -> bool {
        match self {
            Self::GroupAtoms { atoms } => atoms.iter().any(|a| a.t >= 1.0 - ATOM_MERGE_TOL),
            _ => false,
        }
    }
}

fn pow_u(t: f64, k: u64) -> f64 {
    if k <= i32::MAX as u64 {
        t.powi(k as i32)
    } else {
        t.powf(k as f64)
    }
}

fn geometric_sequence(atoms: &[(f64, f64)], k_max: usize) -> Vec<f64> {
    let mut powers: Vec<f64> = vec![1.0; atoms.len()];
    (0..=k_max)
        .map(|_| {
            let v = atoms.iter().zip(&powers).map(|((_, w), p)| w * p).sum();
            for (p, (t, _)) in powers.iter_mut().zip(atoms) {
                *p *= t;
            }
            v
        })
        .collect()
}

fn spectral_ratio_sum(atoms: &[Atom]) -> f64 {
    atoms.iter().map(|a| a.w * (1.0 + a.t) / (1.0 - a.t)).sum()
}

/// `cov(ξ_0, ξ_k) = a B(2q+a, k+1)`.
pub fn mh_cov(spec: &MhChainSpec, k: u64) -> f64 {
    CovarianceModel::mh(spec).cov(k as i64)
}

/// `σ² = a [2/(2q+a−1) − 1/(2q+a)]`, the sum of all covariances.
pub fn mh_sigma2(spec: &MhChainSpec) -> f64 {
    CovarianceModel::mh(spec).sigma2_closed_form()
}

/// `a [1/(2q+a) + 2/(2q+a−1)]`: the same two integrals combined with the
/// opposite sign. It does not equal the covariance sum and is reported only
/// for comparison.
pub fn mh_sigma2_alternative(spec: &MhChainSpec) -> f64 {
    let (a, s) = (spec.a(), spec.decay_exponent());
    a * (1.0 / s + 2.0 / (s - 1.0))
}

/// `Σ_j c_j² j! r^{kj}`.
pub fn hermite_cov(spec: &GaussianChainSpec, k: u64) -> f64 {
    CovarianceModel::hermite(spec).cov(k as i64)
}

/// Smallest `K` with `bound(K) ≤ target`, for a nonincreasing bound.
fn smallest_index(bound: impl Fn(usize) -> f64, target: f64, max: usize) -> Option<usize> {
    if bound(0) <= target {
        return Some(0);
    }
    let mut hi = 1usize;
    while bound(hi) > target {
        if hi >= max {
            return None;
        }
        hi = (hi * 2).min(max);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `2πf(0) = cov(0) + 2 Σ_{k≥1} cov(k)`, summed until twice the certified
/// tail is below `tol`. Atom models are evaluated exactly as
/// `Σ w (1+t)/(1−t)`.
pub fn cov_sum_f0(model: &CovarianceModel, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid("series tolerance must be positive"));
    }
    if let CovarianceModel::GroupAtoms { atoms } = model {
        if model.has_unit_atom() {
            return Err(Error::NonErgodic("spectral atom at t = 1".into()));
        }
        return Ok(spectral_ratio_sum(atoms));
    }
    if !model.is_summable() {
        return Err(Error::ConditionFailed {
            condition: "abscov".into(),
            detail: "covariance tail bound is infinite".into(),
        });
    }
    let k = smallest_index(|k| 2.0 * model.abs_tail(k), tol, MAX_SERIES_TERMS)
        .ok_or(Error::ToleranceUnreachable { tol, max_terms: MAX_SERIES_TERMS })?;
    let seq = model.cov_sequence(k);
    let mut acc = Neumaier::new();
    acc.add(seq[0]);
    for c in &seq[1..] {
        acc.add(2.0 * c);
    }
    Ok(acc.value())
}

/// `2πh(0)` for the blocked innovations `ξ_j + ξ_{j+1}` of a cyclic walk:
/// `Σ_{k∈Z} cov(ξ_0+ξ_1, ξ_k+ξ_{k+1}) = Σ_i 4 w_i (1+t_i)/(1−t_i)`.
/// Atoms at `t = −1` contribute nothing.
pub fn group_2pi_h0(atoms: &SpectralAtoms) -> Result<f64> {
    if atoms.has_unit_atom() {
        return Err(Error::NonErgodic("spectral atom at t = 1".into()));
    }
    Ok(4.0 * spectral_ratio_sum(&atoms.atoms))
}

/// Blocked constant `4 ∫(1+t)/(1−t) dρ` for any model.
pub fn blocked_2pi_h0(model: &CovarianceModel) -> Result<f64> {
    match model {
        CovarianceModel::GroupAtoms { atoms } => group_2pi_h0(&SpectralAtoms { atoms: atoms.clone() }),
        _ => Ok(4.0 * model.sigma2_closed_form()),
    }
}

/// `Γ_j = Σ_{k≥2j} |cov(k)|` in closed form.
pub fn gamma_j(model: &CovarianceModel, j: usize) -> Result<f64> {
    let m = 2 * j;
    let v = match model {
        CovarianceModel::Mh { a, q } => a * beta(2.0 * q + a - 1.0, m as f64 + 1.0),
        _ => {
            if m == 0 {
                model.abs_cov_sum()
            } else {
                model.abs_tail(m - 1)
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonSummable(format!("Γ_{j} diverges")))
    }
}

/// `Γ_j` by direct summation with certified truncation below `tol`.
pub fn gamma_j_series(model: &CovarianceModel, j: usize, tol: f64) -> Result<f64> {
    if !model.is_summable() {
        return Err(Error::NonSummable("covariances are not absolutely summable".into()));
    }
    let m = 2 * j;
    let k = smallest_index(|k| model.abs_tail(m + k), tol, MAX_SERIES_TERMS)
        .ok_or(Error::ToleranceUnreachable { tol, max_terms: MAX_SERIES_TERMS })?;
    let seq = model.cov_sequence(m + k);
    let mut acc = Neumaier::new();
    for c in &seq[m..] {
        acc.add(c.abs());
    }
    Ok(acc.value())
}

/// Cesàro mean `(1/p) Σ_{j=1}^p Γ_j`.
pub fn cesaro_gamma(model: &CovarianceModel, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(invalid("Cesàro index must be positive"));
    }
    let mut acc = Neumaier::new();
    for j in 1..=p {
        acc.add(gamma_j(model, j)?);
    }
    Ok(acc.value() / p as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub holds: bool,
    /// The quantity whose finiteness (or decay) the condition asserts.
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CesaroPoint {
    pub p: usize,
    pub mean_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `Σ_{k≥0} |cov(k)| < ∞`.
    pub abscov: ConditionResult,
    /// `∫ 1/(1−t) ρ(dt) < ∞`.
    pub sr: ConditionResult,
    /// `Σ_j |f̂(j)|² / |1 − ν̂(j)| < ∞`; cyclic walks only.
    pub g1: Option<ConditionResult>,
    /// `(1/p) Σ_{j≤p} Γ_j → 0`, judged on a dyadic grid of `p`.
    pub mgen: ConditionResult,
    pub cesaro: Vec<CesaroPoint>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.abscov.holds && self.sr.holds && self.mgen.holds && self.g1.as_ref().is_none_or(|g| g.holds)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.abscov.holds {
            out.push("abscov");
        }
        if !self.sr.holds {
            out.push("SR");
        }
        if self.g1.as_ref().is_some_and(|g| !g.holds) {
            out.push("G1");
        }
        if !self.mgen.holds {
            out.push("Mgen");
        }
        out
    }
}

fn finite_condition(v: f64, what: &str) -> ConditionResult {
    if v.is_finite() {
        ConditionResult { holds: true, value: Some(v), detail: format!("{what} = {v:.6e}") }
    } else {
        ConditionResult { holds: false, value: None, detail: format!("{what} diverges") }
    }
}

/// Dyadic Cesàro grid `p = 1, 2, 4, …, 2^14`.
pub const CESARO_GRID_LOG2: u32 = 14;

/// Evaluate every applicable condition. Failures are reported, not raised.
pub fn check_conditions(model: &CovarianceModel, group: Option<&GroupWalkSpec>) -> ConditionReport {
    let abscov = finite_condition(model.abs_cov_sum(), "Σ_k |cov(k)|");
    let sr = finite_condition(model.sr_integral(), "∫ 1/(1−t) ρ(dt)");
    let g1 = group.map(|g| {
        let v: f64 = (1..g.m())
            .map(|j| {
                let w = g.fourier()[j].norm_sqr();
                if w == 0.0 {
                    0.0
                } else {
                    w / (1.0 - g.nu_hat(j)).abs()
                }
            })
            .sum();
        finite_condition(v, "Σ_j |f̂(j)|²/|1 − ν̂(j)|")
    });
    let mut cesaro = Vec::new();
    let mut running = Neumaier::new();
    let mut j_done = 0usize;
    let mut ok = true;
    for e in 0..=CESARO_GRID_LOG2 {
        let p = 1usize << e;
        if ok {
            while j_done < p {
                j_done += 1;
                match gamma_j(model, j_done) {
                    Ok(g) => running.add(g),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        cesaro.push(CesaroPoint { p, mean_gamma: ok.then(|| running.value() / p as f64) });
    }
    let mgen = if !ok {
        ConditionResult { holds: false, value: None, detail: "Γ_j diverges".into() }
    } else {
        let vals: Vec<f64> = cesaro.iter().filter_map(|c| c.mean_gamma).collect();
        let decreasing = vals.windows(2).all(|w| w[1] <= w[0]);
        let last = *vals.last().unwrap();
        let first = vals[0];
        let holds = decreasing && (first == 0.0 || last < 0.5 * first);
        ConditionResult {
            holds,
            value: Some(last),
            detail: format!(
                "(1/p)ΣΓ_j falls from {first:.6e} at p = 1 to {last:.6e} at p = {}",
                1usize << CESARO_GRID_LOG2
            ),
        }
    };
    ConditionReport { abscov, sr, g1, mgen, cesaro }
}

/// `Var(Σ_j d_j ξ_j) = Σ_lag cov(lag) Σ_j d_j d_{j+lag}`, with lags beyond
/// `K` dropped once `2 abs_tail(K) Σ d_j² ≤ tol` (absolute error).
pub fn quadratic_form_variance(d: &[f64], model: &CovarianceModel, tol: f64) -> Result<f64> {
    if !model.is_summable() {
        return Err(Error::NonSummable("covariances are not absolutely summable".into()));
    }
    if d.is_empty() {
        return Ok(0.0);
    }
    let sumsq: f64 = d.iter().map(|x| x * x).sum();
    let max_lag = d.len() - 1;
    let k = if sumsq == 0.0 {
        0
    } else {
        smallest_index(|k| 2.0 * model.abs_tail(k) * sumsq, tol, max_lag.max(1)).unwrap_or(max_lag)
    }
    .min(max_lag);
    let covs = model.cov_sequence(k);
    let mut acc = Neumaier::new();
    acc.add(covs[0] * sumsq);
    for lag in 1..=k {
        let r: f64 = d.iter().zip(&d[lag..]).map(|(a, b)| a * b).sum();
        acc.add(2.0 * covs[lag] * r);
    }
    Ok(acc.value())
}

/// Fractional Brownian covariance `(σ²/2)(s^β + t^β − |t−s|^β)` with
/// `σ² = 2πf(0)`.
pub fn fbm_cov(s: f64, t: f64, beta: f64, sigma2: f64) -> Result<f64> {
    if !((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)) {
        return Err(Error::Domain(format!("times must lie in [0, 1], got ({s}, {t})")));
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::Domain(format!("β must lie in (0, 2], got {beta}")));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("σ² must be finite and nonnegative, got {sigma2}")));
    }
    Ok(0.5 * sigma2 * (s.powf(beta) + t.powf(beta) - (t - s).abs().powf(beta)))
}

pub fn fbm_cov_matrix(grid: &[f64], beta: f64, sigma2: f64) -> Result<Vec<Vec<f64>>> {
    grid.iter()
        .map(|&s| grid.iter().map(|&t| fbm_cov(s, t, beta, sigma2)).collect())
        .collect()
}

/// `Var(S_n(ξ))/n = Σ_{|k|<n} (1 − |k|/n) cov(k)`, exactly.
pub fn variance_probe(model: &CovarianceModel, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let covs = model.cov_sequence(n - 1);
    let mut acc = Neumaier::new();
    acc.add(covs[0]);
    for (k, c) in covs.iter().enumerate().skip(1) {
        acc.add(2.0 * (1.0 - k as f64 / n as f64) * c);
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitTargets {
    /// `σ² = 2πf(0)`, the limit of `Var(S_n)/b_n²`.
    pub sigma2: f64,
    /// For MH chains, the closed form with the opposite sign combination.
    pub sigma2_alternative: Option<f64>,
    /// Blocked constant `2πh(0)`.
    pub two_pi_h0: Option<f64>,
    pub beta: f64,
    /// `H = β/2`.
    pub hurst: f64,
    /// `A = Σ a_i` for summable families.
    #[serde(rename = "A")]
    pub a_sum: Option<f64>,
    pub notes: Vec<String>,
}

pub const DEFAULT_SERIES_TOL: f64 = 1e-12;

pub fn limit_targets(chain: &ChainSpec, family: Option<&CoefficientFamily>) -> Result<LimitTargets> {
    let model = CovarianceModel::from_chain(chain)?;
    let sigma2 = model.sigma2_closed_form();
    let mut notes = Vec::new();
    let sigma2_alternative = match chain {
        ChainSpec::Mh(spec) => {
            let alt = mh_sigma2_alternative(spec);
            notes.push(format!(
                "sigma2 = a[2/(2q+a-1) - 1/(2q+a)] is the covariance sum; the closed form \
                 a[1/(2q+a) + 2/(2q+a-1)] = {alt:.15} disagrees with it and is reported for comparison only"
            ));
            Some(alt)
        }
        _ => None,
    };
    if let CovarianceModel::GroupAtoms { atoms } = &model {
        if atoms.iter().any(|a| a.t <= -1.0 + ATOM_MERGE_TOL) {
            notes.push(
                "spectral mass at t = -1 (periodic component): covariances are not absolutely \
                 summable, and the blocked process removes this component"
                    .into(),
            );
        }
    }
    let beta = family.map_or(1.0, CoefficientFamily::beta);
    Ok(LimitTargets {
        sigma2,
        sigma2_alternative,
        two_pi_h0: blocked_2pi_h0(&model).ok(),
        beta,
        hurst: beta / 2.0,
        a_sum: family.and_then(|f| f.abs_sum().ok()),
        notes,
    })
}

/// Round to 15 significant digits for printing.
pub fn round_sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Round every number in a JSON tree to 15 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig15(x)) {
                        *n = r;
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}
