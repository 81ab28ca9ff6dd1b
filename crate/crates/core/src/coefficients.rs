//! Coefficient families `(a_i)` and the window sums
//! `b_{n,j} = a_{j+1} + … + a_{j+n} = A_{j+n} − A_j`.
//!
//! A [`WeightProfile`] holds `b_{n,j}` on a finite window `[j_min, j_max]`.
//! Weights left of `j_min` vanish because every family is causal; the right
//! edge is chosen so that a closed-form comparison bound on the discarded
//! mass `Σ_{j>j_max} b_{n,j}²` stays below `eps` times the retained mass.
//!
//! For the decreasing families (`a_i ≥ 0` decreasing, or `|a_i|` decreasing
//! with constant sign beyond the first index) the bound rests on
//! `n|a_{j+n}| ≤ |b_{n,j}| ≤ n|a_{j+1}|` together with an integral
//! comparison for `Σ a_i²`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::Neumaier;

/// Default cap on the number of retained weights (1 GiB of `f64`).
pub const DEFAULT_WINDOW_CAP: usize = 1 << 27;

/// Windows longer than this are accumulated with compensated summation.
pub const COMPENSATION_THRESHOLD: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", try_from = "FamilyRaw")]
pub enum CoefficientFamily {
    /// `a_i = i^(-α)` for `i ≥ 1`, `1/2 < α < 1`.
    PowerLaw { alpha: f64 },
    /// `a_i = Γ(i+d) / (Γ(d) Γ(i+1))` for `i ≥ 0`, `0 < d < 1/2`.
    FracInt { d: f64 },
    /// `a_0 = 1`, `a_i = (i+1)^(-α) − i^(-α)` for `i ≥ 1`, `0 < α < 1/2`.
    PowerDiff { alpha: f64 },
    /// `a_i = i^(-1/2) (1 + ln i)^(-α)` for `i ≥ 1`, `α > 1/2`.
    LogPower { alpha: f64 },
    /// `a_i = scale · ratio^i` for `i ≥ 0`, `0 < ratio < 1`.
    Geometric { ratio: f64, scale: f64 },
    /// `a_1 = 1`, all other coefficients zero.
    Delta,
}

#[derive(Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
enum FamilyRaw {
    PowerLaw { alpha: f64 },
    FracInt { d: f64 },
    PowerDiff { alpha: f64 },
    LogPower { alpha: f64 },
    Geometric {
        ratio: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Delta,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<FamilyRaw> for CoefficientFamily {
    type Error = Error;
    fn try_from(raw: FamilyRaw) -> Result<Self> {
        let family = match raw {
            FamilyRaw::PowerLaw { alpha } => Self::PowerLaw { alpha },
            FamilyRaw::FracInt { d } => Self::FracInt { d },
            FamilyRaw::PowerDiff { alpha } => Self::PowerDiff { alpha },
            FamilyRaw::LogPower { alpha } => Self::LogPower { alpha },
            FamilyRaw::Geometric { ratio, scale } => Self::Geometric { ratio, scale },
            FamilyRaw::Delta => Self::Delta,
        };
        family.validate()?;
        Ok(family)
    }
}

fn in_open(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x < hi
}

impl CoefficientFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::PowerLaw { alpha } => in_open(alpha, 0.5, 1.0),
            Self::FracInt { d } => in_open(d, 0.0, 0.5),
            Self::PowerDiff { alpha } => in_open(alpha, 0.0, 0.5),
            Self::LogPower { alpha } => alpha > 0.5 && alpha.is_finite(),
            Self::Geometric { ratio, scale } => {
                in_open(ratio, 0.0, 1.0) && scale.is_finite() && scale != 0.0
            }
            Self::Delta => true,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("parameters out of range for {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PowerLaw { .. } => "power_law",
            Self::FracInt { .. } => "frac_int",
            Self::PowerDiff { .. } => "power_diff",
            Self::LogPower { .. } => "log_power",
            Self::Geometric { .. } => "geometric",
            Self::Delta => "delta",
        }
    }

    /// First index with a nonzero coefficient.
    pub fn support_start(&self) -> i64 {
        match self {
            Self::PowerLaw { .. } | Self::LogPower { .. } | Self::Delta => 1,
            Self::FracInt { .. } | Self::PowerDiff { .. } | Self::Geometric { .. } => 0,
        }
    }

    /// Regular-variation exponent of `n ↦ b_n²`.
    pub fn beta(&self) -> f64 {
        match *self {
            Self::PowerLaw { alpha } => 3.0 - 2.0 * alpha,
            Self::FracInt { d } => 2.0 * d + 1.0,
            Self::PowerDiff { alpha } => 1.0 - 2.0 * alpha,
            Self::LogPower { .. } => 2.0,
            Self::Geometric { .. } | Self::Delta => 1.0,
        }
    }

    /// True if every coefficient is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        match *self {
            Self::PowerDiff { .. } => false,
            Self::Geometric { scale, .. } => scale > 0.0,
            _ => true,
        }
    }

    /// `A = Σ_i a_i` for the absolutely summable families.
    ///
    /// `PowerDiff` is absolutely summable (`Σ|a_i| = 2`) and telescopes to
    /// `A = 0`.
    pub fn abs_sum(&self) -> Result<f64> {
        match *self {
            Self::Delta => Ok(1.0),
            Self::Geometric { ratio, scale } => Ok(scale / (1.0 - ratio)),
            Self::PowerDiff { .. } => Ok(0.0),
            Self::PowerLaw { .. } | Self::FracInt { .. } | Self::LogPower { .. } => Err(
                Error::Domain(format!("coefficients of {} are not summable", self.name())),
            ),
        }
    }

    /// The coefficient `a_i` (zero outside the support).
    pub fn coeff(&self, i: i64) -> f64 {
        if i < self.support_start() {
            return 0.0;
        }
        let x = i as f64;
        match *self {
            Self::PowerLaw { alpha } => x.powf(-alpha),
            Self::FracInt { d } => {
                let mut a = 1.0;
                for k in 0..i {
                    a *= (k as f64 + d) / (k as f64 + 1.0);
                }
                a
            }
            Self::PowerDiff { alpha } => {
                if i == 0 {
                    1.0
                } else {
                    power_difference(x, 1.0, alpha)
                }
            }
            Self::LogPower { alpha } => x.powf(-0.5) * (1.0 + x.ln()).powf(-alpha),
            Self::Geometric { ratio, scale } => scale * geometric_power(ratio, i),
            Self::Delta => {
                if i == 1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `b_{n,j}` by direct summation of `n` coefficients. Reference only.
    pub fn window_sum_direct(&self, n: usize, j: i64) -> f64 {
        let mut s = Neumaier::new();
        for i in j + 1..=j + n as i64 {
            s.add(self.coeff(i));
        }
        s.value()
    }

    /// Closed-form prefix sum `A_m = Σ_{i≤m} a_i` where one exists.
    pub fn prefix_closed_form(&self, m: i64) -> Option<f64> {
        if m < self.support_start() {
            return Some(0.0);
        }
        match *self {
            Self::PowerDiff { alpha } => Some((m as f64 + 1.0).powf(-alpha)),
            Self::Geometric { ratio, scale } => {
                Some(scale * (1.0 - geometric_power(ratio, m + 1)) / (1.0 - ratio))
            }
            Self::Delta => Some(1.0),
            _ => None,
        }
    }

    /// Closed-form bounds `(lower, upper)` on `Σ_{j>j_max} b_{n,j}²`.
    /// Needs `j_max ≥ 0`.
    pub fn tail_bounds(&self, n: usize, j_max: i64) -> (f64, f64) {
        debug_assert!(j_max >= 0);
        let nf = n as f64;
        let n2 = nf * nf;
        let l_up = j_max as f64 + 1.0;
        let l_lo = j_max as f64 + nf + 1.0;
        match *self {
            Self::PowerLaw { alpha } => {
                let p = 2.0 * alpha - 1.0;
                (n2 * l_lo.powf(-p) / p, n2 * l_up.powf(-p) / p)
            }
            Self::FracInt { d } => {
                let p = 1.0 - 2.0 * d;
                let c = n2 / (libm::tgamma(d).powi(2) * p);
                (c * (l_lo + 1.0).powf(-p), c * l_up.powf(-p))
            }
            Self::PowerDiff { alpha } => {
                let p = 2.0 * alpha + 1.0;
                let c = n2 * alpha * alpha / p;
                (c * (l_lo + 1.0).powf(-p), c * l_up.powf(-p))
            }
            Self::LogPower { alpha } => {
                let p = 2.0 * alpha - 1.0;
                let f = |l: f64| n2 * (1.0 + l.ln()).powf(-p) / p;
                (f(l_lo), f(l_up))
            }
            Self::Geometric { ratio, scale } => {
                let head = scale * (1.0 - geometric_power(ratio, n as i64)) / (1.0 - ratio);
                let t = head * head * geometric_power(ratio, 2 * j_max + 4) / (1.0 - ratio * ratio);
                (t, t)
            }
            Self::Delta => (0.0, 0.0),
        }
    }

    /// `b_{m,j}` for `j` in `[j_min, j_max]` from shared prefix sums.
    pub fn weights_on_window(&self, m: usize, j_min: i64, j_max: i64) -> Result<Vec<f64>> {
        if j_min > j_max {
            return Err(Error::InvalidRange { j_min, j_max });
        }
        let len = (j_max - j_min + 1) as usize;
        let mi = m as i64;
        match *self {
            Self::PowerDiff { alpha } => Ok((j_min..=j_max)
                .map(|j| {
                    if j + mi < 0 {
                        0.0
                    } else if j < 0 {
                        (j as f64 + m as f64 + 1.0).powf(-alpha)
                    } else {
                        power_difference(j as f64 + 1.0, m as f64, alpha)
                    }
                })
                .collect()),
            Self::Geometric { ratio, scale } => {
                let tail = (1.0 - geometric_power(ratio, mi)) / (1.0 - ratio);
                Ok((j_min..=j_max)
                    .map(|j| {
                        if j + mi < 0 {
                            0.0
                        } else if j < 0 {
                            scale * (1.0 - geometric_power(ratio, j + mi + 1)) / (1.0 - ratio)
                        } else {
                            scale * geometric_power(ratio, j + 1) * tail
                        }
                    })
                    .collect())
            }
            Self::Delta => Ok((j_min..=j_max)
                .map(|j| if (1 - mi..=0).contains(&j) { 1.0 } else { 0.0 })
                .collect()),
            _ => {
                let prefix = self.prefix_sums(j_min, j_max + mi);
                Ok((0..len).map(|k| prefix[k + m] - prefix[k]).collect())
            }
        }
    }

    /// `A_k` for `k` in `[lo, hi]`, by compensated accumulation from the
    /// start of the support.
    pub fn prefix_sums(&self, lo: i64, hi: i64) -> Vec<f64> {
        let start = self.support_start();
        let mut out = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        for _ in lo..start.min(hi + 1) {
            out.push(0.0);
        }
        let mut acc = Neumaier::new();
        let mut frac = 1.0;
        for i in start..=hi {
            let a = match *self {
                Self::FracInt { d } => {
                    if i > 0 {
                        frac *= (i as f64 - 1.0 + d) / i as f64;
                    }
                    frac
                }
                _ => self.coeff(i),
            };
            acc.add(a);
            if i >= lo {
                out.push(acc.value());
            }
        }
        out
    }
}

/// `(x+h)^(-α) − x^(-α)` without cancellation.
fn power_difference(x: f64, h: f64, alpha: f64) -> f64 {
    x.powf(-alpha) * (-alpha * (h / x).ln_1p()).exp_m1()
}

fn geometric_power(r: f64, k: i64) -> f64 {
    if k <= i32::MAX as i64 {
        r.powi(k as i32)
    } else {
        r.powf(k as f64)
    }
}

/// Materialized `b_{n,j}` on `[j_min, j_max]` with a truncation certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightProfile {
    pub family: CoefficientFamily,
    pub n: usize,
    pub j_min: i64,
    pub j_max: i64,
    #[serde(skip)]
    pub weights: Vec<f64>,
    /// `Σ` of the retained squared weights, ascending in `j`.
    pub bn2: f64,
    /// Certified bounds on the discarded squared mass.
    pub tail_lower: f64,
    pub tail_upper: f64,
    /// `tail_upper / bn2`.
    pub tail_fraction: f64,
    /// Tolerance requested at construction.
    pub eps: f64,
}

impl WeightProfile {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `b_n` from the retained mass.
    pub fn bn(&self) -> f64 {
        self.bn2.sqrt()
    }

    /// Best estimate of the untruncated `b_n²`: retained mass plus the
    /// midpoint of the tail bracket. Off by at most half the bracket width.
    pub fn bn2_estimate(&self) -> f64 {
        self.bn2 + 0.5 * (self.tail_lower + self.tail_upper)
    }

    pub fn weight(&self, j: i64) -> f64 {
        if j < self.j_min || j > self.j_max {
            0.0
        } else {
            self.weights[(j - self.j_min) as usize]
        }
    }

    /// `b_{m,j}` for a shorter horizon `m ≤ n` on this profile's window.
    pub fn subhorizon_weights(&self, m: usize) -> Result<Vec<f64>> {
        if m == 0 || m > self.n {
            return Err(invalid(format!("sub-horizon {m} must lie in 1..={}", self.n)));
        }
        if m == self.n {
            return Ok(self.weights.clone());
        }
        self.family.weights_on_window(m, self.j_min, self.j_max)
    }

    /// CSV with columns `j,b_nj`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "b_nj"])?;
        for (k, b) in self.weights.iter().enumerate() {
            w.write_record([(self.j_min + k as i64).to_string(), format!("{b:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sum of squares in ascending order, compensated for long inputs.
pub fn sum_squares(values: &[f64]) -> f64 {
    if values.len() > COMPENSATION_THRESHOLD {
        let mut s = Neumaier::new();
        for v in values {
            s.add(v * v);
        }
        s.value()
    } else {
        values.iter().map(|v| v * v).sum()
    }
}

pub fn weight_profile(family: &CoefficientFamily, n: usize, eps: f64) -> Result<WeightProfile> {
    weight_profile_with_cap(family, n, eps, DEFAULT_WINDOW_CAP)
}

/// Choose the smallest right edge `J ≥ 0` whose tail bound is at most
/// `eps` times the mass retained on `[j_min, J]`, and materialize it.
pub fn weight_profile_with_cap(
    family: &CoefficientFamily,
    n: usize,
    eps: f64,
    cap: usize,
) -> Result<WeightProfile> {
    family.validate()?;
    if n == 0 {
        return Err(invalid("horizon n must be at least 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("truncation tolerance must lie in (0, 1), got {eps}")));
    }
    let j_min = family.support_start() - n as i64;
    let max_j = j_min + cap as i64 - 1;
    if max_j < 0 {
        return Err(Error::TruncationFailure { eps, cap, achieved: 1.0 });
    }
    if let CoefficientFamily::Delta = family {
        return finish(*family, n, eps, j_min, 0, family.weights_on_window(n, j_min, 0)?);
    }

    let mut j_hi = (2 * n as i64).max(16).min(max_j);
    loop {
        let weights = family.weights_on_window(n, j_min, j_hi)?;
        // first J in [0, j_hi] meeting the certificate
        let mut acc = Neumaier::new();
        let mut found = None;
        for (k, b) in weights.iter().enumerate() {
            acc.add(b * b);
            let j = j_min + k as i64;
            if j >= 0 && family.tail_bounds(n, j).1 <= eps * acc.value() {
                found = Some(j);
                break;
            }
        }
        if let Some(j_max) = found {
            let mut weights = weights;
            weights.truncate((j_max - j_min + 1) as usize);
            return finish(*family, n, eps, j_min, j_max, weights);
        }
        let retained = acc.value();
        // the mass retained at the cap is at most retained + tail_upper(j_hi)
        let best = family.tail_bounds(n, max_j).1 / (retained + family.tail_bounds(n, j_hi).1);
        if j_hi >= max_j || best > eps {
            let achieved = if j_hi >= max_j { family.tail_bounds(n, j_hi).1 / retained } else { best };
            return Err(Error::TruncationFailure { eps, cap, achieved });
        }
        // retained mass only grows, so this edge is certainly far enough
        let target = eps * retained;
        let mut next = j_hi.saturating_mul(2);
        while next < max_j && family.tail_bounds(n, next).1 > target {
            next = next.saturating_mul(2);
        }
        j_hi = next.min(max_j);
    }
}

fn finish(
    family: CoefficientFamily,
    n: usize,
    eps: f64,
    j_min: i64,
    j_max: i64,
    weights: Vec<f64>,
) -> Result<WeightProfile> {
    let bn2 = sum_squares(&weights);
    if !(bn2 > 0.0) {
        return Err(invalid("weight profile has zero mass"));
    }
    let (tail_lower, tail_upper) = family.tail_bounds(n, j_max);
    Ok(WeightProfile {
        family,
        n,
        j_min,
        j_max,
        weights,
        bn2,
        tail_lower,
        tail_upper,
        tail_fraction: tail_upper / bn2,
        eps,
    })
}

/// One grid point of the regular-variation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegVarPoint {
    pub t: f64,
    pub m: usize,
    /// `b_m² / b_n²` with `m = [nt]`.
    pub ratio: f64,
    /// `t^β`.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegVarDiagnostic {
    pub family: CoefficientFamily,
    pub n: usize,
    pub beta: f64,
    pub points: Vec<RegVarPoint>,
    /// `b_{2n}² / b_n²`, to be compared with `2^β`.
    pub doubling_ratio: f64,
    pub doubling_reference: f64,
    /// Least-squares slope of `ln b_m²` against `ln m` over `m = n/16, …, n`.
    pub fitted_slope: f64,
    pub dyadic_grid: Vec<usize>,
    pub dyadic_bn2: Vec<f64>,
}

/// Truncation tolerance used by [`regvar_diagnostic`].
pub const REGVAR_EPS: f64 = 0.02;

/// `b_n²` estimate (retained mass plus tail midpoint).
pub fn bn2_estimate(family: &CoefficientFamily, n: usize, eps: f64) -> Result<f64> {
    Ok(weight_profile(family, n, eps)?.bn2_estimate())
}

pub fn regvar_diagnostic(family: &CoefficientFamily, n: usize, t_grid: &[f64]) -> Result<RegVarDiagnostic> {
    regvar_diagnostic_with_eps(family, n, t_grid, REGVAR_EPS)
}

pub fn regvar_diagnostic_with_eps(
    family: &CoefficientFamily,
    n: usize,
    t_grid: &[f64],
    eps: f64,
) -> Result<RegVarDiagnostic> {
    if n < 16 {
        return Err(invalid("regular-variation diagnostic needs n ≥ 16"));
    }
    let beta = family.beta();
    let bn2 = bn2_estimate(family, n, eps)?;
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > 0.0 && t <= 1.0) {
            return Err(invalid(format!("grid point {t} outside (0, 1]")));
        }
        let m = (n as f64 * t).floor() as usize;
        if m == 0 {
            return Err(invalid(format!("[n t] = 0 at t = {t}")));
        }
        let bm2 = if m == n { bn2 } else { bn2_estimate(family, m, eps)? };
        points.push(RegVarPoint { t, m, ratio: bm2 / bn2, reference: t.powf(beta) });
    }
    let doubling_ratio = bn2_estimate(family, 2 * n, eps)? / bn2;
    let dyadic_grid: Vec<usize> = (0..5).rev().map(|k| n >> k).collect();
    let dyadic_bn2 = dyadic_grid
        .iter()
        .map(|&m| if m == n { Ok(bn2) } else { bn2_estimate(family, m, eps) })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = dyadic_grid.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = dyadic_bn2.iter().map(|b| b.ln()).collect();
    Ok(RegVarDiagnostic {
        family: *family,
        n,
        beta,
        points,
        doubling_ratio,
        doubling_reference: 2f64.powf(beta),
        fitted_slope: ls_slope(&xs, &ys),
        dyadic_grid,
        dyadic_bn2,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// CSV with columns `i,a_i` for `i` from the support start to `i_max`.
pub fn write_coefficients_csv<W: Write>(family: &CoefficientFamily, i_max: i64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "a_i"])?;
    let start = family.support_start();
    let mut frac = 1.0;
    for i in start..=i_max {
        let a = match *family {
            CoefficientFamily::FracInt { d } => {
                if i > 0 {
                    frac *= (i as f64 - 1.0 + d) / i as f64;
                }
                frac
            }
            _ => family.coeff(i),
        };
        w.write_record([i.to_string(), format!("{a:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FRAC: CoefficientFamily = CoefficientFamily::FracInt { d: 0.25 };
    const PDIFF: CoefficientFamily = CoefficientFamily::PowerDiff { alpha: 0.25 };

    fn all_families() -> Vec<CoefficientFamily> {
        vec![
            CoefficientFamily::PowerLaw { alpha: 0.75 },
            FRAC,
            PDIFF,
            CoefficientFamily::LogPower { alpha: 3.0 },
            CoefficientFamily::Geometric { ratio: 0.5, scale: 1.0 },
            CoefficientFamily::Delta,
        ]
    }

    #[test]
    fn frac_int_first_terms() {
        assert_eq!(FRAC.coeff(0), 1.0);
        assert_eq!(FRAC.coeff(1), 0.25);
        assert!((FRAC.coeff(2) - 0.15625).abs() < 1e-16);
        assert_eq!(FRAC.coeff(-1), 0.0);
    }

    #[test]
    fn frac_int_against_log_gamma() {
        let d: f64 = 0.25;
        let i = 10.0;
        let direct = (libm::lgamma(i + d) - libm::lgamma(d) - libm::lgamma(i + 1.0)).exp();
        assert!(((FRAC.coeff(10) - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(CoefficientFamily::PowerLaw { alpha: 0.4 }.validate().is_err());
        assert!(CoefficientFamily::FracInt { d: 0.5 }.validate().is_err());
        assert!(CoefficientFamily::PowerDiff { alpha: 0.6 }.validate().is_err());
        assert!(CoefficientFamily::LogPower { alpha: 0.5 }.validate().is_err());
        assert!(CoefficientFamily::Geometric { ratio: 1.0, scale: 1.0 }.validate().is_err());
        for f in all_families() {
            f.validate().unwrap();
        }
    }

    #[test]
    fn abs_sums() {
        assert_eq!(CoefficientFamily::Delta.abs_sum().unwrap(), 1.0);
        let g = CoefficientFamily::Geometric { ratio: 0.5, scale: 1.0 };
        assert_eq!(g.abs_sum().unwrap(), 2.0);
        assert!(matches!(
            CoefficientFamily::PowerLaw { alpha: 0.75 }.abs_sum(),
            Err(Error::Domain(_))
        ));
        assert_eq!(PDIFF.abs_sum().unwrap(), 0.0);
    }

    #[test]
    fn delta_profile() {
        for n in [1usize, 2, 7, 100] {
            let p = weight_profile(&CoefficientFamily::Delta, n, 1e-6).unwrap();
            assert_eq!(p.j_min, 1 - n as i64);
            assert_eq!(p.j_max, 0);
            assert!(p.weights.iter().all(|&w| w == 1.0));
            assert_eq!(p.bn2, n as f64);
            assert_eq!(p.tail_fraction, 0.0);
        }
    }

    #[test]
    fn power_diff_closed_form_weights() {
        let alpha: f64 = 0.25;
        let n = 9usize;
        let w = PDIFF.weights_on_window(n, -(n as i64), 50).unwrap();
        for (k, &b) in w.iter().enumerate() {
            let j = k as i64 - n as i64;
            let jf = j as f64;
            let nf = n as f64;
            let want = if j >= 0 {
                (jf + nf + 1.0).powf(-alpha) - (jf + 1.0).powf(-alpha)
            } else {
                (jf + nf + 1.0).powf(-alpha)
            };
            assert!((b - want).abs() < 1e-14, "j={j}");
            assert!((b - PDIFF.window_sum_direct(n, j)).abs() < 1e-13, "j={j}");
        }
    }

    #[test]
    fn frac_int_bn2_against_brute_force() {
        // Brute force: b_{n,j} from direct sums over a 10× wider window, plus
        // the tail midpoint beyond it, against the profile's estimate.
        let n = 1024usize;
        let eps = 1e-2;
        let p = weight_profile(&FRAC, n, eps).unwrap();
        let wide_max = 10 * (p.j_max + n as i64);
        let coeffs: Vec<f64> = (0..=wide_max + n as i64).map(|i| FRAC.coeff_cached(i)).collect();
        let mut bsum: f64 = coeffs[..n].iter().sum::<f64>() - coeffs[0]; // a_1..a_{n-1}
        let mut total = Neumaier::new();
        // j = -n .. : b_{n,j} = Σ_{i=j+1}^{j+n} a_i, slid incrementally with periodic refresh
        for j in -(n as i64)..=wide_max {
            if (j + n as i64) % 4096 == 0 {
                bsum = ((j + 1).max(0)..=j + n as i64).map(|i| coeffs[i as usize]).sum();
            } else {
                let add = j + n as i64;
                let drop = j;
                bsum += coeffs[add as usize];
                if drop >= 0 {
                    bsum -= coeffs[drop as usize];
                }
            }
            total.add(bsum * bsum);
        }
        let (lo, hi) = FRAC.tail_bounds(n, wide_max);
        let brute = total.value() + 0.5 * (lo + hi);
        let est = p.bn2_estimate();
        assert!(((est - brute) / brute).abs() < 1e-6, "profile {est} brute {brute}");
        assert!(p.tail_fraction <= eps);
    }

    impl CoefficientFamily {
        fn coeff_cached(&self, i: i64) -> f64 {
            thread_local! {
                static CACHE: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
            }
            let CoefficientFamily::FracInt { d } = *self else { return self.coeff(i) };
            CACHE.with(|c| {
                let mut c = c.borrow_mut();
                if c.is_empty() {
                    c.push(1.0);
                }
                while c.len() as i64 <= i {
                    let k = c.len() as f64;
                    let last = *c.last().unwrap();
                    c.push(last * (k - 1.0 + d) / k);
                }
                c[i as usize]
            })
        }
    }

    #[test]
    fn certificates_hold_for_all_families() {
        for f in all_families() {
            for &eps in &[0.1, 1e-2] {
                let p = weight_profile(&f, 64, eps).unwrap();
                assert!(p.tail_fraction <= eps, "{f:?}");
                assert!(p.tail_lower <= p.tail_upper);
                assert!(p.bn2 > 0.0);
            }
        }
    }

    #[test]
    fn tail_bounds_bracket_actual_tail() {
        let n = 32usize;
        for f in all_families() {
            if matches!(f, CoefficientFamily::Delta) {
                continue;
            }
            let j_max = 200i64;
            let far = 400_000i64;
            let w = f.weights_on_window(n, j_max + 1, far).unwrap();
            let partial = sum_squares(&w);
            let (lo_far, hi_far) = f.tail_bounds(n, far);
            let (lo, hi) = f.tail_bounds(n, j_max);
            assert!(partial + lo_far >= lo * (1.0 - 1e-12), "{f:?} lower");
            assert!(partial + hi_far <= hi * (1.0 + 1e-12), "{f:?} upper");
        }
    }

    #[test]
    fn truncation_failure_reported() {
        let f = CoefficientFamily::LogPower { alpha: 0.6 };
        match weight_profile_with_cap(&f, 16, 1e-3, 1 << 12) {
            Err(Error::TruncationFailure { cap, achieved, .. }) => {
                assert_eq!(cap, 1 << 12);
                assert!(achieved > 1e-3);
            }
            other => panic!("expected truncation failure, got {other:?}"),
        }
    }

    #[test]
    fn subhorizon_weights_match_direct_profile() {
        let p = weight_profile(&FRAC, 64, 1e-2).unwrap();
        let sub = p.subhorizon_weights(16).unwrap();
        for (k, &b) in sub.iter().enumerate().step_by(97) {
            let j = p.j_min + k as i64;
            assert!((b - FRAC.window_sum_direct(16, j)).abs() < 1e-12 * b.abs().max(1e-300));
        }
        assert!(p.subhorizon_weights(65).is_err());
    }

    #[test]
    fn regvar_delta_is_exact() {
        let r = regvar_diagnostic(&CoefficientFamily::Delta, 1000, &[0.25, 0.5, 1.0]).unwrap();
        for pt in &r.points {
            assert_eq!(pt.ratio, pt.t);
            assert_eq!(pt.reference, pt.t);
        }
        assert_eq!(r.doubling_ratio, 2.0);
        assert!((r.fitted_slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regvar_half_horizon_ratios() {
        let n = 1 << 16;
        let r = regvar_diagnostic(&FRAC, n, &[0.5]).unwrap();
        let want = 0.5f64.powf(1.5);
        assert!((r.points[0].ratio / want - 1.0).abs() < 0.02, "{:?}", r.points[0]);
        let r = regvar_diagnostic(&PDIFF, n, &[0.5]).unwrap();
        let want = 0.5f64.powf(0.5);
        assert!((r.points[0].ratio / want - 1.0).abs() < 0.03, "{:?}", r.points[0]);
    }

    #[test]
    fn csv_export() {
        let p = weight_profile(&CoefficientFamily::Delta, 3, 0.1).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "j,b_nj");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("-2,"));
        let mut buf = Vec::new();
        write_coefficients_csv(&FRAC, 3, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn family_json() {
        let f: CoefficientFamily = serde_json::from_str(r#"{"variant":"frac_int","d":0.25}"#).unwrap();
        assert_eq!(f, FRAC);
        let g: CoefficientFamily = serde_json::from_str(r#"{"variant":"geometric","ratio":0.5}"#).unwrap();
        assert_eq!(g, CoefficientFamily::Geometric { ratio: 0.5, scale: 1.0 });
        let d: CoefficientFamily = serde_json::from_str(r#"{"variant":"delta"}"#).unwrap();
        assert_eq!(d, CoefficientFamily::Delta);
        assert!(serde_json::from_str::<CoefficientFamily>(r#"{"variant":"frac_int","d":0.7}"#).is_err());
        assert!(serde_json::from_str::<CoefficientFamily>(r#"{"variant":"frac_int","d":0.2,"z":1}"#).is_err());
        assert!(serde_json::from_str::<CoefficientFamily>(r#"{"variant":"bogus"}"#).is_err());
        let back: CoefficientFamily = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    // Parameter ranges keep the tail exponents away from zero so that small
    // tolerances stay within reasonable windows.
    fn family_strategy() -> impl Strategy<Value = CoefficientFamily> {
        prop_oneof![
            (0.7f64..0.99).prop_map(|alpha| CoefficientFamily::PowerLaw { alpha }),
            (0.01f64..0.3).prop_map(|d| CoefficientFamily::FracInt { d }),
            (0.01f64..0.49).prop_map(|alpha| CoefficientFamily::PowerDiff { alpha }),
            (0.05f64..0.95, 0.1f64..3.0)
                .prop_map(|(ratio, scale)| CoefficientFamily::Geometric { ratio, scale }),
            Just(CoefficientFamily::Delta),
        ]
    }

    #[test]
    fn log_power_profile() {
        // logarithmic tail decay: certificates exist but windows grow like n^(eps^(-1/(2α-1)))
        let f = CoefficientFamily::LogPower { alpha: 3.0 };
        let p = weight_profile(&f, 100, 0.05).unwrap();
        assert!(p.tail_fraction <= 0.05);
        assert!(matches!(
            weight_profile(&CoefficientFamily::LogPower { alpha: 0.75 }, 100, 0.05),
            Err(Error::TruncationFailure { .. })
        ));
        for j in [-99i64, 0, 17, 1000] {
            let w = f.weights_on_window(100, j, j).unwrap()[0];
            assert!((w - f.window_sum_direct(100, j)).abs() < 1e-12 * w);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn window_sums_match_direct(f in family_strategy(), n in 1usize..200, j in -250i64..2000) {
            let w = f.weights_on_window(n, j, j).unwrap()[0];
            let direct = f.window_sum_direct(n, j);
            let scale = direct.abs().max(1e-300);
            prop_assert!((w - direct).abs() <= 1e-12 * scale + 1e-15 * f.prefix_sums(j + n as i64, j + n as i64)[0].abs(),
                "{:?} n={} j={} w={} direct={}", f, n, j, w, direct);
        }

        #[test]
        fn bn2_nondecreasing_for_nonnegative(f in family_strategy(), n in 1usize..300) {
            prop_assume!(f.is_nonnegative());
            // b_{n+1,j} = b_{n,j} + a_{j+n+1} ≥ b_{n,j} ≥ 0 on a common window
            let p = weight_profile(&f, n, 1e-2).unwrap();
            let wider = f.weights_on_window(n + 1, p.j_min - 1, p.j_max).unwrap();
            prop_assert!(sum_squares(&wider) >= p.bn2);
            let q = weight_profile(&f, n + 1, 1e-2).unwrap();
            prop_assert!(q.bn2 + q.tail_upper >= p.bn2 + p.tail_lower);
        }

        #[test]
        fn truncation_consistency(f in family_strategy(), n in 1usize..200, eps in 0.02f64..0.2) {
            let coarse = weight_profile(&f, n, eps).unwrap();
            let fine = weight_profile(&f, n, eps / 4.0).unwrap();
            prop_assert!((coarse.bn2 - fine.bn2).abs() <= eps * fine.bn2);
            prop_assert!(coarse.tail_fraction <= eps);
        }

        #[test]
        fn blocked_mass_bounded(f in family_strategy(), n in 1usize..200) {
            let p = weight_profile(&f, n, 1e-2).unwrap();
            let mut blocked = Vec::with_capacity(p.len() + 1);
            let mut prev = 0.0;
            for &b in p.weights.iter().chain(std::iter::once(&0.0)) {
                blocked.push(b + prev);
                prev = b;
            }
            prop_assert!(sum_squares(&blocked) <= 4.0 * p.bn2 * (1.0 + 1e-12));
        }
    }
}
