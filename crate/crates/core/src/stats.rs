//! Sample statistics with standard errors, the Kolmogorov–Smirnov distance to
//! the standard normal, and a small symmetric eigenvalue solver.

use serde::Serialize;

/// Standard normal CDF, `Φ(x) = erfc(−x/√2)/2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// An estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample mean with `se = s/√R`.
pub fn mean_estimate(x: &[f64]) -> Estimate {
    let r = x.len() as f64;
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1.0);
    Estimate { value: m, se: (var / r).sqrt() }
}

/// Unbiased sample variance. The standard error uses the fourth central
/// moment: `Var(s²) ≈ (m4 − s⁴ (R−3)/(R−1)) / R`.
pub fn variance_estimate(x: &[f64]) -> Estimate {
    covariance_estimate(x, x)
}

/// Unbiased sample covariance with the delta-method standard error
/// `sd((X−X̄)(Y−Ȳ))/√R`.
pub fn covariance_estimate(x: &[f64], y: &[f64]) -> Estimate {
    assert_eq!(x.len(), y.len());
    let r = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let c = prods.iter().sum::<f64>() / (r - 1.0);
    let pm = mean(&prods);
    let pvar = prods.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (r - 1.0);
    Estimate { value: c, se: (pvar / r).sqrt() }
}

/// `sup_x |F_R(x) − Φ(x)|` for the empirical CDF `F_R` of the sample.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    ks_distance(sample, normal_cdf)
}

/// `sup_x |F_R(x) − F(x)|` for a continuous reference CDF `F`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let r = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / r) - f).max(f - i as f64 / r)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic standard deviation of the KS distance under the null,
/// `0.2603/√R`, used as its reported standard error.
pub fn ks_null_sd(r: usize) -> f64 {
    0.260_3 / (r as f64).sqrt()
}

/// Asymptotic 5% critical value `1.36/√R`.
pub fn ks_critical_5pct(r: usize) -> f64 {
    1.36 / (r as f64).sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}
