//! Gamma and Beta function helpers accurate to a few ulps over the ranges
//! used by the covariance oracles.

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn stirling_correction(x: f64) -> f64 {
    // ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π], asymptotic series
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0
            - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))))
}

/// `ln Γ(y + x) − ln Γ(y)` for `y > 0`, `x > 0`, without cancellation when
/// `y` is large.
pub fn ln_gamma_ratio(y: f64, x: f64) -> f64 {
    const SHIFT_TO: f64 = 16.0;
    if y + x < 8.0 {
        // lgamma values are O(1) here, so the difference loses nothing
        return ln_gamma(y + x) - ln_gamma(y);
    }
    let mut shift = 0.0;
    let mut yy = y;
    while yy < SHIFT_TO {
        // ln Γ(y+x) − ln Γ(y) = [ln Γ(y+1+x) − ln Γ(y+1)] − ln((y+x)/y)
        shift += (x / yy).ln_1p();
        yy += 1.0;
    }
    let main = (yy - 0.5) * (x / yy).ln_1p() + x * (yy + x).ln() - x;
    main + stirling_correction(yy + x) - stirling_correction(yy) - shift
}

/// Beta function `B(x, y)` for positive arguments.
pub fn beta(x: f64, y: f64) -> f64 {
    let (small, large) = if x <= y { (x, y) } else { (y, x) };
    if large < 8.0 {
        return (ln_gamma(small) + ln_gamma(large) - ln_gamma(small + large)).exp();
    }
    libm::tgamma(small) * (-ln_gamma_ratio(large, small)).exp()
}

/// `n!` as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Neumaier (improved Kahan) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn beta_small_integers() {
        assert!(rel(beta(3.0, 1.0), 1.0 / 3.0) < 1e-14);
        assert!(rel(beta(3.0, 2.0), 1.0 / 12.0) < 1e-14);
        assert!(rel(beta(2.0, 5.0), 1.0 / 30.0) < 1e-14);
    }

    #[test]
    fn beta_large_second_argument() {
        // B(2, m) = 1/(m(m+1)) and B(3, m) = 2/(m(m+1)(m+2))
        for &m in &[10.0, 123.0, 4096.0, 1.0e6, 3.0e9] {
            let b2 = 1.0 / (m * (m + 1.0));
            let b3 = 2.0 / (m * (m + 1.0) * (m + 2.0));
            assert!(rel(beta(2.0, m), b2) < 1e-13, "m={m}");
            assert!(rel(beta(3.0, m), b3) < 1e-13, "m={m}");
        }
    }

    #[test]
    fn ratio_matches_lgamma_for_moderate_args() {
        for &(y, x) in &[(0.5, 0.25), (3.0, 1.5), (17.0, 2.3), (40.5, 0.7), (9.0, 9.0)] {
            let direct = ln_gamma(y + x) - ln_gamma(y);
            assert!((ln_gamma_ratio(y, x) - direct).abs() < 1e-12, "y={y} x={x}");
        }
    }

    #[test]
    fn ratio_against_rising_product() {
        // Γ(y+3)/Γ(y) = y(y+1)(y+2)
        for &y in &[1.0e3f64, 2.5e5, 7.0e7] {
            let exact = (y * (y + 1.0) * (y + 2.0)).ln();
            assert!((ln_gamma_ratio(y, 3.0) - exact).abs() < 1e-13 * exact);
        }
    }

    #[test]
    fn neumaier_recovers_cancelled_mass() {
        let mut s = Neumaier::new();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }
}
