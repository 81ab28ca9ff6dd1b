//! Acceptance suite. Each test runs one criterion at its stated tolerance and
//! writes a single `PASS` or `FAIL` line to stderr (uncaptured), including
//! the elapsed time against the criterion's time limit.
//!
//! Criteria run one at a time so the timings are not distorted by each other.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use revlin::coefficients::{bn2_estimate, weight_profile, CoefficientFamily, REGVAR_EPS};
use revlin::innovations::{spectral_atoms, ChainSpec, FourierTerm, GroupWalkSpec, MhChainSpec};
use revlin::mc::{run_experiment, ExperimentConfig, Mode, Verdict};
use revlin::oracle::{
    cesaro_gamma, cov_sum_f0, fbm_cov, gamma_j, group_2pi_h0, mh_cov, mh_sigma2, quadratic_form_variance,
    variance_probe, CovarianceModel,
};

static SERIAL: Mutex<()> = Mutex::new(());

/// Accumulates the sub-checks of one criterion.
#[derive(Default)]
struct Outcome {
    ok: bool,
    parts: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { ok: true, parts: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        let msg = msg.into();
        self.parts.push(if ok { msg } else { format!("{msg} <-- violated") });
        self.ok &= ok;
    }
}

fn emit(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn criterion(id: u32, title: &str, limit_secs: f64, body: impl FnOnce(&mut Outcome)) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut out = Outcome::new();
    body(&mut out);
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < limit_secs;
    let ok = out.ok && in_time;
    let line = format!(
        "{} C{id:02} {title}: {} [{secs:.2} s, limit {limit_secs} s{}]",
        if ok { "PASS" } else { "FAIL" },
        out.parts.join("; "),
        if in_time { "" } else { ", too slow" },
    );
    emit(&line);
    assert!(ok, "{line}");
}

fn rel_err(x: f64, target: f64) -> f64 {
    ((x - target) / target).abs()
}

fn mh11() -> ChainSpec {
    ChainSpec::Mh(MhChainSpec::new(1.0, 1.0).unwrap())
}

/// `∫_0^1 f(x, 1−x) dx` by tanh–sinh quadrature.
fn tanh_sinh(f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / 128.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    for k in -600i32..=600 {
        let u = k as f64 * h;
        let s = half_pi * u.sinh();
        let x = 1.0 / (1.0 + (-2.0 * s).exp());
        let omx = 1.0 / (1.0 + (2.0 * s).exp());
        if x == 0.0 || omx == 0.0 {
            continue;
        }
        sum += 2.0 * h * half_pi * u.cosh() * x * omx * f(x, omx);
    }
    sum
}

fn z6_walk(with_periodic: bool) -> ChainSpec {
    let mut terms = vec![
        FourierTerm { index: 1, re: 0.5, im: 0.0 },
        FourierTerm { index: 5, re: 0.5, im: 0.0 },
    ];
    if with_periodic {
        terms.push(FourierTerm { index: 3, re: 1.0, im: 0.0 });
    }
    ChainSpec::Group(GroupWalkSpec::from_terms(6, vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.5], &terms).unwrap())
}

#[test]
fn c01_oracle_exactness() {
    criterion(1, "oracle exactness", 1.0, |out| {
        let s = MhChainSpec::new(1.0, 1.0).unwrap();
        out.check((mh_sigma2(&s) - 2.0 / 3.0).abs() < 1e-15, format!("mh_sigma2(1,1) = {:.15}", mh_sigma2(&s)));

        // θ^{-1} ∫ g²(x) (1−|x|)^k |x|^{-1} ν(dx) with ν density ((a+1)/2)|x|^a
        let mut worst = 0.0f64;
        for &(a, q) in &[(1.0, 1.0), (0.5, 0.5), (2.0, 0.75), (0.3, 1.5), (3.0, 2.0)] {
            let spec = MhChainSpec::new(a, q).unwrap();
            let theta = (a + 1.0) / a;
            for k in [0u64, 1, 2, 3, 10, 40] {
                let quad = 2.0 / theta
                    * tanh_sinh(|x, omx| x.powf(2.0 * q) * omx.powi(k as i32) / x * 0.5 * (a + 1.0) * x.powf(a));
                worst = worst.max(rel_err(mh_cov(&spec, k), quad));
            }
        }
        out.check(worst < 1e-8, format!("mh_cov vs quadrature max rel err {worst:.1e}"));

        let mut rng = StdRng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let a = rng.random_range(1.0..3.0);
            let q = rng.random_range(1.0..2.0);
            let spec = MhChainSpec::new(a, q).unwrap();
            let series = cov_sum_f0(&CovarianceModel::mh(&spec), 1e-11).unwrap();
            worst = worst.max((series - mh_sigma2(&spec)).abs());
        }
        out.check(worst < 1e-10, format!("mh_sigma2 vs cov_sum_f0 on 20 random (a,q): max abs err {worst:.1e}"));
    });
}

#[test]
fn c02_sign_adjudication() {
    criterion(2, "MH variance constant adjudication", 60.0, |out| {
        let cfg = ExperimentConfig::new(mh11(), CoefficientFamily::Delta, Mode::Clt, 5000, 2000).with_seed(2);
        let rep = run_experiment(&cfg, None).unwrap();
        let v = rep.statistics.estimates.variance_ratio.unwrap();
        out.check(
            rel_err(v.value, 2.0 / 3.0) <= 0.10,
            format!("Var(S_n)/n = {:.4} ± {:.4} vs 2/3 (10%)", v.value, v.se),
        );
        let sep = (v.value - 4.0 / 3.0).abs() / v.se;
        out.check(sep > 5.0, format!("distance from 4/3 = {sep:.1} s.e. (> 5)"));
    });
}

#[test]
fn c03_variance_probe() {
    criterion(3, "deterministic variance probe", 1.0, |out| {
        let m = CovarianceModel::mh(&MhChainSpec::new(1.0, 1.0).unwrap());
        let p = variance_probe(&m, 5000);
        out.check(rel_err(p, 2.0 / 3.0) <= 0.02, format!("probe(5000) = {p:.8} vs 2/3 (2%)"));
    });
}

#[test]
fn c04_clt_long_memory() {
    criterion(4, "CLT for FracInt(0.25) + MH(1,1)", 300.0, |out| {
        let cfg = ExperimentConfig::new(mh11(), CoefficientFamily::FracInt { d: 0.25 }, Mode::Clt, 1000, 2000)
            .with_eps(1e-3)
            .with_seed(4);
        let rep = run_experiment(&cfg, None).unwrap();
        let st = &rep.statistics;
        let v = st.estimates.variance_ratio.unwrap();
        let ks = st.estimates.ks_distance.unwrap();
        out.check(
            rel_err(v.value, 2.0 / 3.0) <= 0.10,
            format!("Var(S_n)/b_n^2 = {:.4} ± {:.4} vs 2/3 (10%)", v.value, v.se),
        );
        out.check(ks.value < 0.05, format!("KS = {:.4} (< 0.05)", ks.value));
        out.parts.push(format!("window {} terms", st.window.as_ref().unwrap().len));
    });
}

#[test]
fn c05_regular_variation() {
    criterion(5, "regular variation of b_n^2", 30.0, |out| {
        let n = 1usize << 16;
        let fi = CoefficientFamily::FracInt { d: 0.25 };
        let r = bn2_estimate(&fi, 2 * n, REGVAR_EPS).unwrap() / bn2_estimate(&fi, n, REGVAR_EPS).unwrap();
        out.check(rel_err(r, 2f64.powf(1.5)) <= 0.02, format!("FracInt(0.25): {r:.5} vs 2^1.5 (2%)"));
        let pd = CoefficientFamily::PowerDiff { alpha: 0.25 };
        let r = bn2_estimate(&pd, 2 * n, REGVAR_EPS).unwrap() / bn2_estimate(&pd, n, REGVAR_EPS).unwrap();
        out.check(rel_err(r, 2f64.powf(0.5)) <= 0.03, format!("PowerDiff(0.25): {r:.5} vs 2^0.5 (3%)"));
    });
}

#[test]
fn c06_fbm_fdd() {
    criterion(6, "fBm finite-dimensional covariances", 600.0, |out| {
        let target = fbm_cov(0.25, 1.0, 1.5, 2.0 / 3.0).unwrap();
        out.check((target - 0.15850).abs() < 5e-5, format!("oracle (0.25,1) = {target:.6} (quoted as about 0.15850)"));
        let cfg = ExperimentConfig::new(mh11(), CoefficientFamily::FracInt { d: 0.25 }, Mode::Fdd, 1024, 4000)
            .with_grid(vec![0.25, 0.5, 1.0])
            .with_eps(1e-3)
            .with_seed(6);
        let rep = run_experiment(&cfg, None).unwrap();
        let est = &rep.statistics.estimates;
        let mut worst = 0.0f64;
        for (i, row) in est.covariance.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                worst = worst.max(rel_err(e.value, est.target_covariance[i][j]));
            }
        }
        out.check(worst <= 0.15, format!("max entrywise rel err {worst:.4} (15%)"));
        let e = est.covariance[0][2];
        out.parts.push(format!("entry (0.25,1) = {:.5} ± {:.5}", e.value, e.se));
    });
}

#[test]
fn c07_blocked_process() {
    criterion(7, "blocked process on Z_6", 120.0, |out| {
        let stated = 27.0 / 8.0;
        for (periodic, label) in [(false, "f(1)=f(5)=1/2"), (true, "plus f(3)=1")] {
            let chain = z6_walk(periodic);
            let cfg = ExperimentConfig::new(chain.clone(), CoefficientFamily::Delta, Mode::Blocks, 5000, 2000)
                .with_seed(7);
            let rep = run_experiment(&cfg, None).unwrap();
            let v = rep.statistics.estimates.variance_ratio.unwrap();
            out.check(
                rel_err(v.value, stated) <= 0.10,
                format!("{label}: Var(S_n(X'))/b_n^2 = {:.4} ± {:.4} vs 27/8 (10%)", v.value, v.se),
            );
            let atoms = match &chain {
                ChainSpec::Group(g) => spectral_atoms(g).unwrap(),
                _ => unreachable!(),
            };
            let exact = group_2pi_h0(&atoms).unwrap();
            emit(&format!(
                "INFO C07 {label}: covariance-sum value 4 sum w(1+t)/(1-t) = {exact}; \
                 estimate within {:.1}% of it ({:.1} s.e.)",
                100.0 * rel_err(v.value, exact),
                (v.value - exact).abs() / v.se
            ));
        }
    });
}

#[test]
fn c08_short_memory() {
    criterion(8, "short memory, Geometric(1/2) + MH(1,1)", 180.0, |out| {
        let cfg = ExperimentConfig::new(
            mh11(),
            CoefficientFamily::Geometric { ratio: 0.5, scale: 1.0 },
            Mode::Shortmem,
            5000,
            2000,
        )
        .with_grid(vec![0.5, 1.0])
        .with_seed(8);
        let rep = run_experiment(&cfg, None).unwrap();
        let c = &rep.statistics.estimates.covariance;
        let var = c[1][1];
        let cross = c[0][1];
        out.check(
            rel_err(var.value, 8.0 / 3.0) <= 0.10,
            format!("Var(S_n/sqrt n) = {:.4} ± {:.4} vs 8/3 (10%)", var.value, var.se),
        );
        out.check(
            rel_err(cross.value, 4.0 / 3.0) <= 0.15,
            format!("cov at (0.5,1) = {:.4} ± {:.4} vs 4/3 (15%)", cross.value, cross.se),
        );
    });
}

#[test]
fn c09_quadratic_form_identity() {
    criterion(9, "quadratic-form variance identity", 30.0, |out| {
        let n = 4096;
        let profile = weight_profile(&CoefficientFamily::FracInt { d: 0.25 }, n, 1e-2).unwrap();
        let bn = profile.bn();
        let d: Vec<f64> = profile.weights.iter().map(|b| b / bn).collect();
        let model = CovarianceModel::mh(&MhChainSpec::new(1.0, 1.0).unwrap());
        let v = quadratic_form_variance(&d, &model, 1e-6).unwrap();
        let target = cov_sum_f0(&model, 1e-12).unwrap();
        out.check(
            rel_err(v, target) <= 0.02,
            format!("Var(sum d_j xi_j) = {v:.6} vs 2 pi f(0) = {target:.6} (2%), window {} terms", d.len()),
        );
    });
}

#[test]
fn c10_condition_suite() {
    criterion(10, "condition suite", 10.0, |out| {
        let model = CovarianceModel::mh(&MhChainSpec::new(1.0, 1.0).unwrap());
        let worst = (0..=100usize)
            .map(|j| {
                let closed = 1.0 / ((2 * j + 1) as f64 * (2 * j + 2) as f64);
                (gamma_j(&model, j).unwrap() - closed).abs()
            })
            .fold(0.0f64, f64::max);
        out.check(worst <= 1e-10, format!("gamma_j vs 1/((2j+1)(2j+2)), j <= 100: max err {worst:.1e}"));
        let c = cesaro_gamma(&model, 10_000).unwrap();
        out.check(c < 1e-3, format!("Cesaro mean at p = 10^4: {c:.3e}"));

        let bound_factor = model.cov(0) + 2.0 * model.abs_tail(0);
        let mut rng = StdRng::seed_from_u64(10);
        let mut held = 0;
        for _ in 0..100 {
            let len = rng.random_range(1..400);
            let d: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = quadratic_form_variance(&d, &model, 1e-12).unwrap();
            let sumsq: f64 = d.iter().map(|x| x * x).sum();
            if v <= bound_factor * sumsq + 1e-12 {
                held += 1;
            }
        }
        out.check(held == 100, format!("spectral bound held on {held}/100 random weight vectors"));
    });
}

#[test]
fn c11_maximal_inequality() {
    criterion(11, "maximal inequality", 120.0, |out| {
        let cfg = ExperimentConfig::new(mh11(), CoefficientFamily::Delta, Mode::Maximal, 1000, 2000).with_seed(11);
        let rep = run_experiment(&cfg, None).unwrap();
        let check = rep
            .statistics
            .checks
            .iter()
            .find(|c| c.name == "maximal_inequality")
            .unwrap();
        let m = rep.statistics.estimates.maximal.as_ref().unwrap();
        out.check(
            check.verdict == Verdict::Pass && check.margin_se >= 3.0,
            format!(
                "E max S_i^2 = {:.2} vs bound {:.2}, margin {:.1} s.e. (>= 3)",
                m.max_partial_sq.value, m.bound.value, check.margin_se
            ),
        );
        let key1: Vec<String> = m.key1_values.iter().map(|e| format!("{:.3}", e.value)).collect();
        out.parts.push(format!("E max|S_i|/sqrt(m) at m = {:?}: {}", m.key1_horizons, key1.join(", ")));
    });
}

#[test]
fn c12_determinism() {
    criterion(12, "determinism across thread counts", 60.0, |out| {
        let configs = [
            ExperimentConfig::new(mh11(), CoefficientFamily::FracInt { d: 0.25 }, Mode::Clt, 256, 200)
                .with_eps(1e-2)
                .with_seed(12),
            ExperimentConfig::new(z6_walk(true), CoefficientFamily::Delta, Mode::Blocks, 500, 100).with_seed(12),
            ExperimentConfig::new(mh11(), CoefficientFamily::Delta, Mode::Maximal, 300, 300).with_seed(12),
        ];
        for cfg in &configs {
            let one = run_experiment(cfg, Some(1)).unwrap().statistics_json().unwrap();
            let eight = run_experiment(cfg, Some(8)).unwrap().statistics_json().unwrap();
            let again = run_experiment(cfg, Some(8)).unwrap().statistics_json().unwrap();
            out.check(
                one == eight && eight == again,
                format!("{:?}: statistics identical for threads 1 and 8", cfg.mode),
            );
        }
    });
}
