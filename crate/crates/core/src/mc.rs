//! Monte Carlo experiments comparing simulated linear processes with their
//! oracle limits.
//!
//! Replicate `r` of an experiment with master seed `s` uses the substream
//! `(s, r)`. Replicates run in parallel on a rayon pool; their results are
//! gathered in replicate order and aggregated on one thread, so the
//! `statistics` section of a report depends only on the configuration.
//!
//! Every check compares an estimate with a target. A check whose tolerance
//! does not exceed three standard errors is reported as inconclusive.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{weight_profile, CoefficientFamily, WeightProfile};
use crate::error::{invalid, Error, Result};
use crate::innovations::{ChainSpec, InnovationSampler};
use crate::linproc::{batch_sums, blocked_weights, grid_horizons, grid_weights, WeightSet};
use crate::oracle::{self, check_conditions, CovarianceModel, LimitTargets};
use crate::rng::{mix64, Substream};
use crate::stats::{
    covariance_estimate, ks_critical_5pct, ks_distance_normal, ks_null_sd, mean_estimate, Estimate,
};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Clt,
    Fdd,
    Blocks,
    Shortmem,
    Maximal,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Clt => "clt",
            Mode::Fdd => "fdd",
            Mode::Blocks => "blocks",
            Mode::Shortmem => "shortmem",
            Mode::Maximal => "maximal",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "clt" => Mode::Clt,
            "fdd" => Mode::Fdd,
            "blocks" => Mode::Blocks,
            "shortmem" => Mode::Shortmem,
            "maximal" => Mode::Maximal,
            _ => return Err(invalid(format!("unknown mode '{s}'"))),
        })
    }
}

/// Tolerances for the pass/fail checks. Relative tolerances multiply the
/// target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub variance_rel: f64,
    pub covariance_rel: f64,
    pub ks_max: f64,
    /// The sample mean must lie within this many `√(σ²/R)` of zero.
    pub mean_sd: f64,
    /// Required separation, in standard errors, from the alternative MH constant.
    pub separation_se: f64,
    /// Margin, in standard errors, required by the maximal inequality.
    pub maximal_margin_se: f64,
    /// Bound on `Ê max|S_i|/√n` relative to its value at the smallest horizon.
    pub key1_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            variance_rel: 0.10,
            covariance_rel: 0.15,
            ks_max: 0.05,
            mean_sd: 4.0,
            separation_se: 5.0,
            maximal_margin_se: 3.0,
            key1_factor: 2.0,
        }
    }
}

pub const DEFAULT_EPS: f64 = 1e-3;

fn default_eps() -> f64 {
    DEFAULT_EPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chain: ChainSpec,
    pub family: CoefficientFamily,
    pub mode: Mode,
    pub n: usize,
    pub replicates: usize,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn new(chain: ChainSpec, family: CoefficientFamily, mode: Mode, n: usize, replicates: usize) -> Self {
        Self {
            chain,
            family,
            mode,
            n,
            replicates,
            t_grid: Vec::new(),
            eps: DEFAULT_EPS,
            seed: 0,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_grid(mut self, t_grid: Vec<f64>) -> Self {
        self.t_grid = t_grid;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.replicates < 2 {
            return Err(invalid("at least two replicates are required"));
        }
        let min_n = if self.mode == Mode::Maximal { 1 } else { 2 };
        if self.n < min_n {
            return Err(invalid(format!("n must be at least {min_n}")));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid("eps must lie in (0, 1)"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("variance_rel", t.variance_rel),
            ("covariance_rel", t.covariance_rel),
            ("ks_max", t.ks_max),
            ("mean_sd", t.mean_sd),
            ("key1_factor", t.key1_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("tolerance {name} must be positive")));
            }
        }
        if !(t.separation_se >= 0.0 && t.maximal_margin_se >= 0.0) {
            return Err(invalid("standard-error multiples must be nonnegative"));
        }
        match self.mode {
            Mode::Fdd if self.t_grid.is_empty() => Err(invalid("fdd mode needs a t_grid")),
            Mode::Maximal if self.family != CoefficientFamily::Delta => {
                Err(invalid("maximal mode concerns the chain's own partial sums; use the delta family"))
            }
            Mode::Shortmem => match self.family.abs_sum() {
                Err(e) => Err(e),
                Ok(a) if a == 0.0 => Err(invalid(
                    "coefficients sum to zero (A = 0): the short-memory limit is degenerate",
                )),
                Ok(_) => Ok(()),
            },
            _ => Ok(()),
        }?;
        if !self.t_grid.is_empty() {
            grid_horizons(self.n.max(1), &self.t_grid)?;
        }
        Ok(())
    }

    fn grid_or_unit(&self) -> Vec<f64> {
        if self.t_grid.is_empty() {
            vec![1.0]
        } else {
            self.t_grid.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Any failure fails; otherwise any inconclusive check is inconclusive.
    pub fn combine(checks: &[Check]) -> Verdict {
        if checks.is_empty() {
            Verdict::Inconclusive
        } else if checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relation {
    /// `|estimate − target| ≤ tolerance`.
    Within { tolerance: f64 },
    /// `estimate + margin_se · se ≤ target`.
    AtMost { margin_se: f64 },
    /// `|estimate − target| > min_se · se`.
    Separated { min_se: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    /// Distance to the decision boundary in standard errors.
    pub margin_se: f64,
    pub verdict: Verdict,
}

impl Check {
    pub fn within(name: impl Into<String>, est: Estimate, target: f64, tolerance: f64) -> Self {
        let err = (est.value - target).abs();
        let verdict = if !est.value.is_finite() {
            Verdict::Fail
        } else if tolerance <= 3.0 * est.se {
            Verdict::Inconclusive
        } else if err <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name: name.into(),
            relation: Relation::Within { tolerance },
            estimate: est.value,
            se: est.se,
            target,
            margin_se: (tolerance - err) / est.se,
            verdict,
        }
    }

    /// With `margin_se = 0` the bound is treated as a tolerance: inconclusive
    /// unless it exceeds three standard errors, then decided on the estimate.
    pub fn at_most(name: impl Into<String>, est: Estimate, bound: f64, margin_se: f64) -> Self {
        let verdict = if !est.value.is_finite() {
            Verdict::Fail
        } else if margin_se == 0.0 {
            if bound <= 3.0 * est.se {
                Verdict::Inconclusive
            } else if est.value <= bound {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        } else if est.value + margin_se * est.se <= bound {
            Verdict::Pass
        } else if est.value - margin_se * est.se > bound {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
        Self {
            name: name.into(),
            relation: Relation::AtMost { margin_se },
            estimate: est.value,
            se: est.se,
            target: bound,
            margin_se: (bound - est.value) / est.se,
            verdict,
        }
    }

    /// Passes when the estimate is clearly away from `target`; otherwise the
    /// data cannot tell them apart and the check is inconclusive.
    pub fn separated(name: impl Into<String>, est: Estimate, target: f64, min_se: f64) -> Self {
        let dist = (est.value - target).abs() / est.se;
        Self {
            name: name.into(),
            relation: Relation::Separated { min_se },
            estimate: est.value,
            se: est.se,
            target,
            margin_se: dist,
            verdict: if dist > min_se { Verdict::Pass } else { Verdict::Inconclusive },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub j_min: i64,
    pub j_max: i64,
    pub len: usize,
    /// Retained `Σ_j b_{n,j}²`, the normalization used throughout.
    pub bn2: f64,
    pub tail_upper: f64,
    pub tail_fraction: f64,
    pub eps: f64,
}

impl WindowSummary {
    fn of(p: &WeightProfile) -> Self {
        Self {
            j_min: p.j_min,
            j_max: p.j_max,
            len: p.len(),
            bn2: p.bn2,
            tail_upper: p.tail_upper,
            tail_fraction: p.tail_fraction,
            eps: p.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalStats {
    /// `Ê max_{i≤n} S_i²`.
    pub max_partial_sq: Estimate,
    /// `Ê max_{i≤n} X_i²`.
    pub max_term_sq: Estimate,
    /// `max_i Ê S_i²` and the index attaining it.
    pub max_mean_partial_sq: Estimate,
    pub argmax: usize,
    /// `2 Ê max X_i² + 22 max_i Ê S_i²`.
    pub bound: Estimate,
    pub key1_horizons: Vec<usize>,
    /// `Ê max_{i≤m} |S_i| / √m` per horizon.
    pub key1_values: Vec<Estimate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Estimates {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_ratio: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_reference: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub t_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub covariance: Vec<Vec<Estimate>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub target_covariance: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maximal: Option<MaximalStats>,
}

/// Everything in a report that is a function of the configuration alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statistics {
    pub mode: Mode,
    pub seed: u64,
    pub n: usize,
    pub replicates: usize,
    pub targets: LimitTargets,
    /// The target the main variance ratio is judged against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSummary>,
    pub estimates: Estimates,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub runtime_seconds: f64,
    pub threads: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub config: ExperimentConfig,
    pub statistics: Statistics,
    pub meta: Meta,
    /// Normalized path values, one row per replicate, for CSV dumps.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    #[serde(skip)]
    pub sample_grid: Vec<f64>,
}

impl ExperimentReport {
    pub fn verdict(&self) -> Verdict {
        self.statistics.verdict
    }

    /// JSON with every number rounded to 15 significant digits.
    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        oracle::round_json(&mut v);
        Ok(v)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value()?)?)
    }

    /// The `statistics` section alone, serialized as in [`Self::to_json_string`].
    pub fn statistics_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(&self.statistics)?;
        oracle::round_json(&mut v);
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Rows `replicate,t,value`.
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "t", "value"])?;
        for (r, row) in self.samples.iter().enumerate() {
            for (t, v) in self.sample_grid.iter().zip(row) {
                w.write_record([r.to_string(), t.to_string(), format!("{v:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Run `cfg` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(invalid("thread count must be positive"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match cfg.mode {
        Mode::Clt => run_clt(cfg),
        Mode::Fdd => run_fdd(cfg),
        Mode::Blocks => run_blocks(cfg),
        Mode::Shortmem => run_shortmem(cfg),
        Mode::Maximal => run_maximal(cfg),
    })
}

struct Draft {
    targets: LimitTargets,
    variance_target: Option<f64>,
    window: Option<WindowSummary>,
    estimates: Estimates,
    checks: Vec<Check>,
    notes: Vec<String>,
    samples: Vec<Vec<f64>>,
    sample_grid: Vec<f64>,
}

impl Draft {
    fn new(targets: LimitTargets) -> Self {
        let notes = targets.notes.clone();
        Self {
            targets,
            variance_target: None,
            window: None,
            estimates: Estimates::default(),
            checks: Vec::new(),
            notes,
            samples: Vec::new(),
            sample_grid: Vec::new(),
        }
    }

    fn finish(self, cfg: &ExperimentConfig, start: Instant) -> ExperimentReport {
        ExperimentReport {
            schema_version: SCHEMA_VERSION.into(),
            config: cfg.clone(),
            statistics: Statistics {
                mode: cfg.mode,
                seed: cfg.seed,
                n: cfg.n,
                replicates: cfg.replicates,
                targets: self.targets,
                variance_target: self.variance_target,
                window: self.window,
                verdict: Verdict::combine(&self.checks),
                estimates: self.estimates,
                checks: self.checks,
                notes: self.notes,
            },
            meta: Meta {
                runtime_seconds: start.elapsed().as_secs_f64(),
                threads: rayon::current_num_threads(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            samples: self.samples,
            sample_grid: self.sample_grid,
        }
    }
}

fn group_spec(chain: &ChainSpec) -> Option<&crate::innovations::GroupWalkSpec> {
    match chain {
        ChainSpec::Group(g) => Some(g),
        _ => None,
    }
}

/// Abort unless the named conditions hold.
fn require_conditions(cfg: &ExperimentConfig, model: &CovarianceModel, names: &[&str]) -> Result<()> {
    let report = check_conditions(model, group_spec(&cfg.chain));
    let failed: Vec<&str> = report.failed().into_iter().filter(|c| names.contains(c)).collect();
    if failed.is_empty() {
        return Ok(());
    }
    let detail = failed
        .iter()
        .map(|&c| match c {
            "abscov" => report.abscov.detail.clone(),
            "SR" => report.sr.detail.clone(),
            "Mgen" => report.mgen.detail.clone(),
            _ => report.g1.as_ref().map(|g| g.detail.clone()).unwrap_or_default(),
        })
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::ConditionFailed { condition: failed.join(", "), detail })
}

/// Replicate sums for each weight row, in replicate order.
fn simulate(cfg: &ExperimentConfig, j_min: i64, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let set = WeightSet::new(j_min, rows)?;
    batch_sums(&cfg.chain, &set, cfg.seed, 0..cfg.replicates as u64)
}

fn column(samples: &[Vec<f64>], i: usize) -> Vec<f64> {
    samples.iter().map(|row| row[i]).collect()
}

fn degenerate(draft: &mut Draft) {
    draft
        .notes
        .push("zero variance: all weights vanish, so the normalized sums are undefined".into());
}

/// Main variance ratio, KS distance and mean checks for `S/b_n`.
fn scalar_checks(cfg: &ExperimentConfig, draft: &mut Draft, values: &[f64], bn2: f64, target: f64) {
    let tol = cfg.tolerances;
    let r = values.len();
    let scaled: Vec<f64> = values.iter().map(|s| s / bn2.sqrt()).collect();
    let var = covariance_estimate(&scaled, &scaled);
    let mean = mean_estimate(&scaled);
    draft.checks.push(Check::within("variance_ratio", var, target, tol.variance_rel * target));
    if target > 0.0 {
        let standardized: Vec<f64> = scaled.iter().map(|x| x / target.sqrt()).collect();
        let ks = Estimate { value: ks_distance_normal(&standardized), se: ks_null_sd(r) };
        draft.checks.push(Check::at_most("ks_distance", ks, tol.ks_max, 0.0));
        draft.estimates.ks_distance = Some(ks);
        draft.estimates.ks_reference = Some(ks_critical_5pct(r));
    }
    draft
        .checks
        .push(Check::within("mean", mean, 0.0, tol.mean_sd * (target / r as f64).sqrt()));
    draft.estimates.mean = Some(mean);
    draft.estimates.variance_ratio = Some(var);
    draft.variance_target = Some(target);
    draft.samples = scaled.into_iter().map(|v| vec![v]).collect();
    draft.sample_grid = vec![1.0];
}

/// Variance of `S_n(X)/b_n` and its distribution against `N(0, σ²)`.
pub fn run_clt(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let model = CovarianceModel::from_chain(&cfg.chain)?;
    require_conditions(cfg, &model, &["abscov", "Mgen"])?;
    let targets = oracle::limit_targets(&cfg.chain, Some(&cfg.family))?;
    let sigma2 = targets.sigma2;
    let alternative = targets.sigma2_alternative;
    let mut draft = Draft::new(targets);
    let mut profile = weight_profile(&cfg.family, cfg.n, cfg.eps)?;
    draft.window = Some(WindowSummary::of(&profile));
    let bn2 = profile.bn2;
    if bn2 == 0.0 {
        degenerate(&mut draft);
        return Ok(draft.finish(cfg, start));
    }
    let rows = vec![std::mem::take(&mut profile.weights)];
    let sums = simulate(cfg, profile.j_min, &rows)?;
    drop(rows);
    let values = column(&sums, 0);
    scalar_checks(cfg, &mut draft, &values, bn2, sigma2);
    if let Some(alt) = alternative {
        let var = draft.estimates.variance_ratio.unwrap();
        draft
            .checks
            .push(Check::separated("alternative_constant_rejected", var, alt, cfg.tolerances.separation_se));
    }
    Ok(draft.finish(cfg, start))
}

/// Covariance matrix of `(W_n(t_i))` against the fractional Brownian one.
pub fn run_fdd(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let model = CovarianceModel::from_chain(&cfg.chain)?;
    require_conditions(cfg, &model, &["abscov", "Mgen"])?;
    let targets = oracle::limit_targets(&cfg.chain, Some(&cfg.family))?;
    let (sigma2, beta) = (targets.sigma2, targets.beta);
    let mut draft = Draft::new(targets);
    let profile = weight_profile(&cfg.family, cfg.n, cfg.eps)?;
    draft.window = Some(WindowSummary::of(&profile));
    if profile.bn2 == 0.0 {
        degenerate(&mut draft);
        return Ok(draft.finish(cfg, start));
    }
    let horizons = grid_horizons(cfg.n, &cfg.t_grid)?;
    let target = oracle::fbm_cov_matrix(&cfg.t_grid, beta, sigma2)?;
    let rows = grid_weights(&profile, &horizons)?;
    let scale = profile.bn();
    let j_min = profile.j_min;
    drop(profile);
    let sums = simulate(cfg, j_min, &rows)?;
    drop(rows);
    let scaled: Vec<Vec<f64>> = sums.iter().map(|r| r.iter().map(|s| s / scale).collect()).collect();
    covariance_checks(cfg, &mut draft, &scaled, &target, cfg.tolerances.covariance_rel, cfg.tolerances.covariance_rel);
    draft.variance_target = Some(sigma2);
    if let Some(last) = cfg.t_grid.last() {
        if *last == 1.0 {
            let k = cfg.t_grid.len() - 1;
            draft.estimates.variance_ratio = Some(draft.estimates.covariance[k][k]);
        }
    }
    draft.estimates.horizons = horizons;
    Ok(draft.finish(cfg, start))
}

fn covariance_checks(
    cfg: &ExperimentConfig,
    draft: &mut Draft,
    samples: &[Vec<f64>],
    target: &[Vec<f64>],
    diag_rel: f64,
    off_rel: f64,
) {
    let g = target.len();
    let cols: Vec<Vec<f64>> = (0..g).map(|i| column(samples, i)).collect();
    let mut cov = vec![vec![Estimate { value: 0.0, se: 0.0 }; g]; g];
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for i in 0..g {
        for j in i..g {
            let e = covariance_estimate(&cols[i], &cols[j]);
            cov[i][j] = e;
            cov[j][i] = e;
            let err = (e.value - target[i][j]).abs();
            max_abs = max_abs.max(err);
            if target[i][j] != 0.0 {
                max_rel = max_rel.max(err / target[i][j].abs());
            }
            let rel = if i == j { diag_rel } else { off_rel };
            let name = format!("cov(t={}, t={})", cfg.t_grid[i], cfg.t_grid[j]);
            draft.checks.push(Check::within(name, e, target[i][j], rel * target[i][j].abs()));
        }
    }
    draft.estimates.t_grid = cfg.t_grid.clone();
    draft.estimates.covariance = cov;
    draft.estimates.target_covariance = target.to_vec();
    draft.estimates.max_abs_error = Some(max_abs);
    draft.estimates.max_rel_error = Some(max_rel);
    draft.samples = samples.to_vec();
    draft.sample_grid = cfg.t_grid.clone();
}

/// `S_n(X′)` for the blocked innovations `ξ_j + ξ_{j+1}` against `2πh(0)`.
pub fn run_blocks(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let model = CovarianceModel::from_chain(&cfg.chain)?;
    require_conditions(cfg, &model, &["SR"])?;
    let targets = oracle::limit_targets(&cfg.chain, Some(&cfg.family))?;
    let h0 = oracle::blocked_2pi_h0(&model)?;
    let mut draft = Draft::new(targets);
    let profile = weight_profile(&cfg.family, cfg.n, cfg.eps)?;
    let bn2 = profile.bn2;
    let mut blocked = blocked_weights(&profile);
    drop(profile);
    draft.window = Some(WindowSummary::of(&blocked));
    if bn2 == 0.0 || blocked.bn2 == 0.0 {
        degenerate(&mut draft);
        return Ok(draft.finish(cfg, start));
    }
    let rows = vec![std::mem::take(&mut blocked.weights)];
    let sums = simulate(cfg, blocked.j_min, &rows)?;
    drop(rows);
    let values = column(&sums, 0);
    scalar_checks(cfg, &mut draft, &values, bn2, h0);
    draft.notes.push(format!(
        "variance ratio is Var(S_n(X'))/b_n^2 with b_n^2 = {bn2} of the unblocked weights"
    ));
    Ok(draft.finish(cfg, start))
}

/// `S_{[nt]}/√n` against `A² σ² min(s, t)` for summable coefficients.
pub fn run_shortmem(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let model = CovarianceModel::from_chain(&cfg.chain)?;
    require_conditions(cfg, &model, &["SR"])?;
    let targets = oracle::limit_targets(&cfg.chain, Some(&cfg.family))?;
    let a = cfg.family.abs_sum()?;
    let eta = a * a * targets.sigma2;
    let grid = cfg.grid_or_unit();
    let mut draft = Draft::new(targets);
    let profile = weight_profile(&cfg.family, cfg.n, cfg.eps)?;
    draft.window = Some(WindowSummary::of(&profile));
    let horizons = grid_horizons(cfg.n, &grid)?;
    let target: Vec<Vec<f64>> = grid
        .iter()
        .map(|&s| grid.iter().map(|&t| eta * s.min(t)).collect())
        .collect();
    let rows = grid_weights(&profile, &horizons)?;
    let j_min = profile.j_min;
    drop(profile);
    let sums = simulate(cfg, j_min, &rows)?;
    drop(rows);
    let root_n = (cfg.n as f64).sqrt();
    let scaled: Vec<Vec<f64>> = sums.iter().map(|r| r.iter().map(|s| s / root_n).collect()).collect();
    let grid_cfg = ExperimentConfig { t_grid: grid.clone(), ..cfg.clone() };
    covariance_checks(
        &grid_cfg,
        &mut draft,
        &scaled,
        &target,
        cfg.tolerances.variance_rel,
        cfg.tolerances.covariance_rel,
    );
    draft.variance_target = Some(eta);
    if grid.last() == Some(&1.0) {
        let k = grid.len() - 1;
        draft.estimates.variance_ratio = Some(draft.estimates.covariance[k][k]);
    }
    draft.estimates.horizons = horizons;
    draft.notes.push(format!("target A^2 sigma2 = {eta} with A = {a}; normalization is sqrt(n)"));
    Ok(draft.finish(cfg, start))
}

struct PathMaxima {
    /// `S_i²` for `i = 1..=n`.
    partial_sq: Vec<f64>,
    max_partial_sq: f64,
    max_term_sq: f64,
    /// `max_{i≤m} |S_i|` for each key1 horizon `m`.
    key1_max_abs: Vec<f64>,
}

fn path_maxima(chain: &ChainSpec, n: usize, key1: &[usize], stream: Substream) -> Result<PathMaxima> {
    let len = key1.iter().copied().max().unwrap_or(0).max(n);
    let mut sampler = chain.sampler(stream)?;
    let mut xi = vec![0.0; len];
    sampler.fill(&mut xi);
    let mut partial_sq = Vec::with_capacity(n);
    let (mut s, mut max_s2, mut max_x2, mut max_abs) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut key1_max_abs = vec![0.0; key1.len()];
    for (i, x) in xi.iter().enumerate() {
        s += x;
        max_abs = max_abs.max(s.abs());
        if i < n {
            partial_sq.push(s * s);
            max_s2 = max_s2.max(s * s);
            max_x2 = max_x2.max(x * x);
        }
        for (slot, &m) in key1_max_abs.iter_mut().zip(key1) {
            if i + 1 == m {
                *slot = max_abs;
            }
        }
    }
    Ok(PathMaxima { partial_sq, max_partial_sq: max_s2, max_term_sq: max_x2, key1_max_abs })
}

const MAXIMAL_BATCH: usize = 256;

/// The maximal inequality
/// `E max_{i≤n} S_i² ≤ 2 E max_{i≤n} X_i² + 22 max_{i≤n} E S_i²`
/// and the boundedness of `E max_{i≤m} |S_i| / √m` over `m ∈ {n/4, n, 4n}`.
pub fn run_maximal(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let targets = oracle::limit_targets(&cfg.chain, Some(&cfg.family))?;
    let mut draft = Draft::new(targets);
    let n = cfg.n;
    let key1: Vec<usize> = if n >= 4 { vec![n / 4, n, 4 * n] } else { Vec::new() };
    let r_total = cfg.replicates;
    let mut sum_sq = vec![0.0f64; n];
    let mut sum_sq2 = vec![0.0f64; n];
    let mut max_s2 = Vec::with_capacity(r_total);
    let mut max_x2 = Vec::with_capacity(r_total);
    let mut key1_vals: Vec<Vec<f64>> = vec![Vec::with_capacity(r_total); key1.len()];
    // separate master so these paths never coincide with another mode's
    let master = mix64(cfg.seed ^ 0x6d61_7869_6d61_6c00);
    for batch_start in (0..r_total).step_by(MAXIMAL_BATCH) {
        let batch_end = (batch_start + MAXIMAL_BATCH).min(r_total);
        let results: Vec<PathMaxima> = (batch_start..batch_end)
            .into_par_iter()
            .map(|r| path_maxima(&cfg.chain, n, &key1, Substream::new(master, r as u64)))
            .collect::<Result<_>>()?;
        for pm in results {
            for ((s, s2), v) in sum_sq.iter_mut().zip(&mut sum_sq2).zip(&pm.partial_sq) {
                *s += v;
                *s2 += v * v;
            }
            max_s2.push(pm.max_partial_sq);
            max_x2.push(pm.max_term_sq);
            for (col, v) in key1_vals.iter_mut().zip(&pm.key1_max_abs) {
                col.push(*v);
            }
        }
    }
    let rf = r_total as f64;
    let (argmax, best) = sum_sq
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let m = best / rf;
    let var = (sum_sq2[argmax] / rf - m * m).max(0.0) * rf / (rf - 1.0);
    let max_mean = Estimate { value: m, se: (var / rf).sqrt() };
    let lhs = mean_estimate(&max_s2);
    let term = mean_estimate(&max_x2);
    let bound = Estimate {
        value: 2.0 * term.value + 22.0 * max_mean.value,
        se: (4.0 * term.se * term.se + 484.0 * max_mean.se * max_mean.se).sqrt(),
    };
    // the check compares lhs − bound with 0, so their errors combine
    let diff = Estimate {
        value: lhs.value - bound.value,
        se: (lhs.se * lhs.se + bound.se * bound.se).sqrt(),
    };
    draft
        .checks
        .push(Check::at_most("maximal_inequality", diff, 0.0, cfg.tolerances.maximal_margin_se));
    let key1_values: Vec<Estimate> = key1_vals
        .iter()
        .zip(&key1)
        .map(|(col, &h)| {
            let e = mean_estimate(col);
            let root = (h as f64).sqrt();
            Estimate { value: e.value / root, se: e.se / root }
        })
        .collect();
    if let Some(first) = key1_values.first().copied() {
        // worst ratio to the smallest horizon, with a delta-method error
        let (ratio, se) = key1_values[1..]
            .iter()
            .map(|v| {
                let q = v.value / first.value;
                let rel = ((v.se / v.value).powi(2) + (first.se / first.value).powi(2)).sqrt();
                (q, q * rel)
            })
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        draft.checks.push(Check::at_most(
            "key1_boundedness",
            Estimate { value: ratio, se },
            cfg.tolerances.key1_factor,
            0.0,
        ));
    }
    draft.estimates.maximal = Some(MaximalStats {
        max_partial_sq: lhs,
        max_term_sq: term,
        max_mean_partial_sq: max_mean,
        argmax: argmax + 1,
        bound,
        key1_horizons: key1,
        key1_values,
    });
    draft.samples = max_s2.iter().zip(&max_x2).map(|(a, b)| vec![*a, *b]).collect();
    draft.sample_grid = vec![0.0, 1.0];
    draft
        .notes
        .push("sample dump columns: t = 0 is max S_i^2, t = 1 is max X_i^2".into());
    Ok(draft.finish(cfg, start))
}
