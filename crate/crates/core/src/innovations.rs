//! Stationary samplers for the three reversible innovation chains.
//!
//! * Metropolis–Hastings on `[-1, 1]`: from `x` the chain stays put with
//!   probability `1 − |x|` and otherwise redraws from the base law `ν` with
//!   density `((a+1)/2)|x|^a`. The stationary law `π` has density
//!   `(a/2)|x|^(a−1)`, and `ξ = g(γ)` with `g(x) = sign(x)|x|^q`.
//! * Gaussian: a unit-variance AR(1) chain with lag-one correlation `r`,
//!   observed through a finite Hermite expansion `ξ = Σ c_l H_l(γ)`.
//! * Random walk on the cyclic group `Z_m` with a symmetric step law, observed
//!   through a real function given by its Fourier coefficients.
//!
//! All samplers start in the stationary law and are deterministic functions
//! of their [`Substream`].

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_core::RngCore;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{purpose, unit, unit_open, BoxMuller, LaneRng, Substream};

const SYMMETRY_TOL: f64 = 1e-12;
/// Spectral locations closer than this are treated as one atom.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Metropolis–Hastings chain

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MhRaw")]
pub struct MhChainSpec {
    a: f64,
    q: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MhRaw {
    a: f64,
    q: f64,
}

impl TryFrom<MhRaw> for MhChainSpec {
    type Error = Error;
    fn try_from(raw: MhRaw) -> Result<Self> {
        Self::new(raw.a, raw.q)
    }
}

impl MhChainSpec {
    /// `a` is the exponent of the base law, `q` the exponent of `g`.
    ///
    /// Besides `a, q > 0` this requires `2q + a > 1`, which is what makes
    /// `∫ g²(x)|x|^(-2) ν(dx)` finite and the covariances summable.
    pub fn new(a: f64, q: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid(format!("MH exponent a must be positive and finite, got {a}")));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(invalid(format!("MH exponent q must be positive and finite, got {q}")));
        }
        if 2.0 * q + a <= 1.0 {
            return Err(invalid(format!(
                "MH exponents need 2q + a > 1 for a finite asymptotic variance, got {}",
                2.0 * q + a
            )));
        }
        Ok(Self { a, q })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `θ = (a+1)/a`, the normalizer of `|x| ν(dx)`.
    pub fn theta(&self) -> f64 {
        (self.a + 1.0) / self.a
    }

    /// `s = 2q + a`, the exponent governing covariance decay `k^(-s)`.
    pub fn decay_exponent(&self) -> f64 {
        2.0 * self.q + self.a
    }

    pub fn g(&self, x: f64) -> f64 {
        PowerForm::of(self).g(x)
    }
}

/// Shape of one MH chain: how proposals and the initial state are drawn and
/// how `g` is applied. The lane kernel is generic over it so the `a = q = 1`
/// case compiles down to a square root and no `powf`.
pub(crate) trait MhForm: Copy {
    fn g(&self, x: f64) -> f64;
    fn proposal_magnitude(&self, u: f64) -> f64;
    fn initial_magnitude(&self, u: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct UnitForm;

impl MhForm for UnitForm {
    #[inline(always)]
    fn g(&self, x: f64) -> f64 {
        x
    }
    #[inline(always)]
    fn proposal_magnitude(&self, u: f64) -> f64 {
        u.sqrt()
    }
    #[inline(always)]
    fn initial_magnitude(&self, u: f64) -> f64 {
        u
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerForm {
    q: f64,
    a: f64,
    inv_a: f64,
    inv_a1: f64,
}

impl PowerForm {
    pub(crate) fn of(spec: &MhChainSpec) -> Self {
        Self {
            q: spec.q,
            a: spec.a,
            inv_a: 1.0 / spec.a,
            inv_a1: 1.0 / (spec.a + 1.0),
        }
    }

    pub(crate) fn is_unit(&self) -> bool {
        self.a == 1.0 && self.q == 1.0
    }
}

impl MhForm for PowerForm {
    #[inline(always)]
    fn g(&self, x: f64) -> f64 {
        if self.q == 1.0 {
            x
        } else {
            x.abs().powf(self.q).copysign(x)
        }
    }
    #[inline(always)]
    fn proposal_magnitude(&self, u: f64) -> f64 {
        if self.a == 1.0 {
            u.sqrt()
        } else {
            u.powf(self.inv_a1)
        }
    }
    #[inline(always)]
    fn initial_magnitude(&self, u: f64) -> f64 {
        if self.a == 1.0 {
            u
        } else {
            u.powf(self.inv_a)
        }
    }
}

/// Attach the sign carried by bit 0 of `r` to a nonnegative magnitude.
#[inline(always)]
fn signed(magnitude: f64, r: u64) -> f64 {
    f64::from_bits(magnitude.to_bits() | ((r & 1) << 63))
}

/// Draw from `ν` (proposal) given one 64-bit word.
#[inline(always)]
fn mh_proposal<F: MhForm>(form: &F, r: u64) -> f64 {
    signed(form.proposal_magnitude(unit_open(r)), r)
}

/// Scalar MH sampler. Each step consumes one word from the decision stream
/// and one from the proposal stream, jump or not.
#[derive(Debug, Clone)]
pub struct MhSampler {
    form: PowerForm,
    x: f64,
    decision: Xoshiro256PlusPlus,
    proposal: Xoshiro256PlusPlus,
}

impl MhSampler {
    /// Start from the stationary law `π`, using the first proposal word.
    pub fn stationary(spec: &MhChainSpec, stream: Substream) -> Self {
        let form = PowerForm::of(spec);
        let mut proposal = stream.generator(purpose::PROPOSAL);
        let r = proposal.next_u64();
        let x = signed(form.initial_magnitude(unit_open(r)), r);
        Self {
            form,
            x,
            decision: stream.generator(purpose::DECISION),
            proposal,
        }
    }

    /// Start from a fixed state `x0` with `|x0| ≤ 1`.
    pub fn from_state(spec: &MhChainSpec, x0: f64, stream: Substream) -> Result<Self> {
        if !(x0.abs() <= 1.0) {
            return Err(invalid(format!("MH state must lie in [-1, 1], got {x0}")));
        }
        Ok(Self {
            form: PowerForm::of(spec),
            x: x0,
            decision: stream.generator(purpose::DECISION),
            proposal: stream.generator(purpose::PROPOSAL),
        })
    }

    /// Current chain state `γ`.
    pub fn state(&self) -> f64 {
        self.x
    }

    /// Move one step without emitting anything.
    #[inline]
    pub fn advance(&mut self) {
        let r1 = self.decision.next_u64();
        let r2 = self.proposal.next_u64();
        if unit(r1) < self.x.abs() {
            self.x = mh_proposal(&self.form, r2);
        }
    }
}

/// `K = 8` MH chains advanced in lockstep, structure-of-arrays. Lane `l`
/// follows exactly the path of [`MhSampler::stationary`] on `streams[l]`.
#[derive(Debug, Clone)]
pub(crate) struct MhLanes {
    pub(crate) x: [f64; LANES],
    decision: LaneRng<LANES>,
    proposal: LaneRng<LANES>,
}

pub(crate) const LANES: usize = 8;

impl MhLanes {
    pub(crate) fn stationary<F: MhForm>(form: &F, streams: &[Substream; LANES]) -> Self {
        let decision =
            LaneRng::from_words(std::array::from_fn(|l| streams[l].state_words(purpose::DECISION)));
        let mut proposal =
            LaneRng::from_words(std::array::from_fn(|l| streams[l].state_words(purpose::PROPOSAL)));
        let mut r = [0u64; LANES];
        proposal.next(&mut r);
        let x = std::array::from_fn(|l| signed(form.initial_magnitude(unit_open(r[l])), r[l]));
        Self { x, decision, proposal }
    }

    #[inline(always)]
    pub(crate) fn advance<F: MhForm>(&mut self, form: &F) {
        let mut r1 = [0u64; LANES];
        let mut r2 = [0u64; LANES];
        self.decision.next(&mut r1);
        self.proposal.next(&mut r2);
        for l in 0..LANES {
            let candidate = mh_proposal(form, r2[l]);
            let jump = unit(r1[l]) < self.x[l].abs();
            self.x[l] = if jump { candidate } else { self.x[l] };
        }
    }
}

/// `E[g(γ_k) | γ_0 = x] = (1 − |x|)^k g(x)`.
pub fn mh_conditional_mean(spec: &MhChainSpec, x: f64, k: u32) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(invalid(format!("state must lie in [-1, 1], got {x}")));
    }
    Ok((1.0 - x.abs()).powi(k as i32) * spec.g(x))
}

// ---------------------------------------------------------------------------
// Gaussian chain

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRaw")]
pub struct GaussianChainSpec {
    r: f64,
    hermite: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianRaw {
    r: f64,
    hermite: Vec<f64>,
}

impl TryFrom<GaussianRaw> for GaussianChainSpec {
    type Error = Error;
    fn try_from(raw: GaussianRaw) -> Result<Self> {
        Self::new(raw.r, raw.hermite)
    }
}

/// Largest supported Hermite degree.
pub const MAX_HERMITE_DEGREE: usize = 30;

impl GaussianChainSpec {
    /// `hermite[l-1]` is the coefficient `c_l` of `H_l`, `l = 1..=J`.
    pub fn new(r: f64, hermite: Vec<f64>) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(invalid(format!("autocorrelation r must lie in (0, 1), got {r}")));
        }
        if hermite.is_empty() || hermite.len() > MAX_HERMITE_DEGREE {
            return Err(invalid(format!(
                "need between 1 and {MAX_HERMITE_DEGREE} Hermite coefficients, got {}",
                hermite.len()
            )));
        }
        if hermite.iter().any(|c| !c.is_finite()) {
            return Err(invalid("Hermite coefficients must be finite"));
        }
        if hermite.iter().all(|&c| c == 0.0) {
            return Err(invalid("at least one Hermite coefficient must be nonzero"));
        }
        Ok(Self { r, hermite })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn hermite(&self) -> &[f64] {
        &self.hermite
    }

    /// `Σ_l c_l H_l(x)`.
    pub fn xi(&self, x: f64) -> f64 {
        let mut h_prev = 1.0;
        let mut h = x;
        let mut acc = self.hermite[0] * h;
        for (l, &c) in self.hermite.iter().enumerate().skip(1) {
            let next = x * h - l as f64 * h_prev;
            h_prev = h;
            h = next;
            acc += c * h;
        }
        acc
    }
}

/// Probabilists' Hermite polynomial `H_l(x)`.
pub fn hermite(l: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if l == 0 {
        return prev;
    }
    for k in 1..l {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone)]
pub struct GaussianSampler {
    spec: GaussianChainSpec,
    gamma: f64,
    innovation_scale: f64,
    normals: BoxMuller,
    rng: Xoshiro256PlusPlus,
}

impl GaussianSampler {
    pub fn stationary(spec: &GaussianChainSpec, stream: Substream) -> Self {
        let mut rng = stream.generator(purpose::GENERAL);
        let mut normals = BoxMuller::new();
        let gamma = normals.sample(&mut rng);
        Self {
            spec: spec.clone(),
            gamma,
            innovation_scale: (1.0 - spec.r * spec.r).sqrt(),
            normals,
            rng,
        }
    }

    pub fn state(&self) -> f64 {
        self.gamma
    }
}

// ---------------------------------------------------------------------------
// Random walk on Z_m

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub index: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupRaw", into = "GroupRaw")]
pub struct GroupWalkSpec {
    m: usize,
    step_pmf: Vec<f64>,
    fourier: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupRaw {
    m: usize,
    step_pmf: Vec<f64>,
    fourier: Vec<FourierTerm>,
}

impl TryFrom<GroupRaw> for GroupWalkSpec {
    type Error = Error;
    fn try_from(raw: GroupRaw) -> Result<Self> {
        Self::from_terms(raw.m, raw.step_pmf, &raw.fourier)
    }
}

impl From<GroupWalkSpec> for GroupRaw {
    fn from(spec: GroupWalkSpec) -> Self {
        let fourier = spec
            .fourier
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(index, c)| FourierTerm { index, re: c.re, im: c.im })
            .collect();
        Self { m: spec.m, step_pmf: spec.step_pmf, fourier }
    }
}

impl GroupWalkSpec {
    /// `fourier[j]` is `f̂(j)`, `j = 0..m`.
    pub fn new(m: usize, step_pmf: Vec<f64>, fourier: Vec<Complex64>) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("group modulus must be at least 2, got {m}")));
        }
        if step_pmf.len() != m || fourier.len() != m {
            return Err(invalid(format!(
                "step_pmf and Fourier vectors must have length m = {m}"
            )));
        }
        if step_pmf.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(invalid("step probabilities must be finite and nonnegative"));
        }
        let total: f64 = step_pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("step probabilities sum to {total}, not 1")));
        }
        for x in 1..m {
            if (step_pmf[x] - step_pmf[m - x]).abs() > SYMMETRY_TOL {
                return Err(invalid(format!("step law is not symmetric at x = {x}")));
            }
        }
        if fourier.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(invalid("Fourier coefficients must be finite"));
        }
        if fourier[0].norm() > 0.0 {
            return Err(invalid("f̂(0) must vanish so that f has zero mean"));
        }
        let scale = fourier.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(invalid("observable f must not vanish identically"));
        }
        for j in 1..m {
            if (fourier[j] - fourier[m - j].conj()).norm() > SYMMETRY_TOL * scale {
                return Err(invalid(format!(
                    "Fourier coefficients are not conjugate-symmetric at j = {j}; f would not be real"
                )));
            }
        }
        Ok(Self { m, step_pmf, fourier })
    }

    /// Build from a sparse list of Fourier terms; missing indices are zero.
    pub fn from_terms(m: usize, step_pmf: Vec<f64>, terms: &[FourierTerm]) -> Result<Self> {
        let mut fourier = vec![Complex64::new(0.0, 0.0); m];
        for t in terms {
            if t.index >= m {
                return Err(invalid(format!("Fourier index {} out of range for m = {m}", t.index)));
            }
            if fourier[t.index].norm() > 0.0 {
                return Err(invalid(format!("Fourier index {} given twice", t.index)));
            }
            fourier[t.index] = Complex64::new(t.re, t.im);
        }
        Self::new(m, step_pmf, fourier)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn step_pmf(&self) -> &[f64] {
        &self.step_pmf
    }

    pub fn fourier(&self) -> &[Complex64] {
        &self.fourier
    }

    fn cos_table(&self) -> Vec<f64> {
        (0..self.m).map(|k| (TAU * k as f64 / self.m as f64).cos()).collect()
    }

    /// `ν̂(j) = Σ_x ν(x) cos(2πjx/m)`.
    pub fn nu_hat(&self, j: usize) -> f64 {
        let cos = self.cos_table();
        (0..self.m)
            .map(|x| self.step_pmf[x] * cos[(j * x) % self.m])
            .sum()
    }

    /// `f(x) = Σ_j f̂(j) e^{2πijx/m}` tabulated over `Z_m`.
    pub fn f_table(&self) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|x| {
                (0..m)
                    .map(|j| {
                        let angle = TAU * ((j * x) % m) as f64 / m as f64;
                        (self.fourier[j] * Complex64::from_polar(1.0, angle)).re
                    })
                    .sum()
            })
            .collect()
    }

    /// Every nonzero frequency `j` with `ν̂(j) = 1` breaks ergodicity.
    pub fn is_ergodic(&self) -> bool {
        (1..self.m).all(|j| self.nu_hat(j) < 1.0 - ATOM_MERGE_TOL)
    }
}

#[derive(Debug, Clone)]
pub struct GroupWalkSampler {
    table: Vec<f64>,
    position: usize,
    steps: WeightedIndex<f64>,
    rng: Xoshiro256PlusPlus,
}

impl GroupWalkSampler {
    pub fn stationary(spec: &GroupWalkSpec, stream: Substream) -> Result<Self> {
        if !spec.is_ergodic() {
            return Err(Error::NonErgodic(
                "step law leaves a nontrivial character invariant (ν̂(j) = 1 for some j ≠ 0)".into(),
            ));
        }
        let mut rng = stream.generator(purpose::GENERAL);
        let position = rng.random_range(0..spec.m);
        let steps = WeightedIndex::new(&spec.step_pmf)
            .map_err(|e| invalid(format!("step law: {e}")))?;
        Ok(Self { table: spec.f_table(), position, steps, rng })
    }

    pub fn state(&self) -> usize {
        self.position
    }
}

// ---------------------------------------------------------------------------
// Spectral atoms

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralAtoms {
    pub atoms: Vec<Atom>,
}

impl SpectralAtoms {
    /// Sort by location and merge atoms closer than [`ATOM_MERGE_TOL`].
    pub fn new(mut atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if !(a.t.abs() <= 1.0 + ATOM_MERGE_TOL) || !(a.w >= 0.0) || !a.w.is_finite() {
                return Err(invalid(format!("invalid spectral atom ({}, {})", a.t, a.w)));
            }
        }
        atoms.retain(|a| a.w > 0.0);
        atoms.sort_by(|x, y| x.t.total_cmp(&y.t));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if (a.t - last.t).abs() <= ATOM_MERGE_TOL => last.w += a.w,
                _ => merged.push(Atom { t: a.t.clamp(-1.0, 1.0), w: a.w }),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// True if some atom sits at `t = 1`.
    pub fn has_unit_atom(&self) -> bool {
        self.atoms.iter().any(|a| a.t >= 1.0 - ATOM_MERGE_TOL)
    }
}

/// Atoms `(ν̂(j), |f̂(j)|²)` of the spectral measure of the walk with respect
/// to `f`.
pub fn spectral_atoms(spec: &GroupWalkSpec) -> Result<SpectralAtoms> {
    let atoms = (1..spec.m)
        .filter_map(|j| {
            let w = spec.fourier[j].norm_sqr();
            (w > 0.0).then(|| Atom { t: spec.nu_hat(j), w })
        })
        .collect();
    let atoms = SpectralAtoms::new(atoms)?;
    if atoms.has_unit_atom() {
        return Err(Error::NonErgodic(
            "observable has spectral mass at t = 1 (invariant component)".into(),
        ));
    }
    Ok(atoms)
}

// ---------------------------------------------------------------------------
// Uniform interface

/// One of the three chains, tagged by `"kind"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainSpec {
    Mh(MhChainSpec),
    Gaussian(GaussianChainSpec),
    Group(GroupWalkSpec),
}

impl ChainSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ChainSpec::Mh(_) => "mh",
            ChainSpec::Gaussian(_) => "gaussian",
            ChainSpec::Group(_) => "group",
        }
    }

    /// A stationary sampler on the given stream.
    pub fn sampler(&self, stream: Substream) -> Result<ChainSampler> {
        Ok(match self {
            ChainSpec::Mh(s) => ChainSampler::Mh(MhSampler::stationary(s, stream)),
            ChainSpec::Gaussian(s) => ChainSampler::Gaussian(GaussianSampler::stationary(s, stream)),
            ChainSpec::Group(s) => ChainSampler::Group(GroupWalkSampler::stationary(s, stream)?),
        })
    }

    pub fn sample_path(&self, j_min: i64, j_max: i64, stream: Substream) -> Result<InnovationPath> {
        let len = path_len(j_min, j_max)?;
        let mut values = vec![0.0; len];
        self.sampler(stream)?.fill(&mut values);
        Ok(InnovationPath { j_min, values })
    }
}

/// Something that emits consecutive innovations `ξ_j, ξ_{j+1}, …`.
pub trait InnovationSampler {
    fn fill(&mut self, out: &mut [f64]);
}

impl InnovationSampler for MhSampler {
    fn fill(&mut self, out: &mut [f64]) {
        for o in out {
            *o = self.form.g(self.x);
            self.advance();
        }
    }
}

impl InnovationSampler for GaussianSampler {
    fn fill(&mut self, out: &mut [f64]) {
        for o in out {
            *o = self.spec.xi(self.gamma);
            let z = self.normals.sample(&mut self.rng);
            self.gamma = self.spec.r * self.gamma + self.innovation_scale * z;
        }
    }
}

impl InnovationSampler for GroupWalkSampler {
    fn fill(&mut self, out: &mut [f64]) {
        let m = self.table.len();
        for o in out {
            *o = self.table[self.position];
            let step = self.steps.sample(&mut self.rng);
            self.position = (self.position + step) % m;
        }
    }
}

#[derive(Debug, Clone)]
pub enum ChainSampler {
    Mh(MhSampler),
    Gaussian(GaussianSampler),
    Group(GroupWalkSampler),
}

impl InnovationSampler for ChainSampler {
    fn fill(&mut self, out: &mut [f64]) {
        match self {
            ChainSampler::Mh(s) => s.fill(out),
            ChainSampler::Gaussian(s) => s.fill(out),
            ChainSampler::Group(s) => s.fill(out),
        }
    }
}

/// Innovations `ξ_j` for `j = j_min, …, j_min + len − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPath {
    pub j_min: i64,
    pub values: Vec<f64>,
}

impl InnovationPath {
    pub fn j_max(&self) -> i64 {
        self.j_min + self.values.len() as i64 - 1
    }

    pub fn get(&self, j: i64) -> Option<f64> {
        let idx = usize::try_from(j - self.j_min).ok()?;
        self.values.get(idx).copied()
    }
}

pub(crate) fn path_len(j_min: i64, j_max: i64) -> Result<usize> {
    if j_min > j_max {
        return Err(Error::InvalidRange { j_min, j_max });
    }
    usize::try_from(j_max - j_min + 1).map_err(|_| Error::InvalidRange { j_min, j_max })
}

pub fn sample_mh_path(spec: &MhChainSpec, j_min: i64, j_max: i64, stream: Substream) -> Result<InnovationPath> {
    ChainSpec::Mh(*spec).sample_path(j_min, j_max, stream)
}

pub fn sample_gaussian_path(
    spec: &GaussianChainSpec,
    j_min: i64,
    j_max: i64,
    stream: Substream,
) -> Result<InnovationPath> {
    let len = path_len(j_min, j_max)?;
    let mut values = vec![0.0; len];
    GaussianSampler::stationary(spec, stream).fill(&mut values);
    Ok(InnovationPath { j_min, values })
}

pub fn sample_group_walk_path(
    spec: &GroupWalkSpec,
    j_min: i64,
    j_max: i64,
    stream: Substream,
) -> Result<InnovationPath> {
    let len = path_len(j_min, j_max)?;
    let mut values = vec![0.0; len];
    GroupWalkSampler::stationary(spec, stream)?.fill(&mut values);
    Ok(InnovationPath { j_min, values })
}
