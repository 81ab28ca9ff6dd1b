//! Partial sums of the linear process in weight form,
//! `S_m = Σ_j b_{m,j} ξ_j`, and normalized path values `W_n(t) = S_{[nt]}/b_n`.
//!
//! Sums always run in ascending `j`. Windows longer than
//! [`COMPENSATION_THRESHOLD`] use Kahan summation. The batch engine
//! evaluates several weight rows against one innovation path per replicate,
//! so every grid point of a replicate sees the same realization.

use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{weight_profile, CoefficientFamily, WeightProfile, COMPENSATION_THRESHOLD};
use crate::error::{invalid, Error, Result};
use crate::innovations::{
    ChainSpec, InnovationPath, InnovationSampler, MhForm, MhLanes, PowerForm, UnitForm, LANES,
};
use crate::rng::Substream;

#[inline(always)]
fn kahan_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let y = v - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

/// `Σ_k w_k x_k` in ascending order, compensated for long inputs.
pub fn dot_ordered(w: &[f64], x: &[f64]) -> f64 {
    assert_eq!(w.len(), x.len());
    if w.len() > COMPENSATION_THRESHOLD {
        let (mut s, mut c) = (0.0, 0.0);
        for (a, b) in w.iter().zip(x) {
            kahan_add(&mut s, &mut c, a * b);
        }
        s
    } else {
        let mut s = 0.0;
        for (a, b) in w.iter().zip(x) {
            s += a * b;
        }
        s
    }
}

/// `S_n = Σ_j b_{n,j} ξ_j` over the profile's window. The path must cover it.
pub fn partial_sum(weights: &WeightProfile, xi: &InnovationPath) -> Result<f64> {
    partial_sum_raw(&weights.weights, weights.j_min, xi)
}

fn partial_sum_raw(w: &[f64], j_min: i64, xi: &InnovationPath) -> Result<f64> {
    let j_max = j_min + w.len() as i64 - 1;
    if xi.j_min > j_min || xi.j_max() < j_max {
        return Err(Error::WindowMismatch {
            want_min: j_min,
            want_max: j_max,
            got_min: xi.j_min,
            got_max: xi.j_max(),
        });
    }
    let start = (j_min - xi.j_min) as usize;
    Ok(dot_ordered(w, &xi.values[start..start + w.len()]))
}

/// Coefficients of `S_n(X′)` for the blocked innovations `ξ_j + ξ_{j+1}`:
/// `Σ_j b_{n,j}(ξ_j + ξ_{j+1}) = Σ_j (b_{n,j} + b_{n,j−1}) ξ_j`.
///
/// The window grows by one on the right. `bn2` of the result is its own
/// retained squared mass; the tail bound is inherited through
/// `(x+y)² ≤ 2x² + 2y²`, which gives four times the parent's bound.
pub fn blocked_weights(profile: &WeightProfile) -> WeightProfile {
    let mut weights = Vec::with_capacity(profile.weights.len() + 1);
    let mut prev = 0.0;
    for &b in profile.weights.iter().chain(std::iter::once(&0.0)) {
        weights.push(b + prev);
        prev = b;
    }
    let bn2 = crate::coefficients::sum_squares(&weights);
    let tail_upper = 4.0 * profile.tail_upper;
    WeightProfile {
        family: profile.family,
        n: profile.n,
        j_min: profile.j_min,
        j_max: profile.j_max + 1,
        weights,
        bn2,
        tail_lower: 0.0,
        tail_upper,
        tail_fraction: if bn2 > 0.0 { tail_upper / bn2 } else { f64::INFINITY },
        eps: profile.eps,
    }
}

/// `m_i = [n t_i]` after validating the grid.
pub fn grid_horizons(n: usize, t_grid: &[f64]) -> Result<Vec<usize>> {
    if t_grid.is_empty() {
        return Err(invalid("time grid must not be empty"));
    }
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > prev && t <= 1.0) {
            return Err(invalid(format!(
                "time grid must be strictly increasing in (0, 1], got {t_grid:?}"
            )));
        }
        prev = t;
        // the nudge keeps e.g. 0.29 · 100 from flooring to 28
        let m = (n as f64 * t + 1e-9).floor() as usize;
        if m == 0 {
            return Err(invalid(format!("[n t] = 0 at t = {t} with n = {n}")));
        }
        out.push(m);
    }
    Ok(out)
}

/// Weight rows `b_{m_i, j}` for each grid horizon on the profile's window.
pub fn grid_weights(profile: &WeightProfile, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
    horizons.iter().map(|&m| profile.subhorizon_weights(m)).collect()
}

/// Several weight rows over one common window starting at `j_min`.
#[derive(Debug, Clone, Copy)]
pub struct WeightSet<'a> {
    pub j_min: i64,
    pub rows: &'a [Vec<f64>],
}

impl<'a> WeightSet<'a> {
    pub fn new(j_min: i64, rows: &'a [Vec<f64>]) -> Result<Self> {
        let len = rows.first().map(Vec::len).ok_or_else(|| invalid("no weight rows"))?;
        if len == 0 || rows.iter().any(|r| r.len() != len) {
            return Err(invalid("weight rows must be nonempty and of equal length"));
        }
        Ok(Self { j_min, rows })
    }

    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn j_max(&self) -> i64 {
        self.j_min + self.len() as i64 - 1
    }

    fn compensated(&self) -> bool {
        self.len() > COMPENSATION_THRESHOLD
    }
}

const CHUNK: usize = 4096;

/// Row sums for one replicate, generating the path chunk by chunk.
pub fn replicate_sums(chain: &ChainSpec, set: &WeightSet, stream: Substream) -> Result<Vec<f64>> {
    let mut sampler = chain.sampler(stream)?;
    let len = set.len();
    let comp = set.compensated();
    let g = set.rows.len();
    let mut sums = vec![0.0; g];
    let mut comps = vec![0.0; g];
    let mut buf = vec![0.0; CHUNK.min(len)];
    let mut start = 0;
    while start < len {
        let k = CHUNK.min(len - start);
        sampler.fill(&mut buf[..k]);
        for (r, row) in set.rows.iter().enumerate() {
            let (s, c) = (&mut sums[r], &mut comps[r]);
            let w = &row[start..start + k];
            if comp {
                for (a, b) in w.iter().zip(&buf[..k]) {
                    kahan_add(s, c, a * b);
                }
            } else {
                for (a, b) in w.iter().zip(&buf[..k]) {
                    *s += a * b;
                }
            }
        }
        start += k;
    }
    Ok(sums)
}

/// Row sums for replicates `range` of master seed `seed`, in replicate order.
///
/// Replicate `r` uses `Substream::new(seed, r)`; its result does not depend
/// on how replicates are grouped or scheduled. Runs on the current rayon pool.
pub fn batch_sums(chain: &ChainSpec, set: &WeightSet, seed: u64, range: Range<u64>) -> Result<Vec<Vec<f64>>> {
    let start = range.start;
    let count = range.end.saturating_sub(range.start);
    let batches = count.div_ceil(LANES as u64);
    let per_batch: Vec<Vec<Vec<f64>>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let first = start + b * LANES as u64;
            let live = (range.end - first).min(LANES as u64) as usize;
            match chain {
                ChainSpec::Mh(spec) => {
                    let streams: [Substream; LANES] =
                        std::array::from_fn(|l| Substream::new(seed, first + l as u64));
                    let lane_sums = mh_lane_sums(&PowerForm::of(spec), set, &streams);
                    Ok((0..live)
                        .map(|l| lane_sums.iter().map(|row| row[l]).collect())
                        .collect())
                }
                _ => (0..live as u64)
                    .map(|l| replicate_sums(chain, set, Substream::new(seed, first + l)))
                    .collect(),
            }
        })
        .collect::<Result<_>>()?;
    Ok(per_batch.into_iter().flatten().collect())
}

fn mh_lane_sums(form: &PowerForm, set: &WeightSet, streams: &[Substream; LANES]) -> Vec<[f64; LANES]> {
    if form.is_unit() {
        run_lanes(UnitForm, set, streams)
    } else {
        run_lanes(*form, set, streams)
    }
}

fn run_lanes<F: MhForm>(form: F, set: &WeightSet, streams: &[Substream; LANES]) -> Vec<[f64; LANES]> {
    let mut lanes = MhLanes::stationary(&form, streams);
    let mut sums = vec![[0.0; LANES]; set.rows.len()];
    let mut comps = vec![[0.0; LANES]; set.rows.len()];
    let comp = set.compensated();
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe {
                if comp {
                    lane_kernel_avx2::<F, true>(form, &mut lanes, set.rows, &mut sums, &mut comps);
                } else {
                    lane_kernel_avx2::<F, false>(form, &mut lanes, set.rows, &mut sums, &mut comps);
                }
            }
            return sums;
        }
    }
    if comp {
        lane_kernel::<F, true>(form, &mut lanes, set.rows, &mut sums, &mut comps);
    } else {
        lane_kernel::<F, false>(form, &mut lanes, set.rows, &mut sums, &mut comps);
    }
    sums
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn lane_kernel_avx2<F: MhForm, const COMP: bool>(
    form: F,
    lanes: &mut MhLanes,
    rows: &[Vec<f64>],
    sums: &mut [[f64; LANES]],
    comps: &mut [[f64; LANES]],
) {
    lane_kernel::<F, COMP>(form, lanes, rows, sums, comps)
}

#[inline(always)]
fn lane_kernel<F: MhForm, const COMP: bool>(
    form: F,
    lanes: &mut MhLanes,
    rows: &[Vec<f64>],
    sums: &mut [[f64; LANES]],
    comps: &mut [[f64; LANES]],
) {
    let len = rows[0].len();
    for j in 0..len {
        let mut gx = [0.0; LANES];
        for l in 0..LANES {
            gx[l] = form.g(lanes.x[l]);
        }
        for ((row, s), c) in rows.iter().zip(sums.iter_mut()).zip(comps.iter_mut()) {
            let w = row[j];
            for l in 0..LANES {
                let v = w * gx[l];
                if COMP {
                    kahan_add(&mut s[l], &mut c[l], v);
                } else {
                    s[l] += v;
                }
            }
        }
        lanes.advance(&form);
    }
}

/// What [`path_values`] needs: the process, the horizon, the time grid, the
/// truncation tolerance and the random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRequest {
    pub family: CoefficientFamily,
    pub chain: ChainSpec,
    pub n: usize,
    pub t_grid: Vec<f64>,
    pub eps: f64,
    pub seed: u64,
    pub replicate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub t_grid: Vec<f64>,
    /// `W_n(t_i) = S_{[n t_i]} / b_n`.
    pub values: Vec<f64>,
    /// Unnormalized `S_n`.
    pub s_n: f64,
    pub bn2: f64,
    pub j_min: i64,
    pub j_max: i64,
}

impl PathSample {
    /// CSV rows `replicate_id,t,w`.
    pub fn write_csv_rows<W: std::io::Write>(&self, replicate: u64, w: &mut csv::Writer<W>) -> Result<()> {
        for (t, v) in self.t_grid.iter().zip(&self.values) {
            w.write_record([replicate.to_string(), t.to_string(), format!("{v:.17e}")])?;
        }
        Ok(())
    }
}

/// One replicate of `(W_n(t_i))_i`. All `S_{m_i}` share one innovation path
/// drawn over the window sized for `n`, and all are divided by `b_n`.
///
/// Cost is `O(window × grid)`.
pub fn path_values(req: &PathRequest) -> Result<PathSample> {
    let horizons = grid_horizons(req.n, &req.t_grid)?;
    let profile = weight_profile(&req.family, req.n, req.eps)?;
    let mut rows = grid_weights(&profile, &horizons)?;
    let needs_full = *horizons.last().unwrap() != req.n;
    if needs_full {
        rows.push(profile.weights.clone());
    }
    let set = WeightSet::new(profile.j_min, &rows)?;
    let sums = replicate_sums(&req.chain, &set, Substream::new(req.seed, req.replicate))?;
    let bn = profile.bn();
    let s_n = *sums.last().unwrap();
    let values = sums[..horizons.len()].iter().map(|s| s / bn).collect();
    Ok(PathSample {
        t_grid: req.t_grid.clone(),
        values,
        s_n,
        bn2: profile.bn2,
        j_min: profile.j_min,
        j_max: profile.j_max,
    })
}
