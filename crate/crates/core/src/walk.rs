//! Streaming simulation of `S_k = X_1 + ... + X_k`.
//!
//! Each step computes `Y_k = <X_k, S_{k-1}>` before `X_k` is added, and keeps
//! `T_k = sum |X_i|^2` and `Q_k = 2 sum Y_i` alongside the directly summed
//! `|S_k|^2`. The identity `|S_k|^2 = T_k + Q_k` is checked at every step.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::PointCloud;
use crate::models::{draw_axis_jump, fill_dense, Increment, ModelSpec};
use crate::sampling::{draw_radial, stable_scale_for_pareto, Stream};

pub const DEFAULT_GRID: usize = 64;
/// Memory ceiling for snapshots plus traces of a single path.
pub const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;
/// Relative tolerance for `|S_k|^2 = T_k + Q_k`, scaled by `max(1, T_k)`.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

/// Per-box occupancy after `n` axis jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub mu1: u64,
    pub mu2: u64,
    pub mu_ge3: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub n: usize,
    pub d: usize,
    pub norm_sq_final: f64,
    pub t_final: f64,
    pub q_final: f64,
    /// `max_k | |S_k|^2 / n - k / n |`.
    pub sup_deviation: f64,
    pub max_step_norm: f64,
    /// `(1/d) sum_{i=1}^{n-1} |S_i|^2`, the conditional variance sum of the `Y_i`.
    pub conditional_variance_sum: f64,
    pub occupancy: Option<OccupancyStats>,
}

/// A complete path: grid snapshots scaled by `1/sqrt(n)` and full traces.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub n: usize,
    pub d: usize,
    pub grid: Vec<usize>,
    pub snapshots: PointCloud,
    pub norm_sq_trace: Vec<f64>,
    pub t_trace: Vec<f64>,
    pub q_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkRun {
    pub path: WalkPath,
    pub summary: WalkSummary,
}

/// Grid `floor(j n / g)`, `j = 0..=g`, with repeats removed.
pub fn grid_points(n: usize, grid_size: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..=grid_size)
        .map(|j| ((j as u128 * n as u128) / grid_size as u128) as usize)
        .collect();
    g.dedup();
    g
}

/// Bytes needed to store snapshots and traces of one path.
pub fn path_bytes(n: usize, d: usize, grid_size: usize) -> u64 {
    let snaps = grid_points(n, grid_size).len() as u64 * d as u64;
    (snaps + 3 * (n as u64 + 1)) * 8
}

enum Coords {
    Dense(Vec<f64>),
    /// Box index -> (coordinate value, ball count).
    Sparse(SparseCoords),
}

enum SparseCoords {
    Table(Vec<(f64, u32)>),
    Map(HashMap<usize, (f64, u32)>),
}

impl SparseCoords {
    fn new(n: usize, d: usize) -> Self {
        // Dense tables are cheap to reset only when d is comparable to n.
        if d <= 16 * n + 1024 {
            SparseCoords::Table(vec![(0.0, 0); d])
        } else {
            SparseCoords::Map(HashMap::with_capacity(n.min(1 << 16)))
        }
    }

    #[inline]
    fn entry(&mut self, axis: usize) -> &mut (f64, u32) {
        match self {
            SparseCoords::Table(t) => &mut t[axis],
            SparseCoords::Map(m) => m.entry(axis).or_insert((0.0, 0)),
        }
    }

    fn occupancy(&self) -> OccupancyStats {
        let mut occ = OccupancyStats::default();
        let mut tally = |c: u32| match c {
            0 => {}
            1 => occ.mu1 += 1,
            2 => occ.mu2 += 1,
            _ => occ.mu_ge3 += 1,
        };
        match self {
            SparseCoords::Table(t) => t.iter().for_each(|e| tally(e.1)),
            SparseCoords::Map(m) => m.values().for_each(|e| tally(e.1)),
        }
        occ
    }

    fn write_dense(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self {
            SparseCoords::Table(t) => {
                for (o, e) in out.iter_mut().zip(t) {
                    *o = e.0;
                }
            }
            SparseCoords::Map(m) => {
                for (&k, e) in m {
                    out[k] = e.0;
                }
            }
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            SparseCoords::Table(t) => t.iter().map(|e| e.0 * e.0).sum(),
            SparseCoords::Map(m) => {
                let mut keys: Vec<_> = m.keys().copied().collect();
                keys.sort_unstable();
                keys.iter().map(|k| m[k].0 * m[k].0).sum()
            }
        }
    }
}

/// Adds `x` to `s` and returns `(<x, s_old>, |x|^2, |s_new|^2)`.
#[inline]
fn dense_step(s: &mut [f64], x: &[f64]) -> (f64, f64, f64) {
    debug_assert_eq!(s.len(), x.len());
    let mut y = [0.0f64; 4];
    let mut xx = [0.0f64; 4];
    let mut ss = [0.0f64; 4];
    let mut sc = s.chunks_exact_mut(4);
    let mut xc = x.chunks_exact(4);
    for (sv, xv) in (&mut sc).zip(&mut xc) {
        for l in 0..4 {
            let xi = xv[l];
            y[l] += xi * sv[l];
            xx[l] += xi * xi;
            let ns = sv[l] + xi;
            sv[l] = ns;
            ss[l] += ns * ns;
        }
    }
    let (mut yt, mut xt, mut st) = (0.0, 0.0, 0.0);
    for (sv, &xi) in sc.into_remainder().iter_mut().zip(xc.remainder()) {
        yt += xi * *sv;
        xt += xi * xi;
        *sv += xi;
        st += *sv * *sv;
    }
    (
        (y[0] + y[1]) + (y[2] + y[3]) + yt,
        (xx[0] + xx[1]) + (xx[2] + xx[3]) + xt,
        (ss[0] + ss[1]) + (ss[2] + ss[3]) + st,
    )
}

/// Streaming statistics shared by every engine.
#[derive(Debug, Clone)]
struct Tally {
    n: usize,
    d: usize,
    k: usize,
    t: f64,
    q: f64,
    norm: f64,
    sup_dev: f64,
    d_sum: f64,
    max_step_sq: f64,
}

impl Tally {
    fn new(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            k: 0,
            t: 0.0,
            q: 0.0,
            norm: 0.0,
            sup_dev: 0.0,
            d_sum: 0.0,
            max_step_sq: 0.0,
        }
    }

    /// Records one step. `direct` is `|S_k|^2` summed from coordinates when
    /// available; otherwise the recurrence value is used.
    #[inline]
    fn step(&mut self, y: f64, xx: f64, direct: Option<f64>) -> Result<()> {
        if self.k >= 1 {
            // S_k for k = 1..n-1 enters the conditional variance sum.
            self.d_sum += self.norm;
        }
        self.k += 1;
        self.t += xx;
        self.q += 2.0 * y;
        let recurrence = self.norm + 2.0 * y + xx;
        self.norm = match direct {
            Some(v) => {
                let residual = (v - (self.t + self.q)).abs();
                if residual > DECOMPOSITION_TOL * self.t.max(1.0) {
                    return Err(Error::Decomposition {
                        step: self.k,
                        residual,
                    });
                }
                v
            }
            None => recurrence.max(0.0),
        };
        self.max_step_sq = self.max_step_sq.max(xx);
        let nf = self.n as f64;
        self.sup_dev = self.sup_dev.max((self.norm / nf - self.k as f64 / nf).abs());
        Ok(())
    }

    fn summary(&self, occupancy: Option<OccupancyStats>) -> WalkSummary {
        WalkSummary {
            n: self.n,
            d: self.d,
            norm_sq_final: self.norm,
            t_final: self.t,
            q_final: self.q,
            sup_deviation: self.sup_dev,
            max_step_norm: self.max_step_sq.sqrt(),
            conditional_variance_sum: self.d_sum / self.d as f64,
            occupancy,
        }
    }
}

struct Traces {
    grid: Vec<usize>,
    next: usize,
    snapshots: Vec<f64>,
    norm: Vec<f64>,
    t: Vec<f64>,
    q: Vec<f64>,
    scratch: Vec<f64>,
}

/// Builds a path from increments supplied one at a time.
///
/// [`run_walk`] drives this from a model; tests drive it with hand-built or
/// stored increments.
pub struct PathRecorder {
    tally: Tally,
    coords: Coords,
    traces: Traces,
}

impl PathRecorder {
    pub fn new(n: usize, d: usize, grid_size: usize, sparse: bool) -> Result<Self> {
        Self::with_budget(n, d, grid_size, sparse, DEFAULT_MEMORY_BUDGET)
    }

    pub fn with_budget(n: usize, d: usize, grid_size: usize, sparse: bool, budget: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if grid_size == 0 {
            return Err(Error::param("grid size must be at least 1"));
        }
        let requested = path_bytes(n, d, grid_size);
        if requested > budget {
            return Err(Error::Capacity { requested, budget });
        }
        let grid = grid_points(n, grid_size);
        let mut traces = Traces {
            snapshots: Vec::with_capacity(grid.len() * d),
            grid,
            next: 0,
            norm: Vec::with_capacity(n + 1),
            t: Vec::with_capacity(n + 1),
            q: Vec::with_capacity(n + 1),
            scratch: if sparse { vec![0.0; d] } else { Vec::new() },
        };
        traces.norm.push(0.0);
        traces.t.push(0.0);
        traces.q.push(0.0);
        // k = 0 is always the first grid point.
        traces.snapshots.extend(std::iter::repeat(0.0).take(d));
        traces.next = 1;
        let coords = if sparse {
            Coords::Sparse(SparseCoords::new(n, d))
        } else {
            Coords::Dense(vec![0.0; d])
        };
        Ok(Self {
            tally: Tally::new(n, d),
            coords,
            traces,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.tally.k
    }

    fn check_room(&self) -> Result<()> {
        if self.tally.k >= self.tally.n {
            return Err(Error::Contract(format!("walk already has {} steps", self.tally.n)));
        }
        Ok(())
    }

    pub fn push_dense(&mut self, x: &[f64]) -> Result<()> {
        self.check_room()?;
        let Coords::Dense(s) = &mut self.coords else {
            return Err(Error::Contract("dense increment pushed to a sparse walk".into()));
        };
        if x.len() != s.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                found: x.len(),
            });
        }
        let (y, xx, norm) = dense_step(s, x);
        self.tally.step(y, xx, Some(norm))?;
        self.after_step()
    }

    pub fn push_sparse(&mut self, axis: usize, value: f64) -> Result<()> {
        self.check_room()?;
        let d = self.tally.d;
        let Coords::Sparse(sc) = &mut self.coords else {
            return Err(Error::Contract("sparse increment pushed to a dense walk".into()));
        };
        if axis >= d {
            return Err(Error::DimensionMismatch { expected: d, found: axis });
        }
        let e = sc.entry(axis);
        let y = value * e.0;
        e.0 += value;
        e.1 += 1;
        self.tally.step(y, value * value, None)?;
        self.after_step()
    }

    pub fn push(&mut self, inc: &Increment) -> Result<()> {
        match inc {
            Increment::Dense(x) => self.push_dense(x),
            Increment::Sparse { axis, value } => self.push_sparse(*axis, *value),
        }
    }

    fn after_step(&mut self) -> Result<()> {
        let k = self.tally.k;
        let tr = &mut self.traces;
        tr.norm.push(self.tally.norm);
        tr.t.push(self.tally.t);
        tr.q.push(self.tally.q);
        if tr.next < tr.grid.len() && tr.grid[tr.next] == k {
            tr.next += 1;
            let scale = 1.0 / (self.tally.n as f64).sqrt();
            match &self.coords {
                Coords::Dense(s) => tr.snapshots.extend(s.iter().map(|v| v * scale)),
                Coords::Sparse(sc) => {
                    // Independent check of the sparse recurrence at grid points.
                    let direct = sc.norm_sq();
                    let residual = (direct - (self.tally.t + self.tally.q)).abs();
                    if residual > DECOMPOSITION_TOL * self.tally.t.max(1.0) {
                        return Err(Error::Decomposition { step: k, residual });
                    }
                    sc.write_dense(&mut tr.scratch);
                    tr.snapshots.extend(tr.scratch.iter().map(|v| v * scale));
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<WalkRun> {
        if self.tally.k != self.tally.n {
            return Err(Error::Contract(format!(
                "walk finished after {} of {} steps",
                self.tally.k, self.tally.n
            )));
        }
        let occupancy = match &self.coords {
            Coords::Sparse(sc) => Some(sc.occupancy()),
            Coords::Dense(_) => None,
        };
        let summary = self.tally.summary(occupancy);
        let tr = self.traces;
        let path = WalkPath {
            n: self.tally.n,
            d: self.tally.d,
            snapshots: PointCloud::from_flat(self.tally.d, tr.snapshots, "walk")?,
            grid: tr.grid,
            norm_sq_trace: tr.norm,
            t_trace: tr.t,
            q_trace: tr.q,
        };
        Ok(WalkRun { path, summary })
    }
}

/// Simulates a full path with snapshots on a `grid_size` grid.
pub fn run_walk(model: &ModelSpec, n: usize, d: usize, grid_size: usize, rng: &mut Stream) -> Result<WalkRun> {
    run_walk_with_budget(model, n, d, grid_size, DEFAULT_MEMORY_BUDGET, rng)
}

pub fn run_walk_with_budget(
    model: &ModelSpec,
    n: usize,
    d: usize,
    grid_size: usize,
    budget: u64,
    rng: &mut Stream,
) -> Result<WalkRun> {
    model.validate(d)?;
    let mut rec = PathRecorder::with_budget(n, d, grid_size, model.is_sparse(), budget)?;
    match model {
        ModelSpec::AxisJumps { radial } => {
            for _ in 0..n {
                let (axis, value) = draw_axis_jump(radial, d, rng);
                rec.push_sparse(axis, value)?;
            }
        }
        _ => {
            let mut buf = vec![0.0; d];
            for _ in 0..n {
                fill_dense(model, &mut buf, rng);
                rec.push_dense(&buf)?;
            }
        }
    }
    rec.finish()
}

/// Reusable buffers for summary-only simulation on one worker.
#[derive(Default)]
pub struct WalkScratch {
    s: Vec<f64>,
    x: Vec<f64>,
}

/// Summary statistics only, without traces or snapshots.
///
/// Rotation-invariant increments use the exact radial chain: given
/// `|S_{k-1}|`, the projection `<U_k, S_{k-1}>` is `|S_{k-1}|` times the first
/// coordinate of a uniform unit vector, so `|S_k|^2`, `T_k` and `Q_k` follow
/// jointly in law from `O(1)` work per step.
pub fn simulate_summary(
    model: &ModelSpec,
    n: usize,
    d: usize,
    rng: &mut Stream,
    scratch: &mut WalkScratch,
) -> Result<WalkSummary> {
    match model {
        ModelSpec::RotInvariant { radial } => {
            model.validate(d)?;
            let mut tally = Tally::new(n, d);
            let chi = if d > 1 {
                Some(ChiSquared::new((d - 1) as f64).map_err(|e| Error::param(e.to_string()))?)
            } else {
                None
            };
            for _ in 0..n {
                let r = draw_radial(radial, rng);
                let u = match &chi {
                    Some(chi) => {
                        let z: f64 = rng.sample(StandardNormal);
                        let rest = chi.sample(rng);
                        z / (z * z + rest).sqrt()
                    }
                    None => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                let y = r * tally.norm.sqrt() * u;
                tally.step(y, r * r, None)?;
            }
            Ok(tally.summary(None))
        }
        _ => simulate_summary_coordinates(model, n, d, rng, scratch),
    }
}

/// Summary-only simulation that always tracks every coordinate.
pub fn simulate_summary_coordinates(
    model: &ModelSpec,
    n: usize,
    d: usize,
    rng: &mut Stream,
    scratch: &mut WalkScratch,
) -> Result<WalkSummary> {
    model.validate(d)?;
    let mut tally = Tally::new(n, d);
    match model {
        ModelSpec::AxisJumps { radial } => {
            let mut sc = SparseCoords::new(n, d);
            for _ in 0..n {
                let (axis, value) = draw_axis_jump(radial, d, rng);
                let e = sc.entry(axis);
                let y = value * e.0;
                e.0 += value;
                e.1 += 1;
                tally.step(y, value * value, None)?;
            }
            let direct = sc.norm_sq();
            let residual = (direct - (tally.t + tally.q)).abs();
            if residual > DECOMPOSITION_TOL * tally.t.max(1.0) {
                return Err(Error::Decomposition { step: n, residual });
            }
            Ok(tally.summary(Some(sc.occupancy())))
        }
        _ => {
            scratch.s.clear();
            scratch.s.resize(d, 0.0);
            scratch.x.resize(d, 0.0);
            for _ in 0..n {
                fill_dense(model, &mut scratch.x, rng);
                let (y, xx, norm) = dense_step(&mut scratch.s, &scratch.x);
                tally.step(y, xx, Some(norm))?;
            }
            Ok(tally.summary(None))
        }
    }
}

/// `max_k | |S_k|^2 / n - k / n |` over the full trace.
pub fn sup_norm_deviation(path: &WalkPath) -> f64 {
    if path.n == 0 {
        return 0.0;
    }
    let n = path.n as f64;
    path.norm_sq_trace
        .iter()
        .enumerate()
        .map(|(k, v)| (v / n - k as f64 / n).abs())
        .fold(0.0, f64::max)
}

/// Normalizer `tau` for the diagonal sum `T_n - n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagonalScale {
    /// `sqrt(n)`, for `R^2` with finite variance.
    Sqrt,
    /// `n^(1/alpha) sigma(alpha)`, radial `R^2` in a stable domain.
    StableRadial { alpha: f64 },
    /// `d^-1 (n d)^(1/alpha) sigma(alpha)`, components in a stable domain.
    StableComponents { alpha: f64 },
}

impl DiagonalScale {
    pub fn tau(&self, n: usize, d: usize) -> Result<f64> {
        let (nf, df) = (n as f64, d as f64);
        Ok(match *self {
            DiagonalScale::Sqrt => nf.sqrt(),
            DiagonalScale::StableRadial { alpha } => nf.powf(1.0 / alpha) * stable_scale_for_pareto(alpha)?,
            DiagonalScale::StableComponents { alpha } => {
                (nf * df).powf(1.0 / alpha) / df * stable_scale_for_pareto(alpha)?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedStats {
    /// `(|S_n|^2 - n) / sqrt(2 n^2 / d)`.
    pub clt_stat: f64,
    /// `(T_n - n) / tau`.
    pub t_stat: f64,
    /// `Q_n / sqrt(2 n^2 / d)`.
    pub q_stat: f64,
    /// `(|S_n|^2 - n) / tau`.
    pub norm_over_tau: f64,
}

pub fn off_diagonal_scale(n: usize, d: usize) -> f64 {
    (2.0 * (n as f64).powi(2) / d as f64).sqrt()
}

pub fn normalized_statistics(summary: &WalkSummary, scale: DiagonalScale) -> Result<NormalizedStats> {
    let (n, d) = (summary.n, summary.d);
    if n < 2 {
        return Err(Error::Domain(format!("normalization undefined for n = {n} < 2")));
    }
    let off = off_diagonal_scale(n, d);
    let tau = scale.tau(n, d)?;
    let centered = summary.norm_sq_final - n as f64;
    Ok(NormalizedStats {
        clt_stat: centered / off,
        t_stat: (summary.t_final - n as f64) / tau,
        q_stat: summary.q_final / off,
        norm_over_tau: centered / tau,
    })
}

/// `Var Q_n = 2 n (n - 1) / d` for increments with uncorrelated coordinates of variance `1/d`.
pub fn off_diagonal_variance(n: usize, d: usize) -> f64 {
    2.0 * n as f64 * (n as f64 - 1.0) / d as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_increment, ComponentLaw};
    use crate::sampling::{derive_stream, RadialLaw, SeedSpec};

    fn basis(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn grid_is_strictly_increasing_and_ends_at_n() {
        assert_eq!(grid_points(0, 64), vec![0]);
        assert_eq!(grid_points(4, 8), vec![0, 1, 2, 3, 4]);
        let g = grid_points(1000, 64);
        assert_eq!(g.len(), 65);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_step_walk() {
        let model = ModelSpec::IidComponents {
            law: ComponentLaw::Rademacher,
        };
        let mut r = derive_stream(SeedSpec::new(1, 0));
        let run = run_walk(&model, 0, 5, 64, &mut r).unwrap();
        assert_eq!(run.summary.norm_sq_final, 0.0);
        assert_eq!(run.summary.t_final, 0.0);
        assert_eq!(run.summary.q_final, 0.0);
        assert_eq!(run.path.snapshots.len(), 1);
        assert_eq!(run.path.norm_sq_trace, vec![0.0]);
        assert_eq!(sup_norm_deviation(&run.path), 0.0);
    }

    #[test]
    fn orthonormal_steps_have_zero_deviation() {
        let d = 10;
        let mut rec = PathRecorder::new(d, d, d, false).unwrap();
        for i in 0..d {
            rec.push_dense(&basis(d, i)).unwrap();
        }
        let run = rec.finish().unwrap();
        assert_eq!(sup_norm_deviation(&run.path), 0.0);
        assert_eq!(run.summary.q_final, 0.0);
    }

    #[test]
    fn repeated_axis_gives_quadratic_norm() {
        let n = 1000;
        let mut rec = PathRecorder::new(n, 3, 10, false).unwrap();
        for _ in 0..n {
            rec.push_dense(&basis(3, 0)).unwrap();
        }
        let run = rec.finish().unwrap();
        let expected = (0..=n)
            .map(|k| ((k * k) as f64 / n as f64 - k as f64 / n as f64).abs())
            .fold(0.0, f64::max);
        assert_eq!(sup_norm_deviation(&run.path), expected);
        // (k^2 - k) / n peaks at k = n.
        assert!((sup_norm_deviation(&run.path) - (n as f64 - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn constant_radius_gives_t_equal_n() {
        let model = ModelSpec::RotInvariant {
            radial: RadialLaw::Constant,
        };
        let mut r = derive_stream(SeedSpec::new(2, 0));
        let run = run_walk(&model, 200, 30, 16, &mut r).unwrap();
        assert!((run.summary.t_final - 200.0).abs() < 1e-10);
    }

    #[test]
    fn recorder_rejects_mismatched_increments() {
        let mut rec = PathRecorder::new(2, 3, 2, false).unwrap();
        assert!(rec.push_dense(&[1.0, 2.0]).is_err());
        assert!(rec.push_sparse(0, 1.0).is_err());
        rec.push_dense(&[1.0, 0.0, 0.0]).unwrap();
        rec.push_dense(&[1.0, 0.0, 0.0]).unwrap();
        assert!(rec.push_dense(&[1.0, 0.0, 0.0]).is_err());
        let mut rec = PathRecorder::new(2, 3, 2, true).unwrap();
        assert!(rec.push_sparse(3, 1.0).is_err());
        rec.push_sparse(1, 1.0).unwrap();
        assert!(rec.finish().is_err());
    }

    #[test]
    fn capacity_guard() {
        let model = ModelSpec::IidComponents {
            law: ComponentLaw::Rademacher,
        };
        let mut r = derive_stream(SeedSpec::new(3, 0));
        let err = run_walk_with_budget(&model, 100, 1000, 64, 1000, &mut r).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn snapshots_are_scaled_path_points() {
        let model = ModelSpec::AxisJumps {
            radial: RadialLaw::SymmetricSign,
        };
        let mut r = derive_stream(SeedSpec::new(4, 0));
        let run = run_walk(&model, 16, 6, 4, &mut r).unwrap();
        let p = &run.path;
        assert_eq!(p.grid, vec![0, 4, 8, 12, 16]);
        for (j, &k) in p.grid.iter().enumerate() {
            let sq: f64 = p.snapshots.point(j).iter().map(|x| x * x).sum();
            assert!((sq * 16.0 - p.norm_sq_trace[k]).abs() < 1e-12);
        }
        let occ = run.summary.occupancy.unwrap();
        assert!(occ.mu1 + 2 * occ.mu2 <= 16);
    }

    #[test]
    fn summary_matches_full_run_for_coordinate_engines() {
        for model in [
            ModelSpec::IidComponents {
                law: ComponentLaw::StandardGaussian,
            },
            ModelSpec::AxisJumps {
                radial: RadialLaw::TwoPoint { a: 0.5 },
            },
        ] {
            let a = run_walk(&model, 50, 9, 8, &mut derive_stream(SeedSpec::new(5, 0))).unwrap();
            let b = simulate_summary(&model, 50, 9, &mut derive_stream(SeedSpec::new(5, 0)), &mut WalkScratch::default())
                .unwrap();
            assert_eq!(a.summary, b);
        }
    }

    #[test]
    fn conditional_variance_sum_matches_trace() {
        let model = ModelSpec::RotInvariant {
            radial: RadialLaw::TwoPoint { a: 0.3 },
        };
        let run = run_walk(&model, 40, 7, 8, &mut derive_stream(SeedSpec::new(6, 0))).unwrap();
        let direct: f64 = run.path.norm_sq_trace[1..40].iter().sum::<f64>() / 7.0;
        assert!((run.summary.conditional_variance_sum - direct).abs() < 1e-12);
    }

    #[test]
    fn sparse_map_and_table_agree() {
        // d large relative to n selects the hash map.
        let mut a = SparseCoords::new(10, 1_000_000);
        let mut b = SparseCoords::Table(vec![(0.0, 0); 1_000_000]);
        assert!(matches!(a, SparseCoords::Map(_)));
        for (axis, v) in [(5usize, 1.0), (999_999, -1.0), (5, 1.0), (7, 2.0), (5, -1.0)] {
            let ea = a.entry(axis);
            ea.0 += v;
            ea.1 += 1;
            let eb = b.entry(axis);
            eb.0 += v;
            eb.1 += 1;
        }
        assert_eq!(a.norm_sq(), b.norm_sq());
        assert_eq!(a.occupancy(), b.occupancy());
        assert_eq!(a.occupancy(), OccupancyStats { mu1: 2, mu2: 0, mu_ge3: 1 });
    }

    #[test]
    fn normalized_statistics_guard_and_zero() {
        let s = WalkSummary {
            n: 1,
            d: 4,
            norm_sq_final: 1.0,
            t_final: 1.0,
            q_final: 0.0,
            sup_deviation: 0.0,
            max_step_norm: 1.0,
            conditional_variance_sum: 0.0,
            occupancy: None,
        };
        assert!(normalized_statistics(&s, DiagonalScale::Sqrt).is_err());
        let s = WalkSummary {
            n: 10,
            norm_sq_final: 10.0,
            t_final: 10.0,
            ..s
        };
        let st = normalized_statistics(&s, DiagonalScale::Sqrt).unwrap();
        assert_eq!(st.clt_stat, 0.0);
        assert_eq!(st.t_stat, 0.0);
    }

    #[test]
    fn stored_increments_replay_identically() {
        let model = ModelSpec::RotInvariant {
            radial: RadialLaw::TwoPoint { a: 0.5 },
        };
        let mut r = derive_stream(SeedSpec::new(7, 0));
        let incs: Vec<_> = (0..12).map(|_| sample_increment(&model, 5, &mut r).unwrap()).collect();
        let mut rec = PathRecorder::new(12, 5, 4, false).unwrap();
        incs.iter().for_each(|x| rec.push(x).unwrap());
        let a = rec.finish().unwrap();
        let b = run_walk(&model, 12, 5, 4, &mut derive_stream(SeedSpec::new(7, 0))).unwrap();
        assert_eq!(a, b);
    }
}
