//! Segments, sampled paths, and the path-space metrics.
//!
//! Everything lives on a uniform grid of step `dt`. The delay `τ` and the
//! horizon `T` must be integer multiples of `dt`; off-grid times are an
//! error rather than an interpolation. A segment has `n_τ + 1` points at
//! `θ_j = -τ + j·dt`, a path over `[-τ, T]` has `n_τ + n_T + 1` points, and
//! the segment at step `k` is the contiguous window of points
//! `k ..= k + n_τ`. Integrals use the trapezoid rule and suprema are grid
//! maxima.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const GRID_REL_TOL: f64 = 1e-9;

/// Step, delay and state dimension shared by segments and paths.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    dt: f64,
    delay_steps: usize,
    dim: usize,
}

impl Grid {
    pub fn new(dt: f64, delay: f64, dim: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", "must be finite and > 0"));
        }
        if !(delay.is_finite() && delay > 0.0) {
            return Err(Error::param("tau", "must be finite and > 0"));
        }
        if dim == 0 {
            return Err(Error::param("d", "must be >= 1"));
        }
        let delay_steps = math::is_near_integer(delay / dt, GRID_REL_TOL)
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::param("tau", "must be a positive integer multiple of dt"))?;
        Ok(Grid {
            dt,
            delay_steps,
            dim,
        })
    }

    /// Grid with `delay_steps` steps of width `dt`.
    pub fn from_steps(dt: f64, delay_steps: usize, dim: usize) -> Result<Self> {
        Self::new(dt, dt * delay_steps as f64, dim)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn delay(&self) -> f64 {
        self.dt * self.delay_steps as f64
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points in one segment, `n_τ + 1`.
    pub fn segment_points(&self) -> usize {
        self.delay_steps + 1
    }

    /// Number of steps covering `[0, horizon]`.
    pub fn steps_for(&self, horizon: f64) -> Result<usize> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("T", "must be finite and > 0"));
        }
        math::is_near_integer(horizon / self.dt, GRID_REL_TOL)
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::param("T", "must be a positive integer multiple of dt"))
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.delay_steps == other.delay_steps
            && self.dim == other.dim
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt.max(other.dt)
    }

    fn check(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch("segments or paths are on different grids"))
        }
    }

    /// Trapezoid weights over one segment.
    pub fn segment_weights(&self) -> Vec<f64> {
        math::trapezoid_weights(self.delay_steps, self.dt)
    }
}

/// A borrowed segment: `n_τ + 1` consecutive points of dimension `d`.
#[derive(Debug, Clone, Copy)]
pub struct SegmentView<'a> {
    grid: Grid,
    values: &'a [f64],
}

impl<'a> SegmentView<'a> {
    pub fn new(grid: Grid, values: &'a [f64]) -> Result<Self> {
        if values.len() != grid.segment_points() * grid.dim {
            return Err(Error::domain("segment length does not match grid"));
        }
        Ok(SegmentView { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Grid, values: &'a [f64]) -> Self {
        debug_assert_eq!(values.len(), grid.segment_points() * grid.dim);
        SegmentView { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    /// Value at `θ_j = -τ + j·dt`.
    #[inline]
    pub fn point(&self, j: usize) -> &'a [f64] {
        let d = self.grid.dim;
        &self.values[j * d..(j + 1) * d]
    }

    /// `ξ(0)`.
    #[inline]
    pub fn endpoint(&self) -> &'a [f64] {
        self.point(self.grid.delay_steps)
    }

    /// `ξ(-τ)`.
    #[inline]
    pub fn oldest(&self) -> &'a [f64] {
        self.point(0)
    }

    pub fn theta(&self, j: usize) -> f64 {
        -self.grid.delay() + j as f64 * self.grid.dt
    }

    pub fn to_segment(&self) -> Segment {
        Segment {
            grid: self.grid,
            values: self.values.to_vec(),
        }
    }

    /// Trapezoid integral `∫_{-τ}^0 ξ(θ) dθ`, written into `out`.
    pub fn integral_into(&self, out: &mut [f64]) {
        let d = self.grid.dim;
        let n = self.grid.delay_steps;
        let h = self.grid.dt;
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 * h } else { h };
            for (o, v) in out.iter_mut().zip(&self.values[j * d..(j + 1) * d]) {
                *o += w * v;
            }
        }
    }
}

/// An owned element of `C([-τ, 0]; R^d)` on the grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    grid: Grid,
    values: Vec<f64>,
}

impl Segment {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.segment_points() * grid.dim {
            return Err(Error::domain("segment length does not match grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("segment values"));
        }
        Ok(Segment { grid, values })
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Result<Self> {
        if value.len() != grid.dim {
            return Err(Error::domain("constant value has wrong dimension"));
        }
        let values = value
            .iter()
            .copied()
            .cycle()
            .take(grid.segment_points() * grid.dim)
            .collect();
        Self::from_values(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        Segment {
            grid,
            values: alloc::vec![0.0; grid.segment_points() * grid.dim],
        }
    }

    /// Build from `f(θ, out)` evaluated at every grid point.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let d = grid.dim;
        let mut values = alloc::vec![0.0; grid.segment_points() * d];
        for j in 0..grid.segment_points() {
            let theta = -grid.delay() + j as f64 * grid.dt;
            f(theta, &mut values[j * d..(j + 1) * d]);
        }
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn view(&self) -> SegmentView<'_> {
        SegmentView::new_unchecked(self.grid, &self.values)
    }

    pub fn point(&self, j: usize) -> &[f64] {
        self.view().point(j)
    }

    pub fn endpoint(&self) -> &[f64] {
        self.view().endpoint()
    }
}

impl<'a> From<&'a Segment> for SegmentView<'a> {
    fn from(s: &'a Segment) -> Self {
        s.view()
    }
}

/// A trajectory on `[-τ, T]`, sampled at every grid time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentPath {
    grid: Grid,
    steps: usize,
    values: Vec<f64>,
}

impl SegmentPath {
    /// A path whose first segment is `initial` and whose remaining `steps`
    /// points are zero, ready to be filled by an integrator.
    pub fn with_initial(initial: &Segment, steps: usize) -> Self {
        let grid = initial.grid;
        let mut values = Vec::with_capacity((grid.segment_points() + steps) * grid.dim);
        values.extend_from_slice(&initial.values);
        values.resize((grid.segment_points() + steps) * grid.dim, 0.0);
        SegmentPath {
            grid,
            steps,
            values,
        }
    }

    pub fn from_values(grid: Grid, steps: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.segment_points() + steps) * grid.dim {
            return Err(Error::domain("path length does not match grid and horizon"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("path values"));
        }
        Ok(SegmentPath {
            grid,
            steps,
            values,
        })
    }

    /// Path built pointwise from `f(t, out)` for `t ∈ [-τ, T]`.
    pub fn from_fn(grid: Grid, steps: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let d = grid.dim;
        let n = grid.segment_points() + steps;
        let mut values = alloc::vec![0.0; n * d];
        for i in 0..n {
            let t = -grid.delay() + i as f64 * grid.dt;
            f(t, &mut values[i * d..(i + 1) * d]);
        }
        Self::from_values(grid, steps, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Number of steps in `[0, T]`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.grid.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Total points on `[-τ, T]`.
    pub fn len_points(&self) -> usize {
        self.grid.segment_points() + self.steps
    }

    /// Time of global point index `i` (0 ↔ `-τ`).
    pub fn time(&self, i: usize) -> f64 {
        -self.grid.delay() + i as f64 * self.grid.dt
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.grid.dim;
        &self.values[i * d..(i + 1) * d]
    }

    /// `X(t_k)` for step `k ∈ 0..=steps`.
    pub fn value_at_step(&self, k: usize) -> &[f64] {
        self.point(self.grid.delay_steps + k)
    }

    /// Segment `X_{t_k}` as a borrowed window.
    pub fn window(&self, k: usize) -> SegmentView<'_> {
        assert!(k <= self.steps, "step {k} beyond horizon");
        let d = self.grid.dim;
        let start = k * d;
        let end = start + self.grid.segment_points() * d;
        SegmentView::new_unchecked(self.grid, &self.values[start..end])
    }

    pub fn initial_segment(&self) -> Segment {
        self.window(0).to_segment()
    }

    /// Step index of an on-grid time `t ∈ [0, T]`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        if !t.is_finite() || t < -GRID_REL_TOL * self.grid.dt {
            return Err(Error::domain("time must lie in [0, T]"));
        }
        let k = math::is_near_integer(t / self.grid.dt, GRID_REL_TOL)
            .ok_or_else(|| Error::domain("time is not on the grid"))?;
        if k > self.steps {
            return Err(Error::domain("time must lie in [0, T]"));
        }
        Ok(k)
    }

    /// The segment `X_t(θ) = X(t + θ)`.
    pub fn segment_at(&self, t: f64) -> Result<Segment> {
        Ok(self.window(self.step_of(t)?).to_segment())
    }

    pub fn check(&self, other: &SegmentPath) -> Result<()> {
        self.grid.check(&other.grid)?;
        if self.steps != other.steps {
            return Err(Error::GridMismatch("paths have different horizons"));
        }
        Ok(())
    }
}

/// Equal-grid paths with per-path seeds and probability weights.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathEnsemble {
    paths: Vec<SegmentPath>,
    seeds: Vec<u64>,
    weights: Vec<f64>,
}

impl PathEnsemble {
    /// Uniformly weighted ensemble.
    pub fn new(paths: Vec<SegmentPath>, seeds: Vec<u64>) -> Result<Self> {
        let n = paths.len();
        let w = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        Self::with_weights(paths, seeds, alloc::vec![w; n])
    }

    pub fn with_weights(paths: Vec<SegmentPath>, seeds: Vec<u64>, weights: Vec<f64>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::domain("ensemble must contain at least one path"));
        }
        if seeds.len() != paths.len() || weights.len() != paths.len() {
            return Err(Error::domain("paths, seeds and weights must have equal length"));
        }
        for p in &paths[1..] {
            paths[0].check(p)?;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain("weights must sum to 1"));
        }
        Ok(PathEnsemble {
            paths,
            seeds,
            weights,
        })
    }

    pub fn paths(&self) -> &[SegmentPath] {
        &self.paths
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn grid(&self) -> Grid {
        self.paths[0].grid
    }

    pub fn steps(&self) -> usize {
        self.paths[0].steps
    }

    pub fn into_paths(self) -> Vec<SegmentPath> {
        self.paths
    }
}

// ---------------------------------------------------------------------------
// metrics

fn pointwise_norms<'a>(a: &'a [f64], b: &'a [f64], d: usize) -> impl Iterator<Item = f64> + 'a {
    a.chunks_exact(d)
        .zip(b.chunks_exact(d))
        .map(|(x, y)| math::diff_norm_sq(x, y))
}

/// `‖ξ - η‖_∞`: largest Euclidean distance over the segment grid.
pub fn rho_uniform<'a, 'b>(a: impl Into<SegmentView<'a>>, b: impl Into<SegmentView<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    a.grid.check(&b.grid)?;
    let m = pointwise_norms(a.values, b.values, a.grid.dim).fold(0.0, f64::max);
    Ok(math::sqrt(m))
}

/// `ρ₂(ξ, η) = ((1/τ) ∫_{-τ}^0 |ξ - η|² dθ)^{1/2}`.
pub fn rho_2<'a, 'b>(a: impl Into<SegmentView<'a>>, b: impl Into<SegmentView<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    a.grid.check(&b.grid)?;
    Ok(math::sqrt(rho_2_sq_unchecked(a, b)))
}

fn rho_2_sq_unchecked(a: SegmentView<'_>, b: SegmentView<'_>) -> f64 {
    let sq: Vec<f64> = pointwise_norms(a.values, b.values, a.grid.dim).collect();
    math::trapezoid(&sq, a.grid.dt) / a.grid.delay()
}

/// `ρ̃₂(ξ, η) = (|ξ(0) - η(0)|² + ρ₂(ξ, η)²)^{1/2}`.
pub fn rho_2_tilde<'a, 'b>(a: impl Into<SegmentView<'a>>, b: impl Into<SegmentView<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    a.grid.check(&b.grid)?;
    let end = math::diff_norm_sq(a.endpoint(), b.endpoint());
    Ok(math::sqrt(end + rho_2_sq_unchecked(a, b)))
}

/// `ρ_∞^T`: `sup_{t ≤ T} ‖ξ_t - η_t‖_∞`.
///
/// The windows tile `[-τ, T]`, so this is the pointwise maximum over all
/// path points.
pub fn rho_inf_path(a: &SegmentPath, b: &SegmentPath) -> Result<f64> {
    a.check(b)?;
    let m = pointwise_norms(&a.values, &b.values, a.grid.dim).fold(0.0, f64::max);
    Ok(math::sqrt(m))
}

/// `sup_{t ≤ T} e^{-λt} ‖ξ_t - η_t‖_∞`, window maxima via a monotone deque.
pub fn rho_inf_weighted(a: &SegmentPath, b: &SegmentPath, lambda: f64) -> Result<f64> {
    a.check(b)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", "must be finite and >= 0"));
    }
    let sq: Vec<f64> = pointwise_norms(&a.values, &b.values, a.grid.dim).collect();
    let w = a.grid.delay_steps;
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut best = 0.0f64;
    for (i, &v) in sq.iter().enumerate() {
        while deque.back().is_some_and(|&j| sq[j] <= v) {
            deque.pop_back();
        }
        deque.push_back(i);
        if i >= w {
            let k = i - w;
            while deque.front().is_some_and(|&j| j < k) {
                deque.pop_front();
            }
            let window_max = math::sqrt(sq[deque[0]]);
            let t = k as f64 * a.grid.dt;
            best = best.max(math::exp(-lambda * t) * window_max);
        }
    }
    Ok(best)
}

/// `ρ_{2,λ}` truncated at `T`: `(∫_0^T e^{-λt} ρ₂(ξ_t, η_t)² dt)^{1/2}`.
pub fn rho_2_lambda_path(a: &SegmentPath, b: &SegmentPath, lambda: f64) -> Result<f64> {
    a.check(b)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", "must be finite and >= 0"));
    }
    Ok(math::sqrt(rho_2_lambda_sq_unchecked(a, b, lambda)))
}

fn rho_2_lambda_sq_unchecked(a: &SegmentPath, b: &SegmentPath, lambda: f64) -> f64 {
    let grid = a.grid;
    let sq: Vec<f64> = pointwise_norms(&a.values, &b.values, grid.dim).collect();
    // prefix[i] = sq[0] + … + sq[i-1]
    let mut prefix = Vec::with_capacity(sq.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &sq {
        acc += v;
        prefix.push(acc);
    }
    let n = grid.delay_steps;
    let h = grid.dt;
    let tau = grid.delay();
    let window_rho_sq = |k: usize| -> f64 {
        let inner = prefix[k + n + 1] - prefix[k] - 0.5 * (sq[k] + sq[k + n]);
        h * inner / tau
    };
    let steps = a.steps;
    let mut total = 0.0;
    for k in 0..=steps {
        let w = if k == 0 || k == steps { 0.5 * h } else { h };
        total += w * math::exp(-lambda * k as f64 * h) * window_rho_sq(k);
    }
    total.max(0.0)
}

/// Metrics on path space used as transport costs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum PathMetric {
    /// `ρ_∞^T`
    Uniform,
    /// `ρ_{∞,λ}` truncated at `T`
    UniformWeighted { lambda: f64 },
    /// `ρ_{2,λ}` truncated at `T`
    L2Weighted { lambda: f64 },
}

impl PathMetric {
    pub fn distance(&self, a: &SegmentPath, b: &SegmentPath) -> Result<f64> {
        match *self {
            PathMetric::Uniform => rho_inf_path(a, b),
            PathMetric::UniformWeighted { lambda } => rho_inf_weighted(a, b, lambda),
            PathMetric::L2Weighted { lambda } => rho_2_lambda_path(a, b, lambda),
        }
    }
}

/// Metrics on a single segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SegmentMetric {
    Uniform,
    L2,
    L2Tilde,
}

impl SegmentMetric {
    pub fn distance<'a, 'b>(&self, a: impl Into<SegmentView<'a>>, b: impl Into<SegmentView<'b>>) -> Result<f64> {
        match self {
            SegmentMetric::Uniform => rho_uniform(a, b),
            SegmentMetric::L2 => rho_2(a, b),
            SegmentMetric::L2Tilde => rho_2_tilde(a, b),
        }
    }
}
