//! Fixed-point Euler–Maruyama integration of the neutral equation.
//!
//! The scheme evolves `M(t) = X(t) - G(X_t)`:
//!
//! ```text
//! M_next = X(t) - G(X_t) + (A X(t) + b(X_t) [+ σ(X_t) h]) Δt + σ(X_t) ΔW
//! X(t+Δt) = M_next + G(X_{t+Δt})
//! ```
//!
//! The second line is solved by iterating over the one unknown entry of
//! `X_{t+Δt}` (its endpoint); every other entry is already history. When `G`
//! is a `κ`-contraction the iteration converges geometrically at rate `κ`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::{collect_results, Executor};
use crate::girsanov::GirsanovTilt;
use crate::math;
use crate::model::{CoefficientSet, SegmentSampler};
use crate::paths::{Grid, PathEnsemble, Segment, SegmentPath, SegmentView};
use crate::rng::{self, Purpose};

/// Run parameters shared by every path of an experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    /// Horizon `T`.
    pub horizon: f64,
    pub dt: f64,
    /// Delay `τ`.
    pub delay: f64,
    pub dim: usize,
    pub noise_dim: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl SimConfig {
    pub const DEFAULT_FP_TOL: f64 = 1e-12;
    pub const DEFAULT_FP_MAX_ITER: usize = 100;

    pub fn new(horizon: f64, dt: f64, delay: f64, dim: usize, noise_dim: usize) -> Self {
        SimConfig {
            horizon,
            dt,
            delay,
            dim,
            noise_dim,
            n_paths: 1,
            seed: 0,
            fp_tol: Self::DEFAULT_FP_TOL,
            fp_max_iter: Self::DEFAULT_FP_MAX_ITER,
        }
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::param("sim.T", "must be finite and > 0"));
        }
        if self.n_paths == 0 {
            return Err(Error::param("sim.n_paths", "must be >= 1"));
        }
        if !(self.fp_tol.is_finite() && self.fp_tol > 0.0) {
            return Err(Error::param("sim.fp_tol", "must be finite and > 0"));
        }
        if self.fp_max_iter == 0 {
            return Err(Error::param("sim.fp_max_iter", "must be >= 1"));
        }
        if self.noise_dim == 0 {
            return Err(Error::param("sim.m", "must be >= 1"));
        }
        let grid = Grid::new(self.dt, self.delay, self.dim)?;
        grid.steps_for(self.horizon)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dt, self.delay, self.dim)
    }

    pub fn steps(&self) -> Result<usize> {
        self.grid()?.steps_for(self.horizon)
    }

    /// Validate against a coefficient set: dimensions, the explicit-Euler
    /// stability guard `aΔt < 1` for the stiff part, and the fixed-point
    /// iteration budget (raised to `⌈ln tol / ln κ⌉ + 10` for declared `κ`).
    pub fn validate_for(&self, coeffs: &CoefficientSet) -> Result<FixedPoint> {
        self.validate()?;
        if coeffs.dim() != self.dim {
            return Err(Error::param("sim.d", "differs from the model dimension"));
        }
        if coeffs.noise_dim() != self.noise_dim {
            return Err(Error::param("sim.m", "differs from the model noise dimension"));
        }
        coeffs.check_grid(&self.grid()?)?;
        if let Some(a) = coeffs.stiff() {
            for &ai in a {
                if -ai * self.dt >= 1.0 {
                    return Err(Error::param(
                        "model.stiff",
                        alloc::format!("stability guard requires a*dt < 1, got a*dt = {}", -ai * self.dt),
                    ));
                }
            }
        }
        let mut fp = FixedPoint {
            tol: self.fp_tol,
            max_iter: self.fp_max_iter,
        };
        if let Some(kappa) = coeffs.declared().kappa.or(coeffs.declared().k) {
            fp = fp.budget_for(kappa);
        }
        Ok(fp)
    }
}

/// Fixed-point solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPoint {
    fn default() -> Self {
        FixedPoint {
            tol: SimConfig::DEFAULT_FP_TOL,
            max_iter: SimConfig::DEFAULT_FP_MAX_ITER,
        }
    }
}

impl FixedPoint {
    /// Raise `max_iter` so a `κ`-contraction can reach `tol` from an `O(1)`
    /// starting error.
    pub fn budget_for(mut self, kappa: f64) -> Self {
        if kappa > 0.0 && kappa < 1.0 {
            let need = libm::ceil(math::ln(self.tol) / math::ln(kappa));
            if need.is_finite() {
                self.max_iter = self.max_iter.max(need as usize + 10);
            }
        }
        self
    }
}

/// Brownian increments for one path, row-major `steps × m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStream {
    seed: u64,
    dt: f64,
    noise_dim: usize,
    increments: Vec<f64>,
}

impl NoiseStream {
    /// `steps` Gaussian increments of variance `dt` per coordinate.
    pub fn generate(seed: u64, dt: f64, noise_dim: usize, steps: usize) -> Self {
        let mut rng = rng::from_seed(seed);
        let s = math::sqrt(dt);
        let increments = (0..steps * noise_dim).map(|_| s * rng::normal(&mut rng)).collect();
        NoiseStream {
            seed,
            dt,
            noise_dim,
            increments,
        }
    }

    /// All-zero increments (deterministic dynamics).
    pub fn zero(dt: f64, noise_dim: usize, steps: usize) -> Self {
        NoiseStream {
            seed: 0,
            dt,
            noise_dim,
            increments: alloc::vec![0.0; steps * noise_dim],
        }
    }

    pub fn from_increments(dt: f64, noise_dim: usize, increments: Vec<f64>) -> Result<Self> {
        if noise_dim == 0 || increments.len() % noise_dim != 0 {
            return Err(Error::domain("increment count is not a multiple of m"));
        }
        Ok(NoiseStream {
            seed: 0,
            dt,
            noise_dim,
            increments,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.noise_dim
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.noise_dim..(k + 1) * self.noise_dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Increments on a grid `factor` times coarser: sums of consecutive blocks.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::domain("coarsening factor must divide the step count"));
        }
        let m = self.noise_dim;
        let coarse_steps = self.steps() / factor;
        let mut inc = alloc::vec![0.0; coarse_steps * m];
        for k in 0..coarse_steps {
            for f in 0..factor {
                for (o, x) in inc[k * m..(k + 1) * m].iter_mut().zip(self.increment(k * factor + f)) {
                    *o += x;
                }
            }
        }
        Ok(NoiseStream {
            seed: self.seed,
            dt: self.dt * factor as f64,
            noise_dim: m,
            increments: inc,
        })
    }
}

/// Result of one integrator step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub value: Vec<f64>,
    /// Fixed-point updates whose change exceeded the tolerance.
    pub iterations: usize,
    /// Largest ratio of successive fixed-point changes (0 when fewer than
    /// two informative changes were seen).
    pub max_ratio: f64,
}

/// Per-path integrator statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub max_iterations: usize,
    pub max_ratio: f64,
}

impl StepStats {
    fn absorb(&mut self, iterations: usize, ratio: f64) {
        self.max_iterations = self.max_iterations.max(iterations);
        self.max_ratio = self.max_ratio.max(ratio);
    }
}

/// Scratch space for one path, reused across steps.
struct Workspace {
    g: Vec<f64>,
    b: Vec<f64>,
    sigma: Vec<f64>,
    h: Vec<f64>,
    m_next: Vec<f64>,
    x: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, m: usize) -> Self {
        Workspace {
            g: alloc::vec![0.0; d],
            b: alloc::vec![0.0; d],
            sigma: alloc::vec![0.0; d * m],
            h: alloc::vec![0.0; m],
            m_next: alloc::vec![0.0; d],
            x: alloc::vec![0.0; d],
        }
    }
}

/// Advance one step inside `buf`, which holds `n_τ + 2` points: the current
/// segment followed by the slot for the new value. `h`, when given, has
/// already been written to `ws.h`.
fn advance(
    coeffs: &CoefficientSet,
    grid: Grid,
    buf: &mut [f64],
    dw: &[f64],
    with_control: bool,
    fp: FixedPoint,
    ws: &mut Workspace,
) -> Result<(usize, f64)> {
    let d = grid.dim();
    let m = coeffs.noise_dim();
    let n = grid.delay_steps();
    let dt = grid.dt();
    let seg_len = (n + 1) * d;
    {
        let cur = SegmentView::new_unchecked(grid, &buf[..seg_len]);
        coeffs.neutral_into(cur, &mut ws.g);
        coeffs.full_drift_into(cur, &mut ws.b);
        coeffs.diffusion_into(cur, &mut ws.sigma);
        let x_now = cur.endpoint();
        for i in 0..d {
            let row = &ws.sigma[i * m..(i + 1) * m];
            let mut drift = ws.b[i];
            if with_control {
                drift += math::dot(row, &ws.h);
            }
            ws.m_next[i] = x_now[i] - ws.g[i] + drift * dt + math::dot(row, dw);
        }
    }
    if ws.m_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("drift or diffusion evaluation"));
    }
    if !coeffs.has_neutral() {
        buf[seg_len..seg_len + d].copy_from_slice(&ws.m_next);
        return Ok((0, 0.0));
    }

    // start from X(t)
    ws.x.copy_from_slice(&buf[n * d..seg_len]);
    let mut iterations = 0;
    let mut prev_change = f64::NAN;
    let mut max_ratio = 0.0f64;
    let mut change = f64::INFINITY;
    for _ in 0..fp.max_iter {
        buf[seg_len..seg_len + d].copy_from_slice(&ws.x);
        let next = SegmentView::new_unchecked(grid, &buf[d..seg_len + d]);
        coeffs.neutral_into(next, &mut ws.g);
        let mut ch = 0.0;
        let mut scale = 0.0;
        for i in 0..d {
            let v = ws.m_next[i] + ws.g[i];
            ch += (v - ws.x[i]) * (v - ws.x[i]);
            scale += v * v;
            ws.x[i] = v;
        }
        change = math::sqrt(ch);
        if !change.is_finite() {
            return Err(Error::Numeric("neutral term"));
        }
        // ratios of changes near rounding level carry no information
        if prev_change > 1e-10 {
            max_ratio = max_ratio.max(change / prev_change);
        }
        prev_change = change;
        if change < fp.tol * (1.0 + math::sqrt(scale)) {
            buf[seg_len..seg_len + d].copy_from_slice(&ws.x);
            return Ok((iterations, max_ratio));
        }
        iterations += 1;
    }
    Err(Error::Convergence {
        iterations: fp.max_iter,
        residual: change,
    })
}

/// One step from the segment `X_t`, returning `X(t+Δt)`.
///
/// `control` is the already-evaluated `h(t, X_t)`; it adds `σ(X_t) h` to
/// the drift.
pub fn euler_step(
    coeffs: &CoefficientSet,
    current: SegmentView<'_>,
    dw: &[f64],
    control: Option<&[f64]>,
    fp: FixedPoint,
) -> Result<StepOutcome> {
    let grid = current.grid();
    coeffs.check_grid(&grid)?;
    let d = grid.dim();
    let m = coeffs.noise_dim();
    if dw.len() != m {
        return Err(Error::domain("noise increment has wrong dimension"));
    }
    let mut buf = Vec::with_capacity(current.values().len() + d);
    buf.extend_from_slice(current.values());
    buf.resize(current.values().len() + d, 0.0);
    let mut ws = Workspace::new(d, m);
    if let Some(h) = control {
        if h.len() != m {
            return Err(Error::domain("control has wrong dimension"));
        }
        ws.h.copy_from_slice(h);
    }
    let (iterations, max_ratio) = advance(coeffs, grid, &mut buf, dw, control.is_some(), fp, &mut ws)?;
    Ok(StepOutcome {
        value: buf[buf.len() - d..].to_vec(),
        iterations,
        max_ratio,
    })
}

/// A simulated path together with what happened along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub path: SegmentPath,
    /// `h(t_k, X_{t_k})` per step (row-major `steps × m`), when controlled.
    pub controls: Option<Vec<f64>>,
    /// Steps on which the control was clipped to its bound.
    pub clipped: usize,
    pub stats: StepStats,
}

/// Integrate from `initial` over the noise stream, recording controls.
pub fn simulate_traced(
    coeffs: &CoefficientSet,
    initial: &Segment,
    noise: &NoiseStream,
    control: Option<&GirsanovTilt>,
    fp: FixedPoint,
) -> Result<Trace> {
    let grid = initial.grid();
    coeffs.check_grid(&grid)?;
    if (noise.dt() - grid.dt()).abs() > 1e-12 * grid.dt() {
        return Err(Error::GridMismatch("noise step differs from the grid step"));
    }
    if noise.noise_dim() != coeffs.noise_dim() {
        return Err(Error::GridMismatch("noise dimension differs from the model"));
    }
    if let Some(tilt) = control {
        if tilt.noise_dim() != coeffs.noise_dim() {
            return Err(Error::GridMismatch("tilt dimension differs from the model noise dimension"));
        }
    }
    let steps = noise.steps();
    let d = grid.dim();
    let m = coeffs.noise_dim();
    let n = grid.delay_steps();
    let mut path = SegmentPath::with_initial(initial, steps);
    let mut ws = Workspace::new(d, m);
    let mut controls = control.map(|_| Vec::with_capacity(steps * m));
    let mut clipped = 0;
    let mut stats = StepStats::default();
    let dt = grid.dt();
    let buf = path.values_mut();
    for k in 0..steps {
        let window = &mut buf[k * d..(k + n + 2) * d];
        if let (Some(tilt), Some(rec)) = (control, controls.as_mut()) {
            let view = SegmentView::new_unchecked(grid, &window[..(n + 1) * d]);
            if tilt.eval(k as f64 * dt, view, &mut ws.h) {
                clipped += 1;
            }
            rec.extend_from_slice(&ws.h);
        }
        let (it, ratio) = advance(coeffs, grid, window, noise.increment(k), control.is_some(), fp, &mut ws)?;
        stats.absorb(it, ratio);
    }
    Ok(Trace {
        path,
        controls,
        clipped,
        stats,
    })
}

/// Integrate from `initial` over `noise`, optionally with drift `b + σh`.
pub fn simulate_path(
    coeffs: &CoefficientSet,
    initial: &Segment,
    cfg: &SimConfig,
    noise: &NoiseStream,
    control: Option<&GirsanovTilt>,
) -> Result<SegmentPath> {
    let fp = cfg.validate_for(coeffs)?;
    if !initial.grid().same_as(&cfg.grid()?) {
        return Err(Error::GridMismatch("initial segment is on a different grid"));
    }
    if noise.steps() != cfg.steps()? {
        return Err(Error::GridMismatch("noise length differs from the horizon"));
    }
    simulate_traced(coeffs, initial, noise, control, fp).map(|t| t.path)
}

/// Law `μ` of the initial segment.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    /// `δ_ξ`.
    Dirac(Segment),
    /// Random segments from a sampler.
    Random(SegmentSampler),
}

impl InitialLaw {
    pub fn is_dirac(&self) -> bool {
        matches!(self, InitialLaw::Dirac(_))
    }

    pub fn grid(&self) -> Grid {
        match self {
            InitialLaw::Dirac(s) => s.grid(),
            InitialLaw::Random(s) => s.grid(),
        }
    }

    /// Initial segment of path `index` under root seed `root`.
    pub fn sample(&self, root: u64, index: usize) -> Segment {
        match self {
            InitialLaw::Dirac(s) => s.clone(),
            InitialLaw::Random(s) => s.sample(&mut rng::stream(root, Purpose::Initial, index as u64)),
        }
    }
}

/// Seed of the noise stream of path `index`.
pub fn noise_seed(root: u64, index: usize) -> u64 {
    rng::derive_seed(root, Purpose::Noise, index as u64)
}

/// `cfg.n_paths` independent paths; path `i` depends only on `(cfg.seed, i)`.
pub fn simulate_ensemble<E: Executor>(
    coeffs: &CoefficientSet,
    initial: &InitialLaw,
    cfg: &SimConfig,
    control: Option<&GirsanovTilt>,
    exec: &E,
) -> Result<PathEnsemble> {
    let fp = cfg.validate_for(coeffs)?;
    let grid = cfg.grid()?;
    if !initial.grid().same_as(&grid) {
        return Err(Error::GridMismatch("initial law is on a different grid"));
    }
    let steps = cfg.steps()?;
    let seeds: Vec<u64> = (0..cfg.n_paths).map(|i| noise_seed(cfg.seed, i)).collect();
    let paths = collect_results(exec.map(cfg.n_paths, |i| {
        let noise = NoiseStream::generate(seeds[i], cfg.dt, cfg.noise_dim, steps);
        let init = initial.sample(cfg.seed, i);
        simulate_traced(coeffs, &init, &noise, control, fp).map(|t| t.path)
    }))?;
    PathEnsemble::new(paths, seeds)
}

// ---------------------------------------------------------------------------
// convergence studies

/// Error at one step size.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OrderRow {
    pub dt: f64,
    pub error: f64,
}

/// Errors against a fine reference and the fitted log-log slope.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OrderStudy {
    pub rows: Vec<OrderRow>,
    pub reference_dt: f64,
    pub n_paths: usize,
    /// Least-squares slope of `ln error` against `ln Δt`.
    pub order: f64,
}

/// Setup shared by both convergence studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub horizon: f64,
    pub delay: f64,
    /// Step sizes, each an integer multiple of the reference step.
    pub dts: Vec<f64>,
    /// Reference step = smallest `dt / reference_factor`.
    pub reference_factor: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub fp: FixedPoint,
}

impl StudyConfig {
    /// Step sizes `2^-4 … 2^-7`, reference at `2^-7 / 64`.
    pub fn standard(horizon: f64, delay: f64, n_paths: usize, seed: u64) -> Self {
        StudyConfig {
            horizon,
            delay,
            dts: alloc::vec![0.0625, 0.03125, 0.015625, 0.0078125],
            reference_factor: 64,
            n_paths,
            seed,
            fp: FixedPoint::default(),
        }
    }

    fn reference_dt(&self) -> Result<f64> {
        if self.dts.len() < 2 {
            return Err(Error::param("convergence.dts", "need at least two step sizes"));
        }
        if self.reference_factor == 0 {
            return Err(Error::param("convergence.reference_factor", "must be >= 1"));
        }
        if self.n_paths == 0 {
            return Err(Error::param("convergence.n_paths", "must be >= 1"));
        }
        let min = self.dts.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::param("convergence.dts", "step sizes must be > 0"));
        }
        Ok(min / self.reference_factor as f64)
    }
}

fn fit_slope(rows: &[OrderRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (math::ln(r.dt), math::ln(r.error)))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn endpoint_on(
    coeffs: &CoefficientSet,
    initial: &(impl Fn(f64, &mut [f64]) + Sync),
    delay: f64,
    noise: &NoiseStream,
    fp: FixedPoint,
) -> Result<Vec<f64>> {
    let grid = Grid::new(noise.dt(), delay, coeffs.dim())?;
    for &a in coeffs.stiff().unwrap_or(&[]) {
        if -a * noise.dt() >= 1.0 {
            return Err(Error::param("model.stiff", "stability guard requires a*dt < 1"));
        }
    }
    let init = Segment::from_fn(grid, |t, o| initial(t, o))?;
    let trace = simulate_traced(coeffs, &init, noise, None, fp)?;
    Ok(trace.path.value_at_step(noise.steps()).to_vec())
}

/// Root-mean-square error of `X(T)` against a fine-step reference driven by
/// the same Brownian path (coarse increments are sums of fine ones).
pub fn strong_order_study<E: Executor>(
    coeffs: &CoefficientSet,
    initial: &(impl Fn(f64, &mut [f64]) + Sync),
    cfg: &StudyConfig,
    exec: &E,
) -> Result<OrderStudy> {
    let dt_ref = cfg.reference_dt()?;
    let ref_grid = Grid::new(dt_ref, cfg.delay, coeffs.dim())?;
    let ref_steps = ref_grid.steps_for(cfg.horizon)?;
    let mut factors = Vec::with_capacity(cfg.dts.len());
    for &dt in &cfg.dts {
        let f = math::is_near_integer(dt / dt_ref, 1e-9)
            .filter(|f| *f > 0 && ref_steps % f == 0)
            .ok_or_else(|| Error::param("convergence.dts", "each step must be a multiple of the reference step"))?;
        Grid::new(dt, cfg.delay, coeffs.dim())?;
        factors.push(f);
    }
    let m = coeffs.noise_dim();
    let per_path = collect_results(exec.map(cfg.n_paths, |i| -> Result<Vec<f64>> {
        let fine = NoiseStream::generate(noise_seed(cfg.seed, i), dt_ref, m, ref_steps);
        let reference = endpoint_on(coeffs, initial, cfg.delay, &fine, cfg.fp)?;
        let mut errs = Vec::with_capacity(factors.len());
        for &f in &factors {
            let coarse = fine.coarsen(f)?;
            let x = endpoint_on(coeffs, initial, cfg.delay, &coarse, cfg.fp)?;
            errs.push(math::diff_norm_sq(&x, &reference));
        }
        Ok(errs)
    }))?;
    let rows: Vec<OrderRow> = cfg
        .dts
        .iter()
        .enumerate()
        .map(|(j, &dt)| OrderRow {
            dt,
            error: math::sqrt(per_path.iter().map(|e| e[j]).sum::<f64>() / cfg.n_paths as f64),
        })
        .collect();
    Ok(OrderStudy {
        order: fit_slope(&rows),
        rows,
        reference_dt: dt_ref,
        n_paths: cfg.n_paths,
    })
}

/// Noise-free study: error of `X(T)` against a fine-step Euler reference.
pub fn deterministic_order_study(
    coeffs: &CoefficientSet,
    initial: &(impl Fn(f64, &mut [f64]) + Sync),
    cfg: &StudyConfig,
) -> Result<OrderStudy> {
    let dt_ref = cfg.reference_dt()?;
    let m = coeffs.noise_dim();
    let steps = |dt: f64| Grid::new(dt, cfg.delay, coeffs.dim())?.steps_for(cfg.horizon);
    let reference = endpoint_on(coeffs, initial, cfg.delay, &NoiseStream::zero(dt_ref, m, steps(dt_ref)?), cfg.fp)?;
    let mut rows = Vec::with_capacity(cfg.dts.len());
    for &dt in &cfg.dts {
        let x = endpoint_on(coeffs, initial, cfg.delay, &NoiseStream::zero(dt, m, steps(dt)?), cfg.fp)?;
        rows.push(OrderRow {
            dt,
            error: math::sqrt(math::diff_norm_sq(&x, &reference)),
        });
    }
    Ok(OrderStudy {
        order: fit_slope(&rows),
        rows,
        reference_dt: dt_ref,
        n_paths: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::model::{self, CoefficientSet};

    fn grid() -> Grid {
        Grid::new(0.1, 0.5, 1).unwrap()
    }

    #[test]
    fn frozen_dynamics_keep_the_state() {
        let z = model::zero(1, 1).unwrap();
        let seg = Segment::from_fn(grid(), |t, o| o[0] = 1.0 + t).unwrap();
        let out = euler_step(&z, seg.view(), &[0.3], None, FixedPoint::default()).unwrap();
        assert_eq!(out.value, alloc::vec![1.0]);
    }

    #[test]
    fn deterministic_euler_step() {
        let c = 2.5;
        let set = CoefficientSet::new(1, 1).unwrap().with_drift(move |_, o| o[0] = c);
        let seg = Segment::constant(grid(), &[1.0]).unwrap();
        let out = euler_step(&set, seg.view(), &[0.0], None, FixedPoint::default()).unwrap();
        assert!((out.value[0] - (1.0 + c * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn endpoint_independent_neutral_converges_in_one_iteration() {
        let kappa = 0.4;
        let set = CoefficientSet::new(1, 1)
            .unwrap()
            .with_neutral(model::delayed_neutral(kappa))
            .with_drift(|seg, o| o[0] = -seg.endpoint()[0])
            .with_diffusion(|_, o| o[0] = 1.0);
        let seg = Segment::from_fn(grid(), |t, o| o[0] = 2.0 + t).unwrap();
        let out = euler_step(&set, seg.view(), &[0.2], None, FixedPoint::default()).unwrap();
        // X_{t+Δt}(-τ) is the current segment's second point
        let x_now = 2.0;
        let m_next = x_now - kappa * seg.point(0)[0] + (-x_now) * 0.1 + 0.2;
        let expected = m_next + kappa * seg.point(1)[0];
        assert!((out.value[0] - expected).abs() < 1e-14);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn contraction_ratio_bounded_by_kappa() {
        let kappa = 0.5;
        let set = CoefficientSet::new(1, 1)
            .unwrap()
            .with_neutral(model::sine_neutral(kappa))
            .with_diffusion(|_, o| o[0] = 1.0);
        let g = grid();
        let init = Segment::constant(g, &[0.3]).unwrap();
        let noise = NoiseStream::generate(5, g.dt(), 1, 200);
        let tr = simulate_traced(&set, &init, &noise, None, FixedPoint::default()).unwrap();
        assert!(tr.stats.max_ratio <= kappa + 1e-9, "ratio {}", tr.stats.max_ratio);
        assert!(tr.stats.max_iterations > 1);
    }

    #[test]
    fn non_convergence_reports_residual() {
        // x ↦ 0.1 + 2x diverges from x = 0
        let set = CoefficientSet::new(1, 1)
            .unwrap()
            .with_neutral(|seg, o| o[0] = 2.0 * seg.endpoint()[0])
            .with_drift(|_, o| o[0] = 1.0);
        let seg = Segment::zeros(grid());
        let err = euler_step(
            &set,
            seg.view(),
            &[0.0],
            None,
            FixedPoint {
                tol: 1e-12,
                max_iter: 7,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Convergence { iterations: 7, .. }));
    }

    #[test]
    fn nan_coefficient_is_a_numeric_error() {
        let set = CoefficientSet::new(1, 1).unwrap().with_drift(|_, o| o[0] = f64::NAN);
        let seg = Segment::zeros(grid());
        let err = euler_step(&set, seg.view(), &[0.0], None, FixedPoint::default()).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn brownian_path_is_sum_of_increments() {
        let set = model::brownian(1).unwrap();
        let cfg = SimConfig::new(1.0, 0.1, 0.5, 1, 1);
        let g = cfg.grid().unwrap();
        let init = Segment::constant(g, &[0.7]).unwrap();
        let noise = NoiseStream::generate(9, 0.1, 1, 10);
        let p = simulate_path(&set, &init, &cfg, &noise, None).unwrap();
        let mut w = 0.7;
        for k in 0..10 {
            w += noise.increment(k)[0];
            assert!((p.value_at_step(k + 1)[0] - w).abs() < 1e-14);
        }
    }

    #[test]
    fn stiff_part_decays_geometrically() {
        let a = 3.0;
        let set = model::zero(1, 1).unwrap().with_stiff(alloc::vec![-a]).unwrap();
        let cfg = SimConfig::new(1.0, 0.1, 0.5, 1, 1);
        let init = Segment::constant(cfg.grid().unwrap(), &[1.0]).unwrap();
        let p = simulate_path(&set, &init, &cfg, &NoiseStream::zero(0.1, 1, 10), None).unwrap();
        let mut x: f64 = 1.0;
        for k in 1..=10 {
            x *= 1.0 - a * 0.1;
            assert!((p.value_at_step(k)[0] - x).abs() < 1e-15);
        }
        let bad = model::zero(1, 1).unwrap().with_stiff(alloc::vec![-10.0]).unwrap();
        assert!(matches!(
            cfg.validate_for(&bad),
            Err(Error::InvalidParameter { field: "model.stiff", .. })
        ));
    }

    #[test]
    fn iteration_budget_grows_with_kappa() {
        let fp = FixedPoint::default().budget_for(0.9);
        assert!(fp.max_iter >= 262 + 10, "{}", fp.max_iter);
        assert_eq!(FixedPoint::default().budget_for(0.1).max_iter, 100);
    }

    #[test]
    fn coarsened_noise_preserves_the_path() {
        let fine = NoiseStream::generate(3, 0.01, 2, 40);
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.steps(), 10);
        let total_f: f64 = fine.increments().iter().step_by(2).sum();
        let total_c: f64 = coarse.increments().iter().step_by(2).sum();
        assert!((total_f - total_c).abs() < 1e-14);
        assert!(fine.coarsen(3).is_err());
    }

    #[test]
    fn ensembles_are_reproducible_and_index_stable() {
        let set = model::brownian(1).unwrap();
        let g = grid();
        let law = InitialLaw::Random(SegmentSampler::new(g, 0.5).unwrap());
        let cfg = SimConfig::new(1.0, 0.1, 0.5, 1, 1).with_paths(5).with_seed(42);
        let a = simulate_ensemble(&set, &law, &cfg, None, &Sequential).unwrap();
        let b = simulate_ensemble(&set, &law, &cfg, None, &Sequential).unwrap();
        assert_eq!(a, b);
        let small = simulate_ensemble(&set, &law, &cfg.clone().with_paths(2), None, &Sequential).unwrap();
        assert_eq!(small.paths()[1], a.paths()[1]);
    }

    #[test]
    fn dirac_law_repeats_the_segment() {
        let set = model::brownian(1).unwrap();
        let g = grid();
        let xi = Segment::from_fn(g, |t, o| o[0] = t * t).unwrap();
        let cfg = SimConfig::new(0.5, 0.1, 0.5, 1, 1).with_paths(3);
        let e = simulate_ensemble(&set, &InitialLaw::Dirac(xi.clone()), &cfg, None, &Sequential).unwrap();
        for p in e.paths() {
            assert_eq!(p.initial_segment(), xi);
        }
    }

    #[test]
    fn ode_limit_tracks_exponential_decay() {
        let set = CoefficientSet::new(1, 1).unwrap().with_drift(|s, o| o[0] = -s.endpoint()[0]);
        let cfg = SimConfig::new(1.0, 0.001, 0.25, 1, 1);
        let init = Segment::constant(cfg.grid().unwrap(), &[1.0]).unwrap();
        let p = simulate_path(&set, &init, &cfg, &NoiseStream::zero(0.001, 1, 1000), None).unwrap();
        let err = (p.value_at_step(1000)[0] - libm::exp(-1.0)).abs();
        assert!(err < 0.001 && err > 1e-5, "Euler error {err}");
    }
}
