//! Drift-tilted and reference solutions under shared noise.
//!
//! For a bounded adapted control `h` the tilted solution solves the
//! equation with drift `b + σh` driven by a Brownian motion `W̃`, and the
//! reference solution solves the original equation driven by the same `W̃`.
//! With `W = W̃ + ∫h` the tilted path is the original equation driven by
//! `W`, so its law under the coupling measure is `FΠ` where
//!
//! ```text
//! log F = ∫⟨h, dW⟩ - ½∫|h|² dt = ∫⟨h, dW̃⟩ + ½∫|h|² dt,
//! ```
//!
//! and the relative entropy of `FΠ` with respect to `Π` is `½ E ∫|h|² dt`.
//! All stochastic integrals are left-point sums on the simulation grid.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::exec::{collect_results, Executor};
use crate::math;
use crate::model::CoefficientSet;
use crate::paths::{PathEnsemble, PathMetric, SegmentPath, SegmentView};
use crate::rng::{self, Purpose};
use crate::simulate::{noise_seed, simulate_traced, InitialLaw, NoiseStream, SimConfig};
use crate::stats;

/// `h(t, ξ, out)`.
pub type ControlFn = Arc<dyn Fn(f64, SegmentView<'_>, &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TiltKind {
    Zero,
    Constant,
    /// Deterministic `h(t)`.
    OpenLoop,
    /// `h(t, X_t)` evaluated on the tilted solution's own segment.
    Feedback,
}

/// A bounded control, clipped radially to `|h| ≤ bound`.
#[derive(Clone)]
pub struct GirsanovTilt {
    kind: TiltKind,
    noise_dim: usize,
    bound: f64,
    constant: Vec<f64>,
    control: Option<ControlFn>,
}

impl fmt::Debug for GirsanovTilt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GirsanovTilt")
            .field("kind", &self.kind)
            .field("noise_dim", &self.noise_dim)
            .field("bound", &self.bound)
            .field("constant", &self.constant)
            .finish()
    }
}

fn check_bound(bound: f64) -> Result<()> {
    if !(bound.is_finite() && bound >= 0.0) {
        return Err(Error::param("tilt.h_bound", "unbounded controls are not supported; give a finite bound"));
    }
    Ok(())
}

impl GirsanovTilt {
    pub fn zero(noise_dim: usize) -> Self {
        GirsanovTilt {
            kind: TiltKind::Zero,
            noise_dim,
            bound: 0.0,
            constant: alloc::vec![0.0; noise_dim],
            control: None,
        }
    }

    /// `h ≡ value`, with bound `|value|`.
    pub fn constant(value: Vec<f64>) -> Result<Self> {
        if value.is_empty() {
            return Err(Error::param("tilt.h", "needs m >= 1 entries"));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("tilt.h", "entries must be finite"));
        }
        Ok(GirsanovTilt {
            kind: TiltKind::Constant,
            noise_dim: value.len(),
            bound: math::norm(&value),
            constant: value,
            control: None,
        })
    }

    pub fn open_loop(
        noise_dim: usize,
        bound: f64,
        h: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        check_bound(bound)?;
        Ok(GirsanovTilt {
            kind: TiltKind::OpenLoop,
            noise_dim,
            bound,
            constant: Vec::new(),
            control: Some(Arc::new(move |t, _, out| h(t, out))),
        })
    }

    pub fn feedback(
        noise_dim: usize,
        bound: f64,
        h: impl Fn(f64, SegmentView<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        check_bound(bound)?;
        Ok(GirsanovTilt {
            kind: TiltKind::Feedback,
            noise_dim,
            bound,
            constant: Vec::new(),
            control: Some(Arc::new(h)),
        })
    }

    /// `h_j(t, ξ) = c · tanh(ξ(0)_{j mod d})`, bound `|c|√m`.
    pub fn tanh_feedback(c: f64, noise_dim: usize) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::param("tilt.c", "must be finite"));
        }
        Self::feedback(noise_dim, c.abs() * math::sqrt(noise_dim as f64), move |_, seg, out| {
            let x = seg.endpoint();
            for (j, o) in out.iter_mut().enumerate() {
                *o = c * math::tanh(x[j % x.len()]);
            }
        })
    }

    pub fn kind(&self) -> TiltKind {
        self.kind
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Write `h(t, seg)` into `out`; returns whether it had to be clipped.
    pub fn eval(&self, t: f64, seg: SegmentView<'_>, out: &mut [f64]) -> bool {
        match self.kind {
            TiltKind::Zero => {
                out.iter_mut().for_each(|x| *x = 0.0);
                false
            }
            TiltKind::Constant => {
                out.copy_from_slice(&self.constant);
                false
            }
            TiltKind::OpenLoop | TiltKind::Feedback => {
                (self.control.as_ref().expect("control present for this kind"))(t, seg, out);
                let n = math::norm(out);
                if !n.is_finite() {
                    // a non-finite control is clipped to zero and flagged
                    out.iter_mut().for_each(|x| *x = 0.0);
                    return true;
                }
                if n > self.bound {
                    let s = self.bound / n;
                    out.iter_mut().for_each(|x| *x *= s);
                    return true;
                }
                false
            }
        }
    }
}

/// Tilted (`x_paths`) and reference (`y_paths`) ensembles on shared noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingResult {
    pub x_paths: PathEnsemble,
    pub y_paths: PathEnsemble,
    /// `log F` of each tilted path.
    pub log_density: Vec<f64>,
    /// `½ Σ |h_k|² Δt` per path.
    pub entropy_terms: Vec<f64>,
    /// `max_k |X(t_k) - Y(t_k)|` per path.
    pub sup_diff: Vec<f64>,
    /// Steps on which the control was clipped, over all paths.
    pub clipped_steps: usize,
    pub tilt_kind: TiltKind,
}

impl CouplingResult {
    pub fn len(&self) -> usize {
        self.x_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_paths.is_empty()
    }

    pub fn entropy_estimate(&self) -> f64 {
        stats::mean(&self.entropy_terms)
    }

    /// `metric(X_i, Y_i)` for every pair.
    pub fn paired_distances(&self, metric: PathMetric) -> Result<Vec<f64>> {
        self.x_paths
            .paths()
            .iter()
            .zip(self.y_paths.paths())
            .map(|(x, y)| metric.distance(x, y))
            .collect()
    }
}

struct PairRun {
    x: SegmentPath,
    y: SegmentPath,
    log_density: f64,
    entropy: f64,
    sup_diff: f64,
    clipped: usize,
}

fn entropy_and_inner(controls: &[f64], noise: &NoiseStream) -> (f64, f64) {
    let m = noise.noise_dim();
    let dt = noise.dt();
    let mut half_sq = 0.0;
    let mut inner = 0.0;
    for (k, h) in controls.chunks_exact(m).enumerate() {
        half_sq += 0.5 * math::norm_sq(h) * dt;
        inner += math::dot(h, noise.increment(k));
    }
    (half_sq, inner)
}

/// Tilted and reference solutions for every path, each pair sharing one
/// noise stream and one initial segment.
pub fn coupled_simulate<E: Executor>(
    coeffs: &CoefficientSet,
    initial: &InitialLaw,
    cfg: &SimConfig,
    tilt: &GirsanovTilt,
    exec: &E,
) -> Result<CouplingResult> {
    check_bound(tilt.bound())?;
    if tilt.noise_dim() != coeffs.noise_dim() {
        return Err(Error::param("tilt.h", "dimension must equal the noise dimension m"));
    }
    let fp = cfg.validate_for(coeffs)?;
    let grid = cfg.grid()?;
    if !initial.grid().same_as(&grid) {
        return Err(Error::GridMismatch("initial law is on a different grid"));
    }
    let steps = cfg.steps()?;
    let seeds: Vec<u64> = (0..cfg.n_paths).map(|i| noise_seed(cfg.seed, i)).collect();
    let runs = collect_results(exec.map(cfg.n_paths, |i| -> Result<PairRun> {
        let noise = NoiseStream::generate(seeds[i], cfg.dt, cfg.noise_dim, steps);
        let init = initial.sample(cfg.seed, i);
        let tx = simulate_traced(coeffs, &init, &noise, Some(tilt), fp)?;
        let ty = simulate_traced(coeffs, &init, &noise, None, fp)?;
        let controls = tx.controls.as_deref().unwrap_or(&[]);
        let (entropy, inner) = entropy_and_inner(controls, &noise);
        let sup_diff = (0..=steps)
            .map(|k| math::sqrt(math::diff_norm_sq(tx.path.value_at_step(k), ty.path.value_at_step(k))))
            .fold(0.0, f64::max);
        Ok(PairRun {
            x: tx.path,
            y: ty.path,
            log_density: inner + entropy,
            entropy,
            sup_diff,
            clipped: tx.clipped,
        })
    }))?;
    let mut xs = Vec::with_capacity(runs.len());
    let mut ys = Vec::with_capacity(runs.len());
    let mut log_density = Vec::with_capacity(runs.len());
    let mut entropy_terms = Vec::with_capacity(runs.len());
    let mut sup_diff = Vec::with_capacity(runs.len());
    let mut clipped_steps = 0;
    for r in runs {
        xs.push(r.x);
        ys.push(r.y);
        log_density.push(r.log_density);
        entropy_terms.push(r.entropy);
        sup_diff.push(r.sup_diff);
        clipped_steps += r.clipped;
    }
    Ok(CouplingResult {
        x_paths: PathEnsemble::new(xs, seeds.clone())?,
        y_paths: PathEnsemble::new(ys, seeds)?,
        log_density,
        entropy_terms,
        sup_diff,
        clipped_steps,
        tilt_kind: tilt.kind(),
    })
}

/// Monte Carlo estimate of `½ E_Q ∫|h(t, X_t)|² dt` and its standard error.
pub fn relative_entropy(result: &CouplingResult) -> (f64, f64) {
    if result.entropy_terms.iter().all(|e| *e == 0.0) {
        return (0.0, 0.0);
    }
    stats::mean_se(&result.entropy_terms)
}

/// Untilted paths together with the density `F` each would receive.
#[derive(Debug, Clone, PartialEq)]
pub struct ReweightedEnsemble {
    pub paths: PathEnsemble,
    /// `log F = Σ⟨h_k, ΔW_k⟩ - ½ Σ |h_k|² Δt` along each untilted path.
    pub log_density: Vec<f64>,
}

/// Simulate under `P` (no tilt) and evaluate `log F` from the control along
/// each path and its driving noise.
pub fn simulate_reweighted<E: Executor>(
    coeffs: &CoefficientSet,
    initial: &InitialLaw,
    cfg: &SimConfig,
    tilt: &GirsanovTilt,
    exec: &E,
) -> Result<ReweightedEnsemble> {
    check_bound(tilt.bound())?;
    if tilt.noise_dim() != coeffs.noise_dim() {
        return Err(Error::param("tilt.h", "dimension must equal the noise dimension m"));
    }
    let fp = cfg.validate_for(coeffs)?;
    let steps = cfg.steps()?;
    let m = cfg.noise_dim;
    let seeds: Vec<u64> = (0..cfg.n_paths).map(|i| noise_seed(cfg.seed, i)).collect();
    let runs = collect_results(exec.map(cfg.n_paths, |i| -> Result<(SegmentPath, f64)> {
        let noise = NoiseStream::generate(seeds[i], cfg.dt, m, steps);
        let init = initial.sample(cfg.seed, i);
        let path = simulate_traced(coeffs, &init, &noise, None, fp)?.path;
        let mut h = alloc::vec![0.0; m];
        let mut controls = Vec::with_capacity(steps * m);
        for k in 0..steps {
            tilt.eval(k as f64 * cfg.dt, path.window(k), &mut h);
            controls.extend_from_slice(&h);
        }
        let (half_sq, inner) = entropy_and_inner(&controls, &noise);
        Ok((path, inner - half_sq))
    }))?;
    let (paths, log_density): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(ReweightedEnsemble {
        paths: PathEnsemble::new(paths, seeds)?,
        log_density,
    })
}

/// Agreement between `E_P[F φ]` and `E_Q[φ]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImportanceReport {
    /// `E_P[F φ]` from untilted paths.
    pub reweighted_mean: f64,
    pub reweighted_se: f64,
    /// `E_Q[φ]` from tilted paths.
    pub tilted_mean: f64,
    pub tilted_se: f64,
    pub z_score: f64,
    /// `E_P[F]`, which should be 1.
    pub normalization_mean: f64,
    pub normalization_se: f64,
    pub normalization_z: f64,
    /// Kish effective sample size `(ΣF)² / ΣF²`.
    pub effective_sample_size: f64,
    pub low_ess: bool,
    pub warning: Option<String>,
}

fn z(a: f64, b: f64, se_a: f64, se_b: f64) -> f64 {
    let s = math::sqrt(se_a * se_a + se_b * se_b);
    if s == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b) / s
    }
}

/// Compare the reweighted untilted estimate of `φ` with its direct estimate
/// on tilted paths. The untilted run uses streams independent of the tilted
/// one. `min_ess_fraction` (e.g. 0.05) sets the warning threshold.
pub fn importance_check<E: Executor>(
    coeffs: &CoefficientSet,
    initial: &InitialLaw,
    cfg: &SimConfig,
    tilt: &GirsanovTilt,
    phi: &(dyn Fn(&SegmentPath) -> f64 + Sync),
    min_ess_fraction: f64,
    exec: &E,
) -> Result<ImportanceReport> {
    let tilted = coupled_simulate(coeffs, initial, cfg, tilt, exec)?;
    let p_cfg = cfg.clone().with_seed(rng::derive_seed(cfg.seed, Purpose::Importance, 0));
    let untilted = simulate_reweighted(coeffs, initial, &p_cfg, tilt, exec)?;

    let f: Vec<f64> = untilted.log_density.iter().map(|l| math::exp(*l)).collect();
    let f_phi: Vec<f64> = f
        .iter()
        .zip(untilted.paths.paths())
        .map(|(w, p)| w * phi(p))
        .collect();
    let q_phi: Vec<f64> = tilted.x_paths.paths().iter().map(|p| phi(p)).collect();
    if f_phi.iter().chain(&q_phi).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("path functional"));
    }
    let (rm, rse) = stats::mean_se(&f_phi);
    let (tm, tse) = stats::mean_se(&q_phi);
    let (nm, nse) = stats::mean_se(&f);
    let sum: f64 = f.iter().sum();
    let sum_sq: f64 = f.iter().map(|w| w * w).sum();
    let ess = if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 };
    let low_ess = ess < min_ess_fraction * f.len() as f64;
    Ok(ImportanceReport {
        reweighted_mean: rm,
        reweighted_se: rse,
        tilted_mean: tm,
        tilted_se: tse,
        z_score: z(rm, tm, rse, tse),
        normalization_mean: nm,
        normalization_se: nse,
        normalization_z: z(nm, 1.0, nse, 0.0),
        effective_sample_size: ess,
        low_ess,
        warning: low_ess.then(|| "effective sample size below threshold; reweighted estimate is unreliable".to_string()),
    })
}
