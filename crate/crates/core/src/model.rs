//! Coefficients of the neutral equation and sampling-based assumption checks.
//!
//! A [`CoefficientSet`] bundles the neutral term `G`, the drift `b`, the
//! diffusion `σ` (row-major `d × m`), an optional diagonal stiff part `A`
//! and whatever regularity constants the user declares for them.
//!
//! The checkers are falsifiers: they evaluate the assumption inequalities on
//! random segment pairs and report the tightest constants consistent with
//! what they saw. A sampled Lipschitz ratio is a lower bound on the true
//! constant, so a declared constant that passes is *not contradicted*, not
//! proved.
//!
//! Sign convention for the uniform dissipativity constant: the checker
//! returns `λ₁` such that
//! `2⟨Δξ(0) - ΔG, Δb⟩ + ‖Δσ‖²_HS ≤ -λ₁ ‖ξ - η‖²_∞` on every sample, i.e.
//! positive `λ₁` means contraction. This is the sign under which the
//! constants `α(T)`, `β(T)` are derived.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math;
use crate::paths::{rho_2, rho_uniform, Grid, Segment, SegmentView};
use crate::rng::{self, Purpose, StreamRng};

/// `f(segment, out)` writing a vector (or a row-major matrix) into `out`.
pub type Functional = Arc<dyn Fn(SegmentView<'_>, &mut [f64]) + Send + Sync>;

/// Regularity constants a user may declare for a coefficient set.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeclaredConstants {
    /// Lipschitz constant of `G` in the uniform norm.
    pub kappa: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// Bound on `‖σ‖²`.
    pub lambda3: Option<f64>,
    /// Lipschitz constant of `G` in `ρ₂`.
    pub k: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    /// Delay measure `Λ` as point masses on the segment grid.
    pub delay_weights: Option<Vec<f64>>,
}

impl DeclaredConstants {
    pub fn validate(&self) -> Result<()> {
        if let Some(kappa) = self.kappa {
            if !(0.0..1.0).contains(&kappa) {
                return Err(Error::param("kappa", "(A1) requires kappa in [0, 1)"));
            }
        }
        if let Some(k) = self.k {
            if !(0.0..1.0).contains(&k) {
                return Err(Error::param("k", "(B1) requires k in [0, 1)"));
            }
        }
        if let Some(l1) = self.lambda1 {
            if !l1.is_finite() {
                return Err(Error::param("lambda1", "must be finite"));
            }
        }
        if let Some(l2) = self.lambda2 {
            if !(l2.is_finite() && l2 >= 0.0) {
                return Err(Error::param("lambda2", "(A2) requires lambda2 >= 0"));
            }
        }
        if let Some(l3) = self.lambda3 {
            if !(l3.is_finite() && l3 > 0.0) {
                return Err(Error::param("lambda3", "(A3) requires lambda3 > 0"));
            }
        }
        if let Some(k1) = self.k1 {
            if !k1.is_finite() {
                return Err(Error::param("k1", "must be finite"));
            }
        }
        if let Some(k2) = self.k2 {
            if !(k2.is_finite() && k2 >= 0.0) {
                return Err(Error::param("k2", "(B2) requires k2 >= 0"));
            }
        }
        if let Some(w) = &self.delay_weights {
            check_probability(w, "delay_weights")?;
        }
        Ok(())
    }
}

fn check_probability(w: &[f64], field: &'static str) -> Result<()> {
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::param(field, "weights must be finite and nonnegative"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::param(field, "weights must sum to 1"));
    }
    Ok(())
}

/// Uniform probability on `[-τ, 0]` discretised with trapezoid weights, so
/// that `Σ_j Λ_j |ξ_j|² = ρ₂(ξ, 0)²` exactly.
pub fn uniform_delay_weights(grid: Grid) -> Vec<f64> {
    let tau = grid.delay();
    grid.segment_weights().into_iter().map(|w| w / tau).collect()
}

/// `G`, `b`, `σ`, optional diagonal `A`, and declared constants.
#[derive(Clone)]
pub struct CoefficientSet {
    name: String,
    dim: usize,
    noise_dim: usize,
    neutral: Option<Functional>,
    drift: Option<Functional>,
    diffusion: Option<Functional>,
    stiff: Option<Vec<f64>>,
    segment_points: Option<usize>,
    declared: DeclaredConstants,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("neutral", &self.neutral.is_some())
            .field("drift", &self.drift.is_some())
            .field("diffusion", &self.diffusion.is_some())
            .field("stiff", &self.stiff)
            .field("declared", &self.declared)
            .finish()
    }
}

impl CoefficientSet {
    /// All coefficients zero.
    pub fn new(dim: usize, noise_dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("d", "must be >= 1"));
        }
        if noise_dim == 0 {
            return Err(Error::param("m", "must be >= 1"));
        }
        Ok(CoefficientSet {
            name: "custom".to_string(),
            dim,
            noise_dim,
            neutral: None,
            drift: None,
            diffusion: None,
            stiff: None,
            segment_points: None,
            declared: DeclaredConstants::default(),
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_neutral(mut self, g: impl Fn(SegmentView<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.neutral = Some(Arc::new(g));
        self
    }

    pub fn with_drift(mut self, b: impl Fn(SegmentView<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(b));
        self
    }

    /// `σ` writes a row-major `d × m` matrix.
    pub fn with_diffusion(mut self, s: impl Fn(SegmentView<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Some(Arc::new(s));
        self
    }

    /// Diagonal of the stiff linear part; every entry must be `< 0`.
    pub fn with_stiff(mut self, diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.len() != self.dim {
            return Err(Error::param("model.stiff", "diagonal must have d entries"));
        }
        if diagonal.iter().any(|a| !(a.is_finite() && *a < 0.0)) {
            return Err(Error::param("model.stiff", "entries must be finite and strictly negative"));
        }
        self.stiff = Some(diagonal);
        Ok(self)
    }

    pub fn with_declared(mut self, declared: DeclaredConstants) -> Result<Self> {
        declared.validate()?;
        self.declared = declared;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn has_neutral(&self) -> bool {
        self.neutral.is_some()
    }

    pub fn stiff(&self) -> Option<&[f64]> {
        self.stiff.as_deref()
    }

    pub fn declared(&self) -> &DeclaredConstants {
        &self.declared
    }

    /// `λ₀ = min_i (-A_ii)`, when `A` is present.
    pub fn spectral_gap(&self) -> Option<f64> {
        self.stiff
            .as_ref()
            .map(|a| a.iter().map(|x| -x).fold(f64::INFINITY, f64::min))
    }

    /// Confirm the coefficients can be evaluated on `grid`.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch("segment dimension differs from model dimension"));
        }
        if let Some(n) = self.segment_points {
            if n != grid.segment_points() {
                return Err(Error::GridMismatch("model weights were built for a different delay grid"));
            }
        }
        if let Some(w) = &self.declared.delay_weights {
            if w.len() != grid.segment_points() {
                return Err(Error::GridMismatch("declared delay weights do not match the segment grid"));
            }
        }
        Ok(())
    }

    pub fn neutral_into(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        match &self.neutral {
            Some(g) => g(seg, out),
            None => out.iter_mut().for_each(|x| *x = 0.0),
        }
    }

    /// `b(ξ)` without the stiff part.
    pub fn drift_into(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        match &self.drift {
            Some(b) => b(seg, out),
            None => out.iter_mut().for_each(|x| *x = 0.0),
        }
    }

    /// `A ξ(0) + b(ξ)`.
    pub fn full_drift_into(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        self.drift_into(seg, out);
        if let Some(a) = &self.stiff {
            for ((o, a), x) in out.iter_mut().zip(a).zip(seg.endpoint()) {
                *o += a * x;
            }
        }
    }

    pub fn diffusion_into(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        match &self.diffusion {
            Some(s) => s(seg, out),
            None => out.iter_mut().for_each(|x| *x = 0.0),
        }
    }

    pub fn neutral(&self, seg: SegmentView<'_>) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        self.neutral_into(seg, &mut out);
        out
    }

    pub fn drift(&self, seg: SegmentView<'_>) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        self.drift_into(seg, &mut out);
        out
    }

    pub fn full_drift(&self, seg: SegmentView<'_>) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        self.full_drift_into(seg, &mut out);
        out
    }

    pub fn diffusion(&self, seg: SegmentView<'_>) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim * self.noise_dim];
        self.diffusion_into(seg, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// presets

/// `G = b = σ = 0`.
pub fn zero(dim: usize, noise_dim: usize) -> Result<CoefficientSet> {
    Ok(CoefficientSet::new(dim, noise_dim)?.named("zero"))
}

/// `G = b = 0`, `σ = I_d`: the segment process of a Brownian motion.
pub fn brownian(dim: usize) -> Result<CoefficientSet> {
    CoefficientSet::new(dim, dim)?
        .named("brownian")
        .with_diffusion(move |_, out| {
            out.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..dim {
                out[i * dim + i] = 1.0;
            }
        })
        .with_declared(DeclaredConstants {
            kappa: Some(0.0),
            k: Some(0.0),
            lambda2: Some(0.0),
            lambda3: Some(1.0),
            ..Default::default()
        })
}

/// Scalar-coordinate linear delay equation without neutral term:
/// `b(ξ) = -decay·ξ(0) + delayed·ξ(-τ)`, `σ = sigma·I`.
pub fn linear_delay(dim: usize, decay: f64, delayed: f64, sigma: f64) -> Result<CoefficientSet> {
    let set = CoefficientSet::new(dim, dim)?
        .named("linear-delay")
        .with_drift(move |seg, out| {
            for ((o, x0), xl) in out.iter_mut().zip(seg.endpoint()).zip(seg.oldest()) {
                *o = -decay * x0 + delayed * xl;
            }
        });
    if sigma == 0.0 {
        return Ok(set);
    }
    Ok(set.with_diffusion(move |_, out| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..dim {
            out[i * dim + i] = sigma;
        }
    }))
}

/// Pure-delay neutral term `G(ξ) = κ ξ(-τ)`, independent of `ξ(0)`.
pub fn delayed_neutral(kappa: f64) -> impl Fn(SegmentView<'_>, &mut [f64]) + Send + Sync + 'static {
    move |seg, out| {
        for (o, x) in out.iter_mut().zip(seg.oldest()) {
            *o = kappa * x;
        }
    }
}

/// Endpoint neutral term `G(ξ) = κ sin(ξ(0))`, Lipschitz `κ` in `ξ(0)`.
pub fn sine_neutral(kappa: f64) -> impl Fn(SegmentView<'_>, &mut [f64]) + Send + Sync + 'static {
    move |seg, out| {
        for (o, x) in out.iter_mut().zip(seg.endpoint()) {
            *o = kappa * libm::sin(*x);
        }
    }
}

/// The linear example
///
/// ```text
/// G(ξ) = (k/τ) ∫ ξ(θ) dθ,
/// b(ξ) = c₁ ξ(0) + ∫ ξ dΛ₁,
/// σ(ξ) = diag(c₃ ξ(0) + ∫ ξ dΛ₂),  optionally clipped to ‖σ‖ ≤ cap.
/// ```
///
/// `Λ₁`, `Λ₂` are nonnegative point masses on the segment grid (empty means
/// the zero measure). With `d > 1` the diffusion acts coordinatewise, so
/// `m = d`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearExample {
    pub dim: usize,
    pub k: f64,
    pub c1: f64,
    pub drift_weights: Vec<f64>,
    pub c3: f64,
    pub diffusion_weights: Vec<f64>,
    pub sigma_cap: Option<f64>,
}

impl LinearExample {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("model.dim", "must be >= 1"));
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::param("model.k", "the linear example requires k in (0, 1)"));
        }
        if !self.c1.is_finite() || !self.c3.is_finite() {
            return Err(Error::param("model.c1", "c1 and c3 must be finite"));
        }
        for (w, field) in [
            (&self.drift_weights, "model.drift_weights"),
            (&self.diffusion_weights, "model.diffusion_weights"),
        ] {
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::param(field, "weights must be finite and nonnegative"));
            }
        }
        if !self.drift_weights.is_empty()
            && !self.diffusion_weights.is_empty()
            && self.drift_weights.len() != self.diffusion_weights.len()
        {
            return Err(Error::param("model.diffusion_weights", "weight vectors must have equal length"));
        }
        if let Some(cap) = self.sigma_cap {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(Error::param("model.sigma_cap", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    fn weight_points(&self) -> Option<usize> {
        [&self.drift_weights, &self.diffusion_weights]
            .into_iter()
            .find(|w| !w.is_empty())
            .map(|w| w.len())
    }
}

fn weighted_sum_into(seg: SegmentView<'_>, weights: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (j, w) in weights.iter().enumerate() {
        if *w != 0.0 {
            for (o, x) in out.iter_mut().zip(seg.point(j)) {
                *o += w * x;
            }
        }
    }
}

/// Evaluators for the linear example, with `κ = k` declared (and `λ₃ = cap²`
/// when the diffusion is clipped).
pub fn linear_coefficients(ex: &LinearExample) -> Result<CoefficientSet> {
    ex.validate()?;
    let d = ex.dim;
    let k = ex.k;
    let neutral = move |seg: SegmentView<'_>, out: &mut [f64]| {
        seg.integral_into(out);
        let scale = k / seg.grid().delay();
        out.iter_mut().for_each(|x| *x *= scale);
    };
    let c1 = ex.c1;
    let w1 = ex.drift_weights.clone();
    let drift = move |seg: SegmentView<'_>, out: &mut [f64]| {
        weighted_sum_into(seg, &w1, out);
        for (o, x) in out.iter_mut().zip(seg.endpoint()) {
            *o += c1 * x;
        }
    };
    let c3 = ex.c3;
    let w2 = ex.diffusion_weights.clone();
    let cap = ex.sigma_cap;
    let diffusion = move |seg: SegmentView<'_>, out: &mut [f64]| {
        let mut diag = alloc::vec![0.0; d];
        weighted_sum_into(seg, &w2, &mut diag);
        for (o, x) in diag.iter_mut().zip(seg.endpoint()) {
            *o += c3 * x;
        }
        if let Some(cap) = cap {
            // operator norm of a diagonal matrix is its largest |entry|
            let op = diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if op > cap {
                let s = cap / op;
                diag.iter_mut().for_each(|x| *x *= s);
            }
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..d {
            out[i * d + i] = diag[i];
        }
    };
    let mut set = CoefficientSet::new(d, d)?
        .named("linear")
        .with_neutral(neutral)
        .with_drift(drift)
        .with_diffusion(diffusion)
        .with_declared(DeclaredConstants {
            kappa: Some(k),
            k: Some(k),
            lambda3: cap.map(|c| c * c),
            ..Default::default()
        })?;
    set.segment_points = ex.weight_points();
    Ok(set)
}

// ---------------------------------------------------------------------------
// samplers

/// Random segments: a Gaussian endpoint of standard deviation `scale`
/// continued backwards by a random walk whose variance over the whole delay
/// is `scale²`, optionally added to a fixed `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSampler {
    grid: Grid,
    scale: f64,
    center: Option<Segment>,
}

impl SegmentSampler {
    pub fn new(grid: Grid, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param("sampler.scale", "must be finite and > 0"));
        }
        Ok(SegmentSampler {
            grid,
            scale,
            center: None,
        })
    }

    pub fn around(mut self, center: Segment) -> Result<Self> {
        if !center.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch("sampler center is on a different grid"));
        }
        self.center = Some(center);
        Ok(self)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Segment {
        let g = self.grid;
        let d = g.dim();
        let n = g.delay_steps();
        let mut v = alloc::vec![0.0; (n + 1) * d];
        let step = self.scale * math::sqrt(1.0 / n as f64);
        for c in 0..d {
            v[n * d + c] = self.scale * rng::normal(rng);
        }
        for j in (0..n).rev() {
            for c in 0..d {
                v[j * d + c] = v[(j + 1) * d + c] + step * rng::normal(rng);
            }
        }
        if let Some(center) = &self.center {
            for (x, c) in v.iter_mut().zip(center.values()) {
                *x += c;
            }
        }
        Segment::from_values(g, v).expect("sampler produces finite values")
    }
}

/// How the second segment of a pair relates to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Two independent draws.
    Independent,
    /// `η = ξ + c` for a random constant `c`.
    ConstantShift,
    /// `η` differs from `ξ` only at `θ = 0`.
    EndpointSpike,
    /// Cycles independent, independent, shift, spike.
    Mixed,
}

/// Index-addressed source of random segment pairs.
#[derive(Debug, Clone)]
pub struct PairSampler {
    segments: SegmentSampler,
    kind: PairKind,
    seed: u64,
}

impl PairSampler {
    pub fn new(segments: SegmentSampler, kind: PairKind, seed: u64) -> Self {
        PairSampler { segments, kind, seed }
    }

    /// Mixed pairs with endpoint scale 1.
    pub fn default_for(grid: Grid, seed: u64) -> Self {
        Self::new(
            SegmentSampler::new(grid, 1.0).expect("unit scale is valid"),
            PairKind::Mixed,
            seed,
        )
    }

    pub fn grid(&self) -> Grid {
        self.segments.grid
    }

    pub fn pair(&self, index: usize) -> (Segment, Segment) {
        let mut rng = rng::stream(self.seed, Purpose::Sampler, index as u64);
        let kind = match self.kind {
            PairKind::Mixed => match index % 4 {
                0 | 1 => PairKind::Independent,
                2 => PairKind::ConstantShift,
                _ => PairKind::EndpointSpike,
            },
            k => k,
        };
        let a = self.segments.sample(&mut rng);
        let g = self.segments.grid;
        let d = g.dim();
        let b = match kind {
            PairKind::Independent | PairKind::Mixed => self.segments.sample(&mut rng),
            PairKind::ConstantShift => {
                let c: Vec<f64> = (0..d).map(|_| self.segments.scale * rng::normal(&mut rng)).collect();
                let v = a
                    .values()
                    .chunks_exact(d)
                    .flat_map(|p| p.iter().zip(&c).map(|(x, s)| x + s))
                    .collect();
                Segment::from_values(g, v).expect("finite")
            }
            PairKind::EndpointSpike => {
                let mut v = a.values().to_vec();
                let n = g.delay_steps();
                for c in 0..d {
                    v[n * d + c] += self.segments.scale * rng::normal(&mut rng);
                }
                Segment::from_values(g, v).expect("finite")
            }
        };
        (a, b)
    }
}

// ---------------------------------------------------------------------------
// checkers

/// Largest sampled Lipschitz ratio of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LipschitzEstimate {
    pub constant: f64,
    pub pairs_used: usize,
}

impl LipschitzEstimate {
    /// `κ̂ < 1`, required for the neutral fixed point.
    pub fn is_contraction(&self) -> bool {
        self.constant < 1.0
    }
}

fn lipschitz_estimate<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    exec: &E,
    denom: fn(&Segment, &Segment) -> f64,
) -> Result<LipschitzEstimate> {
    if n < 2 {
        return Err(Error::param("n", "need at least 2 sample pairs"));
    }
    coeffs.check_grid(&sampler.grid())?;
    let d = coeffs.dim();
    let ratios = exec.map(n, |i| {
        let (a, b) = sampler.pair(i);
        let den = denom(&a, &b);
        if den <= 0.0 {
            return None;
        }
        let (mut ga, mut gb) = (alloc::vec![0.0; d], alloc::vec![0.0; d]);
        coeffs.neutral_into(a.view(), &mut ga);
        coeffs.neutral_into(b.view(), &mut gb);
        Some(math::sqrt(math::diff_norm_sq(&ga, &gb)) / den)
    });
    let used: Vec<f64> = ratios.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::Estimation("all sampled pairs were degenerate".to_string()));
    }
    Ok(LipschitzEstimate {
        constant: used.iter().copied().fold(0.0, f64::max),
        pairs_used: used.len(),
    })
}

/// (A1): `κ̂ = max |G(ξ) - G(η)| / ‖ξ - η‖_∞` over sampled pairs.
pub fn estimate_a1<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    exec: &E,
) -> Result<LipschitzEstimate> {
    lipschitz_estimate(coeffs, sampler, n, exec, |a, b| rho_uniform(a, b).unwrap_or(0.0))
}

/// (B1): `k̂ = max |G(ξ) - G(η)| / ρ₂(ξ, η)` over sampled pairs.
pub fn estimate_b1<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    exec: &E,
) -> Result<LipschitzEstimate> {
    lipschitz_estimate(coeffs, sampler, n, exec, |a, b| rho_2(a, b).unwrap_or(0.0))
}

/// Terms of the dissipativity inequality for one pair.
#[derive(Debug, Clone, Copy)]
struct FormSample {
    /// `2⟨Δξ(0) - ΔG, Δ(Aξ(0) + b)⟩ + ‖Δσ‖²_HS`
    form: f64,
    sigma_hs_sq: f64,
    sup_sq: f64,
    endpoint_sq: f64,
    weighted_sq: f64,
}

fn form_sample(coeffs: &CoefficientSet, a: &Segment, b: &Segment, weights: Option<&[f64]>) -> FormSample {
    let d = coeffs.dim();
    let m = coeffs.noise_dim();
    let (va, vb) = (a.view(), b.view());
    let mut ga = alloc::vec![0.0; d];
    let mut gb = alloc::vec![0.0; d];
    coeffs.neutral_into(va, &mut ga);
    coeffs.neutral_into(vb, &mut gb);
    let mut ba = alloc::vec![0.0; d];
    let mut bb = alloc::vec![0.0; d];
    coeffs.full_drift_into(va, &mut ba);
    coeffs.full_drift_into(vb, &mut bb);
    let mut sa = alloc::vec![0.0; d * m];
    let mut sb = alloc::vec![0.0; d * m];
    coeffs.diffusion_into(va, &mut sa);
    coeffs.diffusion_into(vb, &mut sb);

    let mut inner = 0.0;
    for i in 0..d {
        let lhs = (va.endpoint()[i] - vb.endpoint()[i]) - (ga[i] - gb[i]);
        inner += lhs * (ba[i] - bb[i]);
    }
    let sigma_hs_sq = math::diff_norm_sq(&sa, &sb);
    let sup = rho_uniform(a, b).unwrap_or(0.0);
    let weighted_sq = weights
        .map(|w| {
            w.iter()
                .enumerate()
                .map(|(j, wj)| wj * math::diff_norm_sq(va.point(j), vb.point(j)))
                .sum()
        })
        .unwrap_or(0.0);
    FormSample {
        form: 2.0 * inner + sigma_hs_sq,
        sigma_hs_sq,
        sup_sq: sup * sup,
        endpoint_sq: math::diff_norm_sq(va.endpoint(), vb.endpoint()),
        weighted_sq,
    }
}

/// Tightest uniform dissipativity constants seen on the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UniformDissipativity {
    /// Largest `λ₁` with `form ≤ -λ₁‖Δ‖²_∞` on every sample.
    pub lambda1: f64,
    /// Smallest `λ₂` with `‖Δσ‖²_HS ≤ λ₂‖Δ‖²_∞` on every sample.
    pub lambda2: f64,
    pub pairs_used: usize,
}

/// Constants `(k₁, k₂)` with `form ≤ -k₁|Δξ(0)|² + k₂∫|Δ|²dΛ` on every sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightedDissipativity {
    pub k1: f64,
    pub k2: f64,
    pub pairs_used: usize,
    /// `min_i (rhs_i - form_i)`; nonnegative by construction.
    pub worst_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DissipativityMode {
    /// (A2) / (C1): against `‖ξ - η‖²_∞`.
    Uniform,
    /// (B2) / (C2): against `|Δξ(0)|²` and `∫|Δ|² dΛ`.
    Weighted { delay_weights: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DissipativityEstimate {
    Uniform(UniformDissipativity),
    Weighted(WeightedDissipativity),
}

fn collect_forms<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    exec: &E,
    weights: Option<&[f64]>,
) -> Result<Vec<FormSample>> {
    if n < 2 {
        return Err(Error::param("n", "need at least 2 sample pairs"));
    }
    coeffs.check_grid(&sampler.grid())?;
    if let Some(w) = weights {
        if w.len() != sampler.grid().segment_points() {
            return Err(Error::GridMismatch("delay weights do not match the segment grid"));
        }
        check_probability(w, "delay_weights")?;
    }
    let samples: Vec<FormSample> = exec
        .map(n, |i| {
            let (a, b) = sampler.pair(i);
            form_sample(coeffs, &a, &b, weights)
        })
        .into_iter()
        .filter(|s| s.sup_sq > 0.0)
        .collect();
    if samples.is_empty() {
        return Err(Error::Estimation("all sampled pairs were degenerate".to_string()));
    }
    Ok(samples)
}

/// Uniform-mode estimate, (A2) or (C1) when `A` is present.
pub fn estimate_a2<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    exec: &E,
) -> Result<UniformDissipativity> {
    let samples = collect_forms(coeffs, sampler, n, exec, None)?;
    let worst_form = samples
        .iter()
        .map(|s| s.form / s.sup_sq)
        .fold(f64::NEG_INFINITY, f64::max);
    let lambda2 = samples
        .iter()
        .map(|s| s.sigma_hs_sq / s.sup_sq)
        .fold(0.0, f64::max);
    Ok(UniformDissipativity {
        lambda1: -worst_form,
        lambda2,
        pairs_used: samples.len(),
    })
}

/// Weighted-mode estimate, (B2) or (C2) when `A` is present.
///
/// Least squares of the form against `(-|Δξ(0)|², ∫|Δ|²dΛ)` with `k₂ ≥ 0`,
/// then a common shift `k₁ -= t`, `k₂ += t` by the largest normalised
/// violation so the inequality holds on every sample.
pub fn estimate_b2<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    delay_weights: &[f64],
    exec: &E,
) -> Result<WeightedDissipativity> {
    let samples = collect_forms(coeffs, sampler, n, exec, Some(delay_weights))?;
    let (mut saa, mut sac, mut scc, mut saq, mut scq) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in &samples {
        let (a, c, q) = (s.endpoint_sq, s.weighted_sq, s.form);
        saa += a * a;
        sac += a * c;
        scc += c * c;
        saq += a * q;
        scq += c * q;
    }
    // model: form ≈ u·a + v·c with u = -k₁, v = k₂
    let det = saa * scc - sac * sac;
    let (mut u, mut v) = if det > 1e-12 * saa * scc && det > 0.0 {
        ((saq * scc - scq * sac) / det, (scq * saa - saq * sac) / det)
    } else if saa > 0.0 {
        (saq / saa, 0.0)
    } else {
        (0.0, if scc > 0.0 { scq / scc } else { 0.0 })
    };
    if v < 0.0 {
        v = 0.0;
        u = if saa > 0.0 { saq / saa } else { 0.0 };
    }

    let scale = samples
        .iter()
        .map(|s| s.form.abs().max(s.endpoint_sq + s.weighted_sq))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut shift = f64::NEG_INFINITY;
    for s in &samples {
        let denom = s.endpoint_sq + s.weighted_sq;
        let violation = s.form - (u * s.endpoint_sq + v * s.weighted_sq);
        if denom <= 1e-300 {
            if s.form > 1e-12 * scale {
                return Err(Error::Estimation(
                    "a sample with zero endpoint and zero weighted difference has a positive form; \
                     no (k1, k2) can cover it"
                        .to_string(),
                ));
            }
            continue;
        }
        shift = shift.max(violation / denom);
    }
    if shift > 0.0 {
        let t = shift * (1.0 + 1e-9) + 1e-14;
        u += t;
        v += t;
    }
    let worst_slack = samples
        .iter()
        .map(|s| u * s.endpoint_sq + v * s.weighted_sq - s.form)
        .fold(f64::INFINITY, f64::min);
    Ok(WeightedDissipativity {
        k1: -u,
        k2: v,
        pairs_used: samples.len(),
        worst_slack,
    })
}

/// Dispatch on the mode.
pub fn estimate_a2_b2<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    mode: &DissipativityMode,
    exec: &E,
) -> Result<DissipativityEstimate> {
    match mode {
        DissipativityMode::Uniform => estimate_a2(coeffs, sampler, n, exec).map(DissipativityEstimate::Uniform),
        DissipativityMode::Weighted { delay_weights } => {
            estimate_b2(coeffs, sampler, n, delay_weights, exec).map(DissipativityEstimate::Weighted)
        }
    }
}

/// Count samples on which declared `(k₁, k₂)` violate the weighted inequality
/// by more than `rel_tol` of the sample scale. Returns `(violations, worst slack)`.
pub fn b2_violations<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    k1: f64,
    k2: f64,
    delay_weights: &[f64],
    rel_tol: f64,
    exec: &E,
) -> Result<(usize, f64)> {
    let samples = collect_forms(coeffs, sampler, n, exec, Some(delay_weights))?;
    let mut count = 0;
    let mut worst = f64::INFINITY;
    for s in &samples {
        let rhs = -k1 * s.endpoint_sq + k2 * s.weighted_sq;
        let slack = rhs - s.form;
        let scale = s.form.abs().max(rhs.abs()).max(s.sup_sq);
        if slack < -rel_tol * scale {
            count += 1;
        }
        worst = worst.min(slack);
    }
    Ok((count, worst))
}

/// (A3) check: largest sampled operator norm of `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiffusionBound {
    /// `λ̂₃ = max ‖σ(ξ)‖` over sampled segments.
    pub max_operator_norm: f64,
    pub declared: Option<f64>,
    /// `declared ≥ λ̂₃²`, when a constant is declared.
    pub pass: Option<bool>,
}

/// The declared `λ₃` bounds `‖σ‖²` (that is the form in which it enters every
/// constant), so the pass rule compares it to the squared sampled norm.
pub fn check_a3<E: Executor>(
    coeffs: &CoefficientSet,
    sampler: &PairSampler,
    n: usize,
    exec: &E,
) -> Result<DiffusionBound> {
    if n < 1 {
        return Err(Error::param("n", "need at least 1 sample"));
    }
    coeffs.check_grid(&sampler.grid())?;
    let d = coeffs.dim();
    let m = coeffs.noise_dim();
    let norms = exec.map(n, |i| {
        let (a, b) = sampler.pair(i);
        let mut s = alloc::vec![0.0; d * m];
        coeffs.diffusion_into(a.view(), &mut s);
        let na = math::operator_norm(&s, d, m);
        coeffs.diffusion_into(b.view(), &mut s);
        na.max(math::operator_norm(&s, d, m))
    });
    let max_operator_norm = norms.into_iter().fold(0.0, f64::max);
    if !max_operator_norm.is_finite() {
        return Err(Error::Numeric("diffusion coefficient"));
    }
    let declared = coeffs.declared().lambda3;
    Ok(DiffusionBound {
        max_operator_norm,
        declared,
        pass: declared.map(|l3| l3 * (1.0 + 1e-12) >= max_operator_norm * max_operator_norm),
    })
}
