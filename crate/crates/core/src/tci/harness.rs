//! End-to-end empirical check of a transportation cost inequality.
//!
//! Pipeline:
//!
//! 1. falsification checks of the declared constants (missing constants are
//!    filled from the checkers and flagged);
//! 2. tilted/reference coupling, giving the tilted ensemble `X̂` (law `FΠ`)
//!    and the entropy estimate;
//! 3. an independent untilted ensemble `B̂` (law `Π`) and a second one `B̂'`
//!    for the same-law finite-sample floor `W₂(B̂, B̂')`;
//! 4. `lhs = W₂(X̂, B̂)` under the inequality's path metric, with a
//!    percentile bootstrap over the precomputed cost matrix;
//! 5. `rhs = c_ent · √Ent + c_init · W₂(μ̂, μ̂_F)`.
//!
//! The verdict compares `lhs_upper - floor` with `rhs`: empirical W₂ between
//! two samples of the *same* law is strictly positive, so a bound on true
//! laws can only be checked up to that floor.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::{collect_results, Executor};
use crate::girsanov::{coupled_simulate, relative_entropy, simulate_reweighted, GirsanovTilt, TiltKind};
use crate::math;
use crate::model::{
    b2_violations, check_a3, estimate_a1, estimate_a2, estimate_b1, estimate_b2, uniform_delay_weights,
    CoefficientSet, PairKind, PairSampler, SegmentSampler,
};
use crate::ot::{self, CostMatrix, SinkhornConfig};
use crate::paths::{rho_2, PathEnsemble, PathMetric, Segment, SegmentMetric};
use crate::rng::{self, Purpose};
use crate::simulate::{simulate_ensemble, InitialLaw, SimConfig};
use crate::stats;

use super::constants::{l2_coefficients, uniform_coefficients, AlphaVariant, Coefficients, L2Case};

/// Which inequality is checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inequality {
    /// Uniform norm on paths; constants `κ, λ₁, λ₂, λ₃`.
    Uniform,
    /// Weighted L² on paths; constants `k, k₁, k₂, λ₃`.
    L2(L2Case),
    /// As `Uniform`, with the diagonal stiff part folded into the drift.
    StiffUniform,
    /// As `L2`, with the diagonal stiff part folded into the drift.
    StiffL2(L2Case),
}

impl Inequality {
    pub fn id(&self) -> &'static str {
        match self {
            Inequality::Uniform => "uniform",
            Inequality::L2(L2Case::Contractive) => "l2-contractive",
            Inequality::L2(L2Case::Weighted { .. }) => "l2-weighted",
            Inequality::StiffUniform => "stiff-uniform",
            Inequality::StiffL2(L2Case::Contractive) => "stiff-l2-contractive",
            Inequality::StiffL2(L2Case::Weighted { .. }) => "stiff-l2-weighted",
        }
    }

    fn is_stiff(&self) -> bool {
        matches!(self, Inequality::StiffUniform | Inequality::StiffL2(_))
    }

    fn l2_case(&self) -> Option<L2Case> {
        match self {
            Inequality::L2(c) | Inequality::StiffL2(c) => Some(*c),
            _ => None,
        }
    }

    /// Cost on path space.
    pub fn path_metric(&self) -> PathMetric {
        match self.l2_case() {
            None => PathMetric::Uniform,
            Some(c) => PathMetric::L2Weighted { lambda: c.lambda() },
        }
    }

    /// Cost on initial segments for the `W₂(μ, μ_F)` term.
    pub fn initial_metric(&self) -> SegmentMetric {
        match self {
            Inequality::Uniform | Inequality::StiffUniform => SegmentMetric::Uniform,
            Inequality::L2(_) => SegmentMetric::L2Tilde,
            Inequality::StiffL2(_) => SegmentMetric::L2,
        }
    }

    fn names(&self) -> (&'static str, &'static str) {
        match self {
            Inequality::Uniform => ("(A1)", "(A2)"),
            Inequality::L2(_) => ("(B1)", "(B2)"),
            Inequality::StiffUniform => ("(A1)", "(C1)"),
            Inequality::StiffL2(_) => ("(B1)", "(C2)"),
        }
    }
}

/// Transport solver for `lhs`, floor and bootstrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OtSolver {
    Exact { cap: usize },
    /// Debiased entropic estimate.
    Sinkhorn(SinkhornConfig),
}

impl OtSolver {
    fn name(&self) -> &'static str {
        match self {
            OtSolver::Exact { .. } => "exact",
            OtSolver::Sinkhorn(_) => "sinkhorn",
        }
    }
}

/// Everything the harness needs besides the model, initial law and tilt.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub inequality: Inequality,
    pub alpha_variant: AlphaVariant,
    /// `n_paths` is the size of every ensemble; `seed` is the root seed.
    pub sim: SimConfig,
    pub bootstrap: usize,
    /// Two-sided level of the bootstrap interval.
    pub confidence: f64,
    pub checker_samples: usize,
    /// Endpoint scale of the checker's random segments.
    pub checker_scale: f64,
    pub solver: OtSolver,
    /// A known bound on the true `lhs` (e.g. `|h|T` for a constant shift of
    /// additive unit noise), checked against `lhs - floor`.
    pub shift_bound: Option<f64>,
}

impl HarnessConfig {
    pub fn new(inequality: Inequality, sim: SimConfig) -> Self {
        HarnessConfig {
            inequality,
            alpha_variant: AlphaVariant::Proved,
            sim,
            bootstrap: 200,
            confidence: 0.95,
            checker_samples: 2000,
            checker_scale: 1.0,
            solver: OtSolver::Exact { cap: ot::EXACT_CAP },
            shift_bound: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.sim.n_paths < 2 {
            return Err(Error::param("sim.n_paths", "the harness needs at least 2 paths"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::param("inequality.confidence", "must lie in (0, 1)"));
        }
        if self.checker_samples < 2 {
            return Err(Error::param("inequality.checker_samples", "must be >= 2"));
        }
        if !(self.checker_scale.is_finite() && self.checker_scale > 0.0) {
            return Err(Error::param("inequality.checker_scale", "must be finite and > 0"));
        }
        if let OtSolver::Exact { cap } = self.solver {
            if self.sim.n_paths > cap {
                return Err(Error::SizeCap {
                    n: self.sim.n_paths,
                    cap,
                });
            }
        }
        if let Some(c) = self.inequality.l2_case() {
            let l = c.lambda();
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::param("inequality.lambda", "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Constants the bound was evaluated with, and where they came from.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportParameters {
    pub kappa: Option<f64>,
    pub k: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: f64,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub lambda: Option<f64>,
    pub horizon: f64,
    pub delay: f64,
    pub dt: f64,
    pub alpha_variant: String,
    /// Constants that were not declared and were taken from the checkers.
    pub estimated: Vec<String>,
}

/// What the checkers saw.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckerSummary {
    pub samples: usize,
    pub lipschitz: f64,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub sigma_operator_norm: f64,
}

/// Point value with a bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Verdict {
    /// `lhs_upper - floor ≤ rhs`.
    Pass,
    /// `lhs_upper - floor > rhs` with `rhs` above the floor.
    Fail,
    /// `rhs` is below the finite-sample floor; the sample cannot resolve it.
    FloorLimited,
}

/// Stage timings in seconds; excluded from serialized reports so that
/// identical runs produce identical bytes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Runtimes {
    pub checks: f64,
    pub simulate: f64,
    pub costs: f64,
    pub transport: f64,
    pub bootstrap: f64,
    pub total: f64,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TciReport {
    pub schema_version: u32,
    pub inequality: String,
    pub model: String,
    pub tilt: String,
    pub solver: String,
    pub parameters: ReportParameters,
    pub checks: CheckerSummary,
    /// `W₂(X̂, B̂)` under the inequality's path metric.
    pub lhs: BootstrapEstimate,
    /// Same-law floor `W₂(B̂, B̂')`.
    pub floor: f64,
    /// `lhs.ci_high - floor`.
    pub adjusted_lhs: f64,
    pub entropy: f64,
    pub entropy_se: f64,
    pub entropy_coeff: f64,
    pub initial_coeff: f64,
    /// `W₂(μ̂, μ̂_F)`; 0 for a Dirac initial law.
    pub initial_w2: f64,
    pub rhs: f64,
    /// `rhs - adjusted_lhs`.
    pub margin: f64,
    pub verdict: Verdict,
    pub pass: bool,
    /// `√(mean metric(X_i, Y_i)²)` over the synchronous pairs.
    pub coupling_upper_bound: f64,
    /// `W₂(X̂, Ŷ)`; never above `coupling_upper_bound`.
    pub coupled_w2: f64,
    pub shift_bound: Option<f64>,
    pub shift_bound_holds: Option<bool>,
    /// `e^{-λT} D² / λ` with `D` the largest `ρ₂` between terminal segments:
    /// a heuristic size of the part of the weighted-L² metric past `T`.
    pub truncation_tail: Option<f64>,
    pub n_paths: usize,
    pub clipped_steps: usize,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub runtimes: Runtimes,
}

struct Resolved {
    params: ReportParameters,
    checks: CheckerSummary,
}

fn rel_tol(x: f64) -> f64 {
    1e-9 * (1.0 + x.abs())
}

fn assumption(name: &'static str, detail: String) -> Error {
    Error::Assumption {
        assumption: name,
        detail,
    }
}

/// Positive zero, so `-0` never reaches a report.
fn clean(x: f64) -> f64 {
    x + 0.0
}

fn resolve_constants<E: Executor>(coeffs: &CoefficientSet, cfg: &HarnessConfig, exec: &E) -> Result<Resolved> {
    let grid = cfg.sim.grid()?;
    let ineq = cfg.inequality;
    if ineq.is_stiff() && coeffs.stiff().is_none() {
        return Err(Error::param("model.stiff", "this inequality needs a stiff diagonal part"));
    }
    let sampler = PairSampler::new(
        SegmentSampler::new(grid, cfg.checker_scale)?,
        PairKind::Mixed,
        rng::derive_seed(cfg.sim.seed, Purpose::Sampler, 0),
    );
    let n = cfg.checker_samples;
    let declared = coeffs.declared();
    let (lip_name, diss_name) = ineq.names();
    let mut estimated = Vec::new();
    let mut params = ReportParameters {
        horizon: cfg.sim.horizon,
        delay: cfg.sim.delay,
        dt: cfg.sim.dt,
        alpha_variant: cfg.alpha_variant.name().to_string(),
        ..Default::default()
    };
    let mut checks = CheckerSummary {
        samples: n,
        ..Default::default()
    };

    // Lipschitz constant of G
    let (lip, declared_lip) = match ineq.l2_case() {
        None => (estimate_a1(coeffs, &sampler, n, exec)?, declared.kappa),
        Some(_) => (estimate_b1(coeffs, &sampler, n, exec)?, declared.k),
    };
    checks.lipschitz = lip.constant;
    let lip_value = match declared_lip {
        Some(c) => {
            if c + rel_tol(c) < lip.constant {
                return Err(assumption(
                    lip_name,
                    alloc::format!("declared constant {c} is below the sampled ratio {}", lip.constant),
                ));
            }
            c
        }
        None => {
            if !lip.is_contraction() {
                return Err(assumption(
                    lip_name,
                    alloc::format!("sampled Lipschitz ratio {} is not below 1", lip.constant),
                ));
            }
            estimated.push(String::from(if ineq.l2_case().is_some() { "k" } else { "kappa" }));
            lip.constant
        }
    };

    // dissipativity
    match ineq.l2_case() {
        None => {
            params.kappa = Some(lip_value);
            let est = estimate_a2(coeffs, &sampler, n, exec)?;
            checks.lambda1 = Some(clean(est.lambda1));
            checks.lambda2 = Some(est.lambda2);
            params.lambda1 = Some(match declared.lambda1 {
                Some(l1) => {
                    if l1 > est.lambda1 + rel_tol(est.lambda1) {
                        return Err(assumption(
                            diss_name,
                            alloc::format!("declared lambda1 = {l1} exceeds the largest value {} consistent with the samples", clean(est.lambda1)),
                        ));
                    }
                    l1
                }
                None => {
                    estimated.push("lambda1".to_string());
                    clean(est.lambda1)
                }
            });
            params.lambda2 = Some(match declared.lambda2 {
                Some(l2) => {
                    if l2 + rel_tol(l2) < est.lambda2 {
                        return Err(assumption(
                            diss_name,
                            alloc::format!("declared lambda2 = {l2} is below the sampled ratio {}", est.lambda2),
                        ));
                    }
                    l2
                }
                None => {
                    estimated.push("lambda2".to_string());
                    est.lambda2
                }
            });
        }
        Some(case) => {
            params.k = Some(lip_value);
            params.lambda = Some(case.lambda());
            let weights = match &declared.delay_weights {
                Some(w) => w.clone(),
                None => uniform_delay_weights(grid),
            };
            let (k1, k2) = match (declared.k1, declared.k2) {
                (Some(k1), Some(k2)) => {
                    let (violations, worst) = b2_violations(coeffs, &sampler, n, k1, k2, &weights, 1e-9, exec)?;
                    if violations > 0 {
                        return Err(assumption(
                            diss_name,
                            alloc::format!(
                                "declared (k1, k2) = ({k1}, {k2}) violated on {violations} of {n} samples (worst slack {worst:e})"
                            ),
                        ));
                    }
                    (k1, k2)
                }
                (None, None) => {
                    let fit = estimate_b2(coeffs, &sampler, n, &weights, exec)?;
                    checks.k1 = Some(fit.k1);
                    checks.k2 = Some(fit.k2);
                    estimated.push("k1".to_string());
                    estimated.push("k2".to_string());
                    (fit.k1, fit.k2)
                }
                _ => return Err(Error::param("model.declared.k1", "declare both k1 and k2 or neither")),
            };
            params.k1 = Some(k1);
            params.k2 = Some(k2);
        }
    }

    // bound on σ
    let a3 = check_a3(coeffs, &sampler, n, exec)?;
    checks.sigma_operator_norm = a3.max_operator_norm;
    params.lambda3 = match (a3.declared, a3.pass) {
        (Some(l3), Some(true)) => l3,
        (Some(l3), _) => {
            return Err(assumption(
                "(A3)",
                alloc::format!(
                    "declared lambda3 = {l3} is below the squared sampled operator norm {}",
                    a3.max_operator_norm * a3.max_operator_norm
                ),
            ))
        }
        (None, _) => {
            if a3.max_operator_norm == 0.0 {
                return Err(assumption("(A3)", "diffusion vanished on every sample; declare lambda3".to_string()));
            }
            estimated.push("lambda3".to_string());
            a3.max_operator_norm * a3.max_operator_norm
        }
    };
    params.estimated = estimated;
    Ok(Resolved { params, checks })
}

fn coefficients(cfg: &HarnessConfig, p: &ReportParameters) -> Result<Coefficients> {
    match cfg.inequality.l2_case() {
        None => uniform_coefficients(
            cfg.sim.horizon,
            p.kappa.unwrap_or(0.0),
            p.lambda1.unwrap_or(0.0),
            p.lambda2.unwrap_or(0.0),
            p.lambda3,
            cfg.alpha_variant,
        ),
        Some(case) => {
            let (k, k1, k2) = (p.k.unwrap_or(0.0), p.k1.unwrap_or(0.0), p.k2.unwrap_or(0.0));
            l2_coefficients(case, k, k1, k2, p.lambda3, cfg.sim.delay).map_err(|e| match e {
                Error::InvalidParameter { rule, .. } => assumption(
                    cfg.inequality.names().1,
                    alloc::format!("constants (k = {k}, k1 = {k1}, k2 = {k2}) do not fit this case: {rule}"),
                ),
                other => other,
            })
        }
    }
}

fn transport(c: &CostMatrix, solver: OtSolver, self_costs: Option<(&CostMatrix, &CostMatrix)>) -> Result<f64> {
    match solver {
        OtSolver::Exact { cap } => ot::exact_w2_capped(c, cap),
        OtSolver::Sinkhorn(sc) => {
            let (aa, bb) = self_costs.ok_or_else(|| Error::domain("entropic solver needs self-cost matrices"))?;
            Ok(ot::sinkhorn_w2(c, aa, bb, sc)?.debiased)
        }
    }
}

fn pair_ref(s: &Option<(CostMatrix, CostMatrix)>) -> Option<(&CostMatrix, &CostMatrix)> {
    s.as_ref().map(|(a, b)| (a, b))
}

fn bootstrap_w2<E: Executor>(
    c: &CostMatrix,
    self_costs: Option<(&CostMatrix, &CostMatrix)>,
    solver: OtSolver,
    resamples: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<f64>> {
    let n = c.n();
    collect_results(exec.map(resamples, |b| {
        let mut r = rng::stream(seed, Purpose::Bootstrap, b as u64);
        let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
        let cols: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
        let sub = c.select(&rows, &cols)?;
        let selfs = match self_costs {
            Some((aa, bb)) => Some((aa.select(&rows, &rows)?, bb.select(&cols, &cols)?)),
            None => None,
        };
        transport(&sub, solver, selfs.as_ref().map(|(a, b)| (a, b)))
    }))
}

fn self_cost_pair<E: Executor>(
    a: &PathEnsemble,
    b: &PathEnsemble,
    metric: PathMetric,
    solver: OtSolver,
    exec: &E,
) -> Result<Option<(CostMatrix, CostMatrix)>> {
    match solver {
        OtSolver::Exact { .. } => Ok(None),
        OtSolver::Sinkhorn(_) => Ok(Some((
            ot::cost_matrix(a, a, metric, exec)?,
            ot::cost_matrix(b, b, metric, exec)?,
        ))),
    }
}

/// `W₂(μ̂, μ̂_F)`: initial segments of the untilted ensemble against an
/// F-weighted resample of them.
fn initial_term<E: Executor>(
    initial: &InitialLaw,
    reference: &PathEnsemble,
    log_density: &[f64],
    metric: SegmentMetric,
    seed: u64,
    exec: &E,
) -> Result<f64> {
    if initial.is_dirac() {
        return Ok(0.0);
    }
    let n = reference.len();
    let max = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_density.iter().map(|l| math::exp(l - max)).collect();
    let total: f64 = w.iter().sum();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for x in &w {
        acc += x / total;
        cumulative.push(acc);
    }
    let mut r = rng::stream(seed, Purpose::Resample, 0);
    let base: Vec<Segment> = reference.paths().iter().map(|p| p.initial_segment()).collect();
    let resampled: Vec<Segment> = (0..n)
        .map(|_| {
            let u: f64 = r.random();
            let idx = cumulative.partition_point(|c| *c < u).min(n - 1);
            base[idx].clone()
        })
        .collect();
    let c = ot::segment_cost_matrix(&base, &resampled, metric, exec)?;
    ot::exact_w2(&c)
}

/// Run the whole pipeline. `clock`, when given, returns seconds and is used
/// only for the (unserialized) stage timings.
pub fn verify_inequality<E: Executor>(
    coeffs: &CoefficientSet,
    initial: &InitialLaw,
    tilt: &GirsanovTilt,
    cfg: &HarnessConfig,
    exec: &E,
    clock: Option<&dyn Fn() -> f64>,
) -> Result<TciReport> {
    cfg.validate()?;
    let now = || clock.map(|c| c()).unwrap_or(0.0);
    let t0 = now();
    let mut runtimes = Runtimes::default();

    let resolved = resolve_constants(coeffs, cfg, exec)?;
    let coeffs_used = coefficients(cfg, &resolved.params)?;
    if !(coeffs_used.entropy.is_finite() && coeffs_used.initial.is_finite()) {
        return Err(Error::Numeric("inequality constants overflow; the bound is vacuous"));
    }
    let t1 = now();
    runtimes.checks = t1 - t0;

    let root = cfg.sim.seed;
    let coupled = coupled_simulate(coeffs, initial, &cfg.sim, tilt, exec)?;
    let reference_cfg = cfg.sim.clone().with_seed(rng::derive_seed(root, Purpose::Reference, 0));
    let reference = simulate_reweighted(coeffs, initial, &reference_cfg, tilt, exec)?;
    let floor_cfg = cfg.sim.clone().with_seed(rng::derive_seed(root, Purpose::Floor, 0));
    let floor_ens = simulate_ensemble(coeffs, initial, &floor_cfg, None, exec)?;
    let t2 = now();
    runtimes.simulate = t2 - t1;

    let metric = cfg.inequality.path_metric();
    let x = &coupled.x_paths;
    let b = &reference.paths;
    let c_xb = ot::cost_matrix(x, b, metric, exec)?;
    let c_bf = ot::cost_matrix(b, &floor_ens, metric, exec)?;
    let c_xy = ot::cost_matrix(x, &coupled.y_paths, metric, exec)?;
    let selfs_xb = self_cost_pair(x, b, metric, cfg.solver, exec)?;
    let selfs_bf = self_cost_pair(b, &floor_ens, metric, cfg.solver, exec)?;
    let t3 = now();
    runtimes.costs = t3 - t2;

    let lhs_value = transport(&c_xb, cfg.solver, pair_ref(&selfs_xb))?;
    let floor = transport(&c_bf, cfg.solver, pair_ref(&selfs_bf))?;
    // the synchronous pairing is feasible for the exact problem
    let coupled_w2 = ot::exact_w2_capped(&c_xy, usize::MAX)?;
    let coupling_upper_bound = ot::coupling_upper_bound(&coupled, metric)?;
    let t4 = now();
    runtimes.transport = t4 - t3;

    let boots = bootstrap_w2(&c_xb, pair_ref(&selfs_xb), cfg.solver, cfg.bootstrap, root, exec)?;
    let (ci_low, ci_high) = if boots.is_empty() {
        (lhs_value, lhs_value)
    } else {
        let a = 0.5 * (1.0 - cfg.confidence);
        (stats::quantile(&boots, a), stats::quantile(&boots, 1.0 - a))
    };
    // the interval never excludes the point estimate
    let (ci_low, ci_high) = (ci_low.min(lhs_value), ci_high.max(lhs_value));
    let t5 = now();
    runtimes.bootstrap = t5 - t4;

    let (entropy, entropy_se) = relative_entropy(&coupled);
    let initial_w2 = initial_term(
        initial,
        b,
        &reference.log_density,
        cfg.inequality.initial_metric(),
        root,
        exec,
    )?;
    let rhs = coeffs_used.entropy * math::sqrt(entropy) + coeffs_used.initial * initial_w2;
    let adjusted_lhs = ci_high - floor;
    let verdict = if adjusted_lhs <= rhs {
        Verdict::Pass
    } else if rhs < floor {
        Verdict::FloorLimited
    } else {
        Verdict::Fail
    };

    let truncation_tail = match cfg.inequality.l2_case() {
        Some(L2Case::Weighted { lambda }) => {
            let steps = x.steps();
            let mut diam: f64 = 0.0;
            for p in x.paths().iter().chain(b.paths()) {
                for q in b.paths() {
                    diam = diam.max(rho_2(p.window(steps), q.window(steps))?);
                }
            }
            Some(math::exp(-lambda * cfg.sim.horizon) * diam * diam / lambda)
        }
        _ => None,
    };
    let shift_bound_holds = cfg.shift_bound.map(|s| lhs_value - floor <= s);
    runtimes.total = now() - t0;

    Ok(TciReport {
        schema_version: REPORT_SCHEMA_VERSION,
        inequality: cfg.inequality.id().to_string(),
        model: coeffs.name().to_string(),
        tilt: String::from(match tilt.kind() {
            TiltKind::Zero => "zero",
            TiltKind::Constant => "constant",
            TiltKind::OpenLoop => "open-loop",
            TiltKind::Feedback => "feedback",
        }),
        solver: cfg.solver.name().to_string(),
        parameters: resolved.params,
        checks: resolved.checks,
        lhs: BootstrapEstimate {
            value: lhs_value,
            ci_low,
            ci_high,
            resamples: cfg.bootstrap,
        },
        floor,
        adjusted_lhs,
        entropy,
        entropy_se,
        entropy_coeff: coeffs_used.entropy,
        initial_coeff: coeffs_used.initial,
        initial_w2,
        rhs,
        margin: rhs - adjusted_lhs,
        verdict,
        pass: verdict == Verdict::Pass,
        coupling_upper_bound,
        coupled_w2,
        shift_bound: cfg.shift_bound,
        shift_bound_holds,
        truncation_tail,
        n_paths: cfg.sim.n_paths,
        clipped_steps: coupled.clipped_steps,
        runtimes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::model::{self, DeclaredConstants};
    use crate::paths::Grid;

    fn brownian_cfg(n: usize) -> (CoefficientSet, InitialLaw, HarnessConfig) {
        let set = model::brownian(1).unwrap();
        let sim = SimConfig::new(1.0, 0.05, 0.5, 1, 1).with_paths(n).with_seed(3);
        let g = Grid::new(0.05, 0.5, 1).unwrap();
        let mut cfg = HarnessConfig::new(Inequality::Uniform, sim);
        cfg.bootstrap = 20;
        cfg.checker_samples = 100;
        (set, InitialLaw::Dirac(Segment::zeros(g)), cfg)
    }

    #[test]
    fn zero_tilt_is_floor_limited() {
        let (set, law, cfg) = brownian_cfg(32);
        let r = verify_inequality(&set, &law, &GirsanovTilt::zero(1), &cfg, &Sequential, None).unwrap();
        assert_eq!(r.entropy, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert_eq!(r.coupled_w2, 0.0);
        assert!(r.floor > 0.0);
        assert!(matches!(r.verdict, Verdict::FloorLimited | Verdict::Pass));
    }

    #[test]
    fn constant_tilt_on_brownian_passes() {
        let (set, law, cfg) = brownian_cfg(48);
        let tilt = GirsanovTilt::constant(alloc::vec![0.5]).unwrap();
        let r = verify_inequality(&set, &law, &tilt, &cfg, &Sequential, None).unwrap();
        assert!((r.entropy - 0.125).abs() < 1e-14);
        assert_eq!(r.parameters.estimated, alloc::vec![String::from("lambda1")]);
        assert!(r.coupled_w2 <= r.coupling_upper_bound + 1e-9);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn falsified_declaration_is_an_assumption_error() {
        let (set, law, cfg) = brownian_cfg(8);
        let set = set
            .with_declared(DeclaredConstants {
                kappa: Some(0.0),
                lambda1: Some(1.0),
                lambda3: Some(1.0),
                ..Default::default()
            })
            .unwrap();
        let tilt = GirsanovTilt::constant(alloc::vec![0.5]).unwrap();
        let err = verify_inequality(&set, &law, &tilt, &cfg, &Sequential, None).unwrap_err();
        assert!(matches!(err, Error::Assumption { assumption: "(A2)", .. }), "{err:?}");
    }
}
