//! Deterministic integral inequalities satisfied by any two paths when `G`
//! is `k`-Lipschitz in `ρ₂`.
//!
//! With `Δ = ξ̄ - η̄`, `M̄(s) = Δ(s) - G(ξ̄_s) + G(η̄_s)` and `e(s) = e^{-λs}`:
//!
//! ```text
//! (1) ∫₀ᵗ e ∫ |Δ(s+θ)|² Λ(dθ) ds ≤ τ ρ₂(ξ̄₀, η̄₀)² + ∫₀ᵗ e |Δ|² ds
//! (2) ∫₀ᵗ e |M̄|² ds ≤ (1+k)² ∫₀ᵗ e |Δ|² ds + (1+k) k τ ρ₂(ξ̄₀, η̄₀)²
//! (3) ∫₀ᵗ e |Δ|² ds ≤ (1-k)⁻² ∫₀ᵗ e |M̄|² ds + k τ/(1-k) ρ₂(ξ̄₀, η̄₀)²
//! ```
//!
//! When every integral (including the one inside `ρ₂` and inside `G`) is the
//! trapezoid rule on the path grid and `Λ` is a set of point masses on that
//! grid, the discrete versions hold exactly, so the only tolerance needed is
//! for floating-point rounding.

use crate::error::{Error, Result};
use crate::exec::{collect_results, Executor};
use crate::math;
use crate::model::CoefficientSet;
use crate::paths::{rho_2, Grid, SegmentPath};
use crate::rng::{self, Purpose, StreamRng};

/// Left and right sides of the three inequalities for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSides {
    pub lhs: [f64; 3],
    pub rhs: [f64; 3],
}

/// Evaluate the three inequalities for one pair of paths on `[-τ, t]`.
pub fn integral_sides(
    coeffs: &CoefficientSet,
    k: f64,
    delay_weights: &[f64],
    lambda: f64,
    a: &SegmentPath,
    b: &SegmentPath,
) -> Result<PairSides> {
    a.check(b)?;
    let grid = a.grid();
    coeffs.check_grid(&grid)?;
    if delay_weights.len() != grid.segment_points() {
        return Err(Error::GridMismatch("delay weights do not match the segment grid"));
    }
    if !(0.0..1.0).contains(&k) {
        return Err(Error::param("k", "(B1) requires k in [0, 1)"));
    }
    let d = grid.dim();
    let n = grid.delay_steps();
    let steps = a.steps();
    let tau = grid.delay();
    let w = math::trapezoid_weights(steps, grid.dt());
    let r0 = rho_2(a.window(0), b.window(0))?;
    let r0_sq = r0 * r0;
    let mut ga = alloc::vec![0.0; d];
    let mut gb = alloc::vec![0.0; d];
    let (mut shifted, mut delta_sq, mut m_sq) = (0.0, 0.0, 0.0);
    for i in 0..=steps {
        let e = math::exp(-lambda * i as f64 * grid.dt());
        let (wa, wb) = (a.window(i), b.window(i));
        let mut inner = 0.0;
        for (j, lam) in delay_weights.iter().enumerate() {
            if *lam != 0.0 {
                inner += lam * math::diff_norm_sq(wa.point(j), wb.point(j));
            }
        }
        coeffs.neutral_into(wa, &mut ga);
        coeffs.neutral_into(wb, &mut gb);
        let (xa, xb) = (wa.point(n), wb.point(n));
        let mut dm = 0.0;
        for c in 0..d {
            let m = (xa[c] - xb[c]) - (ga[c] - gb[c]);
            dm += m * m;
        }
        let we = w[i] * e;
        shifted += we * inner;
        delta_sq += we * math::diff_norm_sq(xa, xb);
        m_sq += we * dm;
    }
    let q = (1.0 - k) * (1.0 - k);
    Ok(PairSides {
        lhs: [shifted, m_sq, delta_sq],
        rhs: [
            tau * r0_sq + delta_sq,
            (1.0 + k) * (1.0 + k) * delta_sq + (1.0 + k) * k * tau * r0_sq,
            m_sq / q + k * tau / (1.0 - k) * r0_sq,
        ],
    })
}

/// Outcome of the suite over many random pairs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegralSuiteReport {
    pub pairs: usize,
    /// Count of pairs with `lhs - rhs > tol · max(|lhs|, |rhs|)`, per inequality.
    pub violations: [usize; 3],
    /// `min (rhs - lhs) / max(|lhs|, |rhs|)` per inequality (0 for identical paths).
    pub worst_relative_slack: [f64; 3],
    pub tolerance: f64,
}

impl IntegralSuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.iter().all(|v| *v == 0)
    }
}

/// Random walk on `[-τ, t]` from a standard normal start.
fn random_path(grid: Grid, steps: usize, rng: &mut StreamRng) -> SegmentPath {
    let d = grid.dim();
    let len = grid.segment_points() + steps;
    let s = math::sqrt(grid.dt());
    let mut v = alloc::vec![0.0; len * d];
    for c in 0..d {
        v[c] = rng::normal(rng);
    }
    for i in 1..len {
        for c in 0..d {
            v[i * d + c] = v[(i - 1) * d + c] + s * rng::normal(rng);
        }
    }
    SegmentPath::from_values(grid, steps, v).expect("finite random walk")
}

/// Pair `index`: cycles independent walks, a walk and a small perturbation
/// of it, and a walk with itself.
pub fn random_pair(grid: Grid, steps: usize, seed: u64, index: usize) -> (SegmentPath, SegmentPath) {
    let mut r = rng::stream(seed, Purpose::Sampler, index as u64);
    let a = random_path(grid, steps, &mut r);
    let b = match index % 3 {
        0 => random_path(grid, steps, &mut r),
        1 => {
            let eps = 0.05;
            let noise = random_path(grid, steps, &mut r);
            let v = a.values().iter().zip(noise.values()).map(|(x, y)| x + eps * y).collect();
            SegmentPath::from_values(grid, steps, v).expect("finite")
        }
        _ => a.clone(),
    };
    (a, b)
}

/// Evaluate the three inequalities on `n_pairs` random path pairs on
/// `[-τ, horizon]`.
#[allow(clippy::too_many_arguments)]
pub fn neutral_integral_suite<E: Executor>(
    coeffs: &CoefficientSet,
    k: f64,
    delay_weights: &[f64],
    lambda: f64,
    grid: Grid,
    horizon: f64,
    n_pairs: usize,
    seed: u64,
    tol: f64,
    exec: &E,
) -> Result<IntegralSuiteReport> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", "must be finite and >= 0"));
    }
    let steps = grid.steps_for(horizon)?;
    let sides = collect_results(exec.map(n_pairs, |i| {
        let (a, b) = random_pair(grid, steps, seed, i);
        integral_sides(coeffs, k, delay_weights, lambda, &a, &b)
    }))?;
    let mut violations = [0usize; 3];
    let mut worst = [f64::INFINITY; 3];
    for s in &sides {
        for q in 0..3 {
            let scale = s.lhs[q].abs().max(s.rhs[q].abs());
            let slack = s.rhs[q] - s.lhs[q];
            let rel = if scale > 0.0 { slack / scale } else { 0.0 };
            worst[q] = worst[q].min(rel);
            if slack < -tol * scale {
                violations[q] += 1;
            }
        }
    }
    if sides.is_empty() {
        worst = [0.0; 3];
    }
    Ok(IntegralSuiteReport {
        pairs: sides.len(),
        violations,
        worst_relative_slack: worst,
        tolerance: tol,
    })
}
