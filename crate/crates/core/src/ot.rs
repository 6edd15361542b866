//! Empirical Wasserstein-2 between equal-size, uniformly weighted samples.
//!
//! With uniform weights and equal sizes the optimal coupling can be taken
//! to be a permutation, so the exact value is an assignment problem
//! ([`exact_w2`]). [`sinkhorn_w2`] is the entropic alternative for sizes
//! past the exact solver's cap.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::{collect_results, Executor};
use crate::girsanov::CouplingResult;
use crate::math;
use crate::paths::{PathEnsemble, PathMetric, Segment, SegmentMetric};
use crate::stats;

/// Default size cap of the exact solver.
pub const EXACT_CAP: usize = 1024;

/// `n × n` matrix of squared distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
    tag: String,
}

impl CostMatrix {
    pub fn from_values(n: usize, data: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("cost matrix must be nonempty"));
        }
        if data.len() != n * n {
            return Err(Error::domain("cost matrix must be square"));
        }
        if data.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::domain("costs must be finite and nonnegative"));
        }
        Ok(CostMatrix {
            n,
            data,
            tag: tag.into(),
        })
    }

    /// Entry `(i, j) = f(i, j)`.
    pub fn from_fn<E: Executor>(
        n: usize,
        tag: impl Into<String>,
        exec: &E,
        f: impl Fn(usize, usize) -> Result<f64> + Sync + Send,
    ) -> Result<Self> {
        let rows = collect_results(exec.map(n, |i| (0..n).map(|j| f(i, j)).collect::<Result<Vec<f64>>>()))?;
        Self::from_values(n, rows.concat(), tag)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        CostMatrix {
            n,
            data,
            tag: self.tag.clone(),
        }
    }

    /// Sub-matrix `(rows[i], cols[j])`; indices may repeat (bootstrap).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if rows.len() != cols.len() || rows.is_empty() {
            return Err(Error::domain("row and column selections must have equal nonzero length"));
        }
        if rows.iter().chain(cols).any(|i| *i >= self.n) {
            return Err(Error::domain("selection index out of range"));
        }
        let k = rows.len();
        let mut data = Vec::with_capacity(k * k);
        for &r in rows {
            for &c in cols {
                data.push(self.get(r, c));
            }
        }
        Ok(CostMatrix {
            n: k,
            data,
            tag: self.tag.clone(),
        })
    }

    pub fn median(&self) -> f64 {
        stats::median(&self.data)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Squared path distances between two equal-size ensembles.
pub fn cost_matrix<E: Executor>(a: &PathEnsemble, b: &PathEnsemble, metric: PathMetric, exec: &E) -> Result<CostMatrix> {
    if a.len() != b.len() {
        return Err(Error::domain("ensembles must have equal size"));
    }
    if !a.grid().same_as(&b.grid()) || a.steps() != b.steps() {
        return Err(Error::GridMismatch("ensembles are on different grids"));
    }
    let (pa, pb) = (a.paths(), b.paths());
    CostMatrix::from_fn(a.len(), alloc::format!("{metric:?}"), exec, |i, j| {
        let d = metric.distance(&pa[i], &pb[j])?;
        Ok(d * d)
    })
}

/// Squared segment distances between two equal-size samples of segments.
pub fn segment_cost_matrix<E: Executor>(
    a: &[Segment],
    b: &[Segment],
    metric: SegmentMetric,
    exec: &E,
) -> Result<CostMatrix> {
    if a.len() != b.len() {
        return Err(Error::domain("segment samples must have equal size"));
    }
    CostMatrix::from_fn(a.len(), alloc::format!("{metric:?}"), exec, |i, j| {
        let d = metric.distance(&a[i], &b[j])?;
        Ok(d * d)
    })
}

/// An optimal permutation and its mean cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Row `i` is matched to column `perm[i]`.
    pub perm: Vec<usize>,
    pub mean_cost: f64,
}

/// Minimum-cost perfect matching by shortest augmenting paths with
/// potentials, `O(n³)`. Ties go to the lowest column index.
pub fn assignment(c: &CostMatrix, cap: usize) -> Result<Assignment> {
    let n = c.n();
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    // 1-based arrays; column 0 is the virtual root
    let mut u = alloc::vec![0.0f64; n + 1];
    let mut v = alloc::vec![0.0f64; n + 1];
    let mut p = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    let mut minv = alloc::vec![0.0f64; n + 1];
    let mut used = alloc::vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = alloc::vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    // sum the original entries so the value carries no potential drift
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
    Ok(Assignment {
        perm,
        mean_cost: total / n as f64,
    })
}

/// `√(min_π mean_i C[i, π(i)])` with the default cap.
pub fn exact_w2(c: &CostMatrix) -> Result<f64> {
    exact_w2_capped(c, EXACT_CAP)
}

pub fn exact_w2_capped(c: &CostMatrix, cap: usize) -> Result<f64> {
    Ok(math::sqrt(assignment(c, cap)?.mean_cost))
}

/// Entropic solver settings. `epsilon_rel` is relative to the median cost.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinkhornConfig {
    pub epsilon_rel: f64,
    pub max_iter: usize,
    /// Tolerance on the L1 violation of the row marginal.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon_rel: 0.01,
            max_iter: 20_000,
            tol: 1e-5,
        }
    }
}

/// Entropic transport between uniform marginals.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinkhornResult {
    /// `√⟨π, C⟩` for the entropic plan `π`.
    pub estimate: f64,
    /// Regularized objective `⟨f, a⟩ + ⟨g, b⟩`.
    pub dual_value: f64,
    pub epsilon: f64,
    pub converged: bool,
    /// Final L1 violation of the row marginal.
    pub residual: f64,
    pub iterations: usize,
}

/// `-ε log Σ_j exp((pot_j - c_j)/ε) - ε log_w` for one row of costs.
fn soft_min(costs: &[f64], pot: &[f64], epsilon: f64, log_w: f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (c, p) in costs.iter().zip(pot) {
        m = m.max((p - c) / epsilon);
    }
    let mut s = 0.0;
    for (c, p) in costs.iter().zip(pot) {
        s += math::exp((p - c) / epsilon - m);
    }
    -epsilon * (m + math::ln(s) + log_w)
}

/// Alternate the two potential updates at fixed `epsilon` until the row
/// marginal violation drops below `tol` or `budget` sweeps are spent.
/// Returns `(residual, sweeps)`.
#[allow(clippy::too_many_arguments)]
fn sweeps(
    rows: &[f64],
    cols: &[f64],
    n: usize,
    epsilon: f64,
    tol: f64,
    budget: usize,
    f: &mut [f64],
    g: &mut [f64],
    scratch: &mut [f64],
) -> (f64, usize) {
    let log_w = -math::ln(n as f64);
    let w = 1.0 / n as f64;
    let mut residual = f64::INFINITY;
    let mut used = 0;
    while used < budget {
        // the new f also gives the row masses of the current plan:
        // row_i = w exp((f_i - f_i')/ε)
        for i in 0..n {
            scratch[i] = soft_min(&rows[i * n..(i + 1) * n], g, epsilon, log_w);
        }
        if used > 0 {
            residual = (0..n).map(|i| w * (math::exp((f[i] - scratch[i]) / epsilon) - 1.0).abs()).sum();
            if !(residual >= tol) {
                break;
            }
        }
        f.copy_from_slice(scratch);
        for j in 0..n {
            g[j] = soft_min(&cols[j * n..(j + 1) * n], f, epsilon, log_w);
        }
        used += 1;
    }
    (residual, used)
}

/// Log-domain Sinkhorn with absolute regularization `epsilon`, warm-started
/// by halving the regularization from the largest cost down to `epsilon`.
pub fn sinkhorn(c: &CostMatrix, epsilon: f64, max_iter: usize, tol: f64) -> Result<SinkhornResult> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be finite and > 0"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::param("tol", "must be finite and > 0"));
    }
    let n = c.n();
    let rows = c.values();
    let cols = c.transpose();
    let cols = cols.values();
    let mut f = alloc::vec![0.0; n];
    let mut g = alloc::vec![0.0; n];
    let mut scratch = alloc::vec![0.0; n];
    let mut iterations = 0;
    let mut eps = c.max().max(epsilon);
    while eps > epsilon && iterations < max_iter {
        let (_, used) = sweeps(rows, cols, n, eps, 1e-3, 50.min(max_iter - iterations), &mut f, &mut g, &mut scratch);
        iterations += used;
        eps = (0.5 * eps).max(epsilon);
    }
    let (residual, used) = sweeps(
        rows,
        cols,
        n,
        epsilon,
        tol,
        max_iter.saturating_sub(iterations).max(1),
        &mut f,
        &mut g,
        &mut scratch,
    );
    iterations += used;
    if !residual.is_finite() && used > 1 || f.iter().chain(&g).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("entropic solver"));
    }
    let two_log_w = -2.0 * math::ln(n as f64);
    let mut primal = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cij = rows[i * n + j];
            primal += math::exp((f[i] + g[j] - cij) / epsilon + two_log_w) * cij;
        }
    }
    let w = 1.0 / n as f64;
    let dual_value = w * (f.iter().sum::<f64>() + g.iter().sum::<f64>());
    Ok(SinkhornResult {
        estimate: math::sqrt(primal.max(0.0)),
        dual_value,
        epsilon,
        converged: residual < tol,
        residual,
        iterations,
    })
}

/// Symmetric entropic self-transport `OT_ε(a, a)` through the averaged
/// fixed-point iteration `f ← ½(f + T(f))`, which converges in a few dozen
/// steps where plain alternation stalls. `c` must be symmetric.
pub fn sinkhorn_symmetric(c: &CostMatrix, epsilon: f64, max_iter: usize, tol: f64) -> Result<SinkhornResult> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be finite and > 0"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::param("tol", "must be finite and > 0"));
    }
    let n = c.n();
    let rows = c.values();
    let log_w = -math::ln(n as f64);
    let w = 1.0 / n as f64;
    let mut f = alloc::vec![0.0; n];
    let mut next = alloc::vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            next[i] = soft_min(&rows[i * n..(i + 1) * n], &f, epsilon, log_w);
        }
        // row masses of the symmetric plan built from f: w exp((f_i - T(f)_i)/ε)
        residual = (0..n).map(|i| w * (math::exp((f[i] - next[i]) / epsilon) - 1.0).abs()).sum();
        if !residual.is_finite() {
            return Err(Error::Numeric("entropic solver"));
        }
        if residual < tol {
            break;
        }
        for i in 0..n {
            f[i] = 0.5 * (f[i] + next[i]);
        }
    }
    let two_log_w = 2.0 * log_w;
    let mut primal = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cij = rows[i * n + j];
            primal += math::exp((f[i] + f[j] - cij) / epsilon + two_log_w) * cij;
        }
    }
    Ok(SinkhornResult {
        estimate: math::sqrt(primal.max(0.0)),
        dual_value: 2.0 * w * f.iter().sum::<f64>(),
        epsilon,
        converged: residual < tol,
        residual,
        iterations,
    })
}

/// Entropic estimate plus the debiased divergence
/// `S = OT_ε(a, b) - ½ OT_ε(a, a) - ½ OT_ε(b, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinkhornW2 {
    pub cross: SinkhornResult,
    /// `√max(S, 0)`.
    pub debiased: f64,
    /// `S` itself (may be slightly negative from solver tolerance).
    pub debiased_squared: f64,
    pub converged: bool,
}

/// `ε = cfg.epsilon_rel · median(c_ab)`. The self-cost matrices `c_aa`,
/// `c_bb` are needed for the debiased value.
pub fn sinkhorn_w2(c_ab: &CostMatrix, c_aa: &CostMatrix, c_bb: &CostMatrix, cfg: SinkhornConfig) -> Result<SinkhornW2> {
    if c_aa.n() != c_ab.n() || c_bb.n() != c_ab.n() {
        return Err(Error::domain("self-cost matrices must match the cross-cost size"));
    }
    if !(cfg.epsilon_rel.is_finite() && cfg.epsilon_rel > 0.0) {
        return Err(Error::param("inequality.epsilon", "must be finite and > 0"));
    }
    let med = c_ab.median();
    let scale = if med > 0.0 { med } else { c_ab.max() };
    if scale == 0.0 {
        let zero = SinkhornResult {
            estimate: 0.0,
            dual_value: 0.0,
            epsilon: 0.0,
            converged: true,
            residual: 0.0,
            iterations: 0,
        };
        return Ok(SinkhornW2 {
            cross: zero,
            debiased: 0.0,
            debiased_squared: 0.0,
            converged: true,
        });
    }
    let eps = cfg.epsilon_rel * scale;
    let ab = sinkhorn(c_ab, eps, cfg.max_iter, cfg.tol)?;
    let aa = sinkhorn_symmetric(c_aa, eps, cfg.max_iter, cfg.tol)?;
    let bb = sinkhorn_symmetric(c_bb, eps, cfg.max_iter, cfg.tol)?;
    let s = ab.dual_value - 0.5 * aa.dual_value - 0.5 * bb.dual_value;
    Ok(SinkhornW2 {
        cross: ab,
        debiased: math::sqrt(s.max(0.0)),
        debiased_squared: s,
        converged: ab.converged && aa.converged && bb.converged,
    })
}

/// `√(mean_i metric(X_i, Y_i)²)`: the cost of the synchronous pairing,
/// an upper bound for the W₂ distance between the two ensembles.
pub fn coupling_upper_bound(result: &CouplingResult, metric: PathMetric) -> Result<f64> {
    let d = result.paired_distances(metric)?;
    if d.is_empty() {
        return Err(Error::domain("empty coupling"));
    }
    Ok(math::sqrt(d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(n: usize, v: &[f64]) -> CostMatrix {
        CostMatrix::from_values(n, v.to_vec(), "test").unwrap()
    }

    #[test]
    fn known_assignment() {
        let c = mat(3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        let a = assignment(&c, EXACT_CAP).unwrap();
        assert_eq!(a.perm, alloc::vec![1, 0, 2]);
        assert!((a.mean_cost - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_entry_and_zero_diagonal() {
        assert_eq!(exact_w2(&mat(1, &[9.0])).unwrap(), 3.0);
        let c = mat(2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(exact_w2(&c).unwrap(), 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let c = mat(3, &[0.0; 9]);
        assert_eq!(assignment(&c, 2), Err(Error::SizeCap { n: 3, cap: 2 }));
    }

    #[test]
    fn sinkhorn_self_transport_debiases_to_zero() {
        let pts = [0.0, 0.3, 1.1, 2.0, 2.5];
        let n = pts.len();
        let c = CostMatrix::from_fn(n, "pts", &crate::Sequential, |i, j| Ok((pts[i] - pts[j]) * (pts[i] - pts[j])))
            .unwrap();
        let r = sinkhorn_w2(&c, &c, &c, SinkhornConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.debiased_squared.abs() <= r.cross.epsilon * libm::log(n as f64));
    }

    #[test]
    fn selection_repeats_indices() {
        let c = mat(2, &[1.0, 2.0, 3.0, 4.0]);
        let s = c.select(&[1, 1], &[0, 1]).unwrap();
        assert_eq!(s.values(), &[3.0, 4.0, 3.0, 4.0]);
        assert_eq!(c.transpose().values(), &[1.0, 3.0, 2.0, 4.0]);
    }
}
