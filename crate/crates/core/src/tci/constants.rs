//! Closed-form constants of the transportation cost inequalities.
//!
//! Uniform-norm inequality (path metric `sup_{t ≤ T} ‖ξ_t - η_t‖_∞`):
//!
//! ```text
//! W₂(FΠ, Π) ≤ √β(T) · W₂(μ, μ_F) + √α(T) · √Ent(F)
//! α(T) = 2λ₃(1+κ)²/(1-κ)² · min{ (4√λ₂ + √(16λ₂+λ₁⁺))² / (λ₁⁺)²,
//!                               4T exp[1 + (2λ₁⁻ + Eλ₂)T/(1-κ)²] / (2Tλ₁⁺ + (1-κ)²) }
//! β(T) = 1 + (1+κ)²/(1-κ)² · min{ (2√λ₂ + √(4λ₂+λ₁⁺))² / λ₁⁺,
//!                               2 exp[(2λ₁⁻ + 16λ₂)T/(1-κ)²] }
//! ```
//!
//! The exponent weight `E` is 16 in the Gronwall bound the second branch is
//! derived from and 4 in the commonly quoted closed form; both are available
//! through [`AlphaVariant`], and 16 (the larger constant) is the default.
//!
//! Weighted-L² inequality (path metric `∫ e^{-λt} ρ₂(ξ_t, η_t)² dt`):
//! coefficients from [`l2_coefficients`].

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, sqrt};

/// Exponent weight on `λ₂` in the second branch of `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AlphaVariant {
    /// `16λ₂`, as obtained from the Gronwall argument.
    #[default]
    Proved,
    /// `4λ₂`, as in the commonly quoted closed form.
    Printed,
}

impl AlphaVariant {
    pub fn weight(self) -> f64 {
        match self {
            AlphaVariant::Proved => 16.0,
            AlphaVariant::Printed => 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlphaVariant::Proved => "proved",
            AlphaVariant::Printed => "printed",
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa.is_finite() && (0.0..1.0).contains(&kappa)) {
        return Err(Error::param("kappa", "(A1) requires kappa in [0, 1)"));
    }
    Ok(())
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("T", "must be finite and > 0"));
    }
    Ok(())
}

fn check_l1_l2(l1: f64, l2: f64) -> Result<()> {
    if !l1.is_finite() {
        return Err(Error::param("lambda1", "must be finite"));
    }
    if !(l2.is_finite() && l2 >= 0.0) {
        return Err(Error::param("lambda2", "(A2) requires lambda2 >= 0"));
    }
    Ok(())
}

fn check_l3(l3: f64) -> Result<()> {
    if !(l3.is_finite() && l3 > 0.0) {
        return Err(Error::param("lambda3", "(A3) requires lambda3 > 0"));
    }
    Ok(())
}

/// The two branches of `α(T)` before the prefactor; the first is `+∞`
/// when `λ₁⁺ = 0`.
pub fn alpha_branches(t: f64, kappa: f64, l1: f64, l2: f64, variant: AlphaVariant) -> Result<(f64, f64)> {
    check_horizon(t)?;
    check_kappa(kappa)?;
    check_l1_l2(l1, l2)?;
    let l1p = l1.max(0.0);
    let l1m = (-l1).max(0.0);
    let q = (1.0 - kappa) * (1.0 - kappa);
    let first = if l1p > 0.0 {
        let s = 4.0 * sqrt(l2) + sqrt(16.0 * l2 + l1p);
        s * s / (l1p * l1p)
    } else {
        f64::INFINITY
    };
    let second = 4.0 * t * exp(1.0 + (2.0 * l1m + variant.weight() * l2) * t / q) / (2.0 * t * l1p + q);
    Ok((first, second))
}

/// `α(T)`.
pub fn alpha(t: f64, kappa: f64, l1: f64, l2: f64, l3: f64, variant: AlphaVariant) -> Result<f64> {
    check_l3(l3)?;
    let (a, b) = alpha_branches(t, kappa, l1, l2, variant)?;
    let pre = 2.0 * l3 * (1.0 + kappa) * (1.0 + kappa) / ((1.0 - kappa) * (1.0 - kappa));
    Ok(pre * a.min(b))
}

/// `β(T)`.
pub fn beta(t: f64, kappa: f64, l1: f64, l2: f64) -> Result<f64> {
    check_horizon(t)?;
    check_kappa(kappa)?;
    check_l1_l2(l1, l2)?;
    let l1p = l1.max(0.0);
    let l1m = (-l1).max(0.0);
    let q = (1.0 - kappa) * (1.0 - kappa);
    let first = if l1p > 0.0 {
        let s = 2.0 * sqrt(l2) + sqrt(4.0 * l2 + l1p);
        s * s / l1p
    } else {
        f64::INFINITY
    };
    let second = 2.0 * exp((2.0 * l1m + 16.0 * l2) * t / q);
    Ok(1.0 + (1.0 + kappa) * (1.0 + kappa) / q * first.min(second))
}

fn check_l2_params(lambda: f64, k: f64, k1: f64, k2: f64) -> Result<()> {
    if !(k.is_finite() && (0.0..1.0).contains(&k)) {
        return Err(Error::param("k", "(B1) requires k in [0, 1)"));
    }
    if !k1.is_finite() {
        return Err(Error::param("k1", "must be finite"));
    }
    if !(k2.is_finite() && k2 >= 0.0) {
        return Err(Error::param("k2", "(B2) requires k2 >= 0"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("lambda", "must be finite and >= 0"));
    }
    if lambda == 0.0 {
        if k1 <= k2 {
            return Err(Error::param("lambda", "lambda = 0 requires k1 > k2"));
        }
    } else if lambda <= (k2 - k1) / ((1.0 - k) * (1.0 - k)) {
        return Err(Error::param("lambda", "requires lambda > (k2 - k1)/(1 - k)^2"));
    }
    Ok(())
}

/// `k₁ - k₂ + λ(1-k)²`, the effective dissipation rate.
fn gap(lambda: f64, k: f64, k1: f64, k2: f64) -> f64 {
    k1 - k2 + lambda * (1.0 - k) * (1.0 - k)
}

/// `C(λ) = λ₃{1+(1+k)²}² / {k₁ - k₂ + λ(1-k)²}²`; the squared weighted-L²
/// distance is bounded by `2 C(λ) Ent(F)`.
pub fn c_lambda(lambda: f64, k: f64, k1: f64, k2: f64, l3: f64) -> Result<f64> {
    check_l2_params(lambda, k, k1, k2)?;
    check_l3(l3)?;
    let num = 1.0 + (1.0 + k) * (1.0 + k);
    let g = gap(lambda, k, k1, k2);
    Ok(l3 * num * num / (g * g))
}

/// Which weighted-L² bound applies.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum L2Case {
    /// `k₁ > k₂`, unweighted in time (`λ = 0`).
    Contractive,
    /// Any `k₁, k₂`, time weight `e^{-λt}` with `λ > (k₂-k₁)/(1-k)²`.
    Weighted { lambda: f64 },
}

impl L2Case {
    pub fn lambda(self) -> f64 {
        match self {
            L2Case::Contractive => 0.0,
            L2Case::Weighted { lambda } => lambda,
        }
    }
}

/// Multipliers of `√Ent(F)` and of the initial-law distance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coefficients {
    pub entropy: f64,
    pub initial: f64,
}

/// Coefficients of the weighted-L² inequality.
pub fn l2_coefficients(case: L2Case, k: f64, k1: f64, k2: f64, l3: f64, tau: f64) -> Result<Coefficients> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::param("tau", "must be finite and > 0"));
    }
    check_l3(l3)?;
    let lambda = match case {
        L2Case::Contractive => {
            if k1 <= k2 {
                return Err(Error::param("k1", "the contractive case requires k1 > k2"));
            }
            0.0
        }
        L2Case::Weighted { lambda } => {
            if !(lambda > 0.0) {
                return Err(Error::param("lambda", "the weighted case requires lambda > 0"));
            }
            lambda
        }
    };
    check_l2_params(lambda, k, k1, k2)?;
    let g = gap(lambda, k, k1, k2);
    let entropy = sqrt(2.0 * l3) * (1.0 + (1.0 + k) * (1.0 + k)) / g;
    let initial = sqrt(tau + (lambda * k * (1.0 - k) * tau + k2 * tau + 1.0 + k) / g);
    Ok(Coefficients { entropy, initial })
}

/// Coefficients of the uniform-norm inequality: `(√α(T), √β(T))`.
pub fn uniform_coefficients(
    t: f64,
    kappa: f64,
    l1: f64,
    l2: f64,
    l3: f64,
    variant: AlphaVariant,
) -> Result<Coefficients> {
    Ok(Coefficients {
        entropy: sqrt(alpha(t, kappa, l1, l2, l3, variant)?),
        initial: sqrt(beta(t, kappa, l1, l2)?),
    })
}

/// Number of terms in the summability evidence.
pub const SUMMABILITY_TERMS: usize = 50;

/// Whether `Σ_n e^{-2λn} {α(n) + β(n)}` is guaranteed finite, with partial
/// sums as numerical evidence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summability {
    /// `λ > (λ₁⁻ + 8λ₂)/(1-κ)²`.
    pub condition: bool,
    pub threshold: f64,
    /// `S_N` for `N = 1 … 50` (`λ₃ = 1`; the sum scales linearly in λ₃ only
    /// through α, so the convergence verdict does not depend on it).
    pub partial_sums: Vec<f64>,
}

pub fn summability(lambda: f64, kappa: f64, l1: f64, l2: f64, variant: AlphaVariant) -> Result<Summability> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", "must be finite and > 0"));
    }
    check_kappa(kappa)?;
    check_l1_l2(l1, l2)?;
    let threshold = ((-l1).max(0.0) + 8.0 * l2) / ((1.0 - kappa) * (1.0 - kappa));
    let mut partial_sums = Vec::with_capacity(SUMMABILITY_TERMS);
    let mut s = 0.0;
    for n in 1..=SUMMABILITY_TERMS {
        let t = n as f64;
        s += exp(-2.0 * lambda * t) * (alpha(t, kappa, l1, l2, 1.0, variant)? + beta(t, kappa, l1, l2)?);
        partial_sums.push(s);
    }
    Ok(Summability {
        condition: lambda > threshold,
        threshold,
        partial_sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let a = alpha(1.0, 0.0, 1.0, 0.0, 1.0, AlphaVariant::Proved).unwrap();
        assert!((a - 2.0).abs() < 1e-12);
        let b = beta(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((b - 2.0).abs() < 1e-12);
        let c = c_lambda(0.0, 0.0, 2.0, 1.0, 1.0).unwrap();
        assert!((c - 4.0).abs() < 1e-12);
        let co = l2_coefficients(L2Case::Contractive, 0.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert!((co.entropy - 2.0 * libm::sqrt(2.0)).abs() < 1e-12);
        assert!((co.initial - libm::sqrt(3.0)).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_lambda1_selects_second_branch() {
        let (first, second) = alpha_branches(2.0, 0.3, -1.0, 0.5, AlphaVariant::Proved).unwrap();
        assert!(first.is_infinite() && second.is_finite());
        let a = alpha(2.0, 0.3, 0.0, 0.0, 1.0, AlphaVariant::Proved).unwrap();
        assert!(a.is_finite() && a > 0.0);
    }

    #[test]
    fn alpha_vanishes_linearly_at_small_horizon() {
        for t in [1e-3, 1e-4, 1e-5] {
            let a = alpha(t, 0.0, 0.0, 0.0, 1.0, AlphaVariant::Proved).unwrap();
            assert!((a / t - 8.0 * core::f64::consts::E).abs() < 1e-9 * 8.0 * core::f64::consts::E);
        }
    }

    #[test]
    fn printed_variant_is_never_larger() {
        for &(t, l1, l2) in &[(1.0, -0.5, 0.3), (3.0, 0.0, 1.0), (0.5, 2.0, 0.1)] {
            let p = alpha(t, 0.2, l1, l2, 1.0, AlphaVariant::Printed).unwrap();
            let q = alpha(t, 0.2, l1, l2, 1.0, AlphaVariant::Proved).unwrap();
            assert!(p <= q);
        }
    }

    #[test]
    fn beta_branch_reduction() {
        let (t, kappa, l1) = (1.5, 0.4, -0.7);
        let b = beta(t, kappa, l1, 0.0).unwrap();
        let q = (1.0 - kappa) * (1.0 - kappa);
        let expected = 1.0 + 2.0 * (1.0 + kappa) * (1.0 + kappa) / q * libm::exp(2.0 * 0.7 * t / q);
        assert!((b - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn domain_errors_name_the_field() {
        assert!(matches!(
            alpha(1.0, 1.0, 1.0, 0.0, 1.0, AlphaVariant::Proved),
            Err(Error::InvalidParameter { field: "kappa", .. })
        ));
        assert!(c_lambda(0.0, 0.0, 1.0, 2.0, 1.0).is_err());
        assert!(c_lambda(0.5, 0.0, 1.0, 2.0, 1.0).is_err());
        assert!(c_lambda(1.5, 0.0, 1.0, 2.0, 1.0).is_ok());
        assert!(l2_coefficients(L2Case::Contractive, 0.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn c_lambda_is_continuous_at_zero() {
        let c0 = c_lambda(0.0, 0.3, 2.0, 0.5, 1.0).unwrap();
        let c = c_lambda(1e-12, 0.3, 2.0, 0.5, 1.0).unwrap();
        assert!((c - c0).abs() < 1e-10 * c0);
    }

    #[test]
    fn entropy_coefficient_squared_is_twice_c() {
        let co = l2_coefficients(L2Case::Weighted { lambda: 1.5 }, 0.3, 0.5, 1.0, 2.0, 0.7).unwrap();
        let c = c_lambda(1.5, 0.3, 0.5, 1.0, 2.0).unwrap();
        assert!((co.entropy * co.entropy - 2.0 * c).abs() < 1e-12 * c);
    }

    #[test]
    fn summability_verdicts() {
        let s = summability(0.5, 0.0, 1.0, 0.0, AlphaVariant::Proved).unwrap();
        assert!(s.condition);
        let s = summability(0.5, 0.0, -2.0, 0.0, AlphaVariant::Proved).unwrap();
        assert!(!s.condition);
        let s = summability(5.5, 0.0, -5.0, 0.0, AlphaVariant::Proved).unwrap();
        assert!(s.condition);
        assert!((s.partial_sums[49] - s.partial_sums[24]).abs() < 1e-6);
    }
}
