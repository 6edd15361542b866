//! Transportation cost inequalities: constants, deterministic integral
//! checks, and the empirical verification harness.

pub mod constants;
pub mod harness;
pub mod integral;

pub use constants::{
    alpha, alpha_branches, beta, c_lambda, l2_coefficients, summability, uniform_coefficients, AlphaVariant,
    Coefficients, L2Case, Summability,
};
pub use harness::{
    verify_inequality, BootstrapEstimate, CheckerSummary, HarnessConfig, Inequality, OtSolver, ReportParameters,
    Runtimes, TciReport, Verdict,
};
pub use integral::{integral_sides, neutral_integral_suite, random_pair, IntegralSuiteReport, PairSides};
