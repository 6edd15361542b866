//! Simulation and transportation-cost verification engine for neutral
//! functional stochastic differential equations
//!
//! ```text
//! d{X(t) - G(X_t)} = {A X(t) + b(X_t)} dt + σ(X_t) dW(t),   X_0 = ξ
//! ```
//!
//! where `X_t(θ) = X(t + θ)`, `θ ∈ [-τ, 0]` is the segment process.
//!
//! The crate is `no_std` and needs only `alloc`. Everything that touches the
//! outside world (files, clocks, thread pools, the CLI) lives in the `ntci`
//! companion crate; parallel work is injected through [`exec::Executor`].
//!
//! Module map:
//!
//! * [`paths`]: segments, sampled paths, ensembles and the five path metrics.
//! * [`model`]: coefficient sets, the linear example, assumption checkers.
//! * [`simulate`]: fixed-point Euler–Maruyama integrator and ensembles.
//! * [`girsanov`]: tilted/untilted coupling, log-densities, relative entropy.
//! * [`ot`]: cost matrices, exact assignment W₂, log-domain Sinkhorn.
//! * [`tci`]: closed-form constants, deterministic integral-inequality suite, and the
//!   end-to-end inequality harness.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod exec;
pub mod girsanov;
pub mod math;
pub mod model;
pub mod ot;
pub mod paths;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod tci;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use paths::{Grid, PathEnsemble, Segment, SegmentPath, SegmentView};
