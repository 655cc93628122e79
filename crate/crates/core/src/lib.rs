//! Adam-family stochastic subgradient methods for nonsmooth problems.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`vector`]: dense `f64` vectors, elementwise sign selections and the
//!   optimizer state triple `(x, m, v)`.
//! - [`problems`]: finite-sum nonsmooth objectives with conservative-field
//!   subgradient selections, including a small ReLU network differentiated by
//!   a reverse-mode tape.
//! - [`optim`]: the two-timescale Adam-family engine (Adam, AdaBelief,
//!   AMSGrad, NAdam, Yogi).
//! - [`clip`]: the clipping projection and the clipped methods SGD-C and
//!   ADAM-C.
//! - [`schedule`] and [`noise`]: stepsize / clipping-radius schedules with
//!   asymptotic validity checks, and additive noise models including an
//!   alpha-stable sampler.
//! - [`analysis`]: Lyapunov function, explicit-Euler simulation of the
//!   limiting differential inclusion, and trajectory summaries.
//! - [`runner`]: seeded single runs wiring all of the above together.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod clip;
mod error;
pub(crate) mod linalg;
pub mod noise;
pub mod optim;
pub mod problems;
pub mod runner;
pub mod schedule;
pub mod vector;

pub use error::{Error, Result};
pub use vector::{hadamard, shifted_power, sign_tilde, OptimizerState, SignSelection, Vector};

/// Iterates whose sup-norm exceeds this bound are treated as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e8;
