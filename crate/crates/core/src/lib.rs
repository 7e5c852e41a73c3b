//! Simulation and verification kernels for the nonlocal convection-diffusion
//! equation
//!
//! ```text
//! u_t = eps * u_xx + (J * u - u) - u * u_x
//! ```
//!
//! with non-decreasing step-like data `u(x, 0) -> u_-` / `u_+` as `x -> -inf` / `+inf`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; file formats, configuration and the command line
//! live in the companion `rarefy` crate.

#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used throughout for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod fft;
pub mod field;
pub mod kernels;
pub mod metrics;
pub mod nonlocal;
pub mod references;
pub mod solver;
pub mod special;
pub mod verification;

pub use error::{Error, Result};
pub use field::{FieldState, Grid1D, InitialProfile, ProfileKind};
pub use kernels::{DiscreteKernel, KernelFamily, KernelSpec};
pub use metrics::{Correction, NormReport, RateFit};
pub use nonlocal::NonlocalOp;
pub use references::RiemannData;
pub use solver::{FluxScheme, Integrator, SolverConfig, Trajectory};
pub use verification::{CheckResult, Mutation, Severity, Suite, SuiteConfig};

