//! Numerical laboratory for the J-equation and the deformed Hermitian–Yang–Mills
//! equation on flat complex tori.
//!
//! Modules, bottom up:
//! - [`hermitian_cone`]: pointwise matrix algebra (relative spectra, cone tests,
//!   Schur complements, the dHYM operator `F`).
//! - [`torus_field`]: periodic grids, spectral complex Hessians, quadrature,
//!   mollification and the regularized maximum.
//! - [`functionals`]: `c0`, the `J_chi`, Aubin `I` and `J_omega0` energies.
//! - [`pde_solver`]: residuals, linearizations, Newton and continuity paths.
//! - [`stability`]: intersection-number slope tests and angle branches.
//! - [`cli`]: the batch front end used by the `kahlerlab` binary.

// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod functionals;
pub mod hermitian_cone;
pub mod pde_solver;
pub mod stability;
pub mod torus_field;

pub use error::{Error, Result};
