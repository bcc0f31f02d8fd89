//! Numerical solver for the second boundary value problem of fourth-order
//! Monge-Ampere functionals
//!
//! ```text
//! U^{ij} (w(det D^2 u))_{ij} = f  in Omega,   u = phi,  w = psi  on the boundary,
//! ```
//!
//! with `w = G'` for the concave family `G(d) = d^theta / theta` (`log d` at
//! `theta = 0`). The solver drives a homotopy in `t` from the trivial problem to
//! the target one; each step couples a Monge-Ampere Dirichlet solve with a
//! linearized Monge-Ampere solve. Variational functionals, a properness probe,
//! an exact 1D oracle and a priori estimate diagnostics sit alongside.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod continuation;
pub mod error;
pub mod estimates;
pub mod functionals;
pub mod gfamily;
pub mod lin_ma;
pub mod linalg;
pub mod ma_dirichlet;
pub mod mesh;
pub mod oned_oracle;
pub mod par;

pub use error::{Error, Result};
