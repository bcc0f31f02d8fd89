//! Domains, grids, fields and discrete calculus.

mod calculus;
mod domain;
mod field;
mod grid;

pub use calculus::{
    apply_operator, apply_operator_at, boundary_gradient, boundary_hessian,
    boundary_normal_derivative, cofactor, cofactor_divergence_sup, cofactor_divergence_sup_inside,
    cofactor_entry, det, det_entry, hessian, hessian_at, hessian_determinant, integrate_boundary,
    integrate_interior, operator_row,
};
pub use domain::{gauss_curvature, DomainSpec, BOUNDARY_TOL};
pub use field::{min_eigenvalue, MatrixField, ScalarField};
pub use grid::{build_grid, Arm, BoundaryNode, Grid, Stencil, DIRECTIONS};
