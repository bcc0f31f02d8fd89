//! Nondivergence-form elliptic solves `A^{ij} w_ij = f` with Dirichlet data.

use crate::error::{Error, Result};
use crate::linalg::{self, LinearSolveSettings, SolverKind, SparseMatrix};
use crate::mesh::{apply_operator, min_eigenvalue, operator_row, Grid, MatrixField, ScalarField};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinSolveOptions {
    /// Relative residual tolerance of the discrete system.
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    pub solver_kind: SolverKind,
}

impl Default for LinSolveOptions {
    fn default() -> Self {
        LinSolveOptions {
            linear_tol: 1e-10,
            max_linear_iters: 5000,
            solver_kind: SolverKind::DirectSparse,
        }
    }
}

impl LinSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.linear_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "linear_tol must be positive".into(),
            ));
        }
        if self.max_linear_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_linear_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn settings(&self) -> LinearSolveSettings {
        LinearSolveSettings {
            kind: self.solver_kind,
            tol: self.linear_tol,
            max_iters: self.max_linear_iters,
        }
    }
}

/// Operator rows for every interior node, computed in parallel.
pub(crate) fn operator_rows(grid: &Grid, coeffs: &[[f64; 3]]) -> Vec<Vec<(usize, f64)>> {
    par::map_indices(grid.num_interior(), |i| operator_row(grid, i, coeffs[i]))
}

/// Pushes an operator block into `m` at the given offsets. Couplings to
/// boundary nodes are multiplied by `boundary` and subtracted from `rhs`.
pub(crate) fn push_block(
    m: &mut SparseMatrix,
    rows: &[Vec<(usize, f64)>],
    n_int: usize,
    row0: usize,
    col0: usize,
    boundary: Option<(&[f64], &mut [f64])>,
) {
    match boundary {
        Some((bvals, rhs)) => {
            for (i, row) in rows.iter().enumerate() {
                for &(j, c) in row {
                    if j < n_int {
                        m.push(row0 + i, col0 + j, c);
                    } else {
                        rhs[i] -= c * bvals[j - n_int];
                    }
                }
            }
        }
        None => {
            for (i, row) in rows.iter().enumerate() {
                for &(j, c) in row {
                    if j < n_int {
                        m.push(row0 + i, col0 + j, c);
                    }
                }
            }
        }
    }
}

fn check_elliptic(a: &MatrixField) -> Result<()> {
    let dim = a.dim();
    match a
        .entries()
        .iter()
        .position(|&m| !(min_eigenvalue(m, dim) > 0.0))
    {
        Some(node) => Err(Error::NotElliptic { node }),
        None => Ok(()),
    }
}

/// Solves `A^{ij} D_ij w = f` on interior nodes with `w = boundary` on the
/// boundary nodes.
pub fn solve_linearized(
    grid: &Grid,
    a: &MatrixField,
    f: &ScalarField,
    boundary: &[f64],
    opts: &LinSolveOptions,
) -> Result<ScalarField> {
    opts.validate()?;
    grid.check(f)?;
    if a.grid_id() != grid.id() || boundary.len() != grid.num_boundary() {
        return Err(Error::GridMismatch);
    }
    check_elliptic(a)?;
    let n = grid.num_interior();
    let rows = operator_rows(grid, a.entries());
    let mut m = SparseMatrix::with_capacity(n, n * 9);
    let mut rhs = f.interior().to_vec();
    push_block(&mut m, &rows, n, 0, 0, Some((boundary, &mut rhs)));
    let interior = linalg::solve(&m, &rhs, &opts.settings())?;
    ScalarField::from_parts(grid, &interior, boundary)
}

/// Pointwise `A^{ij} D_ij w - f` on interior nodes; zero on the boundary.
pub fn linearized_residual(
    grid: &Grid,
    a: &MatrixField,
    w: &ScalarField,
    f: &ScalarField,
) -> Result<ScalarField> {
    grid.check(f)?;
    let lw = apply_operator(grid, a, w)?;
    let interior: Vec<f64> = lw.iter().zip(f.interior()).map(|(l, g)| l - g).collect();
    ScalarField::from_parts(grid, &interior, &vec![0.0; grid.num_boundary()])
}

/// Identity coefficients on every interior node.
pub fn identity_coefficients(grid: &Grid) -> MatrixField {
    MatrixField::new(grid, vec![[1.0, 1.0, 0.0]; grid.num_interior()])
        .expect("length matches interior count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, cofactor, hessian, DomainSpec};

    fn disk(res: usize) -> Grid {
        build_grid(DomainSpec::disk(1.0).unwrap(), res).unwrap()
    }

    #[test]
    fn constants_solve_homogeneous_problem() {
        let g = disk(32);
        let a = identity_coefficients(&g);
        let w = solve_linearized(
            &g,
            &a,
            &ScalarField::constant(&g, 0.0),
            &vec![1.0; g.num_boundary()],
            &LinSolveOptions::default(),
        )
        .unwrap();
        assert!(w.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn laplacian_quadratic_is_exact() {
        let g = disk(64);
        let a = identity_coefficients(&g);
        let f = ScalarField::constant(&g, 4.0);
        let w = solve_linearized(
            &g,
            &a,
            &f,
            &vec![0.0; g.num_boundary()],
            &LinSolveOptions::default(),
        )
        .unwrap();
        let exact = ScalarField::from_fn(&g, |p| p[0] * p[0] + p[1] * p[1] - 1.0);
        assert!(w.max_abs_diff(&exact).unwrap() < 1e-8);
        let r = linearized_residual(&g, &a, &exact, &f).unwrap();
        assert!(r.sup_norm() < 1e-8);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let g = build_grid(DomainSpec::interval(0.0, 1.0).unwrap(), 33).unwrap();
        let a = identity_coefficients(&g);
        let w = solve_linearized(
            &g,
            &a,
            &ScalarField::constant(&g, 2.0),
            &[0.0, 0.0],
            &LinSolveOptions::default(),
        )
        .unwrap();
        let exact = ScalarField::from_fn(&g, |p| p[0] * p[0] - p[0]);
        assert!(w.max_abs_diff(&exact).unwrap() < 1e-12);
    }

    #[test]
    fn iterative_matches_direct() {
        let g = disk(32);
        let u = ScalarField::from_fn(&g, |p| {
            (0.5 * (p[0] * p[0] + p[1] * p[1])).exp() + 0.3 * p[0] * p[1]
        });
        let a = cofactor(&hessian(&u, &g).unwrap());
        let f = ScalarField::from_fn(&g, |p| 1.0 + p[0]);
        let bd: Vec<f64> = g.boundary_coords().iter().map(|p| 1.0 + p[1]).collect();
        let direct = solve_linearized(&g, &a, &f, &bd, &LinSolveOptions::default()).unwrap();
        let opts = LinSolveOptions {
            solver_kind: SolverKind::Iterative,
            linear_tol: 1e-11,
            ..Default::default()
        };
        let iterative = solve_linearized(&g, &a, &f, &bd, &opts).unwrap();
        assert!(direct.max_abs_diff(&iterative).unwrap() < 1e-8);
    }

    #[test]
    fn non_elliptic_coefficients_are_rejected() {
        let g = disk(16);
        let mut entries = vec![[1.0, 1.0, 0.0]; g.num_interior()];
        entries[3] = [1.0, -1.0, 0.0];
        let a = MatrixField::new(&g, entries).unwrap();
        let err = solve_linearized(
            &g,
            &a,
            &ScalarField::constant(&g, 0.0),
            &vec![0.0; g.num_boundary()],
            &LinSolveOptions::default(),
        );
        assert_eq!(err, Err(Error::NotElliptic { node: 3 }));
    }

    #[test]
    fn drift_free_operator_on_linear_function() {
        // U from u = exp(r^2/2); U^{ij} D_ij x = 0, so the residual with f = 0
        // measures only discretization error, which is exactly zero for linears.
        for res in [16, 32, 64] {
            let g = disk(res);
            let u = ScalarField::from_fn(&g, |p| (0.5 * (p[0] * p[0] + p[1] * p[1])).exp());
            let a = cofactor(&hessian(&u, &g).unwrap());
            let w = ScalarField::from_fn(&g, |p| p[0]);
            let r = linearized_residual(&g, &a, &w, &ScalarField::constant(&g, 0.0)).unwrap();
            assert!(r.sup_norm() < 1e-9, "{}", r.sup_norm());
        }
    }

    #[test]
    fn maximum_principle_for_signed_sources() {
        let g = disk(48);
        let u = ScalarField::from_fn(&g, |p| {
            (0.5 * (p[0] * p[0] + p[1] * p[1])).exp() + 0.2 * p[0] * p[0]
        });
        let a = cofactor(&hessian(&u, &g).unwrap());
        let bd: Vec<f64> = g
            .boundary_coords()
            .iter()
            .map(|p| 1.0 + 0.3 * p[0])
            .collect();
        for sign in [1.0, -1.0] {
            let f = ScalarField::from_fn(&g, |p| sign * (1.0 + p[1] * p[1]));
            let w = solve_linearized(&g, &a, &f, &bd, &LinSolveOptions::default()).unwrap();
            let tol = 1e-8 * w.sup_norm();
            let bmax = w
                .boundary()
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let bmin = w.boundary().iter().copied().fold(f64::INFINITY, f64::min);
            if sign > 0.0 {
                assert!(w.max() <= bmax + tol);
            } else {
                assert!(w.min() >= bmin - tol);
            }
        }
    }

    #[test]
    fn solution_scales_linearly() {
        let g = disk(24);
        let u = ScalarField::from_fn(&g, |p| p[0] * p[0] + 0.5 * p[1] * p[1] + 0.1 * p[0] * p[1]);
        let a = cofactor(&hessian(&u, &g).unwrap());
        let f = ScalarField::from_fn(&g, |p| p[0] - 2.0 * p[1]);
        let bd: Vec<f64> = g.boundary_coords().iter().map(|p| p[0] * p[1]).collect();
        let w1 = solve_linearized(&g, &a, &f, &bd, &LinSolveOptions::default()).unwrap();
        let alpha = -3.5;
        let bd2: Vec<f64> = bd.iter().map(|v| alpha * v).collect();
        let w2 = solve_linearized(
            &g,
            &a,
            &f.map(|v| alpha * v),
            &bd2,
            &LinSolveOptions::default(),
        )
        .unwrap();
        let scaled = w1.map(|v| alpha * v);
        assert!(w2.max_abs_diff(&scaled).unwrap() < 1e-10 * scaled.sup_norm().max(1.0));
    }
}
