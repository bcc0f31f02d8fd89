//! Dirichlet problem `det D^2 u = g`, `u = phi` on the boundary, for `g > 0`.
//!
//! Damped Newton on the central-difference determinant. The Jacobian of the
//! discrete determinant is the discrete operator with the cofactor of the
//! current Hessian as coefficients, exactly.

use crate::error::{Error, Result};
use crate::lin_ma::{
    identity_coefficients, operator_rows, push_block, solve_linearized, LinSolveOptions,
};
use crate::linalg::{self, SparseMatrix};
use crate::mesh::{
    cofactor_entry, det_entry, hessian, hessian_at, min_eigenvalue, Grid, MatrixField, ScalarField,
};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// `Delta u0 = n g^(1/n)` with boundary data, convexified if needed.
    PoissonSqrt,
    /// Harmonic extension of the boundary data plus a scaled domain paraboloid.
    Paraboloid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MAOptions {
    /// Newton stops once `|det D^2 u - g|_inf <= newton_tol * max(1, |g|_inf)`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub damping_min: f64,
    pub init_mode: InitMode,
    pub linear: LinSolveOptions,
}

impl Default for MAOptions {
    fn default() -> Self {
        MAOptions {
            newton_tol: 1e-10,
            max_newton_iters: 60,
            damping_min: 2f64.powi(-20),
            init_mode: InitMode::PoissonSqrt,
            linear: LinSolveOptions::default(),
        }
    }
}

impl MAOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "newton_tol must be positive".into(),
            ));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_newton_iters must be at least 1".into(),
            ));
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return Err(Error::InvalidParameter(
                "damping_min must lie in (0, 1]".into(),
            ));
        }
        self.linear.validate()
    }
}

/// Pointwise `det D^2 u - g` on interior nodes; zero on the boundary.
pub fn ma_residual(grid: &Grid, u: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    grid.check(g)?;
    let r = residual_interior(grid, u.values(), g.interior());
    grid.check(u)?;
    ScalarField::from_parts(grid, &r, &vec![0.0; grid.num_boundary()])
}

fn residual_interior(grid: &Grid, u: &[f64], g: &[f64]) -> Vec<f64> {
    let dim = grid.dim();
    par::map_indices(grid.num_interior(), |i| {
        det_entry(hessian_at(grid, u, i), dim) - g[i]
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Smallest Hessian eigenvalue over interior nodes.
pub(crate) fn min_convexity(grid: &Grid, u: &[f64]) -> f64 {
    let dim = grid.dim();
    par::map_indices(grid.num_interior(), |i| {
        min_eigenvalue(hessian_at(grid, u, i), dim)
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

pub fn solve_ma(
    grid: &Grid,
    g: &ScalarField,
    phi: &[f64],
    opts: &MAOptions,
) -> Result<ScalarField> {
    solve_ma_from(grid, g, phi, opts, None)
}

/// As [`solve_ma`], starting Newton from `guess` when it is convex.
pub fn solve_ma_from(
    grid: &Grid,
    g: &ScalarField,
    phi: &[f64],
    opts: &MAOptions,
    guess: Option<&ScalarField>,
) -> Result<ScalarField> {
    opts.validate()?;
    grid.check(g)?;
    if phi.len() != grid.num_boundary() {
        return Err(Error::GridMismatch);
    }
    if let Some(i) = g
        .interior()
        .iter()
        .position(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidParameter(format!(
            "right-hand side must be positive and finite (node {i}: {})",
            g.interior()[i]
        )));
    }
    if grid.dim() == 1 {
        let a = identity_coefficients(grid);
        return solve_linearized(grid, &a, g, phi, &opts.linear);
    }

    let start = match guess {
        Some(u) => {
            grid.check(u)?;
            let v = ScalarField::from_parts(grid, u.interior(), phi)?;
            if min_convexity(grid, v.values()) > 0.0 {
                Some(v)
            } else {
                None
            }
        }
        None => None,
    };
    let u0 = match start {
        Some(u) => u,
        None => initial_guess(grid, g, phi, opts)?,
    };
    newton(grid, g, u0, opts)
}

fn initial_guess(
    grid: &Grid,
    g: &ScalarField,
    phi: &[f64],
    opts: &MAOptions,
) -> Result<ScalarField> {
    let a = identity_coefficients(grid);
    let n = grid.dim() as f64;
    let (rhs, target) = match opts.init_mode {
        InitMode::PoissonSqrt => (g.map(|v| n * v.max(0.0).powf(1.0 / n)), 0.0),
        InitMode::Paraboloid => {
            let mean = g.interior().iter().sum::<f64>() / g.interior().len().max(1) as f64;
            (ScalarField::constant(grid, 0.0), mean.powf(1.0 / n))
        }
    };
    let mut u = solve_linearized(grid, &a, &rhs, phi, &opts.linear)?;
    let domain = *grid.domain();
    let lh = domain.level_hessian();
    let lh_min = min_eigenvalue(lh, grid.dim());
    let level = ScalarField::from_fn(grid, |p| domain.level(p));
    let lam = min_convexity(grid, u.values());
    let floor = 0.1
        * g.interior()
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v))
            .powf(1.0 / n);
    let eps = ((floor - lam) / lh_min).max(target / lh_min);
    if eps > 0.0 {
        u = u.axpy(eps, &level)?;
    }
    Ok(u)
}

fn newton(
    grid: &Grid,
    g: &ScalarField,
    mut u: ScalarField,
    opts: &MAOptions,
) -> Result<ScalarField> {
    let n = grid.num_interior();
    let dim = grid.dim();
    let gi = g.interior();
    let tol = opts.newton_tol * sup(gi).max(1.0);
    let mut r = residual_interior(grid, u.values(), gi);
    let mut norm = sup(&r);
    let mut trace = vec![norm];
    for it in 0..opts.max_newton_iters {
        if norm <= tol {
            return Ok(u);
        }
        let h = hessian(&u, grid)?;
        let cof: Vec<[f64; 3]> = h
            .entries()
            .iter()
            .map(|&m| cofactor_entry(m, dim))
            .collect();
        let rows = operator_rows(grid, &cof);
        let mut m = SparseMatrix::with_capacity(n, n * 9);
        push_block(&mut m, &rows, n, 0, 0, None);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = linalg::solve(&m, &rhs, &opts.linear.settings())?;

        let mut alpha = 1.0;
        loop {
            let mut trial = u.values().to_vec();
            for (t, s) in trial.iter_mut().zip(&step) {
                *t += alpha * s;
            }
            if min_convexity(grid, &trial) > 0.0 {
                let rt = residual_interior(grid, &trial, gi);
                let nt = sup(&rt);
                if nt < norm {
                    u = ScalarField::from_values(grid, trial)?;
                    r = rt;
                    norm = nt;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < opts.damping_min {
                trace.push(norm);
                return Err(Error::ConvexityLost {
                    iteration: it + 1,
                    residual: norm,
                    trace,
                });
            }
        }
        trace.push(norm);
    }
    if norm <= tol {
        return Ok(u);
    }
    Err(Error::NewtonDivergence {
        iterations: opts.max_newton_iters,
        residual: norm,
        trace,
    })
}

/// Checks that `u` is strictly convex on the grid.
pub fn is_discretely_convex(grid: &Grid, u: &ScalarField) -> Result<bool> {
    grid.check(u)?;
    Ok(min_convexity(grid, u.values()) > 0.0)
}

/// Hessian coefficients of the Newton step: the cofactor field of `D^2 u`.
pub fn linearization_coefficients(grid: &Grid, u: &ScalarField) -> Result<MatrixField> {
    let h = hessian(u, grid)?;
    Ok(crate::mesh::cofactor(&h))
}
