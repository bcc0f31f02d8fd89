//! The continuation map `Phi_t` and the path-following driver for the
//! second boundary value problem
//!
//! ```text
//! U^{ij} (w(det D^2 u))_ij = f in the domain,   u = phi,  w = psi on the boundary.
//! ```
//!
//! `Phi_t(w)` solves `det D^2 u = Theta(w)` with `u = phi`, then
//! `U^{ij} v_ij = t f` with `v = t psi + (1 - t)`, and returns `v`. The driver
//! follows `t` from 0 to 1 with damped fixed-point iteration. When that
//! iteration stops contracting, the step is retried with Newton's method on
//! the coupled system for `(u, w)`, whose solutions are exactly the fixed
//! points of `Phi_t`.

use crate::error::{Error, Result};
use crate::estimates::{
    boundary_cofactor_check, gradient_lower_bound_check, max_principle_check, wd_bound_check,
    DiagnosticEntry, DiagnosticsReport,
};
use crate::gfamily::GSpec;
use crate::lin_ma::{operator_rows, push_block, solve_linearized, LinSolveOptions};
use crate::linalg::{self, SparseMatrix};
use crate::ma_dirichlet::{min_convexity, solve_ma_from, MAOptions};
use crate::mesh::{
    apply_operator_at, build_grid, cofactor, cofactor_entry, det_entry, hessian, hessian_at,
    hessian_determinant, DomainSpec, Grid, ScalarField,
};
use crate::par;

/// Data of one boundary value problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: Grid,
    gspec: GSpec,
    f: ScalarField,
    phi: ScalarField,
    psi: ScalarField,
}

impl Problem {
    /// `phi` and `psi` are full fields; their boundary values are the Dirichlet
    /// data, interior values of `phi` only enter boundary gradient diagnostics.
    pub fn new(
        grid: Grid,
        gspec: GSpec,
        f: ScalarField,
        phi: ScalarField,
        psi: ScalarField,
    ) -> Result<Self> {
        grid.check(&f)?;
        grid.check(&phi)?;
        grid.check(&psi)?;
        if gspec.dim() != grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "integrand dimension {} does not match the domain dimension {}",
                gspec.dim(),
                grid.dim()
            )));
        }
        if let Some((k, &v)) = psi.boundary().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            let p = grid.boundary_coords()[k];
            return Err(Error::InvalidParameter(format!(
                "psi must be positive on the boundary (psi({}, {}) = {v})",
                p[0], p[1]
            )));
        }
        for (name, field) in [("f", &f), ("phi", &phi), ("psi", &psi)] {
            if field.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} has non-finite values"
                )));
            }
        }
        Ok(Problem {
            grid,
            gspec,
            f,
            phi,
            psi,
        })
    }

    /// Builds the grid and samples the data functions on it.
    pub fn from_functions(
        domain: DomainSpec,
        resolution: usize,
        theta: f64,
        f: impl Fn([f64; 2]) -> f64,
        phi: impl Fn([f64; 2]) -> f64,
        psi: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self> {
        let grid = build_grid(domain, resolution)?;
        let gspec = GSpec::new(theta, domain.dim())?;
        let f = ScalarField::from_fn(&grid, f);
        let phi = ScalarField::from_fn(&grid, phi);
        let psi = ScalarField::from_fn(&grid, psi);
        Problem::new(grid, gspec, f, phi, psi)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> &DomainSpec {
        self.grid.domain()
    }

    pub fn gspec(&self) -> &GSpec {
        &self.gspec
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    pub fn phi_is_zero(&self) -> bool {
        self.phi.boundary().iter().all(|&v| v == 0.0)
    }

    /// Dirichlet data `t psi + (1 - t)` for `w` along the path.
    pub fn w_boundary(&self, t: f64) -> Vec<f64> {
        self.psi
            .boundary()
            .iter()
            .map(|p| t * p + (1.0 - t))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Initial number of uniform steps in `t`.
    pub t_steps: usize,
    /// Damping `rho` of the fixed-point update `w <- (1 - rho) w + rho Phi_t(w)`.
    pub damping: f64,
    /// Sup-norm tolerance on `Phi_t(w) - w`.
    pub fixed_point_tol: f64,
    pub max_picard_iters: usize,
    pub w_floor: f64,
    pub max_step_halvings: usize,
    /// Retry a stalled fixed-point step with coupled Newton.
    pub newton_fallback: bool,
    pub max_newton_iters: usize,
    pub ma: MAOptions,
    pub linear: LinSolveOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            t_steps: 10,
            damping: 0.5,
            fixed_point_tol: 1e-8,
            max_picard_iters: 100,
            w_floor: 1e-6,
            max_step_halvings: 6,
            newton_fallback: true,
            max_newton_iters: 40,
            ma: MAOptions::default(),
            linear: LinSolveOptions::default(),
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.t_steps == 0 {
            return bad("t_steps must be at least 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("picard damping must lie in (0, 1]");
        }
        if !(self.fixed_point_tol > 0.0) {
            return bad("fixed_point_tol must be positive");
        }
        if self.max_picard_iters == 0 || self.max_newton_iters == 0 {
            return bad("iteration limits must be at least 1");
        }
        if !(self.w_floor > 0.0) {
            return bad("w_floor must be positive");
        }
        self.ma.validate()?;
        self.linear.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    Picard,
    Newton,
}

impl StepMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepMethod::Picard => "picard",
            StepMethod::Newton => "newton",
        }
    }
}

/// One accepted continuation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub method: StepMethod,
    pub iterations: usize,
    /// Final fixed-point increment (Picard) or scaled residual (Newton).
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    /// Interior values from the solver, `psi` on the boundary.
    pub w: ScalarField,
    /// `det D^2 u`, extrapolated to boundary nodes.
    pub d: ScalarField,
    /// Sup-norm over interior nodes of `U^{ij} (G'(d))_ij - f`.
    pub el_residual_norm: f64,
    /// Sup-norm change of `w` under one more application of `Phi_1`.
    pub fixed_point_change: f64,
    pub trace: Vec<StepRecord>,
    pub diagnostics: DiagnosticsReport,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn min_interior(w: &ScalarField) -> f64 {
    w.interior().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `Phi_t(w)`: returns `(w_t, u)`.
pub fn phi_map(
    w: &ScalarField,
    t: f64,
    problem: &Problem,
    opts: &ContinuationOptions,
) -> Result<(ScalarField, ScalarField)> {
    phi_map_from(w, t, problem, opts, None)
}

fn phi_map_from(
    w: &ScalarField,
    t: f64,
    problem: &Problem,
    opts: &ContinuationOptions,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, ScalarField)> {
    let grid = &problem.grid;
    grid.check(w)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "t must lie in [0, 1] (got {t})"
        )));
    }
    let min_w = min_interior(w);
    if !(min_w > opts.w_floor) {
        return Err(Error::WFloorBreach {
            floor: opts.w_floor,
            min_w,
            last_good_t: t,
        });
    }
    let gs = problem.gspec;
    let rhs = w.map(|v| if v > 0.0 { gs.theta_inv(v) } else { 1.0 });
    let u = solve_ma_from(grid, &rhs, problem.phi.boundary(), &opts.ma, guess)?;
    let a = cofactor(&hessian(&u, grid)?);
    let tf = problem.f.map(|v| t * v);
    let wt = solve_linearized(grid, &a, &tf, &problem.w_boundary(t), &opts.linear)?;
    Ok((wt, u))
}

/// Outcome of a failed step attempt.
struct StepFailure {
    hit_floor: bool,
    min_w: f64,
    reason: String,
}

impl StepFailure {
    fn from_error(e: Error) -> Self {
        match e {
            Error::WFloorBreach { min_w, .. } => StepFailure {
                hit_floor: true,
                min_w,
                reason: "w reached the floor".into(),
            },
            other => StepFailure {
                hit_floor: false,
                min_w: f64::NAN,
                reason: other.to_string(),
            },
        }
    }
}

struct State {
    u: ScalarField,
    w: ScalarField,
}

fn picard_step(
    problem: &Problem,
    opts: &ContinuationOptions,
    t: f64,
    start: &State,
) -> std::result::Result<(State, StepRecord), StepFailure> {
    let grid = &problem.grid;
    let mut w = ScalarField::from_parts(grid, start.w.interior(), &problem.w_boundary(t))
        .map_err(StepFailure::from_error)?;
    let mut u = start.u.clone();
    let mut best = f64::INFINITY;
    let mut clamped_run = 0usize;
    let mut last_min = f64::NAN;
    for k in 0..opts.max_picard_iters {
        let (wt, un) =
            phi_map_from(&w, t, problem, opts, Some(&u)).map_err(StepFailure::from_error)?;
        u = un;
        let incr = wt.max_abs_diff(&w).map_err(StepFailure::from_error)?;
        last_min = min_interior(&wt);
        if incr <= opts.fixed_point_tol && last_min > opts.w_floor {
            return Ok((
                State { u, w },
                StepRecord {
                    t,
                    method: StepMethod::Picard,
                    iterations: k + 1,
                    residual: incr,
                },
            ));
        }
        if !incr.is_finite() || incr > 10.0 * best {
            return Err(StepFailure {
                hit_floor: false,
                min_w: last_min,
                reason: format!("fixed-point increment grew to {incr:.3e}"),
            });
        }
        best = best.min(incr);
        let rho = opts.damping;
        let mut clamped = false;
        let mixed: Vec<f64> = w
            .values()
            .iter()
            .zip(wt.values())
            .enumerate()
            .map(|(i, (a, b))| {
                let v = (1.0 - rho) * a + rho * b;
                if i < grid.num_interior() && v < opts.w_floor {
                    clamped = true;
                    opts.w_floor
                } else {
                    v
                }
            })
            .collect();
        clamped_run = if clamped { clamped_run + 1 } else { 0 };
        if clamped_run >= 5 {
            return Err(StepFailure {
                hit_floor: true,
                min_w: last_min,
                reason: "iterates held at the w floor".into(),
            });
        }
        w = ScalarField::from_values(grid, mixed).map_err(StepFailure::from_error)?;
    }
    Err(StepFailure {
        hit_floor: false,
        min_w: last_min,
        reason: format!(
            "fixed-point iteration did not reach {:.1e} in {} iterations",
            opts.fixed_point_tol, opts.max_picard_iters
        ),
    })
}

/// Residuals of the coupled system; `None` when `u` is not strictly convex
/// or `w` is not positive.
fn coupled_residual(
    problem: &Problem,
    t: f64,
    u: &[f64],
    w: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let grid = &problem.grid;
    let dim = grid.dim();
    let inv = 1.0 / (1.0 - problem.gspec.theta());
    let f = problem.f.interior();
    let rows = par::map_indices(grid.num_interior(), |i| {
        let h = hessian_at(grid, u, i);
        let d = det_entry(h, dim);
        if !(d > 0.0 && h[0] > 0.0 && w[i] > 0.0) {
            return None;
        }
        let r1 = d.ln() + inv * w[i].ln();
        let r2 = apply_operator_at(grid, cofactor_entry(h, dim), w, i) - t * f[i];
        Some((r1, r2))
    });
    let mut r1 = Vec::with_capacity(rows.len());
    let mut r2 = Vec::with_capacity(rows.len());
    for r in rows {
        let (a, b) = r?;
        r1.push(a);
        r2.push(b);
    }
    Some((r1, r2))
}

fn newton_step(
    problem: &Problem,
    opts: &ContinuationOptions,
    t: f64,
    start: &State,
) -> std::result::Result<(State, StepRecord), StepFailure> {
    let grid = &problem.grid;
    let n = grid.num_interior();
    let dim = grid.dim();
    let inv = 1.0 / (1.0 - problem.gspec.theta());
    let scale = (t * problem.f.sup_norm()).max(1.0);
    let r1_tol = opts.ma.newton_tol;
    let r2_tol = opts.linear.linear_tol * scale;
    let fail = |hit_floor: bool, min_w: f64, reason: String| StepFailure {
        hit_floor,
        min_w,
        reason,
    };

    let mut u = ScalarField::from_parts(grid, start.u.interior(), problem.phi.boundary())
        .map_err(StepFailure::from_error)?;
    let mut w = ScalarField::from_parts(grid, start.w.interior(), &problem.w_boundary(t))
        .map_err(StepFailure::from_error)?;
    let merit = |r1: &[f64], r2: &[f64]| -> f64 {
        let s: f64 = r1.iter().map(|v| v * v).sum::<f64>()
            + r2.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>();
        (s / (2 * n) as f64).sqrt()
    };
    let (mut r1, mut r2) =
        coupled_residual(problem, t, u.values(), w.values()).ok_or_else(|| {
            fail(
                false,
                min_interior(&w),
                "coupled Newton start is not admissible".into(),
            )
        })?;
    let mut m0 = merit(&r1, &r2);
    for it in 0..opts.max_newton_iters {
        if sup(&r1) <= r1_tol && sup(&r2) <= r2_tol {
            let residual = sup(&r1).max(sup(&r2) / scale);
            return Ok((
                State { u, w },
                StepRecord {
                    t,
                    method: StepMethod::Newton,
                    iterations: it,
                    residual,
                },
            ));
        }
        let hess = hessian(&u, grid).map_err(StepFailure::from_error)?;
        let cof_h: Vec<[f64; 3]> = hess
            .entries()
            .iter()
            .map(|&m| cofactor_entry(m, dim))
            .collect();
        let det_h: Vec<f64> = hess.entries().iter().map(|&m| det_entry(m, dim)).collect();
        let rows_h = operator_rows(grid, &cof_h);
        let mut jac = SparseMatrix::with_capacity(2 * n, 30 * n);
        let scaled: Vec<Vec<(usize, f64)>> = rows_h
            .iter()
            .zip(&det_h)
            .map(|(row, d)| row.iter().map(|&(j, c)| (j, c / d)).collect())
            .collect();
        push_block(&mut jac, &scaled, n, 0, 0, None);
        for i in 0..n {
            jac.push(i, n + i, inv / w.values()[i]);
        }
        if dim == 2 {
            let cof_w: Vec<[f64; 3]> = (0..n)
                .map(|i| cofactor_entry(hessian_at(grid, w.values(), i), dim))
                .collect();
            push_block(&mut jac, &operator_rows(grid, &cof_w), n, n, 0, None);
        }
        push_block(&mut jac, &rows_h, n, n, n, None);
        let rhs: Vec<f64> = r1.iter().chain(&r2).map(|v| -v).collect();
        let step =
            linalg::solve(&jac, &rhs, &opts.linear.settings()).map_err(StepFailure::from_error)?;
        let step_norm = sup(&step);

        let mut alpha = 1.0;
        let mut blocked_by_floor = false;
        loop {
            let mut tu = u.values().to_vec();
            let mut tw = w.values().to_vec();
            for i in 0..n {
                tu[i] += alpha * step[i];
                tw[i] += alpha * step[n + i];
            }
            let floor_ok = tw[..n].iter().all(|&v| v > opts.w_floor);
            if !floor_ok {
                blocked_by_floor = true;
            } else if min_convexity(grid, &tu) > 0.0 {
                if let Some((a, b)) = coupled_residual(problem, t, &tu, &tw) {
                    let mt = merit(&a, &b);
                    if mt < (1.0 - 1e-4 * alpha) * m0 || (mt <= m0 && step_norm * alpha < 1e-12) {
                        u = ScalarField::from_values(grid, tu).map_err(StepFailure::from_error)?;
                        w = ScalarField::from_values(grid, tw).map_err(StepFailure::from_error)?;
                        r1 = a;
                        r2 = b;
                        m0 = mt;
                        break;
                    }
                }
            }
            alpha *= 0.5;
            if alpha < opts.ma.damping_min {
                return Err(fail(
                    blocked_by_floor,
                    min_interior(&w),
                    format!("coupled Newton line search failed at iteration {}", it + 1),
                ));
            }
        }
    }
    if sup(&r1) <= r1_tol && sup(&r2) <= r2_tol {
        let residual = sup(&r1).max(sup(&r2) / scale);
        return Ok((
            State { u, w },
            StepRecord {
                t,
                method: StepMethod::Newton,
                iterations: opts.max_newton_iters,
                residual,
            },
        ));
    }
    Err(fail(
        false,
        min_interior(&w),
        format!(
            "coupled Newton did not converge in {} iterations",
            opts.max_newton_iters
        ),
    ))
}

pub fn solve_second_bvp(problem: &Problem, opts: &ContinuationOptions) -> Result<Solution> {
    let w0 = ScalarField::constant(&problem.grid, 1.0);
    solve_second_bvp_from(problem, opts, &w0)
}

/// As [`solve_second_bvp`] with initial iterate `w0` (interior values used).
pub fn solve_second_bvp_from(
    problem: &Problem,
    opts: &ContinuationOptions,
    w0: &ScalarField,
) -> Result<Solution> {
    opts.validate()?;
    let grid = &problem.grid;
    grid.check(w0)?;
    if !(min_interior(w0) > opts.w_floor) {
        return Err(Error::InvalidParameter(
            "initial w must exceed the floor at every interior node".into(),
        ));
    }
    let w_start = ScalarField::from_parts(grid, w0.interior(), &problem.w_boundary(0.0))?;
    let u_start = solve_ma_from(
        grid,
        &w_start.map(|v| problem.gspec.theta_inv(v)),
        problem.phi.boundary(),
        &opts.ma,
        None,
    )?;
    let mut state = State {
        u: u_start,
        w: w_start,
    };
    let dt0 = 1.0 / opts.t_steps as f64;
    let mut dt = dt0;
    let mut t = 0.0f64;
    let dt_min = dt0 / 2f64.powi(opts.max_step_halvings as i32);
    let mut prefer_newton = false;
    let mut trace = Vec::new();
    while t < 1.0 {
        let t_next = if 1.0 - t <= dt * (1.0 + 1e-12) {
            1.0
        } else {
            t + dt
        };
        let attempt = if prefer_newton {
            newton_step(problem, opts, t_next, &state)
        } else {
            match picard_step(problem, opts, t_next, &state) {
                Ok(ok) => Ok(ok),
                Err(e) if opts.newton_fallback => {
                    let r = newton_step(problem, opts, t_next, &state);
                    if r.is_ok() {
                        prefer_newton = true;
                    }
                    r.map_err(|n| StepFailure {
                        hit_floor: e.hit_floor || n.hit_floor,
                        min_w: if e.min_w.is_nan() {
                            n.min_w
                        } else {
                            e.min_w.min(n.min_w)
                        },
                        reason: format!("{}; {}", e.reason, n.reason),
                    })
                }
                Err(e) => Err(e),
            }
        };
        match attempt {
            Ok((next, record)) => {
                state = next;
                trace.push(record);
                t = t_next;
                dt = (2.0 * dt).min(dt0);
            }
            Err(failure) => {
                if dt <= dt_min * (1.0 + 1e-9) {
                    return Err(if failure.hit_floor {
                        Error::WFloorBreach {
                            floor: opts.w_floor,
                            min_w: failure.min_w,
                            last_good_t: t,
                        }
                    } else {
                        Error::ContinuationFailure {
                            last_good_t: t,
                            reason: failure.reason,
                        }
                    });
                }
                dt *= 0.5;
            }
        }
    }
    finish(problem, opts, state, trace)
}

fn finish(
    problem: &Problem,
    opts: &ContinuationOptions,
    state: State,
    trace: Vec<StepRecord>,
) -> Result<Solution> {
    let grid = &problem.grid;
    let State { u, w } = state;
    let w = ScalarField::from_parts(grid, w.interior(), problem.psi.boundary())?;
    let (w_next, _) = phi_map_from(&w, 1.0, problem, opts, Some(&u))?;
    let fixed_point_change = w_next.max_abs_diff(&w)?;

    let d = hessian_determinant(&u, grid)?;
    let el_residual_norm = el_residual_field(problem, &u, &d)?.sup_norm();

    let mut diagnostics = DiagnosticsReport::new();
    let (min_w, min_d) = (w.min(), min_interior(&d));
    diagnostics.push(DiagnosticEntry {
        name: "positivity".into(),
        measured: min_w.min(min_d),
        bound: 0.0,
        pass: Some(min_w > 0.0 && min_d > 0.0),
        tolerance: 0.0,
        details: vec![("min_w".into(), min_w), ("min_d".into(), min_d)],
    });
    diagnostics.push(max_principle_check(&w, &problem.f, grid)?);
    diagnostics.push(wd_bound_check(&w, &d, &problem.gspec)?);
    diagnostics.push(gradient_lower_bound_check(&u, grid, &problem.phi)?);
    if grid.dim() == 2 && problem.phi_is_zero() {
        diagnostics.push(boundary_cofactor_check(&u, grid)?);
    }
    Ok(Solution {
        u,
        w,
        d,
        el_residual_norm,
        fixed_point_change,
        trace,
        diagnostics,
    })
}

/// `U^{ij} w_ij - f` on interior nodes, with `w = G'(d)` inside and `psi` on
/// the boundary; zero at boundary nodes.
pub fn el_residual_field(
    problem: &Problem,
    u: &ScalarField,
    d: &ScalarField,
) -> Result<ScalarField> {
    let grid = &problem.grid;
    let gs = problem.gspec;
    let interior: Vec<f64> = d.interior().iter().map(|&v| gs.w(v)).collect();
    let wg = ScalarField::from_parts(grid, &interior, problem.psi.boundary())?;
    let a = cofactor(&hessian(u, grid)?);
    let lw = crate::mesh::apply_operator(grid, &a, &wg)?;
    let r: Vec<f64> = lw
        .iter()
        .zip(problem.f.interior())
        .map(|(l, f)| l - f)
        .collect();
    ScalarField::from_parts(grid, &r, &vec![0.0; grid.num_boundary()])
}
