//! The energy `F`, its linear part `L`, the Euler-Lagrange residual, and
//! sampling probes for concavity and properness.
//!
//! With boundary data `u = 0`,
//!
//! ```text
//! F(u) = int G(det D^2 u) - int u f - (1/n) int_bdy K psi u_nu^n
//! L(u) = int u f + (1/n) int_bdy K psi u_nu^n
//! ```

use crate::continuation::Problem;
use crate::error::{Error, Result};
use crate::gfamily::GSpec;
use crate::ma_dirichlet::min_convexity;
use crate::mesh::{
    apply_operator, boundary_normal_derivative, cofactor, hessian, hessian_determinant,
    integrate_boundary, integrate_interior, DomainSpec, Grid, ScalarField,
};
use crate::par;

fn require_zero_boundary(problem: &Problem) -> Result<()> {
    if problem.phi_is_zero() {
        Ok(())
    } else {
        Err(Error::NonzeroBoundaryData)
    }
}

fn require_convex(grid: &Grid, u: &ScalarField) -> Result<()> {
    grid.check(u)?;
    let m = min_convexity(grid, u.values());
    if m > 0.0 {
        Ok(())
    } else {
        Err(Error::NotConvex { min_eigenvalue: m })
    }
}

/// `int G(det D^2 u)` with the grid quadrature.
pub fn integral_g(u: &ScalarField, grid: &Grid, gspec: &GSpec) -> Result<f64> {
    let d = hessian_determinant(u, grid)?;
    let weights = grid.weights();
    let mut total = 0.0;
    for (&dv, &wt) in d.values().iter().zip(weights) {
        if wt == 0.0 {
            continue;
        }
        if !(dv > 0.0) {
            return Err(Error::NotConvex {
                min_eigenvalue: dv.min(0.0),
            });
        }
        total += wt * gspec.g(dv);
    }
    Ok(total)
}

/// Boundary term `(1/n) int K psi u_nu^n`.
fn boundary_term(u: &ScalarField, problem: &Problem) -> Result<f64> {
    let grid = problem.grid();
    let n = grid.dim() as i32;
    let un = boundary_normal_derivative(u, grid)?;
    let integrand: Vec<f64> = un
        .iter()
        .zip(problem.psi().boundary())
        .zip(grid.boundary_nodes())
        .map(|((&v, &psi), b)| b.curvature * psi * v.powi(n))
        .collect();
    Ok(integrate_boundary(&integrand, grid)? / n as f64)
}

pub fn eval_l(u: &ScalarField, problem: &Problem) -> Result<f64> {
    require_zero_boundary(problem)?;
    let grid = problem.grid();
    grid.check(u)?;
    let uf: Vec<f64> = u
        .values()
        .iter()
        .zip(problem.f().values())
        .map(|(a, b)| a * b)
        .collect();
    let uf = ScalarField::from_values(grid, uf)?;
    Ok(integrate_interior(&uf, grid)? + boundary_term(u, problem)?)
}

pub fn eval_f(u: &ScalarField, problem: &Problem) -> Result<f64> {
    require_zero_boundary(problem)?;
    require_convex(problem.grid(), u)?;
    Ok(integral_g(u, problem.grid(), problem.gspec())? - eval_l(u, problem)?)
}

/// Pointwise `U^{ij} (w(d))_ij - f` on interior nodes (zero on the boundary),
/// with `d` extrapolated to boundary nodes.
pub fn el_residual(u: &ScalarField, problem: &Problem) -> Result<ScalarField> {
    let grid = problem.grid();
    require_convex(grid, u)?;
    let gs = problem.gspec();
    let d = hessian_determinant(u, grid)?;
    let w = d.map(|v| if v > 0.0 { gs.w(v) } else { f64::NAN });
    if w.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NotConvex {
            min_eigenvalue: d.min(),
        });
    }
    let a = cofactor(&hessian(u, grid)?);
    let lw = apply_operator(grid, &a, &w)?;
    let r: Vec<f64> = lw
        .iter()
        .zip(problem.f().interior())
        .map(|(l, f)| l - f)
        .collect();
    ScalarField::from_parts(grid, &r, &vec![0.0; grid.num_boundary()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Central difference `(F(u + s eta) - F(u - s eta)) / 2s`.
    pub fd_derivative: f64,
    /// `int residual * eta`.
    pub pairing: f64,
    /// `|fd - pairing| / max(|fd|, |pairing|, int |w U^{ij} eta_ij| + int |f eta|)`,
    /// zero when all vanish.
    pub relative_gap: f64,
}

/// Size of the first-variation integrand before cancellation.
fn variation_scale(u: &ScalarField, eta: &ScalarField, problem: &Problem) -> Result<f64> {
    let grid = problem.grid();
    let gs = problem.gspec();
    let d = hessian_determinant(u, grid)?;
    let a = cofactor(&hessian(u, grid)?);
    let l_eta = apply_operator(grid, &a, eta)?;
    let interior: Vec<f64> = (0..grid.num_interior())
        .map(|i| {
            (gs.w(d.values()[i]) * l_eta[i]).abs()
                + (problem.f().values()[i] * eta.values()[i]).abs()
        })
        .collect();
    let field = ScalarField::from_parts(grid, &interior, &vec![0.0; grid.num_boundary()])?;
    integrate_interior(&field, grid)
}

/// Compares the derivative of `F` along `eta` with the residual pairing.
pub fn gradient_check(
    u: &ScalarField,
    eta: &ScalarField,
    problem: &Problem,
    step: f64,
) -> Result<GradientCheck> {
    require_zero_boundary(problem)?;
    let grid = problem.grid();
    grid.check(eta)?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let plus = u.axpy(step, eta)?;
    let minus = u.axpy(-step, eta)?;
    require_convex(grid, &plus)?;
    require_convex(grid, &minus)?;
    let fd = (eval_f(&plus, problem)? - eval_f(&minus, problem)?) / (2.0 * step);
    let r = el_residual(u, problem)?;
    let prod = ScalarField::from_values(
        grid,
        r.values()
            .iter()
            .zip(eta.values())
            .map(|(a, b)| a * b)
            .collect(),
    )?;
    let pairing = integrate_interior(&prod, grid)?;
    let scale = fd
        .abs()
        .max(pairing.abs())
        .max(variation_scale(u, eta, problem)?);
    let relative_gap = if scale == 0.0 {
        0.0
    } else {
        (fd - pairing).abs() / scale
    };
    Ok(GradientCheck {
        fd_derivative: fd,
        pairing,
        relative_gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityProbe {
    pub ts: Vec<f64>,
    /// `A(t) = int G(det D^2 ((1 - t) u0 + t u1))`.
    pub values: Vec<f64>,
    /// Largest centred second difference of the samples.
    pub max_second_difference: f64,
}

pub fn concavity_probe(
    u0: &ScalarField,
    u1: &ScalarField,
    grid: &Grid,
    gspec: &GSpec,
    samples: usize,
) -> Result<ConcavityProbe> {
    if samples < 3 {
        return Err(Error::InvalidParameter("need at least 3 samples".into()));
    }
    require_convex(grid, u0)?;
    require_convex(grid, u1)?;
    let gap = u0
        .boundary()
        .iter()
        .zip(u1.boundary())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > 1e-12 * (1.0 + u0.sup_norm()) {
        return Err(Error::InvalidParameter(
            "endpoints must have equal boundary values".into(),
        ));
    }
    let ts: Vec<f64> = (0..samples)
        .map(|k| k as f64 / (samples - 1) as f64)
        .collect();
    let values = ts
        .iter()
        .map(|&t| {
            let ut = ScalarField::from_values(
                grid,
                u0.values()
                    .iter()
                    .zip(u1.values())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect(),
            )?;
            integral_g(&ut, grid, gspec)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_second_difference = values
        .windows(3)
        .map(|v| v[0] - 2.0 * v[1] + v[2])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConcavityProbe {
        ts,
        values,
        max_second_difference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// `s l`, with `l` the domain paraboloid normalized to unit Hessian.
    ScaledParabola,
    /// `s l (1 + 0.2 xi)` with `xi` the normalized first coordinate.
    SkewedParabola,
    /// `s ((rho^8 - 1)/8 + l / 10)` with `rho^2 = level + 1`.
    BoundaryLayer,
}

impl FamilyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyKind::ScaledParabola => "scaled_parabola",
            FamilyKind::SkewedParabola => "skewed_parabola",
            FamilyKind::BoundaryLayer => "boundary_layer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scaled_parabola" => Some(FamilyKind::ScaledParabola),
            "skewed_parabola" => Some(FamilyKind::SkewedParabola),
            "boundary_layer" => Some(FamilyKind::BoundaryLayer),
            _ => None,
        }
    }

    /// Unscaled shape at `p`; vanishes on the boundary.
    fn shape(&self, domain: &DomainSpec, p: [f64; 2]) -> f64 {
        let (a, b) = domain.semi_axes();
        let rho = if domain.dim() == 1 { a } else { a.min(b) };
        let level = domain.level(p);
        let para = 0.5 * rho * rho * level;
        match self {
            FamilyKind::ScaledParabola => para,
            FamilyKind::SkewedParabola => {
                let xi = match *domain {
                    DomainSpec::Interval { a: lo, b: hi } => (2.0 * p[0] - lo - hi) / (hi - lo),
                    _ => p[0] / a,
                };
                para * (1.0 + 0.2 * xi)
            }
            FamilyKind::BoundaryLayer => {
                let r2 = (level + 1.0).max(0.0);
                0.5 * rho * rho * (r2.powi(4) - 1.0) / 4.0 + 0.1 * para
            }
        }
    }
}

/// Convex test functions vanishing on the boundary, `v_s = s * shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionFamily {
    pub kind: FamilyKind,
    pub scales: Vec<f64>,
}

impl TestFunctionFamily {
    /// `count` scales spread log-uniformly over `[0.1, 1000]`.
    pub fn new(kind: FamilyKind, count: usize) -> Self {
        Self::with_range(kind, 0.1, 1e3, count)
    }

    pub fn with_range(kind: FamilyKind, lo: f64, hi: f64, count: usize) -> Self {
        let scales = match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (count - 1) as f64).exp())
                .collect(),
        };
        TestFunctionFamily { kind, scales }
    }

    pub fn member(&self, grid: &Grid, scale: f64) -> ScalarField {
        let domain = *grid.domain();
        let kind = self.kind;
        let mut v = ScalarField::from_fn(grid, |p| scale * kind.shape(&domain, p));
        let boundary = vec![0.0; grid.num_boundary()];
        v = ScalarField::from_parts(grid, v.interior(), &boundary).expect("sizes match");
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProperVerdict {
    NoViolationFound,
    NotProper,
}

impl ProperVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProperVerdict::NoViolationFound => "no violation found",
            ProperVerdict::NotProper => "not proper (witness found)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropernessProbe {
    /// Largest tried `lambda` without a witness.
    pub margin_estimate: Option<f64>,
    /// `max(0, -min_v (L(v) - lambda int v_nu))` at the margin estimate.
    pub offset: Option<f64>,
    pub verdict: ProperVerdict,
    /// `(scale, L(v), int v_nu)` per member.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Multiplicative grid `2^-10, ..., 2^10`.
pub fn lambda_grid() -> Vec<f64> {
    (-10..=10).map(|k| 2f64.powi(k)).collect()
}

/// True when `m` decreases strictly over the last third of the scaling
/// sequence and `m / s` ends below `-noise`.
fn unbounded_below(scales: &[f64], m: &[f64], noise: f64) -> bool {
    let n = m.len();
    if n < 2 {
        return false;
    }
    let start = (2 * n / 3).min(n - 2);
    let decreasing = m[start..].windows(2).all(|p| p[1] < p[0]);
    decreasing && m[n - 1] / scales[n - 1] < -noise
}

pub fn properness_probe(problem: &Problem, family: &TestFunctionFamily) -> Result<PropernessProbe> {
    require_zero_boundary(problem)?;
    if family.scales.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let grid = problem.grid();
    let evaluated = par::map_slice(&family.scales, |&s| -> Result<(f64, f64, f64)> {
        let v = family.member(grid, s);
        require_convex(grid, &v)?;
        let l = eval_l(&v, problem)?;
        let b = integrate_boundary(&boundary_normal_derivative(&v, grid)?, grid)?;
        Ok((s, l, b))
    });
    let mut samples = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scales: Vec<f64> = samples.iter().map(|s| s.0).collect();

    let mut margin = None;
    for lambda in lambda_grid() {
        let m: Vec<f64> = samples.iter().map(|&(_, l, b)| l - lambda * b).collect();
        let (_, l, b) = samples[samples.len() - 1];
        let noise = 1e-9 * (l.abs() + lambda * b.abs()) / scales[scales.len() - 1];
        if !unbounded_below(&scales, &m, noise) {
            margin = Some(lambda);
        }
    }
    let offset = margin.map(|lambda| {
        let min = samples
            .iter()
            .map(|&(_, l, b)| l - lambda * b)
            .fold(f64::INFINITY, f64::min);
        (-min).max(0.0)
    });
    let verdict = if margin.is_some() {
        ProperVerdict::NoViolationFound
    } else {
        ProperVerdict::NotProper
    };
    Ok(PropernessProbe {
        margin_estimate: margin,
        offset,
        verdict,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disk(res: usize, theta: f64, f: f64) -> Problem {
        Problem::from_functions(
            DomainSpec::disk(1.0).unwrap(),
            res,
            theta,
            move |_| f,
            |_| 0.0,
            |_| 1.0,
        )
        .unwrap()
    }

    fn interval(res: usize, f: f64) -> Problem {
        Problem::from_functions(
            DomainSpec::interval(0.0, 1.0).unwrap(),
            res,
            0.0,
            move |_| f,
            |_| 0.0,
            |_| 1.0,
        )
        .unwrap()
    }

    fn paraboloid(grid: &Grid, scale: f64) -> ScalarField {
        ScalarField::from_fn(grid, |p| scale * 0.5 * (p[0] * p[0] + p[1] * p[1] - 1.0))
    }

    fn bump(grid: &Grid, amp: f64) -> ScalarField {
        ScalarField::from_fn(grid, |p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            let b = (1.0 - 4.0 * r2).max(0.0);
            amp * b * b
        })
    }

    #[test]
    fn disk_paraboloid_closed_forms() {
        let p = disk(64, 0.0, 0.0);
        let u = paraboloid(p.grid(), 1.0);
        assert!((eval_f(&u, &p).unwrap() + PI).abs() < 1e-2);
        assert!((eval_l(&u, &p).unwrap() - PI).abs() < 1e-2);
        let u2 = paraboloid(p.grid(), 2.0);
        let expected = PI * 4f64.ln() - 4.0 * PI;
        assert!((eval_f(&u2, &p).unwrap() - expected).abs() < 2e-2);
        let p1 = disk(64, 0.0, 1.0);
        let u1 = paraboloid(p1.grid(), 1.0);
        assert!((eval_l(&u1, &p1).unwrap() - (PI - PI / 4.0)).abs() < 1e-2);
    }

    #[test]
    fn interval_closed_forms() {
        let p = interval(65, 0.0);
        let u = ScalarField::from_fn(p.grid(), |q| 0.5 * (q[0] * q[0] - q[0]));
        assert!((eval_f(&u, &p).unwrap() + 1.0).abs() < 1e-10);
        for c in [0.0, 3.0, 20.0] {
            let p = interval(65, c);
            let s = 2.5;
            let v = ScalarField::from_fn(p.grid(), |q| s * 0.5 * (q[0] * q[0] - q[0]));
            let expected = -c * s / 12.0 + s;
            let h = p.grid().h();
            assert!((eval_l(&v, &p).unwrap() - expected).abs() < 1e-10 + c * s * h * h);
        }
    }

    #[test]
    fn nonzero_boundary_data_is_rejected() {
        let p = Problem::from_functions(
            DomainSpec::disk(1.0).unwrap(),
            16,
            0.0,
            |_| 0.0,
            |_| 1.0,
            |_| 1.0,
        )
        .unwrap();
        let u = paraboloid(p.grid(), 1.0);
        assert_eq!(eval_f(&u, &p), Err(Error::NonzeroBoundaryData));
        assert_eq!(eval_l(&u, &p), Err(Error::NonzeroBoundaryData));
    }

    #[test]
    fn functional_identity_uses_shared_quadratures() {
        let p = disk(32, 0.125, 1.5);
        let u = ScalarField::from_fn(p.grid(), |q| {
            let l = q[0] * q[0] + q[1] * q[1] - 1.0;
            0.5 * l * (1.0 + 0.1 * q[0])
        });
        let lhs = eval_f(&u, &p).unwrap();
        let rhs = integral_g(&u, p.grid(), p.gspec()).unwrap() - eval_l(&u, &p).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn el_residual_examples() {
        let p = disk(48, 0.0, 0.0);
        let u = paraboloid(p.grid(), 1.0);
        assert!(el_residual(&u, &p).unwrap().sup_norm() < 1e-6);
        let p1 = disk(48, 0.0, 1.0);
        let r = el_residual(&paraboloid(p1.grid(), 1.0), &p1).unwrap();
        assert!(r.interior().iter().all(|v| (v + 1.0).abs() < 1e-6));
    }

    #[test]
    fn el_residual_converges_in_one_dimension() {
        // u'' = 1 / (1 + 2x(x - 1)) with zero boundary values, f = 4
        let u_exact = |x: f64| {
            let z = 2.0 * x - 1.0;
            let big_f = |z: f64| z * z.atan() - 0.5 * (1.0 + z * z).ln();
            (big_f(z) - big_f(1.0)) / 2.0
        };
        let errs: Vec<f64> = [33, 65, 129]
            .iter()
            .map(|&res| {
                let p = interval(res, 4.0);
                let u = ScalarField::from_fn(p.grid(), |q| u_exact(q[0]));
                el_residual(&u, &p).unwrap().sup_norm()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn gradient_check_examples() {
        let p = disk(64, 0.0, 0.0);
        let u = paraboloid(p.grid(), 1.0);
        let eta = bump(p.grid(), 0.1);
        let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&s| gradient_check(&u, &eta, &p, s).unwrap().relative_gap)
            .collect();
        assert!(gaps[1] <= 1e-6, "{gaps:?}");
        assert!(gaps[0] / gaps[1] > 80.0, "{gaps:?}");
        assert!(gaps[1] / gaps[2] > 80.0 || gaps[2] < 1e-10, "{gaps:?}");

        let zero = ScalarField::constant(p.grid(), 0.0);
        let g = gradient_check(&u, &zero, &p, 1e-3).unwrap();
        assert_eq!(
            (g.fd_derivative.abs() < 1e-12, g.pairing, g.relative_gap),
            (true, 0.0, 0.0)
        );

        let p1 = disk(64, 0.0, 1.0);
        let eta = bump(p1.grid(), 0.1);
        let g = gradient_check(&paraboloid(p1.grid(), 1.0), &eta, &p1, 1e-3).unwrap();
        let mass = integrate_interior(&eta, p1.grid()).unwrap();
        assert!((g.pairing + mass).abs() < 1e-6 * mass);
        assert!(g.relative_gap < 1e-6);
    }

    #[test]
    fn concavity_probe_examples() {
        let grid = crate::mesh::build_grid(DomainSpec::disk(1.0).unwrap(), 64).unwrap();
        let u0 = paraboloid(&grid, 1.0);
        let u1 = paraboloid(&grid, 2.0);
        let g0 = GSpec::new(0.0, 2).unwrap();
        let probe = concavity_probe(&u0, &u1, &grid, &g0, 11).unwrap();
        for (&t, &a) in probe.ts.iter().zip(&probe.values) {
            assert!((a - 2.0 * PI * (1.0 + t).ln()).abs() < 1e-2);
        }
        assert!(probe.max_second_difference < 0.0);
        let same = concavity_probe(&u0, &u0, &grid, &g0, 5).unwrap();
        assert!(same.max_second_difference.abs() < 1e-12);
        for theta in [0.125, 0.25 - 1e-9] {
            let gs = GSpec::new(theta, 2).unwrap();
            let probe = concavity_probe(&u0, &u1, &grid, &gs, 11).unwrap();
            assert!(probe.max_second_difference <= 1e-8 * probe.values[0].abs());
        }
    }

    #[test]
    fn properness_in_one_dimension() {
        let fam = TestFunctionFamily::new(FamilyKind::ScaledParabola, 25);
        let r = properness_probe(&interval(65, 0.0), &fam).unwrap();
        assert_eq!(r.verdict, ProperVerdict::NoViolationFound);
        assert_eq!(r.margin_estimate, Some(1.0));
        for &(s, l, b) in &r.samples {
            assert!((l - s).abs() < 1e-9 * s && (b - s).abs() < 1e-9 * s);
        }
        let r = properness_probe(&interval(65, 20.0), &fam).unwrap();
        assert_eq!(r.verdict, ProperVerdict::NotProper);
        let h = 1.0 / 64.0;
        for &(s, l, _) in &r.samples {
            assert!((l - s * (1.0 - 20.0 / 12.0)).abs() < 20.0 * s * h * h);
        }
    }

    #[test]
    fn properness_on_disk_with_large_source() {
        let p = disk(32, 0.0, 50.0);
        for kind in [
            FamilyKind::ScaledParabola,
            FamilyKind::SkewedParabola,
            FamilyKind::BoundaryLayer,
        ] {
            let r = properness_probe(&p, &TestFunctionFamily::new(kind, 25)).unwrap();
            assert_eq!(r.verdict, ProperVerdict::NoViolationFound, "{kind:?}");
        }
    }

    #[test]
    fn family_members_are_convex_and_vanish_on_boundary() {
        for domain in [
            DomainSpec::disk(1.0).unwrap(),
            DomainSpec::interval(0.0, 1.0).unwrap(),
        ] {
            let grid = crate::mesh::build_grid(domain, 33).unwrap();
            for kind in [
                FamilyKind::ScaledParabola,
                FamilyKind::SkewedParabola,
                FamilyKind::BoundaryLayer,
            ] {
                let v = TestFunctionFamily::new(kind, 3).member(&grid, 2.0);
                assert!(v.boundary().iter().all(|&x| x == 0.0));
                assert!(min_convexity(&grid, v.values()) > 0.0, "{kind:?}");
            }
        }
        let p = interval(17, 0.0);
        assert_eq!(
            properness_probe(&p, &TestFunctionFamily::new(FamilyKind::ScaledParabola, 0)),
            Err(Error::EmptyFamily)
        );
    }
}
