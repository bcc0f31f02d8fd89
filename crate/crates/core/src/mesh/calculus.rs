//! Discrete calculus on a [`Grid`]: Hessians, cofactors, the nondivergence
//! operator `A^{ij} D_ij`, boundary derivatives and quadrature.
//!
//! All second derivatives are built from three-point differences along the
//! four stencil directions, with a fourth point wherever exactly one arm is
//! cut short by the boundary. The mixed derivative comes from the two diagonal
//! directions, `u_xy = (D_diag u - D_anti u) / 2`, which reduces to the usual
//! four-point formula at regular nodes. Every formula is exact for quadratics,
//! and for cubics away from doubly cut directions.

use crate::error::{Error, Result};
use crate::par;

use super::field::{MatrixField, ScalarField};
use super::grid::Grid;

#[inline]
fn directional(grid: &Grid, values: &[f64], node: usize, k: usize) -> f64 {
    grid.stencils()[node].taps[k]
        .iter()
        .map(|&(m, c)| c * values[m])
        .sum()
}

/// Discrete Hessian `[u_xx, u_yy, u_xy]` at one interior node.
#[inline]
pub fn hessian_at(grid: &Grid, values: &[f64], node: usize) -> [f64; 3] {
    let dxx = directional(grid, values, node, 0);
    if grid.dim() == 1 {
        return [dxx, 0.0, 0.0];
    }
    let dyy = directional(grid, values, node, 1);
    let dxy = 0.5 * (directional(grid, values, node, 2) - directional(grid, values, node, 3));
    [dxx, dyy, dxy]
}

pub fn hessian(u: &ScalarField, grid: &Grid) -> Result<MatrixField> {
    grid.check(u)?;
    let v = u.values();
    let entries = par::map_indices(grid.num_interior(), |i| hessian_at(grid, v, i));
    MatrixField::new(grid, entries)
}

#[inline]
pub fn cofactor_entry(m: [f64; 3], dim: usize) -> [f64; 3] {
    if dim == 1 {
        [1.0, 0.0, 0.0]
    } else {
        [m[1], m[0], -m[2]]
    }
}

#[inline]
pub fn det_entry(m: [f64; 3], dim: usize) -> f64 {
    if dim == 1 {
        m[0]
    } else {
        m[0] * m[1] - m[2] * m[2]
    }
}

pub fn cofactor(h: &MatrixField) -> MatrixField {
    let dim = h.dim();
    h.with_entries(
        h.entries()
            .iter()
            .map(|&m| cofactor_entry(m, dim))
            .collect(),
    )
}

/// Determinant per interior node.
pub fn det(h: &MatrixField) -> Vec<f64> {
    let dim = h.dim();
    h.entries().iter().map(|&m| det_entry(m, dim)).collect()
}

/// `d = det D^2 u` on every node; boundary values by one-sided extrapolation.
pub fn hessian_determinant(u: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    let h = hessian(u, grid)?;
    grid.extend_interior(&det(&h))
}

/// Stencil coefficients of `A^{ij} D_ij` at `node` as `(neighbour, weight)`
/// pairs; the centre node comes first.
pub fn operator_row(grid: &Grid, node: usize, a: [f64; 3]) -> Vec<(usize, f64)> {
    let s = &grid.stencils()[node];
    let factors: [f64; 4] = if grid.dim() == 1 {
        [a[0], 0.0, 0.0, 0.0]
    } else {
        [a[0], a[1], a[2], -a[2]]
    };
    let mut row = Vec::with_capacity(9);
    let mut center = 0.0;
    row.push((node, 0.0));
    for (k, &f) in factors.iter().enumerate().take(grid.num_directions()) {
        if f == 0.0 {
            continue;
        }
        let taps = &s.taps[k];
        center += f * taps[0].1;
        for &(m, c) in &taps[1..] {
            if c != 0.0 {
                row.push((m, f * c));
            }
        }
    }
    row[0].1 = center;
    row
}

/// `A^{ij} D_ij w` at one interior node.
#[inline]
pub fn apply_operator_at(grid: &Grid, a: [f64; 3], values: &[f64], node: usize) -> f64 {
    let h = hessian_at(grid, values, node);
    if grid.dim() == 1 {
        a[0] * h[0]
    } else {
        a[0] * h[0] + a[1] * h[1] + 2.0 * a[2] * h[2]
    }
}

/// `A^{ij} D_ij w` on interior nodes.
pub fn apply_operator(grid: &Grid, a: &MatrixField, w: &ScalarField) -> Result<Vec<f64>> {
    grid.check(w)?;
    if a.grid_id() != grid.id() {
        return Err(Error::GridMismatch);
    }
    let v = w.values();
    let coeffs = a.entries();
    Ok(par::map_indices(grid.num_interior(), |i| {
        apply_operator_at(grid, coeffs[i], v, i)
    }))
}

/// One-sided gradient at each boundary node.
pub fn boundary_gradient(u: &ScalarField, grid: &Grid) -> Result<Vec<[f64; 2]>> {
    grid.check(u)?;
    let v = u.values();
    Ok(grid
        .boundary_nodes()
        .iter()
        .map(|b| {
            b.gradient.iter().fold([0.0, 0.0], |acc, &(m, c)| {
                [acc[0] + c[0] * v[m], acc[1] + c[1] * v[m]]
            })
        })
        .collect())
}

/// One-sided Hessian `[xx, yy, xy]` at each boundary node.
pub fn boundary_hessian(u: &ScalarField, grid: &Grid) -> Result<Vec<[f64; 3]>> {
    grid.check(u)?;
    let v = u.values();
    Ok(grid
        .boundary_nodes()
        .iter()
        .map(|b| {
            b.hessian.iter().fold([0.0; 3], |acc, &(m, c)| {
                [
                    acc[0] + c[0] * v[m],
                    acc[1] + c[1] * v[m],
                    acc[2] + c[2] * v[m],
                ]
            })
        })
        .collect())
}

/// Outward normal derivative `u_nu` at each boundary node.
pub fn boundary_normal_derivative(u: &ScalarField, grid: &Grid) -> Result<Vec<f64>> {
    let g = boundary_gradient(u, grid)?;
    let out: Vec<f64> = g
        .iter()
        .zip(grid.boundary_nodes())
        .map(|(g, b)| g[0] * b.normal[0] + g[1] * b.normal[1])
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::GridResolution(
            "non-finite one-sided normal derivative".into(),
        ));
    }
    Ok(out)
}

pub fn integrate_interior(g: &ScalarField, grid: &Grid) -> Result<f64> {
    grid.check(g)?;
    Ok(g.values()
        .iter()
        .zip(grid.weights())
        .map(|(v, w)| v * w)
        .sum())
}

pub fn integrate_boundary(g: &[f64], grid: &Grid) -> Result<f64> {
    if g.len() != grid.num_boundary() {
        return Err(Error::GridMismatch);
    }
    Ok(g.iter()
        .zip(grid.boundary_nodes())
        .map(|(v, b)| v * b.arc_weight)
        .sum())
}

/// Sup-norm of the discrete row divergence `sum_j D_j U^{ij}` of the cofactor
/// matrix of `D^2 u`.
///
/// Evaluated with central first differences at interior nodes whose four axis
/// neighbours are regular interior nodes, so that only second-order Hessians
/// enter.
pub fn cofactor_divergence_sup(u: &ScalarField, grid: &Grid) -> Result<f64> {
    divergence_sup(u, grid, 1.0)
}

/// As [`cofactor_divergence_sup`], restricted to nodes inside the copy of the
/// domain scaled by `scale` about its centre.
pub fn cofactor_divergence_sup_inside(u: &ScalarField, grid: &Grid, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidParameter("scale must lie in (0, 1]".into()));
    }
    divergence_sup(u, grid, scale)
}

fn divergence_sup(u: &ScalarField, grid: &Grid, scale: f64) -> Result<f64> {
    if grid.dim() == 1 {
        return Ok(0.0);
    }
    let h = hessian(u, grid)?;
    let cof = cofactor(&h);
    let c = cof.entries();
    let st = grid.stencils();
    let n_int = grid.num_interior();
    let dx = grid.h();
    let domain = grid.domain();
    let coords = grid.coords();
    let vals = par::map_indices(n_int, |i| {
        let s = &st[i];
        let nb = [s.arms[0][0], s.arms[0][1], s.arms[1][0], s.arms[1][1]];
        if !s.regular || nb.iter().any(|a| a.node >= n_int || !st[a.node].regular) {
            return None;
        }
        if scale < 1.0 && domain.level(coords[i]) + 1.0 > scale * scale {
            return None;
        }
        let (xp, xm, yp, ym) = (nb[0].node, nb[1].node, nb[2].node, nb[3].node);
        // row 1: d_x U^{11} + d_y U^{12}; row 2: d_x U^{21} + d_y U^{22}
        let r1 = (c[xp][0] - c[xm][0]) / (2.0 * dx) + (c[yp][2] - c[ym][2]) / (2.0 * dx);
        let r2 = (c[xp][2] - c[xm][2]) / (2.0 * dx) + (c[yp][1] - c[ym][1]) / (2.0 * dx);
        Some(r1.abs().max(r2.abs()))
    });
    Ok(vals.into_iter().flatten().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, DomainSpec};
    use std::f64::consts::PI;

    fn disk(res: usize) -> Grid {
        build_grid(DomainSpec::disk(1.0).unwrap(), res).unwrap()
    }

    #[test]
    fn hessian_of_quadratics_is_exact_everywhere() {
        let g = disk(33);
        let u = ScalarField::from_fn(&g, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        for m in hessian(&u, &g).unwrap().entries() {
            assert!((m[0] - 1.0).abs() < 1e-10 && (m[1] - 1.0).abs() < 1e-10 && m[2].abs() < 1e-10);
        }
        let u = ScalarField::from_fn(&g, |p| p[0] * p[0] + p[0] * p[1] + p[1] * p[1]);
        for m in hessian(&u, &g).unwrap().entries() {
            assert!(
                (m[0] - 2.0).abs() < 1e-9 && (m[1] - 2.0).abs() < 1e-9 && (m[2] - 1.0).abs() < 1e-9
            );
        }
        let i = build_grid(DomainSpec::interval(0.0, 1.0).unwrap(), 11).unwrap();
        let u = ScalarField::from_fn(&i, |p| p[0] * p[0]);
        for m in hessian(&u, &i).unwrap().entries() {
            assert!((m[0] - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cofactor_and_determinant_examples() {
        assert_eq!(cofactor_entry([1.0, 1.0, 0.0], 2), [1.0, 1.0, 0.0]);
        assert_eq!(det_entry([1.0, 1.0, 0.0], 2), 1.0);
        assert_eq!(cofactor_entry([2.0, 4.0, 0.0], 2), [4.0, 2.0, 0.0]);
        assert_eq!(det_entry([2.0, 4.0, 0.0], 2), 8.0);
        assert_eq!(cofactor_entry([2.0, 2.0, 1.0], 2), [2.0, 2.0, -1.0]);
        assert_eq!(det_entry([2.0, 2.0, 1.0], 2), 3.0);
        assert_eq!(cofactor_entry([5.0, 0.0, 0.0], 1), [1.0, 0.0, 0.0]);
        assert_eq!(det_entry([5.0, 0.0, 0.0], 1), 5.0);
    }

    #[test]
    fn operator_row_matches_apply() {
        let g = build_grid(DomainSpec::ellipse(1.3, 0.8).unwrap(), 21).unwrap();
        let w = ScalarField::from_fn(&g, |p| (p[0] + 0.3 * p[1]).sin() + p[1] * p[1] * p[0]);
        let a = [1.3, 0.7, 0.2];
        for i in 0..g.num_interior() {
            let row: f64 = operator_row(&g, i, a)
                .iter()
                .map(|&(m, c)| c * w.values()[m])
                .sum();
            let direct = apply_operator_at(&g, a, w.values(), i);
            assert!((row - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn normal_derivative_examples() {
        let g = disk(40);
        let u = ScalarField::from_fn(&g, |p| 0.5 * (p[0] * p[0] + p[1] * p[1] - 1.0));
        for v in boundary_normal_derivative(&u, &g).unwrap() {
            assert!((v - 1.0).abs() < 1e-9);
        }
        let i = build_grid(DomainSpec::interval(0.0, 1.0).unwrap(), 9).unwrap();
        let lin = ScalarField::from_fn(&i, |p| p[0]);
        let un = boundary_normal_derivative(&lin, &i).unwrap();
        assert!((un[0] + 1.0).abs() < 1e-12 && (un[1] - 1.0).abs() < 1e-12);
        let sq = ScalarField::from_fn(&i, |p| p[0] * p[0]);
        let un = boundary_normal_derivative(&sq, &i).unwrap();
        assert!((un[1] - 2.0).abs() < 1e-12 && un[0].abs() < 1e-12);
    }

    #[test]
    fn quadrature_examples() {
        let g = disk(128);
        let ones = vec![1.0; g.num_boundary()];
        assert!((integrate_boundary(&ones, &g).unwrap() - 2.0 * PI).abs() < 1e-3);
        let r2 = ScalarField::from_fn(&g, |p| p[0] * p[0] + p[1] * p[1]);
        assert!((integrate_interior(&r2, &g).unwrap() - PI / 2.0).abs() < 2e-3);
        let i = build_grid(DomainSpec::interval(0.0, 1.0).unwrap(), 7).unwrap();
        let x = ScalarField::from_fn(&i, |p| p[0]);
        assert!((integrate_interior(&x, &i).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interior_quadrature_converges_to_area() {
        // weights reproduce linear moments too
        for res in [17, 33, 65] {
            let g = disk(res);
            let x = ScalarField::from_fn(&g, |p| 1.0 + p[0] - 2.0 * p[1]);
            let v = integrate_interior(&x, &g).unwrap();
            assert!((v - PI).abs() < 1e-6, "res {res}: {v}");
        }
    }

    #[test]
    fn cofactor_rows_are_divergence_free_in_the_limit() {
        let u = |g: &Grid| ScalarField::from_fn(g, |p| (0.5 * (p[0] * p[0] + p[1] * p[1])).exp());
        let e: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&r| {
                let g = disk(r);
                cofactor_divergence_sup(&u(&g), &g).unwrap()
            })
            .collect();
        assert!(e[0] / e[1] > 3.0 && e[1] / e[2] > 3.0, "{e:?}");
    }
}
