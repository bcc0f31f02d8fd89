//! Diagnostic checks of the identities and inequalities behind the a priori
//! estimates, evaluated on computed fields.

use crate::error::{Error, Result};
use crate::gfamily::GSpec;
use crate::mesh::{
    boundary_gradient, boundary_hessian, boundary_normal_derivative, Grid, ScalarField,
};

/// One measured quantity with its bound and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticEntry {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// `None` when the entry is informational only.
    pub pass: Option<bool>,
    pub tolerance: f64,
    /// Extra named values, in insertion order.
    pub details: Vec<(String, f64)>,
}

impl DiagnosticEntry {
    fn new(name: &str, measured: f64, bound: f64, pass: Option<bool>, tolerance: f64) -> Self {
        DiagnosticEntry {
            name: name.to_string(),
            measured,
            bound,
            pass,
            tolerance,
            details: Vec::new(),
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.push((key.to_string(), value));
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.details.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

/// Append-only collection of diagnostic entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsReport {
    entries: Vec<DiagnosticEntry>,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: DiagnosticEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[DiagnosticEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&DiagnosticEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// True when no entry carries a failing verdict.
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass != Some(false))
    }
}

/// Per-boundary-node residual `U^{nn} - K u_nu` for boundary data zero.
///
/// In two dimensions the normal-normal cofactor entry is the tangential
/// second derivative `tau^T D^2u tau`.
pub fn boundary_cofactor_residuals(u: &ScalarField, grid: &Grid) -> Result<Vec<f64>> {
    if grid.dim() != 2 {
        return Err(Error::InvalidParameter(
            "boundary cofactor identity needs a planar domain".into(),
        ));
    }
    let hess = boundary_hessian(u, grid)?;
    let un = boundary_normal_derivative(u, grid)?;
    Ok(grid
        .boundary_nodes()
        .iter()
        .zip(hess.iter().zip(&un))
        .map(|(b, (m, &un))| {
            let t = [-b.normal[1], b.normal[0]];
            let unn = m[0] * t[0] * t[0] + m[1] * t[1] * t[1] + 2.0 * m[2] * t[0] * t[1];
            unn - b.curvature * un
        })
        .collect())
}

/// Reports `sup |E| / (1 + u_nu^(n-2))` with `E = U^{nn} - K u_nu^(n-1)`.
///
/// The residual is a discretization error with no absolute bound, so the
/// entry is informational; convergence is judged across resolutions.
pub fn boundary_cofactor_check(u: &ScalarField, grid: &Grid) -> Result<DiagnosticEntry> {
    if grid.dim() == 1 {
        return Ok(
            DiagnosticEntry::new("boundary_cofactor", 0.0, 0.0, None, 0.0)
                .detail("skipped_one_dimensional", 1.0),
        );
    }
    let e = boundary_cofactor_residuals(u, grid)?;
    let sup = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(
        DiagnosticEntry::new("boundary_cofactor", 0.5 * sup, 0.0, None, 0.0)
            .detail("sup_abs_residual", sup)
            .detail("h", grid.h()),
    )
}

/// Observed convergence order of `errors` measured on grids with spacings `hs`.
pub fn observed_orders(hs: &[f64], errors: &[f64]) -> Vec<f64> {
    hs.windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// Sign-definite maximum principle: for `f >= 0` the max of `w` is attained on
/// the boundary, for `f <= 0` the min.
pub fn max_principle_check(
    w: &ScalarField,
    f: &ScalarField,
    grid: &Grid,
) -> Result<DiagnosticEntry> {
    grid.check(w)?;
    grid.check(f)?;
    let fi = f.interior();
    let nonneg = fi.iter().all(|&v| v >= 0.0);
    let nonpos = fi.iter().all(|&v| v <= 0.0);
    let fold_max = |s: &[f64]| s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fold_min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let max_gap = (fold_max(w.interior()) - fold_max(w.boundary())).max(0.0);
    let min_gap = (fold_min(w.boundary()) - fold_min(w.interior())).max(0.0);
    let tol = 1e-8 * w.sup_norm();
    let (measured, pass) = match (nonneg, nonpos) {
        (true, true) => (max_gap.max(min_gap), Some(max_gap <= tol && min_gap <= tol)),
        (true, false) => (max_gap, Some(max_gap <= tol)),
        (false, true) => (min_gap, Some(min_gap <= tol)),
        (false, false) => (max_gap.max(min_gap), None),
    };
    Ok(
        DiagnosticEntry::new("max_principle", measured, tol, pass, tol)
            .detail("max_gap", max_gap)
            .detail("min_gap", min_gap),
    )
}

/// Checks `w d^(1 - 1/n) <= max(1, w(1))` on interior nodes with `d >= 1`.
pub fn wd_bound_check(w: &ScalarField, d: &ScalarField, gspec: &GSpec) -> Result<DiagnosticEntry> {
    if w.grid_id() != d.grid_id() {
        return Err(Error::GridMismatch);
    }
    let e = 1.0 - 1.0 / gspec.dim() as f64;
    let bound = gspec.w(1.0).max(1.0);
    let measured = w
        .interior()
        .iter()
        .zip(d.interior())
        .filter(|&(_, &d)| d >= 1.0)
        .map(|(&w, &d)| w * d.powf(e))
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-8;
    let pass = measured <= bound * (1.0 + tol);
    Ok(DiagnosticEntry::new(
        "wd_bound",
        measured,
        bound,
        Some(pass),
        tol,
    ))
}

/// Checks `u_nu >= (phi - inf u) / diam - |D phi|` at every boundary node;
/// reports the minimum slack.
pub fn gradient_lower_bound_check(
    u: &ScalarField,
    grid: &Grid,
    phi: &ScalarField,
) -> Result<DiagnosticEntry> {
    grid.check(u)?;
    grid.check(phi)?;
    let un = boundary_normal_derivative(u, grid)?;
    let dphi = boundary_gradient(phi, grid)?;
    let inf_u = u.min();
    let diam = grid.domain().diameter();
    let slack = un
        .iter()
        .zip(phi.boundary())
        .zip(&dphi)
        .map(|((&un, &p), g)| un - ((p - inf_u) / diam - g[0].hypot(g[1])))
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-8 * (1.0 + un.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    Ok(DiagnosticEntry::new(
        "gradient_lower_bound",
        slack,
        0.0,
        Some(slack >= -tol),
        tol,
    ))
}
