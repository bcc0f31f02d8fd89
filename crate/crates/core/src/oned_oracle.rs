//! Quadrature solver for the one-dimensional problem, where the equation
//! reduces to `w'' = f` and `u'' = Theta(w)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gfamily::GSpec;

/// Relative level below which `min w` counts as zero.
pub const MIN_W_RELATIVE: f64 = 1e-12;

pub type SourceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct OneDProblem {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub f: SourceFn,
    pub phi: (f64, f64),
    pub psi: (f64, f64),
}

impl fmt::Debug for OneDProblem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("OneDProblem")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("theta", &self.theta)
            .field("phi", &self.phi)
            .field("psi", &self.psi)
            .finish_non_exhaustive()
    }
}

impl OneDProblem {
    pub fn new(
        (a, b): (f64, f64),
        theta: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi: (f64, f64),
        psi: (f64, f64),
    ) -> Result<Self> {
        let p = OneDProblem {
            a,
            b,
            theta,
            f: Arc::new(f),
            phi,
            psi,
        };
        p.validate()?;
        Ok(p)
    }

    /// `f = c` with zero `phi` and constant `psi`.
    pub fn constant_source((a, b): (f64, f64), theta: f64, c: f64, psi: f64) -> Result<Self> {
        Self::new((a, b), theta, move |_| c, (0.0, 0.0), (psi, psi))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::InvalidDomain(format!(
                "interval ({}, {}) must satisfy a < b",
                self.a, self.b
            )));
        }
        if !(self.psi.0 > 0.0 && self.psi.1 > 0.0) {
            return Err(Error::InvalidParameter(
                "psi must be positive at both endpoints".into(),
            ));
        }
        if !(self.phi.0.is_finite()
            && self.phi.1.is_finite()
            && self.psi.0.is_finite()
            && self.psi.1.is_finite())
        {
            return Err(Error::InvalidParameter(
                "boundary data must be finite".into(),
            ));
        }
        GSpec::new(self.theta, 1)?;
        Ok(())
    }

    /// Same problem with the source multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let f = Arc::clone(&self.f);
        OneDProblem {
            f: Arc::new(move |x| c * f(x)),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// `u'' = Theta(w)`.
    pub d: Vec<f64>,
}

impl OracleSolution {
    /// Linear interpolation of `u` at `x`.
    pub fn u_at(&self, x: f64) -> f64 {
        interpolate(&self.x, &self.u, x)
    }

    pub fn w_at(&self, x: f64) -> f64 {
        interpolate(&self.x, &self.w, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonexistenceCertificate {
    pub argmin: f64,
    pub min_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Solution(OracleSolution),
    Nonexistent(NonexistenceCertificate),
}

impl OracleOutcome {
    pub fn exists(&self) -> bool {
        matches!(self, OracleOutcome::Solution(_))
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let k = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(k) => return ys[k],
        Err(k) => k.clamp(1, n - 1),
    };
    let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + s * (ys[k] - ys[k - 1])
}

/// Solves `y'' = g` with `y(a) = ya`, `y(b) = yb` by two cumulative
/// trapezoid passes and a linear correction.
fn double_quadrature(x: &[f64], g: &[f64], ya: f64, yb: f64) -> Vec<f64> {
    let n = x.len();
    let mut slope = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 1..n {
        let dx = x[i] - x[i - 1];
        slope[i] = slope[i - 1] + 0.5 * dx * (g[i] + g[i - 1]);
        y[i] = y[i - 1] + 0.5 * dx * (slope[i] + slope[i - 1]);
    }
    let (a, len) = (x[0], x[n - 1] - x[0]);
    let c = (yb - ya - y[n - 1]) / len;
    x.iter()
        .zip(&y)
        .map(|(&xi, &yi)| ya + yi + c * (xi - a))
        .collect()
}

/// Minimum of sampled values refined by the parabola through the smallest
/// sample and its neighbours.
fn refined_min(x: &[f64], v: &[f64]) -> (f64, f64) {
    let k = v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("nonempty");
    if k == 0 || k + 1 == v.len() {
        return (x[k], v[k]);
    }
    let (x0, x1, x2) = (x[k - 1], x[k], x[k + 1]);
    let (y0, y1, y2) = (v[k - 1], v[k], v[k + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv > 0.0) {
        return (x1, y1);
    }
    // vertex of y0 + d01 (x - x0) + curv (x - x0)(x - x1)
    let xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
    if !(xv > x0 && xv < x2) {
        return (x1, y1);
    }
    let yv = y0 + d01 * (xv - x0) + curv * (xv - x0) * (xv - x1);
    (xv, yv.min(y1))
}

/// `resolution` is the number of uniformly spaced nodes, endpoints included.
pub fn solve_exact_1d(p: &OneDProblem, resolution: usize) -> Result<OracleOutcome> {
    p.validate()?;
    if resolution < 3 {
        return Err(Error::GridResolution(format!(
            "need at least 3 nodes, got {resolution}"
        )));
    }
    let h = (p.b - p.a) / (resolution - 1) as f64;
    let x: Vec<f64> = (0..resolution)
        .map(|i| {
            if i + 1 == resolution {
                p.b
            } else {
                p.a + i as f64 * h
            }
        })
        .collect();
    let f: Vec<f64> = x.iter().map(|&xi| (p.f)(xi)).collect();
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("f has non-finite values".into()));
    }
    let w = double_quadrature(&x, &f, p.psi.0, p.psi.1);
    let (argmin, min_w) = refined_min(&x, &w);
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if min_w <= MIN_W_RELATIVE * scale {
        return Ok(OracleOutcome::Nonexistent(NonexistenceCertificate {
            argmin,
            min_w,
        }));
    }
    let gs = GSpec::new(p.theta, 1)?;
    let d: Vec<f64> = w.iter().map(|&v| gs.theta_inv(v)).collect();
    let u = double_quadrature(&x, &d, p.phi.0, p.phi.1);
    Ok(OracleOutcome::Solution(OracleSolution { x, u, w, d }))
}

/// Bisects on `c` for the source `c f` until the bracket is narrower than
/// `tol`; returns the midpoint.
pub fn existence_threshold_1d(
    template: &OneDProblem,
    (lo, hi): (f64, f64),
    resolution: usize,
    tol: f64,
) -> Result<f64> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter("need lo < hi and tol > 0".into()));
    }
    let exists = |c: f64| solve_exact_1d(&template.scaled(c), resolution).map(|o| o.exists());
    let (e_lo, e_hi) = (exists(lo)?, exists(hi)?);
    if e_lo == e_hi {
        return Err(Error::NoBracket { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if exists(m)? == e_lo {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
