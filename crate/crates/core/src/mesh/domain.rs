use crate::error::{Error, Result};

/// Relative level-set tolerance for deciding that a point lies on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// A uniformly convex domain in one or two dimensions.
///
/// Disks and ellipses are centred at the origin with axis-aligned semi-axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Disk { radius: f64 },
    Ellipse { semi_x: f64, semi_y: f64 },
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = DomainSpec::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        let d = DomainSpec::Disk { radius };
        d.validate()?;
        Ok(d)
    }

    pub fn ellipse(semi_x: f64, semi_y: f64) -> Result<Self> {
        let d = DomainSpec::Ellipse { semi_x, semi_y };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            DomainSpec::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidDomain(format!(
                        "interval endpoints must satisfy a < b (got a = {a}, b = {b})"
                    )));
                }
            }
            DomainSpec::Disk { radius } => {
                if !ok(radius) {
                    return Err(Error::InvalidDomain(format!(
                        "disk radius must be positive (got {radius})"
                    )));
                }
            }
            DomainSpec::Ellipse { semi_x, semi_y } => {
                if !ok(semi_x) || !ok(semi_y) {
                    return Err(Error::InvalidDomain(format!(
                        "ellipse semi-axes must be positive (got {semi_x}, {semi_y})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Semi-axes `(A, B)` of a planar domain; half-length and zero for an interval.
    pub fn semi_axes(&self) -> (f64, f64) {
        match *self {
            DomainSpec::Interval { a, b } => (0.5 * (b - a), 0.0),
            DomainSpec::Disk { radius } => (radius, radius),
            DomainSpec::Ellipse { semi_x, semi_y } => (semi_x, semi_y),
        }
    }

    fn center_1d(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => 0.5 * (a + b),
            _ => 0.0,
        }
    }

    /// Normalized convex quadratic that is negative inside, zero on the boundary.
    ///
    /// For the interval this is `((x - m)/L)^2 - 1` with midpoint `m` and half-length `L`,
    /// for the planar domains `(x/A)^2 + (y/B)^2 - 1`.
    pub fn level(&self, p: [f64; 2]) -> f64 {
        match *self {
            DomainSpec::Interval { .. } => {
                let (l, _) = self.semi_axes();
                let s = (p[0] - self.center_1d()) / l;
                s * s - 1.0
            }
            _ => {
                let (a, b) = self.semi_axes();
                (p[0] / a).powi(2) + (p[1] / b).powi(2) - 1.0
            }
        }
    }

    /// Gradient of [`DomainSpec::level`].
    pub fn level_gradient(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            DomainSpec::Interval { .. } => {
                let (l, _) = self.semi_axes();
                [2.0 * (p[0] - self.center_1d()) / (l * l), 0.0]
            }
            _ => {
                let (a, b) = self.semi_axes();
                [2.0 * p[0] / (a * a), 2.0 * p[1] / (b * b)]
            }
        }
    }

    /// Constant Hessian `[h11, h22, h12]` of [`DomainSpec::level`].
    pub fn level_hessian(&self) -> [f64; 3] {
        match *self {
            DomainSpec::Interval { .. } => {
                let (l, _) = self.semi_axes();
                [2.0 / (l * l), 0.0, 0.0]
            }
            _ => {
                let (a, b) = self.semi_axes();
                [2.0 / (a * a), 2.0 / (b * b), 0.0]
            }
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.level(p) < 0.0
    }

    pub fn is_on_boundary(&self, p: [f64; 2], tol: f64) -> bool {
        self.level(p).abs() <= tol
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Disk { radius } => 2.0 * radius,
            DomainSpec::Ellipse { semi_x, semi_y } => 2.0 * semi_x.max(semi_y),
        }
    }

    /// Lebesgue measure of the domain (length or area).
    pub fn measure(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Disk { radius } => std::f64::consts::PI * radius * radius,
            DomainSpec::Ellipse { semi_x, semi_y } => std::f64::consts::PI * semi_x * semi_y,
        }
    }

    /// Boundary measure: counting measure (2) for an interval, arclength otherwise.
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            DomainSpec::Interval { .. } => 2.0,
            DomainSpec::Disk { radius } => 2.0 * std::f64::consts::PI * radius,
            DomainSpec::Ellipse { semi_x, semi_y } => {
                // composite Simpson in the parametric angle
                let n = 4096;
                let step = 2.0 * std::f64::consts::PI / n as f64;
                let speed = |t: f64| (semi_x * t.sin()).hypot(semi_y * t.cos());
                let mut acc = speed(0.0) + speed(2.0 * std::f64::consts::PI);
                for k in 1..n {
                    let c = if k % 2 == 1 { 4.0 } else { 2.0 };
                    acc += c * speed(k as f64 * step);
                }
                acc * step / 3.0
            }
        }
    }

    /// Positive lower bound of the boundary curvature (uniform convexity constant).
    pub fn min_curvature(&self) -> f64 {
        match *self {
            DomainSpec::Interval { .. } => 1.0,
            DomainSpec::Disk { radius } => 1.0 / radius,
            DomainSpec::Ellipse { semi_x, semi_y } => {
                let (big, small) = (semi_x.max(semi_y), semi_x.min(semi_y));
                small / (big * big)
            }
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: [f64; 2]) -> [f64; 2] {
        let g = self.level_gradient(p);
        match self {
            DomainSpec::Interval { .. } => [g[0].signum(), 0.0],
            _ => {
                let n = g[0].hypot(g[1]);
                [g[0] / n, g[1] / n]
            }
        }
    }

    /// Distance `t > 0` along the unit direction `dir` from an interior point `p`
    /// to the boundary.
    pub fn ray_exit(&self, p: [f64; 2], dir: [f64; 2]) -> f64 {
        let (a, b) = self.semi_axes();
        match self {
            DomainSpec::Interval { a: lo, b: hi } => {
                if dir[0] > 0.0 {
                    (hi - p[0]) / dir[0]
                } else {
                    (lo - p[0]) / dir[0]
                }
            }
            _ => {
                // (px + t dx)^2/a^2 + (py + t dy)^2/b^2 = 1
                let qa = (dir[0] / a).powi(2) + (dir[1] / b).powi(2);
                let qb = 2.0 * (p[0] * dir[0] / (a * a) + p[1] * dir[1] / (b * b));
                let qc = self.level(p);
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                // positive root, written to avoid cancellation
                if qb >= 0.0 {
                    (-2.0 * qc) / (qb + disc.sqrt())
                } else {
                    (-qb + disc.sqrt()) / (2.0 * qa)
                }
            }
        }
    }

    /// Vertical extent `(y_lo, y_hi)` of a planar domain over abscissa `x`.
    pub fn slice_y(&self, x: f64) -> Option<(f64, f64)> {
        let (a, b) = self.semi_axes();
        let s = 1.0 - (x / a).powi(2);
        if s <= 0.0 {
            return None;
        }
        let half = b * s.sqrt();
        Some((-half, half))
    }

    /// Projects a point onto the boundary along the ray from the centre.
    pub fn project_to_boundary(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            DomainSpec::Interval { a, b } => {
                if (p[0] - a).abs() <= (p[0] - b).abs() {
                    [a, 0.0]
                } else {
                    [b, 0.0]
                }
            }
            _ => {
                let scale = (self.level(p) + 1.0).sqrt();
                [p[0] / scale, p[1] / scale]
            }
        }
    }

    /// Parametric angle of a boundary point, used to order boundary nodes.
    pub fn boundary_angle(&self, p: [f64; 2]) -> f64 {
        let (a, b) = self.semi_axes();
        (p[1] / b).atan2(p[0] / a)
    }
}

/// Curvature of the boundary at `point`; `1` for an interval.
pub fn gauss_curvature(domain: &DomainSpec, point: [f64; 2]) -> Result<f64> {
    if !domain.is_on_boundary(point, BOUNDARY_TOL) {
        return Err(Error::NotOnBoundary {
            x: point[0],
            y: point[1],
        });
    }
    Ok(match *domain {
        DomainSpec::Interval { .. } => 1.0,
        DomainSpec::Disk { radius } => 1.0 / radius,
        DomainSpec::Ellipse { semi_x, semi_y } => {
            let c = point[0] / semi_x;
            let s = point[1] / semi_y;
            let q = semi_x * semi_x * s * s + semi_y * semi_y * c * c;
            semi_x * semi_y / q.powf(1.5)
        }
    })
}
