//! The concave integrand family `G(d) = d^theta / theta` (`log d` at `theta = 0`).

use crate::error::{Error, Result};

/// Integrand parameters: exponent `theta` in `[0, 1/n)` and dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GSpec {
    theta: f64,
    dim: usize,
}

/// `(G(d), w(d) = G'(d), w'(d))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GValues {
    pub g: f64,
    pub w: f64,
    pub dw: f64,
}

impl GSpec {
    pub fn new(theta: f64, dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1 or 2 (got {dim})"
            )));
        }
        if !theta.is_finite() || theta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "theta must be >= 0 (got {theta})"
            )));
        }
        if theta >= 1.0 / dim as f64 {
            return Err(Error::InvalidParameter(format!(
                "theta must be < 1/n (got theta = {theta}, n = {dim})"
            )));
        }
        Ok(GSpec { theta, dim })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, d: f64) -> Result<GValues> {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "G is defined for d > 0 (got {d})"
            )));
        }
        Ok(GValues {
            g: self.g(d),
            w: self.w(d),
            dw: self.dw(d),
        })
    }

    /// `G(d)`; callers guarantee `d > 0`.
    #[inline]
    pub fn g(&self, d: f64) -> f64 {
        if self.theta == 0.0 {
            d.ln()
        } else {
            d.powf(self.theta) / self.theta
        }
    }

    /// `w(d) = d^(theta - 1)`.
    #[inline]
    pub fn w(&self, d: f64) -> f64 {
        if self.theta == 0.0 {
            1.0 / d
        } else {
            d.powf(self.theta - 1.0)
        }
    }

    /// `w'(d) = (theta - 1) d^(theta - 2)`.
    #[inline]
    pub fn dw(&self, d: f64) -> f64 {
        if self.theta == 0.0 {
            -1.0 / (d * d)
        } else {
            (self.theta - 1.0) * d.powf(self.theta - 2.0)
        }
    }

    /// Inverse of `w`: `d = w^(1 / (theta - 1))`.
    pub fn invert_w(&self, w: f64) -> Result<f64> {
        if !(w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "w must be positive to invert (got {w})"
            )));
        }
        Ok(self.theta_inv(w))
    }

    /// Unchecked inverse of `w`; callers guarantee `w > 0`.
    #[inline]
    pub fn theta_inv(&self, w: f64) -> f64 {
        if self.theta == 0.0 {
            1.0 / w
        } else {
            w.powf(1.0 / (self.theta - 1.0))
        }
    }

    /// Derivative of the inverse of `w` with respect to `w`.
    #[inline]
    pub fn theta_inv_derivative(&self, w: f64) -> f64 {
        self.theta_inv(w) / ((self.theta - 1.0) * w)
    }

    /// The structural quantity `w' + (1 - 1/n) w / d`, which must be `<= 0`.
    #[inline]
    pub fn a1_margin(&self, d: f64) -> f64 {
        self.dw(d) + (1.0 - 1.0 / self.dim as f64) * self.w(d) / d
    }
}

/// Sampled check of the structural assumptions on `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Sup over samples of `w' + (1 - 1/n) w / d`; must be `<= 0`.
    pub a1_margin: f64,
    pub a1_holds: bool,
    /// Inf over samples with `d >= 1` of `d w`; must be positive.
    pub a2_inf_dw: f64,
    pub a2_holds: bool,
    /// `d^(1 - 1/n) w` at decreasing sample points `d -> d_min`.
    pub a3_trend: Vec<(f64, f64)>,
    /// True when the trend increases strictly towards `d_min`.
    pub a3_increasing: bool,
}

/// Samples `(A1)-(A3)` on a log-uniform grid over `[d_min, d_max]`.
pub fn verify_assumptions(spec: &GSpec, d_min: f64, d_max: f64) -> Result<AssumptionReport> {
    if !(d_min > 0.0 && d_max > d_min) {
        return Err(Error::InvalidParameter(format!(
            "sample range must satisfy 0 < d_min < d_max (got {d_min}, {d_max})"
        )));
    }
    let samples = 201;
    let (lo, hi) = (d_min.ln(), d_max.ln());
    let ds: Vec<f64> = (0..samples)
        .map(|k| (lo + (hi - lo) * k as f64 / (samples - 1) as f64).exp())
        .collect();
    let a1_margin = ds
        .iter()
        .map(|&d| spec.a1_margin(d))
        .fold(f64::NEG_INFINITY, f64::max);
    let a2_inf_dw = ds
        .iter()
        .filter(|&&d| d >= 1.0)
        .map(|&d| d * spec.w(d))
        .fold(f64::INFINITY, f64::min);
    let expo = 1.0 - 1.0 / spec.dim() as f64;
    let a3_trend: Vec<(f64, f64)> = ds
        .iter()
        .rev()
        .step_by(20)
        .map(|&d| (d, d.powf(expo) * spec.w(d)))
        .collect();
    let a3_increasing = a3_trend.windows(2).all(|p| p[1].1 > p[0].1);
    Ok(AssumptionReport {
        a1_margin,
        a1_holds: a1_margin <= 0.0,
        a2_inf_dw,
        a2_holds: a2_inf_dw.is_infinite() || a2_inf_dw > 0.0,
        a3_trend,
        a3_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluator_examples() {
        let g0 = GSpec::new(0.0, 2).unwrap();
        let v = g0.eval(2.0).unwrap();
        assert!((v.g - 2f64.ln()).abs() < 1e-15);
        assert!((v.w - 0.5).abs() < 1e-15 && (v.dw + 0.25).abs() < 1e-15);
        let v = g0.eval(1.0).unwrap();
        assert_eq!((v.g, v.w, v.dw), (0.0, 1.0, -1.0));

        let g = GSpec::new(0.25, 2).unwrap();
        let v = g.eval(16.0).unwrap();
        assert!((v.g - 8.0).abs() < 1e-12);
        assert!((v.w - 0.125).abs() < 1e-15);
        assert!((v.dw + 0.75 * 16f64.powf(-1.75)).abs() < 1e-15);
        assert!(g.eval(0.0).is_err() && g.eval(-1.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        let g0 = GSpec::new(0.0, 2).unwrap();
        assert_eq!(g0.invert_w(2.0).unwrap(), 0.5);
        assert_eq!(g0.invert_w(1.0).unwrap(), 1.0);
        let g = GSpec::new(0.25, 2).unwrap();
        assert!((g.invert_w(0.125).unwrap() - 16.0).abs() < 1e-12);
        assert!(g.invert_w(0.0).is_err());
    }

    #[test]
    fn theta_bounds_are_enforced() {
        assert!(GSpec::new(0.5, 2).is_err());
        assert!(GSpec::new(-0.1, 1).is_err());
        assert!(GSpec::new(0.99, 1).is_ok());
        assert!(GSpec::new(0.1, 3).is_err());
    }

    #[test]
    fn assumption_report_examples() {
        let r = verify_assumptions(&GSpec::new(0.0, 2).unwrap(), 1e-3, 1e3).unwrap();
        assert!(r.a1_holds && r.a1_margin < 0.0);
        assert!(r.a3_increasing);
        let r = verify_assumptions(&GSpec::new(0.25, 2).unwrap(), 1e-3, 1e3).unwrap();
        assert!(r.a2_holds && (r.a2_inf_dw - 1.0).abs() < 1e-12);
        assert!(verify_assumptions(&GSpec::new(0.0, 2).unwrap(), 2.0, 1.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = GSpec::new(0.3, 1).unwrap();
        for &d in &[0.1, 1.0, 7.5] {
            let e = 1e-6 * d;
            let fd = (g.g(d + e) - g.g(d - e)) / (2.0 * e);
            assert!((fd - g.w(d)).abs() < 1e-7 * g.w(d).abs().max(1.0));
            let fd = (g.w(d + e) - g.w(d - e)) / (2.0 * e);
            assert!((fd - g.dw(d)).abs() < 1e-6 * g.dw(d).abs().max(1.0));
            let w = g.w(d);
            let e = 1e-6 * w;
            let fd = (g.theta_inv(w + e) - g.theta_inv(w - e)) / (2.0 * e);
            assert!((fd - g.theta_inv_derivative(w)).abs() < 1e-5 * fd.abs());
        }
    }

    fn spec_strategy() -> impl Strategy<Value = GSpec> {
        (1usize..=2, 0.0f64..0.999).prop_map(|(n, frac)| GSpec::new(frac / n as f64, n).unwrap())
    }

    proptest! {
        #[test]
        fn structural_inequality_has_exact_sign(spec in spec_strategy(), log_d in -12.0f64..12.0) {
            let d = log_d.exp();
            let expected = (spec.theta() - 1.0 / spec.dim() as f64) * d.powf(spec.theta() - 2.0);
            let got = spec.a1_margin(d);
            prop_assert!(got <= 0.0);
            prop_assert!((got - expected).abs() <= 1e-10 * expected.abs());
        }

        #[test]
        fn inverse_round_trips(spec in spec_strategy(), log_d in -13.8f64..13.8) {
            let d = log_d.exp();
            let back = spec.invert_w(spec.w(d)).unwrap();
            prop_assert!((back - d).abs() <= 1e-12 * d);
        }

        #[test]
        fn scaled_w_is_nonincreasing(spec in spec_strategy(), log_d in -10.0f64..10.0, step in 1e-3f64..2.0) {
            let e = 1.0 - 1.0 / spec.dim() as f64;
            let d1 = log_d.exp();
            let d2 = d1 * (1.0 + step);
            prop_assert!(spec.w(d2) * d2.powf(e) <= spec.w(d1) * d1.powf(e) * (1.0 + 1e-14));
        }
    }
}
