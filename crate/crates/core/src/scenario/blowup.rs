//! Scenarios whose density grows without bound, generated from a decreasing
//! curve z(t) with z(0) = 1 and z -> 0: every particle follows a time-shifted
//! copy of the curve.

use std::sync::Arc;

use super::{build_scenario, Domain, ForceModel, InitialData, Scenario, Velocity};
use crate::error::{Error, Result};
use crate::func::ScalarFn;

/// Generating curve together with its first two derivatives.
#[derive(Debug, Clone)]
pub struct BlowupCurve {
    pub z: ScalarFn,
    pub dz: ScalarFn,
    pub ddz: ScalarFn,
}

impl BlowupCurve {
    pub fn new(z: ScalarFn, dz: ScalarFn, ddz: ScalarFn) -> Self {
        BlowupCurve { z, dz, ddz }
    }

    /// Curve time at which z equals `x`, found by monotone bisection.
    /// Returns `+inf` for `x <= 0`.
    pub fn time_of(&self, x: f64) -> f64 {
        invert_decreasing(&self.z, x)
    }

    /// Position and velocity of the particle labelled `x` at time `t`.
    pub fn state(&self, x: f64, t: f64) -> (f64, f64) {
        let tau = self.time_of(x);
        if !tau.is_finite() {
            return (0.0, 0.0);
        }
        (self.z.eval(tau + t), zero_nan(self.dz.eval(tau + t)))
    }
}

fn zero_nan(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v
    }
}

pub(crate) fn invert_decreasing(z: &ScalarFn, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut width = 1.0;
    while z.eval(lo) < x {
        lo -= width;
        width *= 2.0;
        if width > 1e18 {
            return f64::NEG_INFINITY;
        }
    }
    width = 1.0;
    while z.eval(hi) > x {
        hi += width;
        width *= 2.0;
        if width > 1e18 {
            return f64::INFINITY;
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if z.eval(mid) > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the closer bracket end
    if (z.eval(lo) - x).abs() <= (z.eval(hi) - x).abs() {
        lo
    } else {
        hi
    }
}

/// Build the scenario on (0, 1] with v(x) = z'(t(x)) and F(y) = z''(t(y)),
/// where z(t(x)) = x.
pub fn build_blowup_scenario(curve: BlowupCurve) -> Result<Scenario> {
    let z0 = curve.z.eval(0.0);
    if (z0 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "generating curve must start at z(0) = 1, got {z0}"
        )));
    }
    // sample z' over the range where z drops from 1 to 1e-3
    let t_end = {
        let t = curve.time_of(1e-3);
        if t.is_finite() && t > 0.0 {
            t
        } else {
            10.0
        }
    };
    for i in 0..=400 {
        let t = t_end * i as f64 / 400.0;
        let d = curve.dz.eval(t);
        if !(d < 0.0) {
            return Err(Error::NotMonotone { t, derivative: d });
        }
    }

    let c = Arc::new(curve.clone());
    let cv = c.clone();
    let cdv = c.clone();
    let velocity = ScalarFn::with_derivative(
        move |x| {
            let tau = cv.time_of(x);
            zero_nan(cv.dz.eval(tau))
        },
        // dv/dx = z''(t) / z'(t)
        move |x| {
            let tau = cdv.time_of(x);
            zero_nan(cdv.ddz.eval(tau) / cdv.dz.eval(tau))
        },
    );
    let cf = c.clone();
    let force = ScalarFn::new(move |y| {
        let tau = cf.time_of(y);
        zero_nan(cf.ddz.eval(tau))
    });
    let domain = Domain::interval(0.0, 1.0)?.with_open(0, true, false);
    let mut s = build_scenario(
        domain,
        ForceModel::Smooth1D { force },
        InitialData::new(Velocity::Scalar(velocity)),
        f64::INFINITY,
    )?;
    s.blowup = Some(curve);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_curve() -> BlowupCurve {
        BlowupCurve::new(
            ScalarFn::parse("exp(-t)").unwrap(),
            ScalarFn::parse("-exp(-t)").unwrap(),
            ScalarFn::parse("exp(-t)").unwrap(),
        )
    }

    #[test]
    fn exponential_curve_gives_linear_fields() {
        let s = build_blowup_scenario(exp_curve()).unwrap();
        for x in s.labels_1d().iter().step_by(37) {
            assert!((s.v(*x) + x).abs() < 1e-14, "v({x})");
            assert!((s.force.eval1(*x) - x).abs() < 1e-14, "F({x})");
            assert!((s.dv(*x) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rational_curve_fields() {
        // z = 1/(1+t): z' = -z^2, z'' = 2 z^3
        let s = build_blowup_scenario(BlowupCurve::new(
            ScalarFn::parse("1/(1+t)").unwrap(),
            ScalarFn::parse("-1/(1+t)^2").unwrap(),
            ScalarFn::parse("2/(1+t)^3").unwrap(),
        ))
        .unwrap();
        for &x in &[0.01, 0.3, 0.77, 1.0] {
            assert!((s.v(x) + x * x).abs() < 1e-14);
            assert!((s.force.eval1(x) - 2.0 * x * x * x).abs() < 1e-14);
            // finite-difference check of the force against the curve
            let tau = 1.0 / x - 1.0;
            let h = 1e-4;
            let z = |t: f64| 1.0 / (1.0 + t);
            let fd = (z(tau + h) - 2.0 * z(tau) + z(tau - h)) / (h * h);
            assert!((s.force.eval1(x) - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn increasing_curve_rejected() {
        let err = build_blowup_scenario(BlowupCurve::new(
            ScalarFn::parse("1 + t").unwrap(),
            ScalarFn::parse("1").unwrap(),
            ScalarFn::parse("0").unwrap(),
        ))
        .unwrap_err();
        assert!(matches!(err, Error::NotMonotone { .. }));
    }

    #[test]
    fn inversion_is_tight() {
        let c = exp_curve();
        for i in 1..=200 {
            let x = i as f64 / 200.0;
            let t = c.time_of(x);
            assert!((c.z.eval(t) - x).abs() <= 1e-12);
        }
    }
}
