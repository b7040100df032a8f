//! Time-of-flight integrals on the line and their derivatives in the
//! starting label.
//!
//! For a particle starting at `x` with velocity `v(x)` and mass `m(x)` the
//! time to reach `y > x` is
//!
//! ```text
//! T(x, y) = √m ∫_x^y dz / √(2 K(x, z)),   K(x, z) = m v²/2 + ∫_x^z F = H₀(x) − U(z).
//! ```
//!
//! `K` is formed from the work integral directly instead of a difference of
//! potentials, which keeps it accurate when it is small.

mod gk;

pub use gk::{integrate, integrate_sqrt_endpoint, Integral};

use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::scenario::{ForceModel, Scenario};

/// Relative tolerance for flight times.
pub const TOL_TIME: f64 = 1e-10;
/// Relative tolerance for derivative integrals.
pub const TOL_DERIV: f64 = 1e-8;

/// Points probed between `x` and `y` when looking for a turning point.
const TURNING_SCAN: usize = 64;

/// Spacing of the cached work anchors for smooth forces.
const ANCHOR_STEP: f64 = 1.0;

/// Potential, full energy and their inputs for a 1D scenario.
#[derive(Debug, Clone)]
pub struct EnergyProfile {
    pub force: ForceModel,
    pub v: ScalarFn,
    pub m: ScalarFn,
    anchors: Arc<RwLock<Anchors>>,
}

/// ∫_0^{kH} F for k ≥ 0 (`up`) and k ≤ 0 (`down`), extended on demand.
#[derive(Debug, Default)]
struct Anchors {
    up: Vec<f64>,
    down: Vec<f64>,
}

/// ∫_0^y F; closed form for gap and constant forces.
pub fn potential(force: &ForceModel, y: f64) -> Result<f64> {
    Ok(-work(force, 0.0, y)?)
}

/// ∫_a^b F over the line.
pub fn work(force: &ForceModel, a: f64, b: f64) -> Result<f64> {
    if let Some(p) = force.piecewise() {
        return Ok(p.work(a, b));
    }
    match force {
        ForceModel::Smooth1D { force } => {
            if let Some(c) = force.as_constant() {
                return Ok(c * (b - a));
            }
            let r = integrate(|z| force.eval(z), a, b, 1e-13, 1e-300)?;
            Ok(r.value)
        }
        ForceModel::ConstantVec { f } if f.len() == 1 => Ok(f[0] * (b - a)),
        ForceModel::Linear { matrix, b: off } if off.len() == 1 => {
            let k = matrix[0][0];
            Ok(0.5 * k * (b * b - a * a) + off[0] * (b - a))
        }
        _ => Err(Error::InvalidParameter(format!(
            "work integral needs a force on the line, got {}",
            force.kind()
        ))),
    }
}

/// Result of a flight-time evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightResult {
    pub t: f64,
    /// dT/dx; NaN when not requested or not available.
    pub dt_dx: f64,
    pub error_estimate: f64,
    /// The starting velocity vanishes, so the integrand is singular at `x`.
    pub singular_endpoint: bool,
}

impl EnergyProfile {
    pub fn new(force: ForceModel, v: ScalarFn, m: ScalarFn) -> Result<Self> {
        if force.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: force.dim(),
            });
        }
        Ok(EnergyProfile {
            force,
            v,
            m,
            anchors: Arc::default(),
        })
    }

    /// Unit mass.
    pub fn unit_mass(force: ForceModel, v: ScalarFn) -> Result<Self> {
        Self::new(force, v, ScalarFn::constant(1.0))
    }

    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let v = s.init.v1().ok_or(Error::DimensionMismatch {
            expected: 1,
            found: s.dim(),
        })?;
        Self::new(s.force.clone(), v.clone(), s.init.mass.clone())
    }

    pub fn f(&self, y: f64) -> f64 {
        self.force.eval1(y)
    }

    /// F′, zero inside the pieces of a gap force.
    pub fn df(&self, y: f64) -> f64 {
        match &self.force {
            ForceModel::Smooth1D { force } => force.deriv(y),
            ForceModel::Linear { matrix, .. } => matrix[0][0],
            _ => 0.0,
        }
    }

    pub fn potential(&self, y: f64) -> Result<f64> {
        Ok(-self.work(0.0, y)?)
    }

    /// H₀(x) = m v²/2 + U(x).
    pub fn h0(&self, x: f64) -> Result<f64> {
        let v = self.v.eval(x);
        Ok(0.5 * self.m.eval(x) * v * v + self.potential(x)?)
    }

    /// H₀′(x) = m′v²/2 + m v v′ − F(x).
    pub fn dh0(&self, x: f64) -> f64 {
        let v = self.v.eval(x);
        0.5 * self.m.deriv(x) * v * v + self.m.eval(x) * v * self.v.deriv(x) - self.f(x)
    }

    /// K(x, z) = H₀(x) − U(z), the kinetic energy of particle `x` at `z`.
    pub fn kinetic(&self, x: f64, z: f64) -> Result<f64> {
        let v = self.v.eval(x);
        Ok(0.5 * self.m.eval(x) * v * v + self.work(x, z)?)
    }

    /// ∫_a^b F. Long smooth stretches go through cached anchors, so the
    /// cost does not grow with |b − a|.
    pub fn work(&self, a: f64, b: f64) -> Result<f64> {
        let smooth =
            matches!(&self.force, ForceModel::Smooth1D { force } if force.as_constant().is_none());
        if !smooth || (b - a).abs() <= 2.0 * ANCHOR_STEP {
            return work(&self.force, a, b);
        }
        if b < a {
            return Ok(-self.work(b, a)?);
        }
        let ka = (a / ANCHOR_STEP).ceil() as i64;
        let kb = (b / ANCHOR_STEP).floor() as i64;
        let head = work(&self.force, a, ka as f64 * ANCHOR_STEP)?;
        let tail = work(&self.force, kb as f64 * ANCHOR_STEP, b)?;
        Ok(head + (self.anchor(kb)? - self.anchor(ka)?) + tail)
    }

    fn anchor(&self, k: i64) -> Result<f64> {
        let idx = k.unsigned_abs() as usize;
        {
            let t = self.anchors.read().expect("anchor table poisoned");
            let side = if k >= 0 { &t.up } else { &t.down };
            if let Some(&w) = side.get(idx) {
                return Ok(w);
            }
        }
        let mut t = self.anchors.write().expect("anchor table poisoned");
        let (side, dir) = if k >= 0 {
            (&mut t.up, 1.0)
        } else {
            (&mut t.down, -1.0)
        };
        if side.is_empty() {
            side.push(0.0);
        }
        while side.len() <= idx {
            let j = side.len() as f64;
            let step = work(
                &self.force,
                dir * (j - 1.0) * ANCHOR_STEP,
                dir * j * ANCHOR_STEP,
            )?;
            let last = side[side.len() - 1];
            side.push(last + step);
        }
        Ok(side[idx])
    }

    /// K(x, x + u), NaN on failure. Short offsets are integrated in u
    /// directly so K does not lose digits to the rounding of x + u.
    fn kinetic_offset(&self, x: f64, u: f64) -> f64 {
        let v = self.v.eval(x);
        let w = match self.work_offset(x, u) {
            Ok(w) => w,
            Err(_) => return f64::NAN,
        };
        0.5 * self.m.eval(x) * v * v + w
    }

    fn work_offset(&self, x: f64, u: f64) -> Result<f64> {
        if let Some(p) = self.force.piecewise() {
            let k = p.region(x);
            if p.bounds.get(k).map_or(true, |&c| c >= x + u) {
                return Ok(p.forces[k] * u);
            }
            return Ok(p.work(x, x + u));
        }
        match &self.force {
            ForceModel::Smooth1D { force } => {
                if let Some(c) = force.as_constant() {
                    return Ok(c * u);
                }
                if u > 2.0 * ANCHOR_STEP {
                    return self.work(x, x + u);
                }
                Ok(integrate(|w| force.eval(x + w), 0.0, u, 1e-13, 1e-300)?.value)
            }
            ForceModel::ConstantVec { f } if f.len() == 1 => Ok(f[0] * u),
            ForceModel::Linear { matrix, b } if b.len() == 1 => {
                Ok(matrix[0][0] * u * (x + 0.5 * u) + b[0] * u)
            }
            _ => self.work(x, x + u),
        }
    }

    /// Probe K on (x, y] and report the first bracket where it stops being
    /// positive.
    fn scan_turning_point(&self, x: f64, y: f64) -> Result<()> {
        let mut prev = x;
        for k in 1..=TURNING_SCAN {
            let z = x + (y - x) * k as f64 / TURNING_SCAN as f64;
            let kin = self.kinetic(x, z)?;
            if !(kin > 0.0) {
                return Err(Error::TurningPoint { lo: prev, hi: z });
            }
            prev = z;
        }
        Ok(())
    }

    fn check_forward(&self, x: f64, y: f64) -> Result<f64> {
        if !(y > x) {
            return Err(Error::InvalidParameter(format!(
                "flight time needs y > x, got x = {x}, y = {y}"
            )));
        }
        let v = self.v.eval(x);
        if v < 0.0 {
            return Err(Error::HypothesisViolated {
                hypothesis: "v(x) >= 0".into(),
                witness: format!("v({x}) = {v}"),
            });
        }
        Ok(v)
    }

    /// T(x, y) by the substitution z = x + s², which removes the inverse
    /// square-root singularity when v(x) = 0.
    pub fn time_of_flight(&self, x: f64, y: f64) -> Result<FlightResult> {
        let v = self.check_forward(x, y)?;
        self.scan_turning_point(x, y)?;
        let m = self.m.eval(x);
        let r = integrate_sqrt_endpoint(
            |u| 1.0 / (2.0 * self.kinetic_offset(x, u)).sqrt(),
            x,
            y,
            0.1 * TOL_TIME,
            1e-300,
        )
        .map_err(|e| match e {
            Error::QuadratureFailure { estimate, .. } if estimate.is_nan() => {
                Error::TurningPoint { lo: x, hi: y }
            }
            other => other,
        })?;
        let sm = m.sqrt();
        Ok(FlightResult {
            t: sm * r.value,
            dt_dx: f64::NAN,
            error_estimate: sm * r.error,
            singular_endpoint: v == 0.0,
        })
    }

    /// dT/dx from differentiating under the integral sign; needs v(x) > 0.
    ///
    /// With unit mass this is −1/v(x) − (v v′ − F(x))/(2√2) ∫_x^y K^{−3/2} dz.
    pub fn dt_dx(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.check_forward(x, y)?;
        if v == 0.0 {
            return Err(Error::SingularBoundary { x });
        }
        let flight = self.time_of_flight(x, y)?;
        let m = self.m.eval(x);
        let i3 = integrate_sqrt_endpoint(
            |u| (2.0 * self.kinetic_offset(x, u)).powf(-1.5),
            x,
            y,
            0.1 * TOL_DERIV,
            1e-300,
        )?;
        let dg = -1.0 / (v * m.sqrt()) - self.dh0(x) * i3.value;
        Ok(0.5 * self.m.deriv(x) / m * flight.t + m.sqrt() * dg)
    }

    /// dT/dx after integrating by parts; finite when v(x) = 0 but needs a
    /// smooth force with F > 0 on [x, y].
    ///
    /// Writing T = √m·G, the by-parts form of dG/dx is
    ///
    /// ```text
    /// H₀′(x) [ 1/(√(2K(y)) F(y)) + ∫_x^y F′/(F² √(2K)) dz ] − v′√m/F(x) − v m′/(2 F(x) √m)
    /// ```
    ///
    /// and dT/dx = √m·dG/dx + m′/(2m)·T.
    pub fn dt_dx_by_parts(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.check_forward(x, y)?;
        if !matches!(
            self.force,
            ForceModel::Smooth1D { .. } | ForceModel::Linear { .. }
        ) {
            return Err(Error::HypothesisViolated {
                hypothesis: "smooth force".into(),
                witness: self.force.kind().into(),
            });
        }
        for k in 0..=TURNING_SCAN {
            let z = x + (y - x) * k as f64 / TURNING_SCAN as f64;
            let fz = self.f(z);
            if !(fz > 0.0) {
                return Err(Error::HypothesisViolated {
                    hypothesis: "F > 0".into(),
                    witness: format!("F({z}) = {fz}"),
                });
            }
        }
        self.scan_turning_point(x, y)?;
        let m = self.m.eval(x);
        let sm = m.sqrt();
        let dm = self.m.deriv(x);
        let fx = self.f(x);
        let fy = self.f(y);
        let boundary = 1.0 / ((2.0 * self.kinetic(x, y)?).sqrt() * fy);
        let inner = integrate_sqrt_endpoint(
            |u| {
                let z = (x + u).min(y);
                let fz = self.f(z);
                self.df(z) / (fz * fz * (2.0 * self.kinetic_offset(x, u)).sqrt())
            },
            x,
            y,
            0.1 * TOL_DERIV,
            1e-300,
        )?;
        let dg = self.dh0(x) * (boundary + inner.value)
            - self.v.deriv(x) * sm / fx
            - v * dm / (2.0 * fx * sm);
        let mass_term = if dm == 0.0 {
            0.0
        } else {
            0.5 * dm / m * self.time_of_flight(x, y)?.t
        };
        Ok(sm * dg + mass_term)
    }

    /// Flight time together with its derivative, using whichever route is
    /// defined at `x`.
    pub fn flight(&self, x: f64, y: f64) -> Result<FlightResult> {
        let mut r = self.time_of_flight(x, y)?;
        let smooth_positive =
            matches!(self.force, ForceModel::Smooth1D { .. }) && self.f(x) > 0.0 && self.f(y) > 0.0;
        r.dt_dx = if self.v.eval(x) > 0.0 {
            self.dt_dx(x, y)?
        } else if smooth_positive {
            self.dt_dx_by_parts(x, y)?
        } else {
            f64::NAN
        };
        Ok(r)
    }
}
