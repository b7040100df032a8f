//! Euler velocity field and densities rebuilt from the particle flow on
//! the line, with PDE residuals and the moving boundary.
//!
//! The flow map x ↦ y(t, x) is inverted only before the first collision,
//! where it is strictly increasing.

mod grid;

pub use grid::{
    continuity_residual, euler_residual, field_grid, mass_at, write_field_csv, FieldGrid, Residual,
    Window,
};

use crate::error::{Error, Result};
use crate::quadrature::EnergyProfile;
use crate::regularity::{
    check_free_flight, check_smooth_general_on, require, temper, Criterion, Verdict,
};
use crate::scenario::{cutoff, ForceModel, Scenario};
use crate::settings::Settings;
use crate::simulator::ode::OdeOptions;
use crate::simulator::{detect_collisions_1d, output_times, trajectory, CollisionReport};

/// Labels used to bracket an inversion.
const BRACKET_LABELS: usize = 257;
/// Fixed steps over the horizon for flows without a closed form.
const FIXED_STEPS: f64 = 4096.0;
/// Inversion stops once the label bracket is this narrow.
pub const INVERT_TOL: f64 = 1e-12;
/// Smallest |∂y/∂x| used in the pushforward density.
pub const JACOBIAN_FLOOR: f64 = 1e-14;

/// The flow of a 1D scenario up to a horizon, with its first collision.
#[derive(Debug, Clone)]
pub struct Flow<'a> {
    s: &'a Scenario,
    opts: OdeOptions,
    lo: f64,
    hi: f64,
    labels: Vec<f64>,
    h_x: f64,
    horizon: f64,
    collision: CollisionReport,
}

impl<'a> Flow<'a> {
    /// Scan `s` for collisions up to `horizon`; evaluations are refused from
    /// the first one on.
    pub fn new(s: &'a Scenario, horizon: f64, settings: &Settings) -> Result<Self> {
        if !s.is_1d() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: s.dim(),
            });
        }
        if !horizon.is_finite() {
            return Err(Error::InfiniteHorizon);
        }
        let collision = detect_collisions_1d(&s.clone().with_horizon(horizon), settings)?;
        let (lo, hi) = s.domain.bounds_1d();
        let n = s.grid.counts[0].clamp(2, BRACKET_LABELS);
        let labels = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let h_x = (hi - lo) / (s.grid.counts[0].max(6) - 1) as f64;
        let opts = OdeOptions {
            fixed_step: Some(horizon.max(f64::MIN_POSITIVE) / FIXED_STEPS),
            ..OdeOptions::default()
        };
        Ok(Flow {
            s,
            opts,
            lo,
            hi,
            labels,
            h_x,
            horizon,
            collision,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.s
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// First collision time found by the scan, `INFINITY` if none.
    pub fn t_limit(&self) -> f64 {
        if self.collision.found {
            self.collision.t_first
        } else {
            f64::INFINITY
        }
    }

    pub fn collision(&self) -> &CollisionReport {
        &self.collision
    }

    fn admit(&self, t: f64) -> Result<()> {
        if t >= self.t_limit() {
            return Err(Error::NotRegular {
                t,
                reason: format!("first collision at t = {}", self.t_limit()),
            });
        }
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "t = {t} outside the propagated range [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Position and velocity at time `t` of the particle labelled `x`.
    pub fn state(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        if t == 0.0 {
            return Ok((x, self.s.v(x)));
        }
        let tr = trajectory(self.s, &[x], t, &self.opts)?;
        let (mut y, mut v) = ([0.0], [0.0]);
        tr.state(t, &mut y, &mut v);
        Ok((y[0], v[0]))
    }

    /// ∂y/∂x at label `x`: fourth-order differences with the initial grid
    /// spacing, one-sided next to the ends of the domain.
    pub fn jacobian(&self, t: f64, x: f64) -> Result<f64> {
        let h = self.h_x;
        let y = |k: f64| self.state(t, x + k * h).map(|p| p.0);
        if x - 2.0 * h >= self.lo && x + 2.0 * h <= self.hi {
            Ok((y(-2.0)? - 8.0 * y(-1.0)? + 8.0 * y(1.0)? - y(2.0)?) / (12.0 * h))
        } else {
            let s = if x - 2.0 * h < self.lo { 1.0 } else { -1.0 };
            let d = -25.0 * y(0.0)? + 48.0 * y(s)? - 36.0 * y(2.0 * s)? + 16.0 * y(3.0 * s)?
                - 3.0 * y(4.0 * s)?;
            Ok(s * d / (12.0 * h))
        }
    }

    /// Bracketing positions of the flow at time `t`.
    pub fn snapshot(&self, t: f64) -> Result<Snapshot<'_, 'a>> {
        self.admit(t)?;
        let ys = self
            .labels
            .iter()
            .map(|&x| self.state(t, x).map(|p| p.0))
            .collect::<Result<Vec<_>>>()?;
        if let Some(k) = (1..ys.len()).find(|&k| !(ys[k] > ys[k - 1])) {
            return Err(Error::NotRegular {
                t,
                reason: format!(
                    "labels {} and {} are out of order ({} >= {})",
                    self.labels[k - 1],
                    self.labels[k],
                    ys[k - 1],
                    ys[k]
                ),
            });
        }
        Ok(Snapshot { flow: self, t, ys })
    }
}

/// The flow at one time, ready for inversion.
#[derive(Debug, Clone)]
pub struct Snapshot<'f, 'a> {
    flow: &'f Flow<'a>,
    t: f64,
    ys: Vec<f64>,
}

impl Snapshot<'_, '_> {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// (L(t), R(t)).
    pub fn image(&self) -> (f64, f64) {
        (self.ys[0], self.ys[self.ys.len() - 1])
    }

    /// The unique label at `y`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let (l, r) = self.image();
        if !(y >= l && y <= r) {
            return Err(Error::OutOfImage {
                t: self.t,
                y,
                lo: l,
                hi: r,
            });
        }
        let xs = &self.flow.labels;
        let k = self
            .ys
            .partition_point(|&p| p <= y)
            .clamp(1, self.ys.len() - 1)
            - 1;
        let (mut a, mut b) = (xs[k], xs[k + 1]);
        let (mut fa, mut fb) = (self.ys[k] - y, self.ys[k + 1] - y);
        let (ylo, yhi) = (self.ys[k], self.ys[k + 1]);
        let mut iter = 0;
        loop {
            if fa == 0.0 {
                return Ok(a);
            }
            if fb == 0.0 {
                return Ok(b);
            }
            let w = b - a;
            if w <= INVERT_TOL {
                return Ok(a - fa * w / (fb - fa));
            }
            // secant steps kept off the ends, every third step a bisection
            let m = if iter % 3 == 2 {
                a + 0.5 * w
            } else {
                (a - fa * w / (fb - fa)).clamp(a + 1e-3 * w, b - 1e-3 * w)
            };
            if m <= a || m >= b {
                return Ok(a - fa * w / (fb - fa));
            }
            let ym = self.flow.state(self.t, m)?.0;
            if !(ym >= ylo && ym <= yhi) {
                return Err(Error::NotRegular {
                    t: self.t,
                    reason: format!("label {m} leaves the bracket [{ylo}, {yhi}] at position {ym}"),
                });
            }
            let fm = ym - y;
            if fm < 0.0 {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
            iter += 1;
        }
    }

    /// u(t, y).
    pub fn velocity(&self, y: f64) -> Result<f64> {
        let x = self.invert(y)?;
        Ok(self.flow.state(self.t, x)?.1)
    }

    /// u, transported density ρ₀(x) and pushforward density ρ₀(x)/|∂y/∂x|
    /// at `y`, with the label x.
    pub fn point(&self, y: f64) -> Result<PointValues> {
        let x = self.invert(y)?;
        let u = self.flow.state(self.t, x)?.1;
        let rho0 = self.flow.s.init.density.eval(x);
        let j = self.flow.jacobian(self.t, x)?;
        Ok(PointValues {
            x,
            u,
            rho_transport: rho0,
            rho_pushforward: rho0 / j.abs().max(JACOBIAN_FLOOR),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValues {
    pub x: f64,
    pub u: f64,
    pub rho_transport: f64,
    pub rho_pushforward: f64,
}

/// Label of the particle at `y` at time `t`.
pub fn invert_flow_1d(s: &Scenario, t: f64, y: f64) -> Result<f64> {
    Flow::new(s, t.max(f64::MIN_POSITIVE), &Settings::default())?
        .snapshot(t)?
        .invert(y)
}

/// Euler velocity u(t, y).
pub fn reconstruct_velocity(s: &Scenario, t: f64, y: f64) -> Result<f64> {
    Flow::new(s, t.max(f64::MIN_POSITIVE), &Settings::default())?
        .snapshot(t)?
        .velocity(y)
}

/// Paths of the two ends of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrack {
    pub times: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// L(t) = y(t, lower end), R(t) = y(t, upper end) at `n + 1` uniform times.
pub fn track_boundary(s: &Scenario, horizon: f64, n: usize) -> Result<BoundaryTrack> {
    if !horizon.is_finite() {
        return Err(Error::InfiniteHorizon);
    }
    let (lo, hi) = s.domain.bounds_1d();
    let opts = OdeOptions::default();
    let times = output_times(horizon, n);
    let path = |x: f64| -> Result<Vec<f64>> {
        let tr = trajectory(s, &[x], horizon, &opts)?;
        Ok(times.iter().map(|&t| tr.position_vec(t, 1)[0]).collect())
    };
    Ok(BoundaryTrack {
        left: path(lo)?,
        right: path(hi)?,
        times,
    })
}

/// Whether the pressureless Euler equation with data (F, v) keeps a smooth
/// solution for all t ≥ 0 on the scenario's interval. Uses the by-parts
/// flight-time criterion with m = 1; a zero force uses the free-flight test.
pub fn check_euler_global(s: &Scenario, settings: &Settings) -> Result<Verdict> {
    if let ForceModel::Smooth1D { force } = &s.force {
        if force.as_constant() == Some(0.0) {
            let mut v = check_free_flight(s, settings)?;
            v.criterion = Criterion::EulerGlobal;
            return Ok(v);
        }
    }
    let report = require(s, Criterion::EulerGlobal, settings)?;
    let profile = EnergyProfile::from_scenario(s)?;
    let xs = s.domain.sample_axis(0, settings.grid_x);
    let range = (xs[0], xs[xs.len() - 1]);
    let v = check_smooth_general_on(
        &profile,
        range,
        cutoff(s, settings),
        Criterion::EulerGlobal,
        settings,
    );
    Ok(temper(v, &report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::ScalarFn;
    use crate::regularity::Outcome;
    use crate::scenario::{build_scenario, Domain, InitialData};

    fn smooth(f: &str, v: &str, lo: f64, hi: f64, horizon: f64) -> Scenario {
        build_scenario(
            Domain::interval(lo, hi).unwrap(),
            ForceModel::Smooth1D {
                force: ScalarFn::parse(f).unwrap(),
            },
            InitialData::scalar(ScalarFn::parse(v).unwrap()),
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn inversions() {
        let s = smooth("0", "x", 0.0, 1.0, 1.0);
        assert!((invert_flow_1d(&s, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(invert_flow_1d(&s, 0.0, 0.3).unwrap(), 0.3);
        let s = smooth("1", "0", 0.0, 1.0, 2.0);
        let t = 1.5;
        assert!((invert_flow_1d(&s, t, 0.8 + 0.5 * t * t).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(
            invert_flow_1d(&s, t, 0.0),
            Err(Error::OutOfImage { .. })
        ));
    }

    #[test]
    fn velocities() {
        let s = smooth("0", "x", 0.0, 1.0, 1.0);
        assert!((reconstruct_velocity(&s, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        let s = smooth("1", "0", 0.0, 1.0, 2.0);
        assert!((reconstruct_velocity(&s, 1.2, 1.0).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn numeric_flow_inverts() {
        let s = smooth("1 + y", "0.5", 0.0, 1.0, 1.0);
        let flow = Flow::new(&s, 1.0, &Settings::default()).unwrap();
        let snap = flow.snapshot(0.7).unwrap();
        let y = flow.state(0.7, 0.37).unwrap().0;
        assert!((snap.invert(y).unwrap() - 0.37).abs() < 1e-10);
    }

    #[test]
    fn refuses_times_after_collision() {
        let s = smooth("0", "-atan(x)", -5.0, 5.0, 2.0).with_grid(vec![2001]);
        let flow = Flow::new(&s, 2.0, &Settings::default()).unwrap();
        assert!((flow.t_limit() - 1.0).abs() < 0.01);
        assert!(flow.snapshot(0.9).is_ok());
        assert!(matches!(flow.snapshot(1.05), Err(Error::NotRegular { .. })));
    }

    #[test]
    fn boundaries() {
        let s = smooth("1", "0", 0.0, 1.0, 2.0);
        let b = track_boundary(&s, 2.0, 4).unwrap();
        for (k, &t) in b.times.iter().enumerate() {
            assert!((b.left[k] - 0.5 * t * t).abs() < 1e-14);
            assert!((b.right[k] - 1.0 - 0.5 * t * t).abs() < 1e-14);
        }
        let s = smooth("0", "x", 0.0, 1.0, 2.0);
        let b = track_boundary(&s, 2.0, 4).unwrap();
        assert_eq!(b.left, vec![0.0; 5]);
        assert!((b.right[4] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn one_gap_right_end_crosses_at_root_two() {
        let s = build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            ForceModel::OneGap {
                f1: 1.0,
                f2: 2.0,
                a: 2.0,
            },
            InitialData::scalar(ScalarFn::constant(0.0)),
            3.0,
        )
        .unwrap();
        let b = track_boundary(&s, 2.0_f64.sqrt(), 1).unwrap();
        assert!((b.right[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn euler_global_verdicts() {
        let st = Settings::default();
        let v = check_euler_global(&smooth("1", "1 + tanh(x)", -5.0, 5.0, 10.0), &st).unwrap();
        assert_eq!(v.outcome, Outcome::Regular, "{v:?}");
        let v = check_euler_global(&smooth("0", "-atan(x)", -5.0, 5.0, 2.0), &st).unwrap();
        assert_eq!(v.outcome, Outcome::Collision);
        assert_eq!(v.criterion, Criterion::EulerGlobal);
    }
}
