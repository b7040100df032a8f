//! Single-particle trajectories: exact piecewise parabolas, numerical
//! solutions with region events, time-shifted blow-up curves and polar
//! orbits in central fields.

use std::sync::Arc;

use super::ode::{solve, DenseSolution, End, OdeOptions};
use crate::error::{Error, Result};
use crate::quadrature::work;
use crate::scenario::{BlowupCurve, ForceModel, Scenario, Velocity};

/// Upper bound on region changes of one exact path.
const MAX_SEGMENTS: usize = 100_000;

/// Uniform acceleration from `(t0, y0, v0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub y0: Vec<f64>,
    pub v0: Vec<f64>,
    pub a: Vec<f64>,
    pub region: usize,
}

impl Segment {
    fn state(&self, t: f64, y: &mut [f64], v: &mut [f64]) {
        let dt = t - self.t0;
        for k in 0..self.y0.len() {
            y[k] = self.y0[k] + self.v0[k] * dt + 0.5 * self.a[k] * dt * dt;
            v[k] = self.v0[k] + self.a[k] * dt;
        }
    }
}

/// Closed-form path through regions of constant force. The last segment
/// extends to `t_valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicPath {
    pub segments: Vec<Segment>,
    pub t_valid: f64,
}

impl ParabolicPath {
    fn segment_at(&self, t: f64) -> &Segment {
        let k = self
            .segments
            .partition_point(|s| s.t0 <= t)
            .saturating_sub(1);
        &self.segments[k]
    }

    pub fn state(&self, t: f64, y: &mut [f64], v: &mut [f64]) {
        self.segment_at(t).state(t, y, v);
    }

    pub fn last(&self) -> &Segment {
        self.segments.last().expect("path has a segment")
    }

    /// Times at which the path changes region.
    pub fn crossings(&self) -> Vec<(f64, usize, usize)> {
        self.segments
            .windows(2)
            .map(|w| (w[1].t0, w[0].region, w[1].region))
            .collect()
    }
}

/// Smallest s > 0 with y + v s + a s²/2 = target.
pub fn first_hit(y: f64, v: f64, a: f64, target: f64) -> Option<f64> {
    let c = y - target;
    let half = 0.5 * a;
    let roots: [f64; 2] = if half == 0.0 {
        if v == 0.0 {
            return None;
        }
        [-c / v, f64::NAN]
    } else {
        let disc = v * v - 4.0 * half * c;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (v + v.signum() * disc.sqrt());
        [q / half, if q == 0.0 { f64::NAN } else { c / q }]
    };
    roots
        .into_iter()
        .filter(|r| *r > 0.0 && r.is_finite())
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))))
}

/// Region index of `y` for sorted `bounds` (a point on a bound belongs to
/// the region above it).
fn region_of(bounds: &[f64], y: f64) -> usize {
    bounds.iter().take_while(|&&b| y >= b).count()
}

/// Exact propagation through slabs `bounds` along `axis`, with acceleration
/// `accel[r]` in slab `r`, up to `horizon`.
pub fn propagate_regions(
    x0: &[f64],
    v0: &[f64],
    axis: usize,
    bounds: &[f64],
    accel: &[Vec<f64>],
    horizon: f64,
) -> ParabolicPath {
    let d = x0.len();
    let r0 = region_of(bounds, x0[axis]);
    let mut seg = Segment {
        t0: 0.0,
        y0: x0.to_vec(),
        v0: v0.to_vec(),
        a: accel[r0].clone(),
        region: r0,
    };
    let mut segments = Vec::new();
    let mut t_valid = horizon;
    loop {
        let r = seg.region;
        let (y, v, a) = (seg.y0[axis], seg.v0[axis], seg.a[axis]);
        let up = (r < bounds.len())
            .then(|| first_hit(y, v, a, bounds[r]))
            .flatten();
        let down = (r > 0).then(|| first_hit(y, v, a, bounds[r - 1])).flatten();
        let next = match (up, down) {
            (Some(u), Some(dn)) if dn < u => Some((dn, r - 1, bounds[r - 1])),
            (Some(u), _) => Some((u, r + 1, bounds[r])),
            (None, Some(dn)) => Some((dn, r - 1, bounds[r - 1])),
            (None, None) => None,
        };
        let Some((s, r_new, b)) = next else {
            segments.push(seg);
            break;
        };
        let t_c = seg.t0 + s;
        if t_c > horizon {
            segments.push(seg);
            break;
        }
        if segments.len() + 1 >= MAX_SEGMENTS {
            t_valid = t_c;
            segments.push(seg);
            break;
        }
        let mut y1 = vec![0.0; d];
        let mut v1 = vec![0.0; d];
        seg.state(t_c, &mut y1, &mut v1);
        y1[axis] = b;
        let new = Segment {
            t0: t_c,
            y0: y1,
            v0: v1,
            a: accel[r_new].clone(),
            region: r_new,
        };
        segments.push(std::mem::replace(&mut seg, new));
    }
    ParabolicPath { segments, t_valid }
}

/// Numerical path; `pieces[k]` holds state `[y, v]` while in region `regions[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericPath {
    pub dim: usize,
    pub pieces: Vec<DenseSolution>,
    pub regions: Vec<usize>,
}

impl NumericPath {
    fn piece_at(&self, t: f64) -> usize {
        self.pieces
            .partition_point(|p| p.t_start <= t)
            .saturating_sub(1)
    }

    pub fn state(&self, t: f64, y: &mut [f64], v: &mut [f64]) {
        let p = &self.pieces[self.piece_at(t)];
        let mut buf = vec![0.0; 2 * self.dim];
        p.eval(t, &mut buf);
        y.copy_from_slice(&buf[..self.dim]);
        v.copy_from_slice(&buf[self.dim..]);
    }

    pub fn t_end(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.t_end)
    }
}

/// Orbit in a central field: state `[r, r', φ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarPath {
    pub sol: DenseSolution,
    /// Angular momentum per unit mass, r² φ'.
    pub momentum: f64,
}

impl PolarPath {
    pub fn polar(&self, t: f64) -> (f64, f64, f64) {
        let s = self.sol.at(t);
        (s[0], s[1], s[2])
    }

    pub fn state(&self, t: f64, y: &mut [f64], v: &mut [f64]) {
        let (r, dr, phi) = self.polar(t);
        let (s, c) = phi.sin_cos();
        let w = self.momentum / r;
        y[0] = r * c;
        y[1] = r * s;
        v[0] = dr * c - w * s;
        v[1] = dr * s + w * c;
    }
}

#[derive(Debug, Clone)]
pub enum Trajectory {
    Parabolic(ParabolicPath),
    Numeric(NumericPath),
    /// `y(t) = z(tau + t)` for a blow-up curve `z`.
    Curve {
        curve: Arc<BlowupCurve>,
        tau: f64,
    },
    Polar(PolarPath),
}

impl Trajectory {
    pub fn state(&self, t: f64, y: &mut [f64], v: &mut [f64]) {
        match self {
            Trajectory::Parabolic(p) => p.state(t, y, v),
            Trajectory::Numeric(p) => p.state(t, y, v),
            Trajectory::Curve { curve, tau } => {
                if tau.is_finite() {
                    y[0] = curve.z.eval(tau + t);
                    let dz = curve.dz.eval(tau + t);
                    v[0] = if dz.is_nan() { 0.0 } else { dz };
                } else {
                    y[0] = 0.0;
                    v[0] = 0.0;
                }
            }
            Trajectory::Polar(p) => p.state(t, y, v),
        }
    }

    pub fn position(&self, t: f64, y: &mut [f64]) {
        let mut v = vec![0.0; y.len()];
        self.state(t, y, &mut v);
    }

    pub fn position_vec(&self, t: f64, dim: usize) -> Vec<f64> {
        let mut y = vec![0.0; dim];
        self.position(t, &mut y);
        y
    }

    /// Closed-form rather than integrated.
    pub fn is_exact(&self) -> bool {
        matches!(self, Trajectory::Parabolic(_) | Trajectory::Curve { .. })
    }

    /// Force region occupied at `t`.
    pub fn region(&self, t: f64) -> usize {
        match self {
            Trajectory::Parabolic(p) => p.segment_at(t).region,
            Trajectory::Numeric(p) => p.regions[p.piece_at(t)],
            _ => 0,
        }
    }

    /// Region changes as `(time, from, to)`.
    pub fn crossings(&self) -> Vec<(f64, usize, usize)> {
        match self {
            Trajectory::Parabolic(p) => p.crossings(),
            Trajectory::Numeric(p) => p
                .pieces
                .iter()
                .zip(&p.regions)
                .skip(1)
                .zip(&p.regions)
                .map(|((piece, &to), &from)| (piece.t_start, from, to))
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Mass lookup key: the coordinate on the line, the radius in the plane.
pub(crate) fn mass_key(x0: &[f64]) -> f64 {
    if x0.len() == 1 {
        x0[0]
    } else {
        x0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn scaled(f: &[f64], m: f64) -> Vec<f64> {
    f.iter().map(|v| v / m).collect()
}

/// Slabs and per-slab forces of a region-based force, with the slab axis.
fn slabs(force: &ForceModel) -> Option<(usize, Vec<f64>, Vec<Vec<f64>>)> {
    match force {
        ForceModel::OneGap { .. } | ForceModel::TwoGap { .. } => {
            let p = force.piecewise()?;
            Some((0, p.bounds, p.forces.iter().map(|&f| vec![f]).collect()))
        }
        ForceModel::HalfSpaceStep { f1, f2, a } => {
            Some((f1.len() - 1, vec![*a], vec![f1.clone(), f2.clone()]))
        }
        ForceModel::ConstantVec { f } => Some((0, vec![], vec![f.clone()])),
        ForceModel::Smooth1D { force } => force.as_constant().map(|c| (0, vec![], vec![vec![c]])),
        _ => None,
    }
}

/// Exact path through a one- or two-gap force.
pub fn propagate_piecewise_1d(s: &Scenario, x0: f64, horizon: f64) -> Result<ParabolicPath> {
    let p = s.force.piecewise().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "{} force is not piecewise constant",
            s.force.kind()
        ))
    })?;
    let m = s.init.mass.eval(x0);
    let accel: Vec<Vec<f64>> = p.forces.iter().map(|f| vec![f / m]).collect();
    Ok(propagate_regions(
        &[x0],
        &[s.v(x0)],
        0,
        &p.bounds,
        &accel,
        horizon,
    ))
}

/// Exact two-phase path under a half-space step force.
pub fn propagate_halfspace(s: &Scenario, x0: &[f64], horizon: f64) -> Result<ParabolicPath> {
    let ForceModel::HalfSpaceStep { f1, f2, a } = &s.force else {
        return Err(Error::InvalidParameter(format!(
            "{} force is not a half-space step",
            s.force.kind()
        )));
    };
    let m = s.init.mass.eval(mass_key(x0));
    let v0 = s.init.velocity_at(x0);
    Ok(propagate_regions(
        x0,
        &v0,
        f1.len() - 1,
        &[*a],
        &[scaled(f1, m), scaled(f2, m)],
        horizon,
    ))
}

/// Adaptive integration of `m y'' = F(y)` to `horizon`. Region-based forces
/// are integrated piece by piece with events on the slab boundaries; on the
/// line the energy drift of each step is bounded by 1e-8 (1 + |H0|).
pub fn propagate_numeric(
    s: &Scenario,
    x0: &[f64],
    horizon: f64,
    opts: &OdeOptions,
) -> Result<NumericPath> {
    if !horizon.is_finite() {
        return Err(Error::InfiniteHorizon);
    }
    let d = x0.len();
    let m = s.init.mass.eval(mass_key(x0));
    let v0 = s.init.velocity_at(x0);
    let layout = match &s.force {
        ForceModel::OneGap { .. }
        | ForceModel::TwoGap { .. }
        | ForceModel::HalfSpaceStep { .. } => slabs(&s.force),
        _ => None,
    };

    let mut state: Vec<f64> = x0.iter().chain(&v0).copied().collect();
    let mut t = 0.0;
    let mut pieces = Vec::new();
    let mut regions = Vec::new();
    let energy_check = d == 1
        && matches!(
            s.force,
            ForceModel::Smooth1D { .. } | ForceModel::Linear { .. }
        );
    let h_scale = if energy_check {
        let u0 = -work(&s.force, 0.0, x0[0])?;
        1e-8 * (1.0 + (0.5 * m * v0[0] * v0[0] + u0).abs())
    } else {
        0.0
    };
    // work done since t = 0, accumulated over accepted steps
    let mut w_acc = 0.0;
    let e0 = 0.5 * m * v0[0] * v0[0];

    loop {
        let region = layout
            .as_ref()
            .map_or(0, |(axis, b, _)| region_of(b, state[*axis]));
        let fixed: Option<Vec<f64>> = layout.as_ref().map(|(_, _, f)| scaled(&f[region], m));
        let force = &s.force;
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[..d].copy_from_slice(&y[d..]);
            match &fixed {
                Some(a) => dy[d..].copy_from_slice(a),
                None => {
                    force.eval_into(&y[..d], &mut dy[d..]);
                    for v in &mut dy[d..] {
                        *v /= m;
                    }
                }
            }
        };
        let accept = |y_old: &[f64], y_new: &[f64]| {
            if !energy_check {
                return true;
            }
            let Ok(dw) = work(force, y_old[0], y_new[0]) else {
                return false;
            };
            let drift = 0.5 * m * y_new[1] * y_new[1] - (w_acc + dw) - e0;
            if drift.abs() <= h_scale {
                w_acc += dw;
                true
            } else {
                false
            }
        };
        let switch_fn;
        let switch: Option<&dyn Fn(&[f64]) -> f64> = match &layout {
            Some((axis, b, _)) if !b.is_empty() => {
                let lo = if region > 0 {
                    b[region - 1]
                } else {
                    f64::NEG_INFINITY
                };
                let hi = b.get(region).copied().unwrap_or(f64::INFINITY);
                let axis = *axis;
                switch_fn = move |y: &[f64]| (y[axis] - lo).min(hi - y[axis]);
                Some(&switch_fn)
            }
            _ => None,
        };
        let (sol, end) = solve(rhs, t, &state, horizon, opts, accept, switch)?;
        t = sol.t_end;
        state = sol.y_end.clone();
        pieces.push(sol);
        regions.push(region);
        match end {
            End::Reached => break,
            End::Event => {
                let (axis, b, _) = layout.as_ref().expect("events need slabs");
                // snap onto the boundary that was hit, then pick the side by velocity
                let k = b
                    .iter()
                    .enumerate()
                    .min_by(|p, q| {
                        (p.1 - state[*axis])
                            .abs()
                            .total_cmp(&(q.1 - state[*axis]).abs())
                    })
                    .map(|(k, _)| k)
                    .expect("slabs have a bound");
                state[*axis] = b[k];
                if state[d + axis] < 0.0 {
                    state[*axis] = b[k].next_down();
                }
                if pieces.len() >= MAX_SEGMENTS {
                    return Err(Error::StepFailure { t });
                }
            }
        }
    }
    Ok(NumericPath {
        dim: d,
        pieces,
        regions,
    })
}

/// Radial ODE r'' = −U'(r)/m + M²/r³ with φ' = M/r², M = r0² h(r0).
pub fn propagate_central(
    s: &Scenario,
    x0: &[f64],
    horizon: f64,
    opts: &OdeOptions,
) -> Result<PolarPath> {
    let (ForceModel::Central { potential }, Velocity::Radial { g, h }) =
        (&s.force, &s.init.velocity)
    else {
        return Err(Error::InvalidParameter(
            "central propagation needs a central scenario".into(),
        ));
    };
    if !horizon.is_finite() {
        return Err(Error::InfiniteHorizon);
    }
    let r0 = x0[0].hypot(x0[1]);
    let phi0 = x0[1].atan2(x0[0]);
    let m = s.init.mass.eval(r0);
    let momentum = r0 * r0 * h.eval(r0);
    let energy = |r: f64, dr: f64| {
        0.5 * dr * dr + potential.eval(r) / m + momentum * momentum / (2.0 * r * r)
    };
    let g0 = g.eval(r0);
    let e0 = energy(r0, g0);
    let tol = 1e-8 * (1.0 + e0.abs());
    let r_min = 1e-6 * s.domain.bounds_1d().0;
    let guard = move |y: &[f64]| y[0] - r_min;
    let (sol, end) = solve(
        |_, y, dy| {
            let r = y[0];
            dy[0] = y[1];
            dy[1] = -potential.deriv(r) / m + momentum * momentum / (r * r * r);
            dy[2] = momentum / (r * r);
        },
        0.0,
        &[r0, g0, phi0],
        horizon,
        opts,
        |_, y| (energy(y[0], y[1]) - e0).abs() <= tol,
        Some(&guard),
    )?;
    if end == End::Event {
        return Err(Error::OriginApproach { t: sol.t_end });
    }
    Ok(PolarPath { sol, momentum })
}

/// Trajectory of the particle labelled `x0` up to `horizon`, exact where a
/// closed form exists.
pub fn trajectory(s: &Scenario, x0: &[f64], horizon: f64, opts: &OdeOptions) -> Result<Trajectory> {
    if let Some(curve) = &s.blowup {
        return Ok(Trajectory::Curve {
            tau: curve.time_of(x0[0]),
            curve: Arc::new(curve.clone()),
        });
    }
    if let ForceModel::Central { .. } = s.force {
        return propagate_central(s, x0, horizon, opts).map(Trajectory::Polar);
    }
    if let Some((axis, bounds, forces)) = slabs(&s.force) {
        let m = s.init.mass.eval(mass_key(x0));
        let accel: Vec<Vec<f64>> = forces.iter().map(|f| scaled(f, m)).collect();
        let v0 = s.init.velocity_at(x0);
        return Ok(Trajectory::Parabolic(propagate_regions(
            x0, &v0, axis, &bounds, &accel, horizon,
        )));
    }
    propagate_numeric(s, x0, horizon, opts).map(Trajectory::Numeric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::ScalarFn;
    use crate::scenario::{build_scenario, Domain, InitialData};
    use approx::assert_abs_diff_eq;

    fn gap(force: ForceModel, v: &str) -> Scenario {
        build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            force,
            InitialData::scalar(ScalarFn::parse(v).unwrap()),
            f64::INFINITY,
        )
        .unwrap()
    }

    #[test]
    fn hit_times() {
        assert_abs_diff_eq!(
            first_hit(1.0, 1.0, 1.0, 2.0).unwrap(),
            -1.0 + 3f64.sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(first_hit(0.0, 1.0, -1.0, 0.0), Some(2.0));
        assert_eq!(first_hit(0.0, 0.0, 0.0, 1.0), None);
        assert_eq!(first_hit(0.0, 1.0, -2.0, 1.0), None);
    }

    #[test]
    fn one_gap_crossing_from_rest() {
        let s = gap(
            ForceModel::OneGap {
                f1: 2.0,
                f2: 5.0,
                a: 2.0,
            },
            "0",
        );
        let p = propagate_piecewise_1d(&s, 0.0, f64::INFINITY).unwrap();
        assert_eq!(p.segments.len(), 2);
        assert_abs_diff_eq!(p.segments[1].t0, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.segments[1].v0[0], 2.0 * 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn two_gap_reaches_b_exactly() {
        let s = gap(
            ForceModel::TwoGap {
                f1: 2.0,
                f2: 1.0,
                f3: 3.0,
                a: 2.0,
                b: 3.0,
            },
            "0",
        );
        let p = propagate_piecewise_1d(&s, 0.0, f64::INFINITY).unwrap();
        let tb = p.segments[2].t0;
        let (mut y, mut v) = ([0.0], [0.0]);
        p.segments[1].state(tb, &mut y, &mut v);
        assert_abs_diff_eq!(y[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_linear_force_matches_cosh() {
        let s = build_scenario(
            Domain::interval(0.0, 2.0).unwrap(),
            ForceModel::Smooth1D {
                force: ScalarFn::parse("y").unwrap(),
            },
            InitialData::scalar(ScalarFn::constant(0.0)),
            1.0,
        )
        .unwrap();
        let p = propagate_numeric(&s, &[1.0], 1.0, &OdeOptions::default()).unwrap();
        let (mut y, mut v) = ([0.0], [0.0]);
        p.state(1.0, &mut y, &mut v);
        assert_abs_diff_eq!(y[0], 1f64.cosh(), epsilon = 1e-9);
    }

    #[test]
    fn numeric_gap_agrees_with_exact() {
        let mut s = gap(
            ForceModel::OneGap {
                f1: 1.0,
                f2: 3.0,
                a: 1.5,
            },
            "0.5",
        );
        s.horizon = 3.0;
        let exact = propagate_piecewise_1d(&s, 0.25, 3.0).unwrap();
        let num = propagate_numeric(&s, &[0.25], 3.0, &OdeOptions::default()).unwrap();
        assert_eq!(num.regions, vec![0, 1]);
        for k in 0..=30 {
            let t = 0.1 * k as f64;
            let (mut a, mut b, mut va, mut vb) = ([0.0], [0.0], [0.0], [0.0]);
            exact.state(t, &mut a, &mut va);
            num.state(t, &mut b, &mut vb);
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-8);
        }
    }

    #[test]
    fn halfspace_lateral_velocity_after_crossing() {
        let s = build_scenario(
            Domain::boxed(vec![-0.1, -0.1], vec![0.1, 0.1]).unwrap(),
            ForceModel::HalfSpaceStep {
                f1: vec![0.0, 1.0],
                f2: vec![1.0, 1.0],
                a: 0.5,
            },
            InitialData::new(Velocity::Vector(crate::func::VectorFn::constant(&[
                0.0, 0.0,
            ]))),
            5.0,
        )
        .unwrap();
        let p = propagate_halfspace(&s, &[0.0, 0.0], 5.0).unwrap();
        let t_c = p.segments[1].t0;
        assert_abs_diff_eq!(t_c, 1.0, epsilon = 1e-15);
        let (mut y, mut v) = ([0.0; 2], [0.0; 2]);
        p.state(t_c + 2.0, &mut y, &mut v);
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn centrifugal_orbit() {
        let s = build_scenario(
            Domain::annulus(0.5, 2.0).unwrap(),
            ForceModel::Central {
                potential: ScalarFn::constant(0.0),
            },
            InitialData::new(Velocity::Radial {
                g: ScalarFn::constant(0.0),
                h: ScalarFn::constant(1.0),
            }),
            3.0,
        )
        .unwrap();
        let p = propagate_central(&s, &[1.0, 0.0], 3.0, &OdeOptions::default()).unwrap();
        for k in 0..=6 {
            let t = 0.5 * k as f64;
            assert_abs_diff_eq!(p.polar(t).0, (1.0 + t * t).sqrt(), epsilon = 1e-8);
        }
    }
}
