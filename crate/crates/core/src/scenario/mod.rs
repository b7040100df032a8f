//! Problem statements: domains, force models, initial fields and horizons.

mod assumptions;
mod blowup;
mod file;

pub use assumptions::{assumptions_report, cutoff, CriterionReport, HypothesisCheck, Status};
pub use blowup::{build_blowup_scenario, BlowupCurve};
pub use file::{from_toml_str, read_scenario, to_toml_string, write_scenario};

use crate::error::{Error, Result};
use crate::func::{ScalarFn, VectorFn};

/// Initial configuration Λ₀: an axis-aligned box (an interval in 1D) or a
/// planar annulus.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        open_lower: Vec<bool>,
        open_upper: Vec<bool>,
    },
    Annulus {
        r1: f64,
        r2: f64,
    },
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidParameter(
                "box bounds must be non-empty and of equal length".into(),
            ));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidParameter(format!(
                    "box axis {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        let d = lower.len();
        Ok(Domain::Box {
            lower,
            upper,
            open_lower: vec![false; d],
            open_upper: vec![false; d],
        })
    }

    pub fn annulus(r1: f64, r2: f64) -> Result<Self> {
        if !(r1 > 0.0 && r1 < r2 && r2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "annulus needs 0 < R1 < R2 < inf, got R1 = {r1}, R2 = {r2}"
            )));
        }
        Ok(Domain::Annulus { r1, r2 })
    }

    /// Mark endpoints of `axis` as excluded from the domain.
    pub fn with_open(mut self, axis: usize, lower: bool, upper: bool) -> Self {
        if let Domain::Box {
            open_lower,
            open_upper,
            ..
        } = &mut self
        {
            open_lower[axis] = lower;
            open_upper[axis] = upper;
        }
        self
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Annulus { .. } => 2,
        }
    }

    /// `(lower, upper)` of a 1D box.
    pub fn bounds_1d(&self) -> (f64, f64) {
        match self {
            Domain::Box { lower, upper, .. } => (lower[0], upper[0]),
            Domain::Annulus { r1, r2 } => (*r1, *r2),
        }
    }

    pub fn lower(&self) -> Vec<f64> {
        match self {
            Domain::Box { lower, .. } => lower.clone(),
            Domain::Annulus { r2, .. } => vec![-r2, -r2],
        }
    }

    pub fn upper(&self) -> Vec<f64> {
        match self {
            Domain::Box { upper, .. } => upper.clone(),
            Domain::Annulus { r2, .. } => vec![*r2, *r2],
        }
    }

    /// Largest extent over the coordinates.
    pub fn span(&self) -> f64 {
        self.lower()
            .iter()
            .zip(self.upper())
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box {
                lower,
                upper,
                open_lower,
                open_upper,
            } => x.iter().enumerate().all(|(i, &v)| {
                let lo_ok = if open_lower[i] {
                    v > lower[i]
                } else {
                    v >= lower[i]
                };
                let hi_ok = if open_upper[i] {
                    v < upper[i]
                } else {
                    v <= upper[i]
                };
                lo_ok && hi_ok
            }),
            Domain::Annulus { r1, r2 } => {
                let r = x[0].hypot(x[1]);
                r > *r1 && r < *r2
            }
        }
    }

    /// `n` uniform samples of box axis `axis`. Closed endpoints are included;
    /// open endpoints are replaced by cell-centred offsets.
    pub fn sample_axis(&self, axis: usize, n: usize) -> Vec<f64> {
        let (lo, hi, ol, ou) = match self {
            Domain::Box {
                lower,
                upper,
                open_lower,
                open_upper,
            } => (lower[axis], upper[axis], open_lower[axis], open_upper[axis]),
            Domain::Annulus { r1, r2 } => (*r1, *r2, true, true),
        };
        uniform_points(lo, hi, n, ol, ou)
    }

    /// Tensor-grid samples (row-major, last axis fastest). For an annulus the
    /// counts are `[radial, angular]` and points are returned in Cartesian
    /// coordinates.
    pub fn sample(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        match self {
            Domain::Annulus { .. } => {
                let radii = self.sample_axis(0, counts[0]);
                let na = counts.get(1).copied().unwrap_or(counts[0]);
                let mut pts = Vec::with_capacity(radii.len() * na);
                for &r in &radii {
                    for j in 0..na {
                        let phi = std::f64::consts::TAU * j as f64 / na as f64;
                        pts.push(vec![r * phi.cos(), r * phi.sin()]);
                    }
                }
                pts
            }
            Domain::Box { .. } => {
                let axes: Vec<Vec<f64>> = (0..self.dim())
                    .map(|a| self.sample_axis(a, counts[a.min(counts.len() - 1)]))
                    .collect();
                let total: usize = axes.iter().map(Vec::len).product();
                let mut pts = Vec::with_capacity(total);
                let mut idx = vec![0usize; axes.len()];
                for _ in 0..total {
                    pts.push(idx.iter().enumerate().map(|(a, &i)| axes[a][i]).collect());
                    for a in (0..axes.len()).rev() {
                        idx[a] += 1;
                        if idx[a] < axes[a].len() {
                            break;
                        }
                        idx[a] = 0;
                    }
                }
                pts
            }
        }
    }
}

pub(crate) fn uniform_points(lo: f64, hi: f64, n: usize, open_lo: bool, open_hi: bool) -> Vec<f64> {
    let n = n.max(2);
    let span = hi - lo;
    let nf = n as f64;
    (0..n)
        .map(|i| {
            let i = i as f64;
            let s = match (open_lo, open_hi) {
                (false, false) => i / (nf - 1.0),
                (true, false) => (i + 1.0) / nf,
                (false, true) => i / nf,
                (true, true) => (i + 0.5) / nf,
            };
            if s == 1.0 {
                hi
            } else {
                lo + span * s
            }
        })
        .collect()
}

/// External force acting on every particle.
#[derive(Debug, Clone)]
pub enum ForceModel {
    /// Smooth force on the line, F(y) with derivative.
    Smooth1D { force: ScalarFn },
    /// F1 on y < A, F2 on y >= A.
    OneGap { f1: f64, f2: f64, a: f64 },
    /// F1 on y < A, F2 on A <= y < B, F3 on y >= B.
    TwoGap {
        f1: f64,
        f2: f64,
        f3: f64,
        a: f64,
        b: f64,
    },
    /// Uniform vector force.
    ConstantVec { f: Vec<f64> },
    /// F1 where the last coordinate is below A, F2 above.
    HalfSpaceStep { f1: Vec<f64>, f2: Vec<f64>, a: f64 },
    /// F(y) = M y + b.
    Linear { matrix: Vec<Vec<f64>>, b: Vec<f64> },
    /// Central force with potential U(r): F = -U'(r) y/|y|.
    Central { potential: ScalarFn },
}

/// Piecewise-constant 1D force: `forces[k]` acts on `[bounds[k-1], bounds[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseForce {
    pub bounds: Vec<f64>,
    pub forces: Vec<f64>,
}

impl PiecewiseForce {
    pub fn region(&self, y: f64) -> usize {
        self.bounds.iter().take_while(|&&b| y >= b).count()
    }

    pub fn force(&self, y: f64) -> f64 {
        self.forces[self.region(y)]
    }

    /// ∫_0^y F exactly (negated potential).
    pub fn work_from_origin(&self, y: f64) -> f64 {
        self.work(0.0, y)
    }

    /// ∫_a^b F exactly.
    pub fn work(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.work(b, a);
        }
        let mut total = 0.0;
        let mut lo = a;
        for (k, &f) in self.forces.iter().enumerate() {
            let hi_k = self.bounds.get(k).copied().unwrap_or(f64::INFINITY);
            if hi_k <= lo {
                continue;
            }
            let hi = hi_k.min(b);
            if hi > lo {
                total += f * (hi - lo);
                lo = hi;
            }
            if lo >= b {
                break;
            }
        }
        total
    }
}

impl ForceModel {
    pub fn dim(&self) -> usize {
        match self {
            ForceModel::Smooth1D { .. } | ForceModel::OneGap { .. } | ForceModel::TwoGap { .. } => {
                1
            }
            ForceModel::ConstantVec { f } => f.len(),
            ForceModel::HalfSpaceStep { f1, .. } => f1.len(),
            ForceModel::Linear { b, .. } => b.len(),
            ForceModel::Central { .. } => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ForceModel::Smooth1D { .. } => "smooth",
            ForceModel::OneGap { .. } => "one_gap",
            ForceModel::TwoGap { .. } => "two_gap",
            ForceModel::ConstantVec { .. } => "constant",
            ForceModel::HalfSpaceStep { .. } => "half_space",
            ForceModel::Linear { .. } => "linear",
            ForceModel::Central { .. } => "central",
        }
    }

    /// Check the parameter constraints of each force class.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            ForceModel::Smooth1D { .. } | ForceModel::Central { .. } => Ok(()),
            &ForceModel::OneGap { f1, f2, a } => {
                if !(f1 > 0.0) {
                    bad(format!("one_gap needs F1 > 0, got {f1}"))
                } else if !(f2 >= 0.0) {
                    bad(format!("one_gap needs F2 >= 0, got {f2}"))
                } else if !(a > 1.0) {
                    bad(format!("one_gap needs A > 1, got {a}"))
                } else {
                    Ok(())
                }
            }
            &ForceModel::TwoGap { f1, f2, f3, a, b } => {
                if !(f2 > 0.0 && f2 < f1) {
                    bad(format!(
                        "two_gap needs 0 < F2 < F1, got F1 = {f1}, F2 = {f2}"
                    ))
                } else if !(f2 < f3) {
                    bad(format!("two_gap needs F2 < F3, got F2 = {f2}, F3 = {f3}"))
                } else if !(1.0 < a && a < b) {
                    bad(format!("two_gap needs 1 < A < B, got A = {a}, B = {b}"))
                } else {
                    Ok(())
                }
            }
            ForceModel::ConstantVec { f } => {
                if f.is_empty() || f.iter().any(|v| !v.is_finite()) {
                    bad("constant force must be a finite non-empty vector".into())
                } else {
                    Ok(())
                }
            }
            ForceModel::HalfSpaceStep { f1, f2, a } => {
                if f1.is_empty() || f1.len() != f2.len() {
                    return bad("half_space forces must have equal non-zero length".into());
                }
                let d = f1.len() - 1;
                if !(f1[d] > 0.0) {
                    bad(format!(
                        "half_space needs a positive last component of F1, got {}",
                        f1[d]
                    ))
                } else if !(*a > 0.0) {
                    bad(format!("half_space needs A > 0, got {a}"))
                } else {
                    Ok(())
                }
            }
            ForceModel::Linear { matrix, b } => {
                let d = b.len();
                if d == 0 || matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
                    bad(format!("linear force needs a {d}x{d} matrix"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Piecewise-constant description of the gap forces.
    pub fn piecewise(&self) -> Option<PiecewiseForce> {
        match *self {
            ForceModel::OneGap { f1, f2, a } => Some(PiecewiseForce {
                bounds: vec![a],
                forces: vec![f1, f2],
            }),
            ForceModel::TwoGap { f1, f2, f3, a, b } => Some(PiecewiseForce {
                bounds: vec![a, b],
                forces: vec![f1, f2, f3],
            }),
            _ => None,
        }
    }

    /// Force at a point of the line.
    pub fn eval1(&self, y: f64) -> f64 {
        match self {
            ForceModel::Smooth1D { force } => force.eval(y),
            ForceModel::OneGap { .. } | ForceModel::TwoGap { .. } => {
                self.piecewise().map(|p| p.force(y)).unwrap_or(f64::NAN)
            }
            _ => self.eval(&[y])[0],
        }
    }

    /// Force vector at `y`.
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(y, &mut out);
        out
    }

    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            ForceModel::Smooth1D { force } => out[0] = force.eval(y[0]),
            ForceModel::OneGap { .. } | ForceModel::TwoGap { .. } => out[0] = self.eval1(y[0]),
            ForceModel::ConstantVec { f } => out.copy_from_slice(f),
            ForceModel::HalfSpaceStep { f1, f2, a } => {
                let d = f1.len() - 1;
                out.copy_from_slice(if y[d] < *a { f1 } else { f2 });
            }
            ForceModel::Linear { matrix, b } => {
                for (i, row) in matrix.iter().enumerate() {
                    out[i] = b[i] + row.iter().zip(y).map(|(m, v)| m * v).sum::<f64>();
                }
            }
            ForceModel::Central { potential } => {
                let r = y[0].hypot(y[1]);
                let s = -potential.deriv(r) / r;
                out[0] = s * y[0];
                out[1] = s * y[1];
            }
        }
    }
}

/// Initial velocity field.
#[derive(Debug, Clone)]
pub enum Velocity {
    /// v(x) on the line.
    Scalar(ScalarFn),
    /// v(x) in R^d.
    Vector(VectorFn),
    /// Radial speed g(|x|) and angular speed h(|x|) in the plane.
    Radial { g: ScalarFn, h: ScalarFn },
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub velocity: Velocity,
    pub mass: ScalarFn,
    pub density: ScalarFn,
}

impl InitialData {
    /// Unit mass and density.
    pub fn new(velocity: Velocity) -> Self {
        InitialData {
            velocity,
            mass: ScalarFn::constant(1.0),
            density: ScalarFn::constant(1.0),
        }
    }

    pub fn scalar(v: ScalarFn) -> Self {
        Self::new(Velocity::Scalar(v))
    }

    pub fn with_mass(mut self, m: ScalarFn) -> Self {
        self.mass = m;
        self
    }

    pub fn with_density(mut self, rho: ScalarFn) -> Self {
        self.density = rho;
        self
    }

    /// 1D velocity handle, if the field is scalar.
    pub fn v1(&self) -> Option<&ScalarFn> {
        match &self.velocity {
            Velocity::Scalar(v) => Some(v),
            _ => None,
        }
    }

    /// Velocity vector at `x`.
    pub fn velocity_at(&self, x: &[f64]) -> Vec<f64> {
        match &self.velocity {
            Velocity::Scalar(v) => vec![v.eval(x[0])],
            Velocity::Vector(v) => v.eval(x),
            Velocity::Radial { g, h } => {
                let r = x[0].hypot(x[1]);
                let (gr, hr) = (g.eval(r), h.eval(r));
                let (c, s) = (x[0] / r, x[1] / r);
                vec![gr * c - r * hr * s, gr * s + r * hr * c]
            }
        }
    }
}

/// Sample counts per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn default_for(dim: usize) -> Self {
        let counts = match dim {
            1 => vec![512],
            2 => vec![64, 64],
            d => vec![16; d],
        };
        GridSpec { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().product()
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub domain: Domain,
    pub force: ForceModel,
    pub init: InitialData,
    /// Final time; `f64::INFINITY` for open-ended questions.
    pub horizon: f64,
    pub grid: GridSpec,
    /// Set when the scenario was generated from a decreasing curve.
    pub blowup: Option<BlowupCurve>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_1d(&self) -> bool {
        self.dim() == 1
    }

    pub fn with_grid(mut self, counts: Vec<usize>) -> Self {
        self.grid = GridSpec { counts };
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    /// Grid of initial labels.
    pub fn labels(&self) -> Vec<Vec<f64>> {
        self.domain.sample(&self.grid.counts)
    }

    /// Labels of a 1D scenario.
    pub fn labels_1d(&self) -> Vec<f64> {
        self.domain.sample_axis(0, self.grid.counts[0])
    }

    pub fn v(&self, x: f64) -> f64 {
        self.init.v1().map_or(f64::NAN, |v| v.eval(x))
    }

    pub fn dv(&self, x: f64) -> f64 {
        self.init.v1().map_or(f64::NAN, |v| v.deriv(x))
    }

    /// True when every sampled velocity is exactly zero.
    pub fn velocity_vanishes(&self) -> bool {
        self.labels()
            .iter()
            .all(|x| self.init.velocity_at(x).iter().all(|&c| c == 0.0))
    }
}

/// Validate and assemble a scenario.
pub fn build_scenario(
    domain: Domain,
    force: ForceModel,
    init: InitialData,
    horizon: f64,
) -> Result<Scenario> {
    force.validate()?;
    let dim = domain.dim();
    if force.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: force.dim(),
        });
    }
    match (&init.velocity, &force, &domain) {
        (Velocity::Scalar(_), _, _) if dim != 1 => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: 1,
            })
        }
        (Velocity::Vector(v), _, _) if v.dim() != dim => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.dim(),
            })
        }
        (Velocity::Radial { .. }, ForceModel::Central { .. }, Domain::Annulus { .. }) => {}
        (Velocity::Radial { .. }, _, _) => {
            return Err(Error::InvalidParameter(
                "radial velocity data requires a central force on an annulus".into(),
            ))
        }
        (_, ForceModel::Central { .. }, _) => {
            return Err(Error::InvalidParameter(
                "central force requires radial velocity data (g, h)".into(),
            ))
        }
        _ => {}
    }
    if matches!(force, ForceModel::Central { .. }) != matches!(domain, Domain::Annulus { .. }) {
        return Err(Error::InvalidParameter(
            "annulus domains go with central forces and vice versa".into(),
        ));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let scenario = Scenario {
        grid: GridSpec::default_for(dim),
        domain,
        force,
        init,
        horizon,
        blowup: None,
    };
    check_fields(&scenario)?;
    Ok(scenario)
}

/// Mass positive and all fields finite on a coarse probe grid.
fn check_fields(s: &Scenario) -> Result<()> {
    let probe = GridSpec::default_for(s.dim())
        .counts
        .iter()
        .map(|&c| c.min(65))
        .collect::<Vec<_>>();
    for x in s.domain.sample(&probe) {
        let key = if s.is_1d() { x[0] } else { x[0].hypot(x[1]) };
        let m = s.init.mass.eval(key);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass must be positive and finite, got m = {m} at {x:?}"
            )));
        }
        let rho = s.init.density.eval(key);
        if !rho.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "density is not finite at {x:?}"
            )));
        }
        if s.init.velocity_at(&x).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "velocity is not finite at {x:?}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v0() -> InitialData {
        InitialData::scalar(ScalarFn::constant(0.0))
    }

    #[test]
    fn one_gap_scenario_is_valid() {
        let s = build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            ForceModel::OneGap {
                f1: 1.0,
                f2: 2.0,
                a: 2.0,
            },
            v0(),
            f64::INFINITY,
        )
        .unwrap();
        assert_eq!(s.labels_1d().len(), 512);
        assert!(s.velocity_vanishes());
    }

    #[test]
    fn two_gap_requires_f2_below_f1() {
        let err = build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            ForceModel::TwoGap {
                f1: 1.0,
                f2: 2.0,
                f3: 3.0,
                a: 2.0,
                b: 3.0,
            },
            v0(),
            f64::INFINITY,
        )
        .unwrap_err();
        match err {
            Error::InvalidParameter(msg) => assert!(msg.contains("F2 < F1"), "{msg}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            ForceModel::ConstantVec { f: vec![0.0, 1.0] },
            v0(),
            1.0,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn half_space_needs_positive_normal_force() {
        let err = ForceModel::HalfSpaceStep {
            f1: vec![1.0, 0.0],
            f2: vec![0.0, 1.0],
            a: 2.0,
        }
        .validate();
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn negative_mass_rejected() {
        let err = build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            ForceModel::Smooth1D {
                force: ScalarFn::constant(1.0),
            },
            v0().with_mass(ScalarFn::parse("x - 0.5").unwrap()),
            1.0,
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn open_endpoints_are_not_sampled() {
        let d = Domain::interval(0.0, 1.0)
            .unwrap()
            .with_open(0, true, false);
        let pts = d.sample_axis(0, 4);
        assert_eq!(pts, vec![0.25, 0.5, 0.75, 1.0]);
        assert!(!d.contains(&[0.0]));
        let closed = Domain::interval(-5.0, 5.0).unwrap().sample_axis(0, 2001);
        assert_eq!(closed[1000], 0.0);
        assert_eq!(closed[2000], 5.0);
    }

    #[test]
    fn piecewise_work_is_exact() {
        let p = ForceModel::OneGap {
            f1: 1.0,
            f2: 2.0,
            a: 2.0,
        }
        .piecewise()
        .unwrap();
        assert_eq!(p.work_from_origin(3.0), 4.0);
        assert_eq!(p.work(2.5, 1.0), -(1.0 + 1.0));
        assert_eq!(p.region(2.0), 1);
    }

    #[test]
    fn annulus_sampling_is_interior() {
        let d = Domain::annulus(1.0, 2.0).unwrap();
        let pts = d.sample(&[8, 16]);
        assert_eq!(pts.len(), 128);
        assert!(pts.iter().all(|p| d.contains(p)));
    }
}
