//! Sampled hypothesis checks for every criterion that matches a scenario's
//! force class.

use std::fmt;

use super::{Domain, ForceModel, Scenario, Velocity};
use crate::probe::{force_monotone, velocity_monotone};
use crate::quadrature::EnergyProfile;
use crate::regularity::{linear_spectrum, Criterion};
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Yes => "yes",
            Status::No => "no",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: String,
    pub status: Status,
    /// Failing sample, or the reason the check is undecided.
    pub witness: Option<String>,
}

impl HypothesisCheck {
    fn yes(name: &str) -> Self {
        HypothesisCheck {
            name: name.into(),
            status: Status::Yes,
            witness: None,
        }
    }

    fn no(name: &str, witness: String) -> Self {
        HypothesisCheck {
            name: name.into(),
            status: Status::No,
            witness: Some(witness),
        }
    }

    fn unknown(name: &str, why: String) -> Self {
        HypothesisCheck {
            name: name.into(),
            status: Status::Unknown,
            witness: Some(why),
        }
    }

    fn from_bool(name: &str, ok: bool, witness: impl FnOnce() -> String) -> Self {
        if ok {
            Self::yes(name)
        } else {
            Self::no(name, witness())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub hypotheses: Vec<HypothesisCheck>,
}

impl CriterionReport {
    /// `No` if any hypothesis fails, else `Unknown` if any is undecided.
    pub fn status(&self) -> Status {
        let mut status = Status::Yes;
        for h in &self.hypotheses {
            match h.status {
                Status::No => return Status::No,
                Status::Unknown => status = Status::Unknown,
                Status::Yes => {}
            }
        }
        status
    }

    /// First failing or undecided hypothesis.
    pub fn first_problem(&self) -> Option<&HypothesisCheck> {
        self.hypotheses
            .iter()
            .find(|h| h.status == Status::No)
            .or_else(|| self.hypotheses.iter().find(|h| h.status == Status::Unknown))
    }
}

/// End of the truncated range `y ≤ upper + K·span`.
pub fn cutoff(s: &Scenario, settings: &Settings) -> f64 {
    let (_, hi) = s.domain.bounds_1d();
    hi + settings.cutoff_k * s.domain.span()
}

fn labels_1d(s: &Scenario, settings: &Settings) -> Vec<f64> {
    s.domain.sample_axis(0, settings.grid_x)
}

fn first_failure_1d(
    xs: &[f64],
    f: impl Fn(f64) -> f64,
    ok: impl Fn(f64) -> bool,
) -> Option<(f64, f64)> {
    xs.iter().map(|&x| (x, f(x))).find(|&(_, v)| !ok(v))
}

fn velocity_sign(s: &Scenario, settings: &Settings, strict: bool) -> HypothesisCheck {
    let name = if strict { "v > 0" } else { "v >= 0" };
    let xs = labels_1d(s, settings);
    match first_failure_1d(&xs, |x| s.v(x), |v| if strict { v > 0.0 } else { v >= 0.0 }) {
        None => HypothesisCheck::yes(name),
        Some((x, v)) => HypothesisCheck::no(name, format!("v({x}) = {v}")),
    }
}

fn velocity_zero(s: &Scenario) -> HypothesisCheck {
    let bad = s
        .labels()
        .into_iter()
        .find(|x| s.init.velocity_at(x).iter().any(|&c| c != 0.0));
    match bad {
        None => HypothesisCheck::yes("v = 0"),
        Some(x) => HypothesisCheck::no("v = 0", format!("v({x:?}) = {:?}", s.init.velocity_at(&x))),
    }
}

fn unit_mass(s: &Scenario) -> HypothesisCheck {
    if s.init.mass.as_constant() == Some(1.0) {
        return HypothesisCheck::yes("m = 1");
    }
    let bad = s.labels().into_iter().find(|x| {
        let key = if s.is_1d() { x[0] } else { x[0].hypot(x[1]) };
        s.init.mass.eval(key) != 1.0
    });
    match bad {
        None => HypothesisCheck::yes("m = 1"),
        Some(x) => HypothesisCheck::no("m = 1", format!("mass differs from 1 at {x:?}")),
    }
}

fn below_gap(s: &Scenario, a: f64) -> HypothesisCheck {
    let (_, hi) = s.domain.bounds_1d();
    HypothesisCheck::from_bool("domain lies below A", hi < a, || {
        format!("upper end {hi} >= A = {a}")
    })
}

fn force_positive_ahead(s: &Scenario, settings: &Settings, lo: f64, y_max: f64) -> HypothesisCheck {
    let name = "F > 0";
    let n = settings.grid_x * settings.grid_y;
    for k in 0..=n {
        let y = lo + (y_max - lo) * k as f64 / n as f64;
        let f = s.force.eval1(y);
        if !(f > 0.0) {
            return HypothesisCheck::no(name, format!("F({y}) = {f}"));
        }
    }
    if let ForceModel::Smooth1D { force } = &s.force {
        let slope = force.deriv(y_max);
        if force.as_constant().is_none() && slope < 0.0 {
            return HypothesisCheck::unknown(
                name,
                format!("F decreases at the cutoff y = {y_max} (F' = {slope}); positivity beyond it is not checked"),
            );
        }
    }
    HypothesisCheck::yes(name)
}

fn energy_ahead(s: &Scenario, settings: &Settings) -> HypothesisCheck {
    let name = "H0(x) - U(y) > 0 for y > x";
    let profile = match EnergyProfile::from_scenario(s) {
        Ok(p) => p,
        Err(e) => return HypothesisCheck::no(name, e.to_string()),
    };
    let y_max = cutoff(s, settings);
    for x in labels_1d(s, settings) {
        for j in 1..=settings.grid_y {
            let y = x + (y_max - x) * j as f64 / settings.grid_y as f64;
            match profile.kinetic(x, y) {
                Ok(k) if k > 0.0 => {}
                Ok(k) => {
                    return HypothesisCheck::no(
                        name,
                        format!("x = {x}, y = {y}: H0(x) - U(y) = {k}"),
                    )
                }
                Err(e) => return HypothesisCheck::no(name, format!("x = {x}, y = {y}: {e}")),
            }
        }
    }
    let f_end = s.force.eval1(y_max);
    if f_end < 0.0 {
        return HypothesisCheck::unknown(
            name,
            format!("F({y_max}) = {f_end} < 0 at the cutoff, so the energy may run out beyond it"),
        );
    }
    HypothesisCheck::yes(name)
}

fn monotone_hypotheses(s: &Scenario, settings: &Settings) -> Vec<HypothesisCheck> {
    let force = match force_monotone(&s.force, &s.domain, settings) {
        None => HypothesisCheck::yes("(F(y) - F(x), y - x) >= 0"),
        Some(w) => HypothesisCheck::no(
            "(F(y) - F(x), y - x) >= 0",
            format!("x = {:?}, y = {:?}: value {}", w.a, w.b, w.value),
        ),
    };
    vec![force, velocity_monotone_check(s, settings), unit_mass(s)]
}

fn velocity_monotone_check(s: &Scenario, settings: &Settings) -> HypothesisCheck {
    let name = "(v(x2) - v(x1), x2 - x1) >= 0";
    match velocity_monotone(&s.init, &s.domain, settings) {
        None => HypothesisCheck::yes(name),
        Some(w) => HypothesisCheck::no(
            name,
            format!("x1 = {:?}, x2 = {:?}: value {}", w.a, w.b, w.value),
        ),
    }
}

fn central_hypotheses(s: &Scenario, settings: &Settings) -> Vec<HypothesisCheck> {
    let (Velocity::Radial { g, h }, ForceModel::Central { potential }, Domain::Annulus { r1, r2 }) =
        (&s.init.velocity, &s.force, &s.domain)
    else {
        return vec![HypothesisCheck::no(
            "radial data",
            "central criterion needs an annulus and radial velocity".into(),
        )];
    };
    let radii = s.domain.sample_axis(0, settings.grid_x);
    let g_pos = match first_failure_1d(&radii, |r| g.eval(r), |v| v > 0.0) {
        None => HypothesisCheck::yes("g > 0"),
        Some((r, v)) => HypothesisCheck::no("g > 0", format!("g({r}) = {v}")),
    };
    let name = "-U'(r2) + M(r1)^2 / r2^3 >= 0 for r2 >= r1";
    let r_cut = r2 + settings.cutoff_k * (r2 - r1);
    let mut outward = HypothesisCheck::yes(name);
    let mut last_margin = f64::INFINITY;
    let mut decaying = false;
    'outer: for &ra in &radii {
        let m = ra * ra * h.eval(ra);
        let tail = |rb: f64| -potential.deriv(rb) + m * m / (rb * rb * rb);
        for j in 0..=settings.grid_y {
            let rb = ra + (r_cut - ra) * j as f64 / settings.grid_y as f64;
            let val = tail(rb);
            if !(val >= 0.0) {
                outward = HypothesisCheck::no(name, format!("r1 = {ra}, r2 = {rb}: {val}"));
                break 'outer;
            }
            if j == settings.grid_y && val < last_margin {
                last_margin = val;
                decaying = tail(2.0 * rb) < val;
            }
        }
    }
    if outward.status == Status::Yes
        && ((last_margin <= settings.band && decaying) || !last_margin.is_finite())
    {
        outward = HypothesisCheck::unknown(
            name,
            format!(
                "margin at the cutoff r2 = {r_cut} is {last_margin}; sign beyond it is not checked"
            ),
        );
    }
    vec![g_pos, outward, unit_mass(s)]
}

/// Hypotheses of every criterion whose force class matches `s`.
///
/// Deterministic for fixed settings.
pub fn assumptions_report(s: &Scenario, settings: &Settings) -> Vec<CriterionReport> {
    let mut out = Vec::new();
    let mut push = |criterion, hypotheses| {
        out.push(CriterionReport {
            criterion,
            hypotheses,
        })
    };
    match &s.force {
        ForceModel::Smooth1D { force } => {
            let (lo, _) = s.domain.bounds_1d();
            let y_max = cutoff(s, settings);
            push(
                Criterion::FreeFlight,
                vec![HypothesisCheck::from_bool(
                    "F = 0",
                    force.as_constant() == Some(0.0),
                    || "force is not identically zero".into(),
                )],
            );
            push(
                Criterion::SmoothPositiveVelocity,
                vec![velocity_sign(s, settings, true), energy_ahead(s, settings)],
            );
            push(
                Criterion::SmoothGeneral,
                vec![
                    velocity_sign(s, settings, false),
                    HypothesisCheck::yes("m > 0"),
                    force_positive_ahead(s, settings, lo, y_max),
                ],
            );
            push(
                Criterion::EulerGlobal,
                vec![
                    velocity_sign(s, settings, false),
                    force_positive_ahead(s, settings, lo, y_max),
                    unit_mass(s),
                ],
            );
        }
        &ForceModel::OneGap { f2, a, .. } => {
            push(
                Criterion::OneGapRest,
                vec![velocity_zero(s), below_gap(s, a), unit_mass(s)],
            );
            push(
                Criterion::OneGapGeneral,
                vec![
                    velocity_sign(s, settings, false),
                    below_gap(s, a),
                    unit_mass(s),
                ],
            );
            push(
                Criterion::OneGapCorollary,
                vec![
                    HypothesisCheck::from_bool("F2 = 0", f2 == 0.0, || format!("F2 = {f2}")),
                    velocity_sign(s, settings, false),
                    below_gap(s, a),
                    unit_mass(s),
                ],
            );
        }
        &ForceModel::TwoGap { a, .. } => {
            push(
                Criterion::TwoGap,
                vec![velocity_zero(s), below_gap(s, a), unit_mass(s)],
            );
        }
        ForceModel::ConstantVec { .. } => {
            push(Criterion::ConstantForcePair, vec![unit_mass(s)]);
            push(Criterion::MonotoneForce, monotone_hypotheses(s, settings));
        }
        ForceModel::HalfSpaceStep { f1: _, f2, a } => {
            let d = f2.len() - 1;
            let upper = s.domain.upper()[d];
            push(
                Criterion::HalfSpaceStep,
                vec![
                    velocity_zero(s),
                    HypothesisCheck::from_bool("domain lies in y_d < A", upper < *a, || {
                        format!("upper end {upper} of the last coordinate >= A = {a}")
                    }),
                    HypothesisCheck::from_bool("F2_d >= 0", f2[d] >= 0.0, || {
                        format!("F2_d = {}", f2[d])
                    }),
                    unit_mass(s),
                ],
            );
            push(Criterion::MonotoneForce, monotone_hypotheses(s, settings));
        }
        ForceModel::Linear { matrix, .. } => {
            let spectrum = linear_spectrum(matrix, settings.tol_eig);
            let real = HypothesisCheck::from_bool(
                "real spectrum with an eigenbasis",
                spectrum.real && spectrum.eigenbasis,
                || {
                    if !spectrum.real {
                        "complex spectrum".into()
                    } else {
                        "eigenvectors do not span the space".into()
                    }
                },
            );
            let nonneg = HypothesisCheck::from_bool(
                "eigenvalues >= 0",
                spectrum.real && spectrum.min_real >= -settings.tol_eig,
                || format!("smallest real part {}", spectrum.min_real),
            );
            push(
                Criterion::LinearSpectrum,
                vec![
                    real,
                    nonneg,
                    velocity_monotone_check(s, settings),
                    unit_mass(s),
                ],
            );
            push(Criterion::MonotoneForce, monotone_hypotheses(s, settings));
        }
        ForceModel::Central { .. } => {
            push(Criterion::CentralField, central_hypotheses(s, settings));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::ScalarFn;
    use crate::scenario::{build_scenario, InitialData};

    fn smooth(f: &str, v: &str) -> Scenario {
        build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            ForceModel::Smooth1D {
                force: ScalarFn::parse(f).unwrap(),
            },
            InitialData::scalar(ScalarFn::parse(v).unwrap()),
            f64::INFINITY,
        )
        .unwrap()
    }

    fn report_for(s: &Scenario, c: Criterion) -> CriterionReport {
        assumptions_report(s, &Settings::default())
            .into_iter()
            .find(|r| r.criterion == c)
            .unwrap()
    }

    #[test]
    fn positive_force_and_speed() {
        let r = report_for(&smooth("1", "1"), Criterion::SmoothPositiveVelocity);
        assert_eq!(r.status(), Status::Yes);
    }

    #[test]
    fn backward_force_runs_out_of_energy() {
        let r = report_for(&smooth("-1", "0"), Criterion::SmoothPositiveVelocity);
        assert_eq!(r.status(), Status::No);
        let energy = &r.hypotheses[1];
        assert_eq!(energy.status, Status::No);
        assert!(energy.witness.as_ref().unwrap().starts_with("x = 0, y = "));
    }

    #[test]
    fn repulsive_central_field_pushes_outward() {
        let s = build_scenario(
            Domain::annulus(1.0, 2.0).unwrap(),
            ForceModel::Central {
                potential: ScalarFn::parse("1/r").unwrap(),
            },
            InitialData::new(Velocity::Radial {
                g: ScalarFn::constant(1.0),
                h: ScalarFn::constant(0.0),
            }),
            5.0,
        )
        .unwrap();
        let r = report_for(&s, Criterion::CentralField);
        assert_eq!(r.hypotheses[1].status, Status::Yes);
        assert_eq!(r.status(), Status::Yes);
    }

    #[test]
    fn report_is_deterministic() {
        let s = smooth("1 + y", "x");
        let a = assumptions_report(&s, &Settings::default());
        let b = assumptions_report(&s, &Settings::default());
        assert_eq!(a, b);
    }
}
