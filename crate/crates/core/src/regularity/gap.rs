//! Criteria for one- and two-gap forces on the line.

use super::search::{minimize, tensor_grid, uniform};
use super::{classify, neighbour, Criterion, Inequality, Outcome, Verdict, Witness};
use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::scenario::{build_scenario, Domain, ForceModel, InitialData};
use crate::settings::Settings;
use crate::simulator::{asymptotic_verdict_1d, pair_crossing, propagate_regions};

/// Closed-form quantities of the gap-force analysis for particles released
/// below A with speed v(x) (v ≡ 0 for two gaps).
#[derive(Debug, Clone)]
pub struct GapDiagnostics {
    pub f1: f64,
    pub f2: f64,
    /// NaN for a single gap.
    pub f3: f64,
    pub a: f64,
    /// NaN for a single gap.
    pub b: f64,
    pub v: ScalarFn,
}

impl GapDiagnostics {
    pub fn one_gap(f1: f64, f2: f64, a: f64, v: ScalarFn) -> Self {
        GapDiagnostics {
            f1,
            f2,
            f3: f64::NAN,
            a,
            b: f64::NAN,
            v,
        }
    }

    pub fn two_gap(f1: f64, f2: f64, f3: f64, a: f64, b: f64) -> Self {
        GapDiagnostics {
            f1,
            f2,
            f3,
            a,
            b,
            v: ScalarFn::constant(0.0),
        }
    }

    /// D(x) = v² + 2F₁(A − x), the squared speed on arrival at A.
    pub fn d(&self, x: f64) -> f64 {
        self.v.eval(x).powi(2) + 2.0 * self.f1 * (self.a - x)
    }

    /// T(x, A).
    pub fn t_a(&self, x: f64) -> f64 {
        (self.d(x).sqrt() - self.v.eval(x)) / self.f1
    }

    /// Time spent between A and B.
    pub fn s(&self, x: f64) -> f64 {
        let d = self.d(x);
        ((d + 2.0 * self.f2 * (self.b - self.a)).sqrt() - d.sqrt()) / self.f2
    }

    /// T(x, B).
    pub fn t_b(&self, x: f64) -> f64 {
        self.t_a(x) + self.s(x)
    }

    /// β = (F₁ − F₂)F₃ / ((F₃ − F₂)F₁²).
    pub fn beta(&self) -> f64 {
        (self.f1 - self.f2) * self.f3 / ((self.f3 - self.f2) * self.f1 * self.f1)
    }

    pub fn alpha(&self) -> f64 {
        two_gap_alpha(self.f1, self.f2, self.f3)
    }

    /// v(T, x) at a time `t` after every label has passed B.
    pub fn final_velocity(&self, x: f64, t: f64) -> f64 {
        let vb = (self.d(x) + 2.0 * self.f2 * (self.b - self.a)).sqrt();
        vb + self.f3 * (t - self.t_b(x))
    }
}

/// α = F₁(F₃ − F₁)(F₃(F₁ − F₂) + F₁(F₃ − F₂)) / ((F₁ − F₂)² F₃²).
pub fn two_gap_alpha(f1: f64, f2: f64, f3: f64) -> f64 {
    f1 * (f3 - f1) * (f3 * (f1 - f2) + f1 * (f3 - f2)) / ((f1 - f2).powi(2) * f3 * f3)
}

fn check_one_gap_params(f1: f64, f2: f64, a: f64, hi: f64) -> Result<()> {
    if !(f1 > 0.0 && f2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "one gap needs F1 > 0 and F2 >= 0, got F1 = {f1}, F2 = {f2}"
        )));
    }
    if !(hi < a) {
        return Err(Error::InvalidParameter(format!(
            "labels must lie below the gap: upper end {hi} >= A = {a}"
        )));
    }
    Ok(())
}

/// Exact collision time of a label pair under a one-gap force.
fn one_gap_pair_time(f1: f64, f2: f64, a: f64, v: &ScalarFn, x1: f64, x2: f64) -> Option<f64> {
    let accel = [vec![f1], vec![f2]];
    let p1 = propagate_regions(&[x1], &[v.eval(x1)], 0, &[a], &accel, f64::INFINITY);
    let p2 = propagate_regions(&[x2], &[v.eval(x2)], 0, &[a], &accel, f64::INFINITY);
    pair_crossing(&p1, &p2)
}

/// Particles at rest below A: no collisions iff F₂ ≥ F₁. The margin is
/// F₂ − F₁; the boundary case is regular.
pub fn check_one_gap_zero_v(f1: f64, f2: f64, a: f64, (lo, hi): (f64, f64)) -> Result<Verdict> {
    check_one_gap_params(f1, f2, a, hi)?;
    let margin = f2 - f1;
    let outcome = classify(margin, f1, 0.0, Inequality::NonStrict);
    let mut v = Verdict::new(outcome, Criterion::OneGapRest, margin);
    if outcome == Outcome::Collision {
        // the end labels: the front one enters the weaker region first and
        // the rear one, faster on arrival, catches up in the last region
        let t0 = (2.0 * (a - lo) / f1).sqrt();
        let t1 = (2.0 * (a - hi) / f1).sqrt();
        let v1 = f1 * t1;
        let y1 = a + v1 * (t0 - t1) + 0.5 * f2 * (t0 - t1).powi(2);
        let t = t0 + (y1 - a) / ((f1 - f2) * (t0 - t1));
        v = v.with_witness(Witness {
            x1: vec![lo],
            x2: vec![hi],
            time: Some(t),
            time_is_bound: false,
        });
    }
    Ok(v)
}

/// Particles with speed v ≥ 0 below A: no collisions iff for every label
/// −2(A − x)v′ < v + √D and v′((F₁ − F₂)v + F₂√D) ≥ F₁(F₁ − F₂).
pub fn check_one_gap_general(
    f1: f64,
    f2: f64,
    a: f64,
    v: &ScalarFn,
    domain: &Domain,
    settings: &Settings,
) -> Result<Verdict> {
    let (lo, hi) = domain.bounds_1d();
    check_one_gap_params(f1, f2, a, hi)?;
    let xs = domain.sample_axis(0, settings.grid_x * settings.grid_y);
    if let Some(&x) = xs.iter().find(|&&x| !(v.eval(x) >= 0.0)) {
        return Err(Error::HypothesisViolated {
            hypothesis: "v >= 0".into(),
            witness: format!("v({x}) = {}", v.eval(x)),
        });
    }
    let (lo_s, hi_s) = (xs[0], xs[xs.len() - 1]);
    let rest = xs.iter().all(|&x| v.eval(x) == 0.0);
    let band = if rest { 0.0 } else { settings.band };
    let g = GapDiagnostics::one_gap(f1, f2, a, v.clone());

    let m4 = |x: f64| {
        let (vx, sd) = (v.eval(x), g.d(x).sqrt());
        (vx + sd + 2.0 * (a - x) * v.deriv(x)) / (vx + sd)
    };
    let m5 = |x: f64| {
        let (vx, sd) = (v.eval(x), g.d(x).sqrt());
        (v.deriv(x) * ((f1 - f2) * vx + f2 * sd) - f1 * (f1 - f2)) / (f1 * f1)
    };
    let grid = || tensor_grid(&[lo_s], &[hi_s], &[xs.len()], &[uniform]);
    let r4 = minimize(grid(), &[lo_s], &[hi_s], settings, |p| Ok(m4(p[0])));
    let r5 = minimize(grid(), &[lo_s], &[hi_s], settings, |p| Ok(m5(p[0])));
    let o4 = classify(r4.margin, 1.0, band, Inequality::Strict);
    let o5 = classify(r5.margin, 1.0, band, Inequality::NonStrict);
    let (worst, margin) = if r4.margin <= r5.margin {
        (r4.point[0], r4.margin)
    } else {
        (r5.point[0], r5.margin)
    };
    let outcome = if o4 == Outcome::Collision || o5 == Outcome::Collision {
        Outcome::Collision
    } else if o4 == Outcome::Inconclusive || o5 == Outcome::Inconclusive {
        Outcome::Inconclusive
    } else {
        Outcome::Regular
    };
    let mut verdict =
        Verdict::new(outcome, Criterion::OneGapGeneral, margin).with_location(vec![worst]);
    match outcome {
        Outcome::Collision => {
            let x = if o4 == Outcome::Collision {
                r4.point[0]
            } else {
                r5.point[0]
            };
            let (x1, x2) = neighbour(x, lo, hi);
            verdict = verdict.with_witness(Witness {
                x1: vec![x1],
                x2: vec![x2],
                time: one_gap_pair_time(f1, f2, a, v, x1, x2),
                time_is_bound: false,
            });
        }
        Outcome::Inconclusive => {
            verdict.reason = Some(format!("margin {margin} inside the equality band"));
        }
        Outcome::Regular => {}
    }
    Ok(verdict)
}

/// Sufficient condition for F₂ = 0: v′(x) ≥ F₁ / √(F₁(x − x₀) + v(x₀)²)
/// with x₀ the lower end of the labels. Never reports a collision.
pub fn check_corollary_sufficient(
    f1: f64,
    v: &ScalarFn,
    domain: &Domain,
    settings: &Settings,
) -> Verdict {
    let xs = domain.sample_axis(0, settings.grid_x * settings.grid_y);
    let (lo_s, hi_s) = (xs[0], xs[xs.len() - 1]);
    let (lo, _) = domain.bounds_1d();
    let v0sq = v.eval(lo).powi(2);
    let margin = |x: f64| {
        let bound = f1 / (f1 * (x - lo) + v0sq).sqrt();
        let m = v.deriv(x) - bound;
        if m.is_nan() {
            f64::NEG_INFINITY
        } else {
            m
        }
    };
    let grid = tensor_grid(&[lo_s], &[hi_s], &[xs.len()], &[uniform]);
    let r = minimize(grid, &[lo_s], &[hi_s], settings, |p| Ok(margin(p[0])));
    let x = r.point[0];
    let v_out = if r.margin >= 0.0 {
        Verdict::new(Outcome::Regular, Criterion::OneGapCorollary, r.margin)
    } else {
        Verdict::new(Outcome::Inconclusive, Criterion::OneGapCorollary, r.margin).with_reason(
            format!("slope bound fails at x = {x}; the condition is only sufficient"),
        )
    };
    v_out.with_location(vec![x])
}

/// Two gaps, particles at rest: no collisions iff B − A ≤ α(A − x_max).
pub fn check_two_gap(
    f1: f64,
    f2: f64,
    f3: f64,
    a: f64,
    b: f64,
    (lo, hi): (f64, f64),
) -> Result<Verdict> {
    if !(f2 > 0.0 && f2 < f1 && f2 < f3) {
        return Err(Error::InvalidParameter(format!(
            "two gaps need 0 < F2 < F1 and F2 < F3, got F1 = {f1}, F2 = {f2}, F3 = {f3}"
        )));
    }
    if !(hi < a && a < b) {
        return Err(Error::InvalidParameter(format!(
            "two gaps need labels below A < B, got upper end {hi}, A = {a}, B = {b}"
        )));
    }
    let alpha = two_gap_alpha(f1, f2, f3);
    let bound = alpha * (a - hi);
    let margin = bound - (b - a);
    let outcome = classify(margin, bound, 0.0, Inequality::NonStrict);
    let mut v = Verdict::new(outcome, Criterion::TwoGap, margin);
    if f3 <= f1 {
        v = v.with_reason(format!(
            "necessary condition F3 > F1 fails (F3 = {f3}, F1 = {f1})"
        ));
    }
    if outcome == Outcome::Collision {
        v = v.with_witness(two_gap_witness(f1, f2, f3, a, b, (lo, hi)));
    }
    Ok(v)
}

/// A colliding pair located by the exact asymptotic scan on a coarse grid.
fn two_gap_witness(f1: f64, f2: f64, f3: f64, a: f64, b: f64, (lo, hi): (f64, f64)) -> Witness {
    let fallback = Witness {
        x1: vec![lo],
        x2: vec![hi],
        time: None,
        time_is_bound: false,
    };
    let Ok(domain) = Domain::interval(lo, hi) else {
        return fallback;
    };
    let s = build_scenario(
        domain,
        ForceModel::TwoGap { f1, f2, f3, a, b },
        InitialData::scalar(ScalarFn::constant(0.0)),
        f64::INFINITY,
    );
    match s
        .map(|s| s.with_grid(vec![129]))
        .and_then(|s| asymptotic_verdict_1d(&s))
    {
        Ok(r) if r.found => {
            let (x1, x2) = r.pair.expect("found reports carry a pair");
            Witness {
                x1,
                x2,
                time: Some(r.t_first),
                time_is_bound: false,
            }
        }
        _ => fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_gap_rest_cases() {
        let dom = (0.0, 1.0);
        assert_eq!(
            check_one_gap_zero_v(1.0, 2.0, 2.0, dom).unwrap().outcome,
            Outcome::Regular
        );
        let eq = check_one_gap_zero_v(1.0, 1.0, 2.0, dom).unwrap();
        assert_eq!((eq.outcome, eq.margin), (Outcome::Regular, 0.0));
        let c = check_one_gap_zero_v(2.0, 1.0, 2.0, dom).unwrap();
        assert_eq!(c.outcome, Outcome::Collision);
        assert!(c.witness.is_some());
    }

    #[test]
    fn one_gap_witness_time_matches_exact_paths() {
        let v = check_one_gap_zero_v(2.0, 1.0, 2.0, (0.0, 1.0)).unwrap();
        let w = v.witness.unwrap();
        let exact = one_gap_pair_time(2.0, 1.0, 2.0, &ScalarFn::constant(0.0), 0.0, 1.0).unwrap();
        assert_relative_eq!(w.time.unwrap(), exact, max_relative = 1e-12);
    }

    #[test]
    fn two_gap_alpha_value() {
        assert_relative_eq!(
            two_gap_alpha(2.0, 1.0, 3.0),
            14.0 / 9.0,
            max_relative = 1e-15
        );
        assert_eq!(two_gap_alpha(2.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn two_gap_cases() {
        let r = check_two_gap(2.0, 1.0, 3.0, 2.0, 3.0, (0.0, 1.0)).unwrap();
        assert_eq!(r.outcome, Outcome::Regular);
        assert_relative_eq!(r.margin, 14.0 / 9.0 - 1.0, max_relative = 1e-14);
        let c = check_two_gap(2.0, 1.0, 3.0, 2.0, 4.0, (0.0, 1.0)).unwrap();
        assert_eq!(c.outcome, Outcome::Collision);
        assert!(c.witness.unwrap().time.is_some());
        let n = check_two_gap(2.0, 1.0, 2.0, 2.0, 2.01, (0.0, 1.0)).unwrap();
        assert_eq!(n.outcome, Outcome::Collision);
        assert!(n.reason.unwrap().contains("F3 > F1"));
        assert!(check_two_gap(1.0, 2.0, 3.0, 2.0, 3.0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn general_with_rest_matches_rest_criterion() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let zero = ScalarFn::constant(0.0);
        for (f1, f2) in [(1.0, 2.0), (1.0, 1.0), (2.0, 1.0), (1.5, 1.49)] {
            let g = check_one_gap_general(f1, f2, 2.0, &zero, &dom, &Settings::default()).unwrap();
            let r = check_one_gap_zero_v(f1, f2, 2.0, (0.0, 1.0)).unwrap();
            assert_eq!(g.outcome, r.outcome, "F1 = {f1}, F2 = {f2}");
        }
    }

    #[test]
    fn constant_speed_needs_stronger_second_force() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let c = ScalarFn::constant(0.7);
        let s = Settings::default();
        assert_eq!(
            check_one_gap_general(1.0, 2.0, 2.0, &c, &dom, &s)
                .unwrap()
                .outcome,
            Outcome::Regular
        );
        assert_eq!(
            check_one_gap_general(2.0, 1.0, 2.0, &c, &dom, &s)
                .unwrap()
                .outcome,
            Outcome::Collision
        );
    }

    #[test]
    fn corollary_cases() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let s = Settings::default();
        let steep = ScalarFn::parse("10 + 10*x").unwrap();
        assert_eq!(
            check_corollary_sufficient(1.0, &steep, &dom, &s).outcome,
            Outcome::Regular
        );
        let zero = ScalarFn::constant(0.0);
        assert_eq!(
            check_corollary_sufficient(1.0, &zero, &dom, &s).outcome,
            Outcome::Inconclusive
        );
        // v = 2√(x + c) with v(0)² = 4c beats the bound
        let root = ScalarFn::parse("2*sqrt(x + 0.25)").unwrap();
        assert_eq!(
            check_corollary_sufficient(1.0, &root, &dom, &s).outcome,
            Outcome::Regular
        );
    }
}
