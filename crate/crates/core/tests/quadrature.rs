use proptest::prelude::*;
use regflow::quadrature::{integrate, EnergyProfile};
use regflow::{ForceModel, ScalarFn};

fn constant(f: f64, v: ScalarFn) -> EnergyProfile {
    EnergyProfile::unit_mass(
        ForceModel::Smooth1D {
            force: ScalarFn::constant(f),
        },
        v,
    )
    .unwrap()
}

fn smooth(force: &str, v: &str) -> EnergyProfile {
    EnergyProfile::unit_mass(
        ForceModel::Smooth1D {
            force: ScalarFn::parse(force).unwrap(),
        },
        ScalarFn::parse(v).unwrap(),
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn constant_force_from_rest(x in -10.0..10.0f64, d in 1e-3..20.0f64, f in 0.05..20.0f64) {
        let p = constant(f, ScalarFn::constant(0.0));
        let t = p.time_of_flight(x, x + d).unwrap().t;
        prop_assert!(rel(t, (2.0 * d / f).sqrt()) < 1e-10, "t = {t}");
    }

    #[test]
    fn constant_force_with_speed(x in -5.0..5.0f64, d in 1e-2..10.0f64, f in 0.1..5.0f64, v in 0.1..5.0f64) {
        let p = constant(f, ScalarFn::constant(v));
        let t = p.time_of_flight(x, x + d).unwrap().t;
        let exact = (-v + (v * v + 2.0 * f * d).sqrt()) / f;
        prop_assert!(rel(t, exact) < 1e-10, "t = {t}, exact = {exact}");
    }

    #[test]
    fn linear_repulsion_from_rest(x in 0.1..3.0f64, ratio in 1.001..8.0f64) {
        // y(t) = x cosh t
        let p = smooth("x", "0");
        let t = p.time_of_flight(x, ratio * x).unwrap().t;
        prop_assert!(rel(t, ratio.acosh()) < 1e-10, "t = {t}");
    }

    #[test]
    fn derivative_matches_central_difference(x in 0.0..1.0f64, d in 0.2..3.0f64) {
        let p = smooth("1 + 0.5*sin(x)", "1 + x^2");
        let y = x + d;
        let h = 1e-5 * 4.0;
        let fd = (p.time_of_flight(x + h, y).unwrap().t - p.time_of_flight(x - h, y).unwrap().t) / (2.0 * h);
        let an = p.dt_dx(x, y).unwrap();
        prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "fd = {fd}, analytic = {an}");
    }

    #[test]
    fn by_parts_matches_direct(x in 0.0..1.0f64, d in 0.05..4.0f64) {
        let p = smooth("2 + cos(x)", "0.5 + 0.25*x");
        let a = p.dt_dx(x, x + d).unwrap();
        let b = p.dt_dx_by_parts(x, x + d).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "direct {a}, by parts {b}");
    }

    #[test]
    fn by_parts_with_variable_mass(x in 0.0..1.0f64, d in 0.05..3.0f64) {
        let p = EnergyProfile::new(
            ForceModel::Smooth1D { force: ScalarFn::parse("1 + 0.2*x").unwrap() },
            ScalarFn::parse("1 + 0.5*x").unwrap(),
            ScalarFn::parse("1 + 0.3*x").unwrap(),
        )
        .unwrap();
        let a = p.dt_dx(x, x + d).unwrap();
        let b = p.dt_dx_by_parts(x, x + d).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "direct {a}, by parts {b}");
    }

    #[test]
    fn polynomial_integrals(c0 in -3.0..3.0f64, c1 in -3.0..3.0f64, c2 in -3.0..3.0f64, b in 0.1..5.0f64) {
        let r = integrate(|z| c0 + c1 * z + c2 * z * z, 0.0, b, 1e-12, 1e-14).unwrap();
        let exact = c0 * b + c1 * b * b / 2.0 + c2 * b.powi(3) / 3.0;
        prop_assert!((r.value - exact).abs() <= 1e-12 * exact.abs().max(1.0));
    }
}

#[test]
fn rest_start_derivative_is_singular() {
    let p = constant(1.0, ScalarFn::constant(0.0));
    assert!(p.dt_dx(0.0, 1.0).is_err());
    let d = p.dt_dx_by_parts(0.0, 1.0).unwrap();
    // T = sqrt(2(y - x)), dT/dx = -1/sqrt(2(y - x))
    assert!((d + 1.0 / 2f64.sqrt()).abs() < 1e-8, "{d}");
}
