use proptest::prelude::*;
use regflow::field::{check_euler_global, field_grid, mass_at, track_boundary, Flow, Window};
use regflow::scenario::build_scenario;
use regflow::{
    detect_collisions, Domain, ForceModel, InitialData, Outcome, ScalarFn, Scenario, Settings,
};

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

/// Smooth data without collisions: a force increasing in y and an
/// increasing velocity.
fn regular_case() -> impl Strategy<Value = Scenario> {
    (0.0..2.0f64, 0.0..1.0f64, -1.0..1.0f64, 0.0..1.5f64).prop_map(|(f0, f1, v0, v1)| {
        smooth(
            &format!("{f0} + {f1}*x"),
            &format!("{v0} + {v1}*tanh(x)"),
            -1.0,
            1.0,
            2.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flow_invariants(s in regular_case(), frac in 0.05..1.0f64, u in 0.0..1.0f64) {
        let flow = Flow::new(&s, s.horizon, &Settings::default()).unwrap();
        prop_assert!(!flow.collision().found);
        let t = frac * s.horizon;

        // inverse consistency
        let x = -1.0 + 2.0 * u;
        let (y, v) = flow.state(t, x).unwrap();
        let snap = flow.snapshot(t).unwrap();
        let back = snap.invert(y).unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * 2.0, "x = {x}, recovered {back}");
        prop_assert!((snap.velocity(y).unwrap() - v).abs() <= 1e-7 * v.abs().max(1.0));

        // mass conservation
        let m = mass_at(&flow, t).unwrap();
        prop_assert!((m - 2.0).abs() <= 1e-6 * 2.0, "mass {m}");

        // boundary ordering
        let b = track_boundary(&s, s.horizon, 32).unwrap();
        prop_assert!(b.left.iter().zip(&b.right).all(|(l, r)| l < r));
        let (l, r) = flow.snapshot(s.horizon).unwrap().image();
        prop_assert!((l - b.left[32]).abs() < 1e-8 && (r - b.right[32]).abs() < 1e-8);
    }
}

fn euler_case() -> impl Strategy<Value = Scenario> {
    prop_oneof![
        (-1.0..1.5f64, -1.0..1.0f64, 0.5..2.0f64).prop_map(|(a, b, c)| {
            smooth("0", &format!("{a}*x + {b}*sin({c}*x)"), -2.0, 2.0, 6.0)
        }),
        (0.2..2.0f64, 0.0..1.0f64, 0.0..2.0f64, -1.0..1.0f64).prop_map(|(f0, f1, p, q)| {
            let f = format!("{f0} + {}*sin(x)", f1 * f0);
            let v = format!("{} + {q}*tanh(3*x)", p + q.abs());
            smooth(&f, &v, 0.0, 1.0, 6.0)
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn euler_global_agrees_with_simulation(s in euler_case()) {
        let settings = Settings { grid_x: 24, grid_y: 24, ..Settings::default() };
        let v = check_euler_global(&s, &settings).unwrap();
        let r = detect_collisions(&s, &settings).unwrap();
        match v.outcome {
            Outcome::Regular => prop_assert!(!r.found, "collision at t = {} despite {:?}", r.t_first, v),
            Outcome::Collision => {
                if let Some(t) = v.witness.as_ref().and_then(|w| w.time) {
                    if t < 0.5 * s.horizon {
                        prop_assert!(r.found, "predicted collision at {t} not simulated");
                    }
                }
            }
            Outcome::Inconclusive => {}
        }
    }
}

#[test]
fn field_grid_stops_before_collision() {
    let s = smooth("0", "-atan(x)", -5.0, 5.0, 2.0);
    let flow = Flow::new(&s, s.horizon, &Settings::default()).unwrap();
    assert!((flow.t_limit() - 1.0).abs() < 0.01);
    assert!(field_grid(&flow, &Window::new(0.0, 1.5)).is_err());
    let g = field_grid(&flow, &Window::new(0.0, 0.9)).unwrap();
    let peak = g.max_density();
    assert!(peak.windows(2).all(|w| w[1] > w[0]), "{peak:?}");
}
