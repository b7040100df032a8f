use proptest::prelude::*;
use regflow::regularity::{
    check_one_gap_general, check_one_gap_zero_v, check_two_gap, two_gap_alpha,
};
use regflow::scenario::build_scenario;
use regflow::simulator::asymptotic_verdict_1d;
use regflow::{Domain, ForceModel, InitialData, Outcome, ScalarFn, Settings};

fn oracle(force: ForceModel, lo: f64, hi: f64, v: ScalarFn) -> bool {
    let s = build_scenario(
        Domain::interval(lo, hi).unwrap(),
        force,
        InitialData::scalar(v),
        f64::INFINITY,
    )
    .unwrap();
    asymptotic_verdict_1d(&s).unwrap().found
}

fn collides(o: Outcome) -> bool {
    o == Outcome::Collision
}

#[test]
fn alpha_closed_form() {
    assert!((two_gap_alpha(2.0, 1.0, 3.0) - 14.0 / 9.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn one_gap_rest_matches_oracle(
        f1 in 0.1..5.0f64,
        f2 in 0.1..5.0f64,
        lo in -2.0..0.5f64,
        a in 1.05..5.0f64,
    ) {
        let v = check_one_gap_zero_v(f1, f2, a, (lo, 1.0)).unwrap();
        prop_assume!((f2 - f1).abs() > 1e-6 * f1);
        let found = oracle(ForceModel::OneGap { f1, f2, a }, lo, 1.0, ScalarFn::constant(0.0));
        prop_assert_eq!(collides(v.outcome), found, "F1 = {}, F2 = {}", f1, f2);
    }

    #[test]
    fn two_gap_matches_oracle(
        f2 in 0.1..2.0f64,
        d1 in 0.05..3.0f64,
        d3 in 0.05..3.0f64,
        lo in -1.0..0.5f64,
        a in 1.2..5.0f64,
        ratio in 0.05..3.0f64,
    ) {
        let (f1, f3) = (f2 + d1, f2 + d1 + d3);
        let alpha = two_gap_alpha(f1, f2, f3);
        let scale = alpha * (a - 1.0);
        let b = a + ratio * scale;
        let v = check_two_gap(f1, f2, f3, a, b, (lo, 1.0)).unwrap();
        prop_assume!(v.margin.abs() > 1e-6 * scale);
        let found = oracle(ForceModel::TwoGap { f1, f2, f3, a, b }, lo, 1.0, ScalarFn::constant(0.0));
        prop_assert_eq!(collides(v.outcome), found, "ratio {}, margin {}", ratio, v.margin);
    }

    #[test]
    fn two_gap_monotone_in_b(f2 in 0.1..2.0f64, d1 in 0.05..3.0f64, d3 in 0.05..3.0f64, a in 1.2..5.0f64,
                             b1 in 0.01..10.0f64, b2 in 0.01..10.0f64) {
        let (f1, f3) = (f2 + d1, f2 + d1 + d3);
        let (near, far) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let v1 = check_two_gap(f1, f2, f3, a, a + near, (0.0, 1.0)).unwrap();
        let v2 = check_two_gap(f1, f2, f3, a, a + far, (0.0, 1.0)).unwrap();
        prop_assert!(v1.margin >= v2.margin);
        prop_assert!(!(collides(v1.outcome) && v2.outcome == Outcome::Regular));
    }

    #[test]
    fn one_gap_general_at_rest_matches_rest_criterion(f1 in 0.1..5.0f64, f2 in 0.0..5.0f64, a in 1.05..4.0f64) {
        prop_assume!((f2 - f1).abs() > 1e-6 * f1);
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let general = check_one_gap_general(f1, f2, a, &ScalarFn::constant(0.0), &dom, &Settings::default()).unwrap();
        let rest = check_one_gap_zero_v(f1, f2, a, (0.0, 1.0)).unwrap();
        prop_assert_eq!(general.outcome, rest.outcome);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn one_gap_general_matches_oracle(
        f1 in 0.2..4.0f64,
        f2 in 0.0..4.0f64,
        c0 in 0.0..3.0f64,
        c1 in -1.0..3.0f64,
        a in 1.1..4.0f64,
    ) {
        prop_assume!(c0 + c1.min(0.0) >= 0.0);
        let v = ScalarFn::parse(&format!("{c0} + {c1}*x")).unwrap();
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let verdict = check_one_gap_general(f1, f2, a, &v, &dom, &Settings::default()).unwrap();
        prop_assume!(verdict.outcome != Outcome::Inconclusive && verdict.margin.abs() > 1e-6);
        let found = oracle(ForceModel::OneGap { f1, f2, a }, 0.0, 1.0, v);
        prop_assert_eq!(collides(verdict.outcome), found, "margin {}", verdict.margin);
    }
}
