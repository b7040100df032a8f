//! Criteria for smooth forces on the line.

use super::search::{minimize, tensor_grid, uniform, SearchResult};
use super::{
    classify, neighbour, require, temper, Criterion, Inequality, Outcome, Verdict, Witness,
};
use rayon::prelude::*;

use crate::error::Result;
use crate::quadrature::EnergyProfile;
use crate::scenario::{cutoff, Scenario};
use crate::settings::Settings;

/// Smallest offset y − x sampled, as a fraction of the available range.
const U_MIN: f64 = 1e-4;

fn ahead(x: f64, w: f64, y_max: f64) -> f64 {
    x + (y_max - x) * (U_MIN + (1.0 - U_MIN) * w * w)
}

/// Labels and targets per label probed past the cutoff.
const TAIL_LABELS: usize = 9;
const TAIL_POINTS: usize = 128;
/// The tail probe reaches `y_max + TAIL_REACH * (y_max - lo)`.
const TAIL_REACH: f64 = 10.0;

struct PairSearch {
    r: SearchResult,
    /// Smallest margin past the cutoff as (margin, x, y), if below `r.margin`.
    /// Only a violation there changes the verdict.
    tail: Option<(f64, f64, f64)>,
}

/// Search the worst `margin(x, y)` over labels in `[lo, hi]` and targets
/// `y ∈ (x, y_max]`, then probe a coarse grid of targets past `y_max`.
fn search_pairs<F>(lo: f64, hi: f64, y_max: f64, settings: &Settings, margin: F) -> PairSearch
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let grid = tensor_grid(
        &[lo, 0.0],
        &[hi, 1.0],
        &[settings.grid_x, settings.grid_y],
        &[uniform, uniform],
    );
    let mut r = minimize(grid, &[lo, 0.0], &[hi, 1.0], settings, |p| {
        margin(p[0], ahead(p[0], p[1], y_max)).map_err(|e| e.to_string())
    });
    r.point = vec![r.point[0], ahead(r.point[0], r.point[1], y_max)];
    if let Some((p, msg)) = r.failure.take() {
        r.failure = Some((vec![p[0], ahead(p[0], p[1], y_max)], msg));
    }

    let reach = TAIL_REACH * (y_max - lo);
    let mut labels: Vec<f64> = (0..TAIL_LABELS)
        .map(|i| lo + (hi - lo) * i as f64 / (TAIL_LABELS - 1) as f64)
        .collect();
    labels.push(r.point[0]);
    let tail = labels
        .par_iter()
        .flat_map_iter(|&x| {
            let margin = &margin;
            (1..=TAIL_POINTS).filter_map(move |k| {
                let y = y_max + reach * k as f64 / TAIL_POINTS as f64;
                margin(x, y).ok().filter(|m| !m.is_nan()).map(|m| (m, x, y))
            })
        })
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        })
        .filter(|t| t.0 < r.margin);
    PairSearch { r, tail }
}

fn pair_verdict(
    criterion: Criterion,
    search: PairSearch,
    scale: impl Fn(f64) -> f64,
    kind: Inequality,
    profile: &EnergyProfile,
    (lo, hi): (f64, f64),
    settings: &Settings,
) -> Verdict {
    let PairSearch { mut r, tail } = search;
    let mut outcome = classify(r.margin, scale(r.point[0]), settings.band, kind);
    if let Some((m, x, y)) = tail {
        if classify(m, scale(x), settings.band, kind) == Outcome::Collision {
            r.margin = m;
            r.point = vec![x, y];
            outcome = Outcome::Collision;
        }
    }
    let (x, y) = (r.point[0], r.point[1]);
    let mut v = Verdict::new(outcome, criterion, r.margin).with_location(vec![x, y]);
    match outcome {
        Outcome::Collision => {
            let (x1, x2) = neighbour(x, lo, hi);
            v = v.with_witness(Witness {
                x1: vec![x1],
                x2: vec![x2],
                time: profile.time_of_flight(x, y).ok().map(|f| f.t),
                time_is_bound: true,
            });
        }
        _ => {
            if let Some((p, msg)) = r.failure {
                v.outcome = Outcome::Inconclusive;
                v.reason = Some(format!(
                    "margin not evaluable at x = {}, y = {}: {msg}",
                    p[0], p[1]
                ));
            } else if outcome == Outcome::Inconclusive {
                v.reason = Some(format!("margin {} inside the equality band", r.margin));
            }
        }
    }
    v
}

fn label_range(s: &Scenario, settings: &Settings) -> (f64, f64) {
    let xs = s.domain.sample_axis(0, settings.grid_x);
    (xs[0], xs[xs.len() - 1])
}

/// No force: every particle moves uniformly, so x₁ < x₂ collide iff
/// v(x₁) > v(x₂), first at time 1/max(−v′). The verdict concerns [0, ∞).
pub fn check_free_flight(s: &Scenario, settings: &Settings) -> Result<Verdict> {
    require(s, Criterion::FreeFlight, settings)?;
    let (lo, hi) = label_range(s, settings);
    let n = settings.grid_x * settings.grid_y;
    let grid = tensor_grid(&[lo], &[hi], &[n], &[uniform]);
    let r = minimize(grid, &[lo], &[hi], settings, |p| Ok(s.dv(p[0])));
    let x = r.point[0];
    let outcome = classify(r.margin, 1.0, settings.band, Inequality::NonStrict);
    let mut v = Verdict::new(outcome, Criterion::FreeFlight, r.margin).with_location(vec![x]);
    if outcome == Outcome::Collision {
        let (x1, x2) = neighbour(x, lo, hi);
        v = v.with_witness(Witness {
            x1: vec![x1],
            x2: vec![x2],
            time: Some(-1.0 / r.margin),
            time_is_bound: false,
        });
    }
    Ok(v)
}

/// Positive initial speed: no collisions iff T(x, y) decreases in x, checked
/// as −dT/dx ≥ 0 on pairs x < y up to the cutoff.
pub fn check_smooth_positive_v(s: &Scenario, settings: &Settings) -> Result<Verdict> {
    let report = require(s, Criterion::SmoothPositiveVelocity, settings)?;
    let profile = EnergyProfile::from_scenario(s)?;
    let (lo, hi) = label_range(s, settings);
    let y_max = cutoff(s, settings);
    let r = search_pairs(lo, hi, y_max, settings, |x, y| Ok(-profile.dt_dx(x, y)?));
    let v = pair_verdict(
        Criterion::SmoothPositiveVelocity,
        r,
        |x| 1.0 / s.v(x),
        Inequality::NonStrict,
        &profile,
        (lo, hi),
        settings,
    );
    Ok(temper(v, &report))
}

/// F > 0 and v ≥ 0: no collisions iff dT/dx < 0 strictly, with dT/dx from
/// the integrated-by-parts form that stays finite at v = 0.
pub fn check_smooth_general(s: &Scenario, settings: &Settings) -> Result<Verdict> {
    let report = require(s, Criterion::SmoothGeneral, settings)?;
    let profile = EnergyProfile::from_scenario(s)?;
    let (lo, hi) = label_range(s, settings);
    let v = check_smooth_general_on(
        &profile,
        (lo, hi),
        cutoff(s, settings),
        Criterion::SmoothGeneral,
        settings,
    );
    Ok(temper(v, &report))
}

/// The by-parts criterion for labels in `range` and targets up to `y_max`.
pub fn check_smooth_general_on(
    profile: &EnergyProfile,
    range: (f64, f64),
    y_max: f64,
    criterion: Criterion,
    settings: &Settings,
) -> Verdict {
    let r = search_pairs(range.0, range.1, y_max, settings, |x, y| {
        Ok(-profile.dt_dx_by_parts(x, y)?)
    });
    pair_verdict(
        criterion,
        r,
        |_| 1.0,
        Inequality::Strict,
        profile,
        range,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::ScalarFn;
    use crate::scenario::{build_scenario, Domain, ForceModel, InitialData};

    fn scen(f: &str, v: &str, lo: f64, hi: f64) -> Scenario {
        build_scenario(
            Domain::interval(lo, hi).unwrap(),
            ForceModel::Smooth1D {
                force: ScalarFn::parse(f).unwrap(),
            },
            InitialData::scalar(ScalarFn::parse(v).unwrap()),
            f64::INFINITY,
        )
        .unwrap()
    }

    fn quick() -> Settings {
        Settings {
            grid_x: 12,
            grid_y: 12,
            ..Settings::default()
        }
    }

    #[test]
    fn filippov_free_flight_time() {
        let v = check_free_flight(&scen("0", "-atan(x)", -5.0, 5.0), &quick()).unwrap();
        assert_eq!(v.outcome, Outcome::Collision);
        let t = v.witness.unwrap().time.unwrap();
        assert!((t - 1.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn uniform_acceleration_with_speed_is_regular() {
        let v = check_smooth_positive_v(&scen("1", "1", 0.0, 1.0), &quick()).unwrap();
        assert_eq!(v.outcome, Outcome::Regular, "{v:?}");
        assert!(v.margin > 0.0);
    }

    #[test]
    fn faster_rear_particles_collide() {
        let v = check_smooth_positive_v(&scen("0", "2 - x", 0.0, 1.0), &quick()).unwrap();
        assert_eq!(v.outcome, Outcome::Collision);
        assert!(v.witness.is_some());
    }

    #[test]
    fn increasing_force_from_rest_is_regular() {
        let v = check_smooth_general(&scen("1 + y", "0", 0.0, 1.0), &quick()).unwrap();
        assert_eq!(v.outcome, Outcome::Regular, "{v:?}");
    }

    #[test]
    fn violation_past_the_cutoff_is_found() {
        let s = scen("1.88 + 1.006*sin(y)", "0", 0.0, 1.0);
        let v = check_smooth_general(&s, &quick()).unwrap();
        assert_eq!(v.outcome, Outcome::Collision, "{v:?}");
        assert!(v.location.unwrap()[1] > cutoff(&s, &quick()));
    }

    #[test]
    fn negative_speed_violates_hypothesis() {
        assert!(check_smooth_general(&scen("1", "x - 0.5", 0.0, 1.0), &quick()).is_err());
    }
}
