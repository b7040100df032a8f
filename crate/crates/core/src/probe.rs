//! Random pair sampling for monotonicity hypotheses.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scenario::{Domain, ForceModel, InitialData};
use crate::settings::{stream, Settings};

/// A sampled pair where `(f(b) - f(a), b - a)` is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneViolation {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// The inner product divided by |b − a|².
    pub value: f64,
}

pub(crate) fn random_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match domain {
        Domain::Box { lower, upper, .. } => lower
            .iter()
            .zip(upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect(),
        Domain::Annulus { r1, r2 } => {
            // uniform in area
            let u: f64 = rng.random();
            let r = (r1 * r1 + u * (r2 * r2 - r1 * r1)).sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            vec![r * phi.cos(), r * phi.sin()]
        }
    }
}

/// The domain's bounding box widened by `k` spans on every side.
pub(crate) fn widened_box(domain: &Domain, k: f64) -> Domain {
    let span = domain.span();
    let lower = domain.lower().iter().map(|l| l - k * span).collect();
    let upper = domain.upper().iter().map(|u| u + k * span).collect();
    Domain::boxed(lower, upper).expect("widened box is valid")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn worst_pair(
    domain: &Domain,
    probes: usize,
    mut rng: ChaCha8Rng,
    f: impl Fn(&[f64]) -> Vec<f64>,
) -> Option<MonotoneViolation> {
    let mut worst: Option<MonotoneViolation> = None;
    for _ in 0..probes {
        let a = random_point(domain, &mut rng);
        let b = random_point(domain, &mut rng);
        let (fa, fb) = (f(&a), f(&b));
        let dx: Vec<f64> = b.iter().zip(&a).map(|(p, q)| p - q).collect();
        let df: Vec<f64> = fb.iter().zip(&fa).map(|(p, q)| p - q).collect();
        let d2 = dot(&dx, &dx);
        if d2 == 0.0 {
            continue;
        }
        let ip = dot(&df, &dx);
        let roundoff = 64.0 * f64::EPSILON * (norm(&fa) + norm(&fb)) * d2.sqrt();
        if ip < -roundoff {
            let value = ip / d2;
            if worst.as_ref().is_none_or(|w| value < w.value) {
                worst = Some(MonotoneViolation { a, b, value });
            }
        }
    }
    worst
}

/// Sample `(F(y) − F(x), y − x) ≥ 0` on random pairs of the widened box.
pub fn force_monotone(
    force: &ForceModel,
    domain: &Domain,
    settings: &Settings,
) -> Option<MonotoneViolation> {
    let region = widened_box(domain, settings.cutoff_k);
    worst_pair(
        &region,
        settings.probes,
        settings.rng(stream::FORCE_PAIRS),
        |y| force.eval(y),
    )
}

/// Sample `(v(x₂) − v(x₁), x₂ − x₁) ≥ 0` on random pairs of the domain.
pub fn velocity_monotone(
    init: &InitialData,
    domain: &Domain,
    settings: &Settings,
) -> Option<MonotoneViolation> {
    worst_pair(
        domain,
        settings.probes,
        settings.rng(stream::VELOCITY_PAIRS),
        |x| init.velocity_at(x),
    )
}
