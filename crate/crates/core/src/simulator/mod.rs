//! Ensemble propagation and collision detection: the reference against
//! which the analytic criteria are validated.

mod detect;
pub mod ode;
mod path;

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

pub use detect::{
    asymptotic_verdict_1d, constant_force_pair, detect_collisions_1d, detect_collisions_multid,
    trajectories, CollisionReport, Mode,
};
pub use path::{
    first_hit, propagate_central, propagate_halfspace, propagate_numeric, propagate_piecewise_1d,
    propagate_regions, trajectory, NumericPath, ParabolicPath, PolarPath, Segment, Trajectory,
};

pub(crate) use detect::{output_times, pair_crossing};
pub(crate) use path::mass_key;

use crate::error::Result;
use crate::quadrature::work;
use crate::scenario::{ForceModel, Scenario, Velocity};
use crate::settings::Settings;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub x0: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub region: usize,
    /// Full energy at t = 0 (line and central fields; NaN otherwise).
    pub energy0: f64,
}

/// A boundary crossing: particle index, boundary index, time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub particle: usize,
    pub boundary: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrajectory {
    pub times: Vec<f64>,
    /// `particles[k][i]`: particle `i` at `times[k]`.
    pub particles: Vec<Vec<ParticleState>>,
    pub events: Vec<CrossingEvent>,
}

fn energy0(s: &Scenario, x0: &[f64]) -> f64 {
    match (&s.force, &s.init.velocity) {
        (ForceModel::Central { potential }, Velocity::Radial { g, h }) => {
            let r = mass_key(x0);
            0.5 * g.eval(r).powi(2) + potential.eval(r) + 0.5 * r * r * h.eval(r).powi(2)
        }
        (_, Velocity::Scalar(v)) => {
            let m = s.init.mass.eval(x0[0]);
            let u = work(&s.force, 0.0, x0[0]).map_or(f64::NAN, |w| -w);
            0.5 * m * v.eval(x0[0]).powi(2) + u
        }
        _ => f64::NAN,
    }
}

/// Propagate every grid label to `horizon` and sample `n_out + 1` uniform
/// output times.
pub fn simulate_ensemble(s: &Scenario, horizon: f64, n_out: usize) -> Result<EnsembleTrajectory> {
    let labels = s.labels();
    let trajs = trajectories(s, &labels, horizon)?;
    let times = output_times(horizon, n_out);
    let d = s.dim();
    let e0: Vec<f64> = labels.par_iter().map(|x| energy0(s, x)).collect();
    let particles = times
        .par_iter()
        .map(|&t| {
            trajs
                .iter()
                .zip(&labels)
                .zip(&e0)
                .map(|((tr, x0), &e)| {
                    let (mut y, mut v) = (vec![0.0; d], vec![0.0; d]);
                    tr.state(t, &mut y, &mut v);
                    ParticleState {
                        x0: x0.clone(),
                        y,
                        v,
                        region: tr.region(t),
                        energy0: e,
                    }
                })
                .collect()
        })
        .collect();
    let mut events: Vec<CrossingEvent> = trajs
        .iter()
        .enumerate()
        .flat_map(|(i, tr)| {
            tr.crossings()
                .into_iter()
                .map(move |(t, from, to)| CrossingEvent {
                    particle: i,
                    boundary: from.min(to),
                    t,
                })
        })
        .collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.particle.cmp(&b.particle)));
    Ok(EnsembleTrajectory {
        times,
        particles,
        events,
    })
}

/// Collision scan appropriate to the dimension of `s`.
pub fn detect_collisions(s: &Scenario, settings: &Settings) -> Result<CollisionReport> {
    if s.is_1d() {
        detect_collisions_1d(s, settings)
    } else {
        detect_collisions_multid(s, settings)
    }
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    if d == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=d).map(|k| format!("{prefix}_{k}")).collect()
    }
}

/// CSV with header `t,particle_index,x0...,y...,v...`.
pub fn write_trajectory_csv(e: &EnsembleTrajectory, out: &mut impl Write) -> std::io::Result<()> {
    let d = e
        .particles
        .first()
        .and_then(|p| p.first())
        .map_or(1, |p| p.y.len());
    let mut header = vec!["t".to_string(), "particle_index".to_string()];
    for p in ["x0", "y", "v"] {
        header.extend(axis_names(p, d));
    }
    writeln!(out, "{}", header.join(","))?;
    for (t, states) in e.times.iter().zip(&e.particles) {
        for (i, p) in states.iter().enumerate() {
            let mut line = format!("{t},{i}");
            for c in p.x0.iter().chain(&p.y).chain(&p.v) {
                let _ = write!(line, ",{c}");
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

pub(crate) fn fmt_point(p: &[f64]) -> String {
    if p.len() == 1 {
        format!("{}", p[0])
    } else {
        format!(
            "({})",
            p.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )
    }
}

/// Key-value text form of a collision report.
pub fn report_text(r: &CollisionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "found: {}", r.found);
    let _ = writeln!(
        s,
        "t_first: {}",
        if r.found {
            r.t_first.to_string()
        } else {
            "none".into()
        }
    );
    match &r.pair {
        Some((a, b)) => {
            let _ = writeln!(s, "pair: {} {}", fmt_point(a), fmt_point(b));
        }
        None => {
            let _ = writeln!(s, "pair: none");
        }
    }
    let _ = writeln!(s, "mode: {}", r.mode);
    let _ = writeln!(s, "grid: {}", r.particles);
    let _ = writeln!(s, "horizon: {}", r.horizon);
    let _ = writeln!(s, "margin: {}", r.margin);
    if let Some(m) = r.min_gap_history.iter().copied().reduce(f64::min) {
        let _ = writeln!(s, "min_gap: {m}");
    }
    s
}
