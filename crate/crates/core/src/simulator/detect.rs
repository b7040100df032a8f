//! Collision detection over sampled ensembles.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use super::ode::OdeOptions;
use super::path::{first_hit, propagate_piecewise_1d, trajectory, ParabolicPath, Trajectory};
use crate::error::{Error, Result};
use crate::scenario::{ForceModel, Scenario};
use crate::settings::Settings;

/// Relative tolerance of the time bisection.
const TOL_T: f64 = 1e-9;
/// Refinement passes stop once t_first moves by less than this.
const REFINE_REL: f64 = 1e-3;
const MAX_REFINE: usize = 10;
/// Labels per zoom level of the asymptotic check.
const ZOOM_POINTS: usize = 64;
const ZOOM_LEVELS: usize = 8;
/// Distance samples per output interval in the narrow phase.
const NARROW_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Closed-form trajectories sampled in time.
    Exact,
    /// Integrated trajectories sampled in time.
    Numeric,
    /// Infinite-horizon conclusion from final-region motion.
    Asymptotic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Numeric => "numeric",
            Mode::Asymptotic => "asymptotic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    pub found: bool,
    /// Earliest collision time; infinite when none was found.
    pub t_first: f64,
    pub pair: Option<(Vec<f64>, Vec<f64>)>,
    /// Output times matching `min_gap_history`.
    pub times: Vec<f64>,
    /// Smallest adjacent gap (1D) or pair distance at each output time.
    pub min_gap_history: Vec<f64>,
    pub mode: Mode,
    /// Number of sampled particles.
    pub particles: usize,
    pub horizon: f64,
    /// Oracle's own distance to its decision: the smallest relative gap
    /// (sampled modes) or the smallest final velocity slope (asymptotic).
    pub margin: f64,
}

impl CollisionReport {
    fn none(mode: Mode, particles: usize, horizon: f64) -> Self {
        CollisionReport {
            found: false,
            t_first: f64::INFINITY,
            pair: None,
            times: Vec::new(),
            min_gap_history: Vec::new(),
            mode,
            particles,
            horizon,
            margin: f64::INFINITY,
        }
    }
}

pub(crate) fn output_times(horizon: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|k| {
            if k == n {
                horizon
            } else {
                horizon * k as f64 / n as f64
            }
        })
        .collect()
}

/// Trajectories of all labels, in parallel.
pub fn trajectories(s: &Scenario, labels: &[Vec<f64>], horizon: f64) -> Result<Vec<Trajectory>> {
    let opts = OdeOptions::default();
    labels
        .par_iter()
        .map(|x| trajectory(s, x, horizon, &opts))
        .collect()
}

fn mode_of(trajs: &[Trajectory]) -> Mode {
    if trajs.iter().all(Trajectory::is_exact) {
        Mode::Exact
    } else {
        Mode::Numeric
    }
}

fn pos1(tr: &Trajectory, t: f64) -> f64 {
    let mut y = [0.0];
    tr.position(t, &mut y);
    y[0]
}

/// Root of `g` on `[a, b]` with `g(a) > 0 >= g(b)`.
fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

struct Inversion {
    t: f64,
    index: usize,
}

/// First order inversion of adjacent labels on the sampled times, refined
/// by bisection. Also returns the minimum-gap history.
fn first_inversion(
    trajs: &[Trajectory],
    times: &[f64],
    tol_t: f64,
) -> (Option<Inversion>, Vec<f64>) {
    let n = trajs.len();
    let columns: Vec<Vec<f64>> = trajs
        .par_iter()
        .map(|tr| times.iter().map(|&t| pos1(tr, t)).collect())
        .collect();
    let mut history = Vec::with_capacity(times.len());
    let mut hit = None;
    for k in 0..times.len() {
        let gaps = (0..n.saturating_sub(1)).map(|i| columns[i + 1][k] - columns[i][k]);
        history.push(gaps.clone().fold(f64::INFINITY, f64::min));
        if hit.is_some() {
            continue;
        }
        let bad: Vec<usize> = gaps
            .enumerate()
            .filter(|(_, g)| *g <= 0.0)
            .map(|(i, _)| i)
            .collect();
        if bad.is_empty() {
            continue;
        }
        if k == 0 {
            hit = Some(Inversion {
                t: 0.0,
                index: bad[0],
            });
            continue;
        }
        let (ta, tb) = (times[k - 1], times[k]);
        let best = bad
            .par_iter()
            .map(|&i| {
                let g = |t: f64| pos1(&trajs[i + 1], t) - pos1(&trajs[i], t);
                (bisect(g, ta, tb, tol_t), i)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("non-empty");
        hit = Some(Inversion {
            t: best.0,
            index: best.1,
        });
    }
    (hit, history)
}

fn relative_margin(history: &[f64]) -> f64 {
    match history.first() {
        Some(&h0) if h0 > 0.0 => history.iter().fold(f64::INFINITY, |m, &g| m.min(g)) / h0,
        _ => f64::NAN,
    }
}

/// Ordered-gap scan of a 1D ensemble over `[0, horizon]`.
///
/// Infinite horizons are answered by [`asymptotic_verdict_1d`] for gap
/// forces and rejected otherwise.
pub fn detect_collisions_1d(s: &Scenario, settings: &Settings) -> Result<CollisionReport> {
    if !s.is_1d() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: s.dim(),
        });
    }
    let horizon = s.horizon;
    if !horizon.is_finite() {
        return match s.force {
            ForceModel::OneGap { .. } | ForceModel::TwoGap { .. } => asymptotic_verdict_1d(s),
            _ => Err(Error::InfiniteHorizon),
        };
    }
    let xs = s.labels_1d();
    let labels: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let trajs = trajectories(s, &labels, horizon)?;
    let mode = mode_of(&trajs);
    let times = output_times(horizon, settings.output_times);
    let tol_t = TOL_T * horizon;
    let (hit, history) = first_inversion(&trajs, &times, tol_t);
    let mut report = CollisionReport {
        margin: relative_margin(&history),
        times,
        min_gap_history: history,
        ..CollisionReport::none(mode, xs.len(), horizon)
    };
    let Some(hit) = hit else {
        return Ok(report);
    };
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let (mut xa, mut xb) = (xs[hit.index], xs[hit.index + 1]);
    let mut t_first = hit.t;

    // refine around the pair with doubled density until t_first settles
    let mut spacing = xb - xa;
    for _ in 0..MAX_REFINE {
        let w_lo = (xa - 4.0 * spacing).max(lo);
        let w_hi = (xb + 4.0 * spacing).min(hi);
        spacing *= 0.5;
        let count = ((w_hi - w_lo) / spacing).round() as usize + 1;
        let fine: Vec<Vec<f64>> = (0..count)
            .map(|i| vec![w_lo + (w_hi - w_lo) * i as f64 / (count - 1) as f64])
            .collect();
        let ft = trajectories(s, &fine, t_first)?;
        let ftimes = output_times(t_first, settings.output_times / 4);
        let (fhit, _) = first_inversion(&ft, &ftimes, tol_t);
        let Some(fhit) = fhit else { break };
        let change = (t_first - fhit.t).abs() / t_first.max(f64::MIN_POSITIVE);
        t_first = fhit.t;
        xa = fine[fhit.index][0];
        xb = fine[fhit.index + 1][0];
        if change < REFINE_REL {
            break;
        }
    }
    report.found = true;
    report.t_first = t_first;
    report.pair = Some((vec![xa], vec![xb]));
    Ok(report)
}

/// State `(y, v, a)` of a 1D exact path at `t`, using the segment that
/// starts at or before `t`.
fn state_at(p: &ParabolicPath, t: f64) -> (f64, f64, f64) {
    let k = p.segments.partition_point(|s| s.t0 <= t).saturating_sub(1);
    let s = &p.segments[k];
    let dt = t - s.t0;
    (
        s.y0[0] + s.v0[0] * dt + 0.5 * s.a[0] * dt * dt,
        s.v0[0] + s.a[0] * dt,
        s.a[0],
    )
}

/// First time in `[0, ∞)` at which `upper` is no longer ahead of `lower`.
/// Both paths are exact, so the gap is quadratic between breakpoints.
pub(crate) fn pair_crossing(lower: &ParabolicPath, upper: &ParabolicPath) -> Option<f64> {
    let mut breaks: Vec<f64> = lower
        .segments
        .iter()
        .chain(&upper.segments)
        .map(|s| s.t0)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    for (k, &ta) in breaks.iter().enumerate() {
        let tb = breaks.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let (ya, va, aa) = state_at(lower, ta);
        let (yb, vb, ab) = state_at(upper, ta);
        let (g, dv, da) = (yb - ya, vb - va, ab - aa);
        if g <= 0.0 {
            return Some(ta);
        }
        if tb.is_infinite() {
            // common final region: rounding in the velocities must not
            // produce a spurious crossing in the far future
            let tol = 16.0 * f64::EPSILON * (va.abs() + vb.abs());
            if da == 0.0 && dv >= -tol {
                return None;
            }
        }
        if let Some(s) = first_hit(g, dv, da, 0.0) {
            if ta + s <= tb {
                return Some(ta + s);
            }
        }
    }
    None
}

struct Asymptotic {
    crossing: Option<(f64, usize)>,
    /// Worst slope of v(T, x) at the common time after all final entries.
    slope: (f64, usize),
}

fn scan_final(xs: &[f64], paths: &[ParabolicPath]) -> Asymptotic {
    let t_final = paths.iter().map(|p| p.last().t0).fold(0.0, f64::max);
    let crossing = (0..xs.len() - 1)
        .into_par_iter()
        .filter_map(|i| pair_crossing(&paths[i], &paths[i + 1]).map(|t| (t, i)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let v: Vec<f64> = paths.iter().map(|p| state_at(p, t_final).1).collect();
    let slope = (0..xs.len() - 1)
        .map(|i| ((v[i + 1] - v[i]) / (xs[i + 1] - xs[i]), i))
        .fold((f64::INFINITY, 0), |m, c| if c.0 < m.0 { c } else { m });
    Asymptotic { crossing, slope }
}

/// Collision verdict on `[0, ∞)` for one- and two-gap forces.
///
/// Every label is propagated exactly into the last region, where all
/// particles share one acceleration. Adjacent pairs collide iff their exact
/// piecewise-quadratic gap reaches zero; in the last region that happens
/// iff the rear particle is faster. The label grid is then zoomed in around
/// the smallest final-velocity slope to catch narrow collision sets.
pub fn asymptotic_verdict_1d(s: &Scenario) -> Result<CollisionReport> {
    let pw = s.force.piecewise().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "asymptotic verdict needs a gap force, got {}",
            s.force.kind()
        ))
    })?;
    let xs = s.labels_1d();
    let m0 = s.init.mass.eval(xs[0]);
    if xs.iter().any(|&x| s.init.mass.eval(x) != m0) {
        return Err(Error::InvalidParameter(
            "asymptotic verdict needs a constant mass".into(),
        ));
    }
    let last = pw.forces.len() - 1;
    let propagate = |xs: &[f64]| -> Result<Vec<ParabolicPath>> {
        xs.par_iter()
            .map(|&x| {
                let p = propagate_piecewise_1d(s, x, f64::INFINITY)?;
                if p.last().region != last {
                    return Err(Error::NeverReaches {
                        x0: x,
                        boundary: pw.bounds[p.last().region],
                    });
                }
                Ok(p)
            })
            .collect()
    };
    let span = xs[xs.len() - 1] - xs[0];
    let mut report = CollisionReport::none(Mode::Asymptotic, xs.len(), f64::INFINITY);

    let mut grid = xs.clone();
    let mut paths = propagate(&grid)?;
    let mut margin = f64::INFINITY;
    for level in 0..=ZOOM_LEVELS {
        let a = scan_final(&grid, &paths);
        margin = margin.min(a.slope.0);
        if let Some((t, i)) = a.crossing {
            report.found = true;
            report.t_first = t;
            report.pair = Some((vec![grid[i]], vec![grid[i + 1]]));
            break;
        }
        let i = a.slope.1;
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 2).min(grid.len() - 1)];
        if level == ZOOM_LEVELS || hi - lo < 1e-9 * span {
            break;
        }
        grid = (0..ZOOM_POINTS)
            .map(|k| lo + (hi - lo) * k as f64 / (ZOOM_POINTS - 1) as f64)
            .collect();
        paths = propagate(&grid)?;
    }
    report.margin = margin;
    Ok(report)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Closest-pair distance of a point set (sort on the first axis, sweep).
pub(crate) fn closest_pair(points: &[Vec<f64>]) -> f64 {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut best = f64::INFINITY;
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            if points[j][0] - points[i][0] >= best {
                break;
            }
            best = best.min(dist(&points[i], &points[j]));
        }
    }
    best
}

/// Constant-force pair test: with no relative acceleration the pair
/// collides iff R = x2 − x1 and V = v2 − v1 are antiparallel, at t = |R|/|V|.
/// Returns the collision time and the pair margin sin θ − tol (1 when the
/// pair separates).
pub fn constant_force_pair(
    x1: &[f64],
    x2: &[f64],
    v1: &[f64],
    v2: &[f64],
    tol: f64,
) -> (Option<f64>, f64) {
    let r: Vec<f64> = x2.iter().zip(x1).map(|(a, b)| a - b).collect();
    let v: Vec<f64> = v2.iter().zip(v1).map(|(a, b)| a - b).collect();
    let rv: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
    let nr = r.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(rv < 0.0) {
        return (None, 1.0);
    }
    let mut gram = 0.0;
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            gram += (r[i] * v[j] - r[j] * v[i]).powi(2);
        }
    }
    let sin = gram.sqrt() / (nr * nv);
    if sin <= tol {
        (Some(nr / nv), sin - tol)
    } else {
        (None, sin - tol)
    }
}

/// Pairwise-distance scan of a multi-dimensional ensemble.
///
/// A pair collides when its distance drops below `eps_collision` times its
/// initial distance. Grazing near-misses below that threshold count as
/// collisions. Constant forces with constant mass use the exact pair test
/// instead, over the whole horizon (possibly infinite).
pub fn detect_collisions_multid(s: &Scenario, settings: &Settings) -> Result<CollisionReport> {
    let labels = s.labels();
    let n = labels.len();
    let horizon = s.horizon;
    let eps = settings.eps_collision;

    let constant_mass = {
        let m0 = s.init.mass.eval(super::path::mass_key(&labels[0]));
        labels
            .iter()
            .all(|x| s.init.mass.eval(super::path::mass_key(x)) == m0)
    };
    if let (ForceModel::ConstantVec { .. }, true) = (&s.force, constant_mass) {
        let vel: Vec<Vec<f64>> = labels.iter().map(|x| s.init.velocity_at(x)).collect();
        let best = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut hit: Option<(f64, usize, usize)> = None;
                let mut margin = f64::INFINITY;
                for j in i + 1..n {
                    let (t, m) = constant_force_pair(
                        &labels[i],
                        &labels[j],
                        &vel[i],
                        &vel[j],
                        settings.tol_parallel,
                    );
                    margin = margin.min(m);
                    if let Some(t) = t.filter(|t| *t <= horizon) {
                        if hit.is_none_or(|h| t < h.0) {
                            hit = Some((t, i, j));
                        }
                    }
                }
                (hit, margin)
            })
            .collect::<Vec<_>>();
        let mut report = CollisionReport::none(Mode::Exact, n, horizon);
        report.margin = best.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
        if let Some((t, i, j)) = best
            .iter()
            .filter_map(|b| b.0)
            .min_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))))
        {
            report.found = true;
            report.t_first = t;
            report.pair = Some((labels[i].clone(), labels[j].clone()));
        }
        if horizon.is_finite() {
            let times = output_times(horizon, settings.output_times);
            let trajs = trajectories(s, &labels, horizon)?;
            report.min_gap_history = times
                .par_iter()
                .map(|&t| {
                    closest_pair(
                        &trajs
                            .iter()
                            .map(|tr| tr.position_vec(t, s.dim()))
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            report.times = times;
        }
        return Ok(report);
    }
    if !horizon.is_finite() {
        return Err(Error::InfiniteHorizon);
    }

    let d = s.dim();
    let trajs = trajectories(s, &labels, horizon)?;
    let mode = mode_of(&trajs);
    let times = output_times(horizon, settings.output_times);
    // positions at output times and interval midpoints
    let fine = output_times(horizon, 2 * (times.len() - 1));
    let mut pos: Vec<Vec<Vec<f64>>> = trajs
        .par_iter()
        .map(|tr| fine.iter().map(|&t| tr.position_vec(t, d)).collect())
        .collect();
    // centroid frame
    for k in 0..fine.len() {
        let c: Vec<f64> = (0..d)
            .map(|a| pos.iter().map(|p| p[k][a]).sum::<f64>() / n as f64)
            .collect();
        for p in pos.iter_mut() {
            for a in 0..d {
                p[k][a] -= c[a];
            }
        }
    }
    let history: Vec<f64> = (0..times.len())
        .into_par_iter()
        .map(|k| closest_pair(&pos.iter().map(|p| p[2 * k].clone()).collect::<Vec<_>>()))
        .collect();
    let diam = dist(&s.domain.lower(), &s.domain.upper());
    let thr_max = eps * diam;

    let mut report = CollisionReport {
        margin: relative_margin(&history),
        times: times.clone(),
        min_gap_history: history,
        ..CollisionReport::none(mode, n, horizon)
    };
    for k in 0..times.len() - 1 {
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = pos
            .iter()
            .map(|p| {
                let pts = [&p[2 * k], &p[2 * k + 1], &p[2 * k + 2]];
                let chord = dist(pts[0], pts[2]);
                let pad = 0.25 * chord + 0.5 * thr_max;
                let lo = (0..d)
                    .map(|a| pts.iter().map(|q| q[a]).fold(f64::INFINITY, f64::min) - pad)
                    .collect();
                let hi = (0..d)
                    .map(|a| pts.iter().map(|q| q[a]).fold(f64::NEG_INFINITY, f64::max) + pad)
                    .collect();
                (lo, hi)
            })
            .collect();
        let candidates = broad_phase(&boxes);
        if candidates.is_empty() {
            continue;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let hit = candidates
            .par_iter()
            .filter_map(|&(i, j)| {
                let thr = eps * dist(&labels[i], &labels[j]);
                narrow_phase(&trajs[i], &trajs[j], d, ta, tb, thr).map(|t| (t, i, j))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        if let Some((t, i, j)) = hit {
            report.found = true;
            report.t_first = t;
            report.pair = Some((labels[i].clone(), labels[j].clone()));
            break;
        }
    }
    Ok(report)
}

/// Candidate pairs whose boxes overlap, via a uniform hash grid. Each pair
/// is reported once, from the cell holding the low corner of the overlap.
fn broad_phase(boxes: &[(Vec<f64>, Vec<f64>)]) -> Vec<(usize, usize)> {
    let d = boxes[0].0.len();
    let mut extents: Vec<f64> = boxes
        .iter()
        .map(|(lo, hi)| (0..d).map(|a| hi[a] - lo[a]).fold(0.0, f64::max))
        .collect();
    extents.sort_by(f64::total_cmp);
    let cell = (2.0 * extents[extents.len() / 2]).max(f64::MIN_POSITIVE);
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / cell).floor() as i64).collect() };

    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut big = Vec::new();
    for (i, (lo, hi)) in boxes.iter().enumerate() {
        let (kl, kh) = (key(lo), key(hi));
        let cells: i64 = kl.iter().zip(&kh).map(|(a, b)| b - a + 1).product();
        if cells > 64 {
            big.push(i);
            continue;
        }
        let mut c = kl.clone();
        loop {
            grid.entry(c.clone()).or_default().push(i);
            let mut a = 0;
            while a < d {
                c[a] += 1;
                if c[a] <= kh[a] {
                    break;
                }
                c[a] = kl[a];
                a += 1;
            }
            if a == d {
                break;
            }
        }
    }
    let overlap = |i: usize, j: usize| {
        let (a, b) = (&boxes[i], &boxes[j]);
        (0..d).all(|k| a.0[k] <= b.1[k] && b.0[k] <= a.1[k])
    };
    let mut out = Vec::new();
    for (c, members) in &grid {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                if !overlap(i, j) {
                    continue;
                }
                let corner: Vec<f64> = (0..d).map(|k| boxes[i].0[k].max(boxes[j].0[k])).collect();
                if &key(&corner) == c {
                    out.push((i.min(j), i.max(j)));
                }
            }
        }
    }
    let mut is_big = vec![false; boxes.len()];
    for &b in &big {
        is_big[b] = true;
    }
    for &b in &big {
        for j in 0..boxes.len() {
            if j != b && (!is_big[j] || j > b) && overlap(b, j) {
                out.push((b.min(j), b.max(j)));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// First time in `[ta, tb]` at which the pair is closer than `thr`.
fn narrow_phase(
    a: &Trajectory,
    b: &Trajectory,
    d: usize,
    ta: f64,
    tb: f64,
    thr: f64,
) -> Option<f64> {
    let gap = |t: f64| dist(&a.position_vec(t, d), &b.position_vec(t, d)) - thr;
    let ts: Vec<f64> = (0..=NARROW_SAMPLES)
        .map(|k| ta + (tb - ta) * k as f64 / NARROW_SAMPLES as f64)
        .collect();
    let gs: Vec<f64> = ts.iter().map(|&t| gap(t)).collect();
    if gs[0] <= 0.0 {
        return Some(ta);
    }
    if let Some(k) = gs.iter().position(|&g| g <= 0.0) {
        return Some(bisect(gap, ts[k - 1], ts[k], TOL_T * tb.max(1.0)));
    }
    // golden-section search around the smallest sample
    let k = (0..gs.len())
        .min_by(|&p, &q| gs[p].total_cmp(&gs[q]))
        .expect("samples");
    let (mut lo, mut hi) = (ts[k.saturating_sub(1)], ts[(k + 1).min(NARROW_SAMPLES)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - phi * (hi - lo);
    let mut e = lo + phi * (hi - lo);
    let (mut gc, mut ge) = (gap(c), gap(e));
    for _ in 0..60 {
        if gc.min(ge) <= 0.0 {
            break;
        }
        if gc < ge {
            hi = e;
            e = c;
            ge = gc;
            c = hi - phi * (hi - lo);
            gc = gap(c);
        } else {
            lo = c;
            c = e;
            gc = ge;
            e = lo + phi * (hi - lo);
            ge = gap(e);
        }
    }
    let (tm, gm) = if gc <= ge { (c, gc) } else { (e, ge) };
    if gm > 0.0 {
        return None;
    }
    let start = ts[k.saturating_sub(1)];
    Some(bisect(gap, start.min(tm), tm, TOL_T * tb.max(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{ScalarFn, VectorFn};
    use crate::scenario::{build_scenario, Domain, InitialData, Velocity};

    fn line(force: ForceModel, v: &str, lo: f64, hi: f64, horizon: f64) -> Scenario {
        build_scenario(
            Domain::interval(lo, hi).unwrap(),
            force,
            InitialData::scalar(ScalarFn::parse(v).unwrap()),
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn filippov_first_collision_at_one() {
        let s = line(
            ForceModel::Smooth1D {
                force: ScalarFn::constant(0.0),
            },
            "-atan(x)",
            -5.0,
            5.0,
            2.0,
        )
        .with_grid(vec![2001]);
        let r = detect_collisions_1d(&s, &Settings::default()).unwrap();
        assert!(r.found);
        assert!((r.t_first - 1.0).abs() < 0.01, "{}", r.t_first);
        assert_eq!(r.mode, Mode::Exact);
    }

    #[test]
    fn expanding_flow_never_collides() {
        let s = line(
            ForceModel::Smooth1D {
                force: ScalarFn::constant(0.0),
            },
            "x",
            0.0,
            1.0,
            50.0,
        );
        let r = detect_collisions_1d(&s, &Settings::default()).unwrap();
        assert!(!r.found);
        assert!(r.min_gap_history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn asymptotic_gap_cases() {
        let cases = [((1.0, 2.0), false), ((1.0, 1.0), false), ((2.0, 1.0), true)];
        for ((f1, f2), expect) in cases {
            let s = line(
                ForceModel::OneGap { f1, f2, a: 2.0 },
                "0",
                0.0,
                1.0,
                f64::INFINITY,
            );
            let r = detect_collisions_1d(&s, &Settings::default()).unwrap();
            assert_eq!(r.mode, Mode::Asymptotic);
            assert_eq!(r.found, expect, "F1 = {f1}, F2 = {f2}");
        }
    }

    #[test]
    fn two_gap_asymptotic() {
        for (b, expect) in [(3.0, false), (4.0, true)] {
            let s = line(
                ForceModel::TwoGap {
                    f1: 2.0,
                    f2: 1.0,
                    f3: 3.0,
                    a: 2.0,
                    b,
                },
                "0",
                0.0,
                1.0,
                f64::INFINITY,
            );
            assert_eq!(asymptotic_verdict_1d(&s).unwrap().found, expect, "B = {b}");
        }
    }

    #[test]
    fn constant_force_pair_cases() {
        assert_eq!(
            constant_force_pair(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[-1.0, 0.0], 1e-10).0,
            Some(1.0)
        );
        assert_eq!(
            constant_force_pair(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], 1e-10).0,
            None
        );
        assert_eq!(
            constant_force_pair(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0], 1e-10).0,
            None
        );
    }

    #[test]
    fn monotone_linear_force_spreads() {
        let s = build_scenario(
            Domain::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            ForceModel::Linear {
                matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                b: vec![0.0, 0.0],
            },
            InitialData::new(Velocity::Vector(VectorFn::constant(&[0.0, 0.0]))),
            2.0,
        )
        .unwrap()
        .with_grid(vec![12, 12]);
        let r = detect_collisions_multid(&s, &Settings::default()).unwrap();
        assert!(!r.found);
        assert!(r.min_gap_history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn halfspace_slowdown_collides() {
        let s = build_scenario(
            Domain::boxed(vec![0.0, 0.0], vec![0.9, 0.9]).unwrap(),
            ForceModel::HalfSpaceStep {
                f1: vec![0.0, 1.0],
                f2: vec![0.0, 0.5],
                a: 1.0,
            },
            InitialData::new(Velocity::Vector(VectorFn::constant(&[0.0, 0.0]))),
            10.0,
        )
        .unwrap()
        .with_grid(vec![8, 16]);
        let r = detect_collisions_multid(&s, &Settings::default()).unwrap();
        assert!(r.found);
        let (a, b) = r.pair.unwrap();
        assert_eq!(
            a[0], b[0],
            "pair should differ along the force direction only"
        );
    }
}
