//! Worst-margin search over a box of parameters: tensor grid, random
//! refinement around the worst sample, then a shrinking pattern search.

use rand::Rng;
use rayon::prelude::*;

use crate::settings::{stream, Settings};

/// Random points drawn around the worst grid sample.
pub const REFINE_POINTS: usize = 64;
/// Halving steps of the final pattern search.
pub const POLISH_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub point: Vec<f64>,
    pub margin: f64,
    pub evaluations: usize,
    /// A point where the margin could not be evaluated, with the message.
    pub failure: Option<(Vec<f64>, String)>,
}

/// Index of the smallest value; NaNs are skipped, ties go to the lowest index.
fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Minimize `margin` over the box `[lo, hi]` starting from `grid` (points
/// inside the box). Evaluation errors are reported through `failure`; the
/// first failing point in grid order wins.
pub fn minimize<F>(
    grid: Vec<Vec<f64>>,
    lo: &[f64],
    hi: &[f64],
    settings: &Settings,
    margin: F,
) -> SearchResult
where
    F: Fn(&[f64]) -> Result<f64, String> + Sync,
{
    let eval_all = |pts: &[Vec<f64>]| -> Vec<Result<f64, String>> {
        pts.par_iter().map(|p| margin(p)).collect()
    };
    let mut evaluations = 0;
    let mut failure = None;

    let first = eval_all(&grid);
    evaluations += grid.len();
    let mut values = Vec::with_capacity(first.len());
    for (p, r) in grid.iter().zip(first) {
        match r {
            Ok(v) => values.push(v),
            Err(msg) => {
                if failure.is_none() {
                    failure = Some((p.clone(), msg));
                }
                values.push(f64::NAN);
            }
        }
    }
    let Some(i0) = argmin(&values) else {
        return SearchResult {
            point: grid.first().cloned().unwrap_or_default(),
            margin: f64::NAN,
            evaluations,
            failure,
        };
    };
    let mut best = grid[i0].clone();
    let mut best_val = values[i0];

    // neighbourhood size: a few grid cells
    let dim = lo.len();
    let cells = (grid.len() as f64).powf(1.0 / dim as f64).max(2.0);
    let radius: Vec<f64> = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| 2.0 * (h - l) / cells)
        .collect();
    let clamp = |p: &mut Vec<f64>| {
        for k in 0..dim {
            p[k] = p[k].clamp(lo[k], hi[k]);
        }
    };

    let mut rng = settings.rng(stream::REFINE);
    let refine: Vec<Vec<f64>> = (0..REFINE_POINTS)
        .map(|_| {
            let mut p: Vec<f64> = (0..dim)
                .map(|k| best[k] + radius[k] * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            clamp(&mut p);
            p
        })
        .collect();
    let rv = eval_all(&refine);
    evaluations += refine.len();
    for (p, r) in refine.into_iter().zip(rv) {
        if let Ok(v) = r {
            if v < best_val {
                best_val = v;
                best = p;
            }
        }
    }

    let mut step = radius;
    for _ in 0..POLISH_STEPS {
        let mut trial = Vec::with_capacity(2 * dim);
        for k in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut p = best.clone();
                p[k] += sign * step[k];
                clamp(&mut p);
                trial.push(p);
            }
        }
        let tv = eval_all(&trial);
        evaluations += trial.len();
        let mut moved = false;
        for (p, r) in trial.into_iter().zip(tv) {
            if let Ok(v) = r {
                if v < best_val {
                    best_val = v;
                    best = p;
                    moved = true;
                }
            }
        }
        if !moved {
            for s in &mut step {
                *s *= 0.5;
            }
        }
    }
    SearchResult {
        point: best,
        margin: best_val,
        evaluations,
        failure,
    }
}

/// Tensor grid over the box with `n[k]` points on axis `k`; `spacing[k]`
/// maps `[0, 1]` onto the axis (identity for uniform spacing).
pub fn tensor_grid(
    lo: &[f64],
    hi: &[f64],
    n: &[usize],
    spacing: &[fn(f64) -> f64],
) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = (0..lo.len())
        .map(|k| {
            let m = n[k].max(2);
            (0..m)
                .map(|i| lo[k] + (hi[k] - lo[k]) * spacing[k](i as f64 / (m - 1) as f64))
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

pub fn uniform(u: f64) -> f64 {
    u
}

/// Denser near zero.
pub fn quadratic(u: f64) -> f64 {
    u * u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let grid = tensor_grid(&[0.0, 0.0], &[1.0, 1.0], &[9, 9], &[uniform, uniform]);
        let r = minimize(grid, &[0.0, 0.0], &[1.0, 1.0], &Settings::default(), |p| {
            Ok((p[0] - 0.31).powi(2) + (p[1] - 0.77).powi(2) - 1.0)
        });
        assert!((r.margin + 1.0).abs() < 1e-8);
        assert!((r.point[0] - 0.31).abs() < 1e-4 && (r.point[1] - 0.77).abs() < 1e-4);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        assert_eq!(argmin(&[1.0, 0.0, f64::NAN, 0.0]), Some(1));
        assert_eq!(argmin(&[f64::NAN]), None);
    }

    #[test]
    fn failures_are_reported_in_grid_order() {
        let grid = tensor_grid(&[0.0], &[1.0], &[11], &[uniform]);
        let r = minimize(grid, &[0.0], &[1.0], &Settings::default(), |p| {
            if p[0] > 0.45 {
                Err(format!("bad {}", p[0]))
            } else {
                Ok(p[0])
            }
        });
        assert_eq!(r.failure.unwrap().1, "bad 0.5");
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn deterministic_across_runs() {
        let f = |p: &[f64]| Ok((7.0 * p[0]).sin() * (3.0 * p[1]).cos());
        let g = || tensor_grid(&[0.0, 0.0], &[2.0, 2.0], &[17, 17], &[uniform, quadratic]);
        let a = minimize(g(), &[0.0, 0.0], &[2.0, 2.0], &Settings::default(), f);
        let b = minimize(g(), &[0.0, 0.0], &[2.0, 2.0], &Settings::default(), f);
        assert_eq!(a, b);
    }
}
