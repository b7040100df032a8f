//! Sampled fields on a (t, y) grid and their finite-difference residuals.

use std::io::Write;

use rayon::prelude::*;

use super::{Flow, PointValues, Snapshot};
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Sample region and stencil steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub t0: f64,
    pub t1: f64,
    /// Fixed y-range; `None` follows the image [L(t), R(t)].
    pub y: Option<(f64, f64)>,
    /// Time intervals (times are `nt + 1` points, one if t0 = t1).
    pub nt: usize,
    /// Space intervals.
    pub ny: usize,
    pub ht: f64,
    /// Space step relative to the width of the y-range.
    pub hy_rel: f64,
}

impl Window {
    /// Default sampling of [t0, t1] with steps of 5e-4 of the ranges.
    pub fn new(t0: f64, t1: f64) -> Self {
        Window {
            t0,
            t1,
            y: None,
            nt: 16,
            ny: 32,
            ht: 5e-4 * (t1 - t0).max(t1.abs()).max(1e-3),
            hy_rel: 5e-4,
        }
    }

    pub fn with_counts(mut self, nt: usize, ny: usize) -> Self {
        self.nt = nt.max(1);
        self.ny = ny.max(2);
        self
    }

    pub fn with_y(mut self, lo: f64, hi: f64) -> Self {
        self.y = Some((lo, hi));
        self
    }

    /// Both stencil steps scaled by `f`.
    pub fn refined(mut self, f: f64) -> Self {
        self.ht *= f;
        self.hy_rel *= f;
        self
    }

    fn times(&self) -> Vec<f64> {
        if self.t1 == self.t0 {
            return vec![self.t0];
        }
        (0..=self.nt)
            .map(|k| self.t0 + (self.t1 - self.t0) * k as f64 / self.nt as f64)
            .collect()
    }
}

/// Field samples; `ys[k]`, `u[k]`, … belong to `times[k]`. Residuals are
/// NaN where the stencil leaves the image or the admissible times.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub times: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub rho_transport: Vec<Vec<f64>>,
    pub rho_pushforward: Vec<Vec<f64>>,
    /// ∂u/∂t + u ∂u/∂y − F(y)/m.
    pub residual_euler: Vec<Vec<f64>>,
    /// ∂ρ/∂t + u ∂ρ/∂y for the transported density.
    pub residual_transport: Vec<Vec<f64>>,
    /// ∂ρ/∂t + ∂(uρ)/∂y for the pushforward density.
    pub residual_continuity: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Residuals {
    euler: f64,
    transport: f64,
    continuity: f64,
}

const NAN3: Residuals = Residuals {
    euler: f64::NAN,
    transport: f64::NAN,
    continuity: f64::NAN,
};

fn residuals(
    flow: &Flow,
    now: &Snapshot,
    before: &Snapshot,
    after: &Snapshot,
    y: f64,
    ht: f64,
    hy: f64,
    c: &PointValues,
) -> Result<Residuals> {
    let (tm, tp) = (before.point(y)?, after.point(y)?);
    let (ym, yp) = (now.point(y - hy)?, now.point(y + hy)?);
    let s = flow.scenario();
    let accel = s.force.eval1(y) / s.init.mass.eval(c.x);
    let dt = |f: fn(&PointValues) -> f64| (f(&tp) - f(&tm)) / (2.0 * ht);
    let dy = |f: fn(&PointValues) -> f64| (f(&yp) - f(&ym)) / (2.0 * hy);
    Ok(Residuals {
        euler: dt(|p| p.u) + c.u * dy(|p| p.u) - accel,
        transport: dt(|p| p.rho_transport) + c.u * dy(|p| p.rho_transport),
        continuity: dt(|p| p.rho_pushforward) + dy(|p| p.u * p.rho_pushforward),
    })
}

/// Sample u, both densities and the residuals over `w`.
///
/// Fails with `NotRegular` if the window reaches the first collision.
pub fn field_grid(flow: &Flow, w: &Window) -> Result<FieldGrid> {
    if w.t1 >= flow.t_limit() {
        return Err(Error::NotRegular {
            t: w.t1,
            reason: format!("first collision at t = {}", flow.t_limit()),
        });
    }
    let times = w.times();
    let rows = times
        .par_iter()
        .map(|&t| {
            let now = flow.snapshot(t)?;
            let (l, r) = w.y.unwrap_or_else(|| now.image());
            let hy = w.hy_rel * (r - l);
            let ys: Vec<f64> = (0..=w.ny)
                .map(|j| l + (r - l) * j as f64 / w.ny as f64)
                .collect();
            let stencil_ok =
                t - w.ht >= 0.0 && t + w.ht < flow.t_limit() && t + w.ht <= flow.horizon();
            let (before, after) = if stencil_ok {
                (
                    Some(flow.snapshot(t - w.ht)?),
                    Some(flow.snapshot(t + w.ht)?),
                )
            } else {
                (None, None)
            };
            let cells = ys
                .par_iter()
                .map(|&y| {
                    let c = now.point(y)?;
                    let res = match (&before, &after) {
                        (Some(b), Some(a)) => match residuals(flow, &now, b, a, y, w.ht, hy, &c) {
                            Ok(r) => r,
                            Err(Error::OutOfImage { .. }) => NAN3,
                            Err(e) => return Err(e),
                        },
                        _ => NAN3,
                    };
                    Ok((c, res))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((ys, cells))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut g = FieldGrid {
        times,
        ys: Vec::new(),
        u: Vec::new(),
        rho_transport: Vec::new(),
        rho_pushforward: Vec::new(),
        residual_euler: Vec::new(),
        residual_transport: Vec::new(),
        residual_continuity: Vec::new(),
    };
    for (ys, cells) in rows {
        g.ys.push(ys);
        g.u.push(cells.iter().map(|c| c.0.u).collect());
        g.rho_transport
            .push(cells.iter().map(|c| c.0.rho_transport).collect());
        g.rho_pushforward
            .push(cells.iter().map(|c| c.0.rho_pushforward).collect());
        g.residual_euler
            .push(cells.iter().map(|c| c.1.euler).collect());
        g.residual_transport
            .push(cells.iter().map(|c| c.1.transport).collect());
        g.residual_continuity
            .push(cells.iter().map(|c| c.1.continuity).collect());
    }
    Ok(g)
}

/// Largest |value| over a grid field, with where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub max: f64,
    pub t: f64,
    pub y: f64,
}

impl FieldGrid {
    fn max_of(&self, field: &[Vec<f64>]) -> Residual {
        let mut best = Residual {
            max: f64::NAN,
            t: f64::NAN,
            y: f64::NAN,
        };
        for (k, row) in field.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_nan() && !(v.abs() <= best.max) {
                    best = Residual {
                        max: v.abs(),
                        t: self.times[k],
                        y: self.ys[k][j],
                    };
                }
            }
        }
        best
    }

    pub fn max_euler(&self) -> Residual {
        self.max_of(&self.residual_euler)
    }

    pub fn max_transport(&self) -> Residual {
        self.max_of(&self.residual_transport)
    }

    pub fn max_continuity(&self) -> Residual {
        self.max_of(&self.residual_continuity)
    }

    /// Largest pushforward density at each time.
    pub fn max_density(&self) -> Vec<f64> {
        self.rho_pushforward
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Largest Euler defect over the window.
pub fn euler_residual(flow: &Flow, w: &Window) -> Result<Residual> {
    Ok(field_grid(flow, w)?.max_euler())
}

/// Largest transport and continuity defects over the window.
pub fn continuity_residual(flow: &Flow, w: &Window) -> Result<(Residual, Residual)> {
    let g = field_grid(flow, w)?;
    Ok((g.max_transport(), g.max_continuity()))
}

/// ∫ over [L(t), R(t)] of the pushforward density.
pub fn mass_at(flow: &Flow, t: f64) -> Result<f64> {
    let snap = flow.snapshot(t)?;
    let (l, r) = snap.image();
    // the integrand fails only through inversion, so report the first error
    let err = std::sync::Mutex::new(None);
    let f = |y: f64| match snap.point(y) {
        Ok(p) => p.rho_pushforward,
        Err(e) => {
            err.lock().expect("no panics while locked").get_or_insert(e);
            f64::NAN
        }
    };
    let res = integrate(f, l, r, 1e-10, 1e-14);
    if let Some(e) = err.into_inner().expect("no panics while locked") {
        return Err(e);
    }
    Ok(res?.value)
}

/// CSV with header `t,y,u,rho_transport,rho_pushforward,res_euler,res_continuity`.
pub fn write_field_csv(g: &FieldGrid, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "t,y,u,rho_transport,rho_pushforward,res_euler,res_continuity"
    )?;
    for (k, t) in g.times.iter().enumerate() {
        for j in 0..g.ys[k].len() {
            writeln!(
                out,
                "{t},{},{},{},{},{},{}",
                g.ys[k][j],
                g.u[k][j],
                g.rho_transport[k][j],
                g.rho_pushforward[k][j],
                g.residual_euler[k][j],
                g.residual_continuity[k][j]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::ScalarFn;
    use crate::scenario::{
        build_blowup_scenario, build_scenario, BlowupCurve, Domain, ForceModel, InitialData,
        Scenario,
    };
    use crate::settings::Settings;

    fn smooth(f: &str, v: &str, horizon: f64) -> Scenario {
        build_scenario(
            Domain::interval(0.0, 1.0).unwrap(),
            ForceModel::Smooth1D {
                force: ScalarFn::parse(f).unwrap(),
            },
            InitialData::scalar(ScalarFn::parse(v).unwrap()),
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn expanding_flow() {
        let s = smooth("0", "x", 1.0);
        let flow = Flow::new(&s, 1.0, &Settings::default()).unwrap();
        let w = Window::new(0.0, 1.0);
        let g = field_grid(&flow, &w).unwrap();
        for (k, &t) in g.times.iter().enumerate() {
            for (j, &y) in g.ys[k].iter().enumerate() {
                assert!((g.u[k][j] - y / (1.0 + t)).abs() < 1e-8);
                assert!((g.rho_pushforward[k][j] - 1.0 / (1.0 + t)).abs() < 1e-8);
            }
        }
        let e = g.max_euler().max;
        assert!(e <= 1e-6, "{e}");
        assert!(g.max_transport().max <= 1e-8);
        assert!(g.max_continuity().max <= 1e-6);
        let fine = euler_residual(&flow, &w.clone().refined(0.5)).unwrap().max;
        assert!(e / fine >= 3.0, "{e} {fine}");
        assert!((mass_at(&flow, 0.8).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uniform_acceleration_is_exact() {
        let s = smooth("1", "0", 2.0);
        let flow = Flow::new(&s, 2.0, &Settings::default()).unwrap();
        let r = euler_residual(&flow, &Window::new(0.0, 1.5)).unwrap();
        assert!(r.max <= 1e-8, "{r:?}");
    }

    #[test]
    fn blowup_density_grows_with_mass_kept() {
        let curve = BlowupCurve::new(
            ScalarFn::parse("exp(-t)").unwrap(),
            ScalarFn::parse("-exp(-t)").unwrap(),
            ScalarFn::parse("exp(-t)").unwrap(),
        );
        let s = build_blowup_scenario(curve).unwrap().with_horizon(3.0);
        let flow = Flow::new(&s, 3.0, &Settings::default()).unwrap();
        let g = field_grid(&flow, &Window::new(0.0, 3.0).with_counts(6, 16)).unwrap();
        let m = g.max_density();
        assert!(m.windows(2).all(|p| p[1] > p[0]), "{m:?}");
        for &t in &[0.5, 1.5, 2.5] {
            assert!((mass_at(&flow, t).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_header() {
        let s = smooth("0", "x", 1.0);
        let flow = Flow::new(&s, 1.0, &Settings::default()).unwrap();
        let g = field_grid(&flow, &Window::new(0.0, 1.0).with_counts(2, 2)).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y,u,rho_transport,rho_pushforward,res_euler,res_continuity\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 3);
    }
}
