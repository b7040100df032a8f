//! Dormand–Prince 5(4) with dense output and a single switching function.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Bisection steps after the interpolated guess of an event time.
const EVENT_BISECTIONS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Any component above this magnitude aborts with `BlowUp`.
    pub overflow: f64,
    /// Largest step; `INFINITY` leaves the choice to error control.
    pub h_max: f64,
    /// Take steps of exactly this size without error control, so that
    /// nearby initial data see the same discretization.
    pub fixed_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            overflow: 1e12,
            h_max: f64::INFINITY,
            fixed_step: None,
        }
    }
}

/// One accepted step in Hairer's continuous-output form.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let th = if self.h == 0.0 {
            0.0
        } else {
            (t - self.t0) / self.h
        };
        let th1 = 1.0 - th;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + th * (self.r[1][i]
                    + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }
}

/// Piecewise-polynomial solution over `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    pub dim: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub steps: Vec<DenseStep>,
}

impl DenseSolution {
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        if self.steps.is_empty() || t >= self.t_end {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let k = self.steps.partition_point(|s| s.t0 <= t).saturating_sub(1);
        self.steps[k].eval(t, out);
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(t, &mut out);
        out
    }
}

/// How an integration run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum End {
    Reached,
    /// The switching function crossed zero from above at `t_end`.
    Event,
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1`.
///
/// `accept(y_old, y_new)` may veto a step (it is then halved). If `switch`
/// is given, integration stops at the first time it turns negative.
pub fn solve<F, A>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
    mut accept: A,
    switch: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<(DenseSolution, End)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    A: FnMut(&[f64], &[f64]) -> bool,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut steps = Vec::new();
    let done = |steps: Vec<DenseStep>, t_end: f64, y_end: Vec<f64>, end: End| {
        Ok((
            DenseSolution {
                dim: n,
                t_start: t0,
                t_end,
                y_end,
                steps,
            },
            end,
        ))
    };
    if t1 <= t0 {
        return done(steps, t0, y, End::Reached);
    }

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    rhs(t, &y, &mut k1);

    let mut h = match opts.fixed_step {
        Some(h) => h,
        None => initial_step(&y, &k1, t1 - t0, opts).min(opts.h_max),
    };
    for _ in 0..opts.max_steps {
        if t >= t1 {
            return done(steps, t, y, End::Reached);
        }
        // stretch the step rather than leave a sliver before t1
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepFailure { t });
        }
        let stage = |tmp: &mut Vec<f64>, coeffs: &[(f64, &Vec<f64>)]| {
            for i in 0..n {
                tmp[i] = y[i] + h * coeffs.iter().map(|(c, k)| c * k[i]).sum::<f64>();
            }
        };
        stage(&mut tmp, &[(A21, &k1)]);
        rhs(t + C2 * h, &tmp, &mut k2);
        stage(&mut tmp, &[(A31, &k1), (A32, &k2)]);
        rhs(t + C3 * h, &tmp, &mut k3);
        stage(&mut tmp, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * h, &tmp, &mut k4);
        stage(&mut tmp, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + C5 * h, &tmp, &mut k5);
        stage(
            &mut tmp,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        rhs(t + h, &tmp, &mut k6);
        for i in 0..n {
            y1[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + h, &y1, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = if opts.fixed_step.is_some() {
            0.0
        } else {
            (err / n as f64).sqrt()
        };
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            continue;
        }
        if !accept(&y, &y1) {
            h *= 0.5;
            continue;
        }

        let mut r = [
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
        ];
        for i in 0..n {
            let dy = y1[i] - y[i];
            let bspl = h * k1[i] - dy;
            r[0][i] = y[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k7[i] - bspl;
            r[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let step = DenseStep { t0: t, h, r };

        if let Some(g) = switch {
            if g(&y1) < 0.0 {
                let te = locate_event(&step, g, t, t + h, n);
                let mut ye = vec![0.0; n];
                step.eval(te, &mut ye);
                steps.push(step);
                return done(steps, te, ye, End::Event);
            }
        }
        if y1.iter().any(|v| v.abs() > opts.overflow) {
            return Err(Error::BlowUp { t: t + h });
        }
        steps.push(step);
        t = if last { t1 } else { t + h };
        std::mem::swap(&mut y, &mut y1);
        std::mem::swap(&mut k1, &mut k7);
        h = match opts.fixed_step {
            Some(hf) => hf,
            None => {
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                (h * fac).min(opts.h_max)
            }
        };
    }
    Err(Error::StepFailure { t })
}

fn initial_step(y: &[f64], f: &[f64], span: f64, opts: &OdeOptions) -> f64 {
    let sc = |v: f64| opts.atol + opts.rtol * v.abs();
    let d0 = y.iter().map(|&v| (v / sc(v)).powi(2)).sum::<f64>().sqrt();
    let d1 = y
        .iter()
        .zip(f)
        .map(|(&v, &d)| (d / sc(v)).powi(2))
        .sum::<f64>()
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(0.01 * span).max(1e-12 * span)
}

/// First zero of `g` along the step: quadratic interpolation through three
/// samples gives a guess, then bisection on the bracket.
fn locate_event(step: &DenseStep, g: &dyn Fn(&[f64]) -> f64, ta: f64, tb: f64, n: usize) -> f64 {
    let mut buf = vec![0.0; n];
    let mut gat = |t: f64| {
        step.eval(t, &mut buf);
        g(&buf)
    };
    let (mut lo, mut hi) = (ta, tb);
    let tm = 0.5 * (ta + tb);
    let (ga, gm, gb) = (gat(ta), gat(tm), gat(tb));
    if gm < 0.0 {
        hi = tm;
    } else {
        lo = tm;
    }
    if let Some(guess) = quadratic_root(ta, tm, tb, ga, gm, gb, lo, hi) {
        if gat(guess) < 0.0 {
            hi = guess;
        } else {
            lo = guess;
        }
    }
    for _ in 0..EVENT_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if gat(mid) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[allow(clippy::too_many_arguments)]
fn quadratic_root(
    t0: f64,
    t1: f64,
    t2: f64,
    g0: f64,
    g1: f64,
    g2: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    // Newton form through the three samples
    let d01 = (g1 - g0) / (t1 - t0);
    let d12 = (g2 - g1) / (t2 - t1);
    let c = (d12 - d01) / (t2 - t0);
    // p(t) = g0 + d01 (t - t0) + c (t - t0)(t - t1)
    let a = c;
    let b = d01 - c * (t0 + t1);
    let k = g0 - d01 * t0 + c * t0 * t1;
    let roots: Vec<f64> = if a.abs() < 1e-300 {
        if b == 0.0 {
            vec![]
        } else {
            vec![-k / b]
        }
    } else {
        let disc = b * b - 4.0 * a * k;
        if disc < 0.0 {
            vec![]
        } else {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let mut r = vec![q / a];
            if q != 0.0 {
                r.push(k / q);
            }
            r
        }
    };
    roots.into_iter().find(|r| *r > lo && *r < hi)
}
