//! Criteria in several dimensions: monotone and linear forces, constant
//! forces, the half-space step and central fields.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::search::{minimize, tensor_grid, uniform};
use super::{classify, require, temper, Criterion, Inequality, Outcome, Verdict, Witness};
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::scenario::{assumptions_report, Domain, ForceModel, Scenario, Status, Velocity};
use crate::settings::Settings;
use crate::simulator::constant_force_pair;

/// Eigen-structure of a force matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Eigenvalues as (re, im).
    pub eigenvalues: Vec<(f64, f64)>,
    pub real: bool,
    /// Eigenvectors span the space.
    pub eigenbasis: bool,
    pub min_real: f64,
    /// Smallest eigenvalue of (A + Aᵀ)/2.
    pub min_symmetric: f64,
}

pub fn linear_spectrum(matrix: &[Vec<f64>], tol_eig: f64) -> Spectrum {
    let n = matrix.len();
    let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
    let scale = a.norm().max(1.0);
    let mut eig: Vec<(f64, f64)> = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect();
    eig.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let real = eig.iter().all(|e| e.1.abs() <= tol_eig.max(1e-12) * scale);
    let min_real = eig.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let sym = (&a + a.transpose()) * 0.5;
    let min_symmetric = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    let mut eigenbasis = real;
    if real {
        let mut k = 0;
        while k < eig.len() {
            let mut end = k + 1;
            while end < eig.len() && eig[end].0 - eig[end - 1].0 <= 1e-6 * scale {
                end += 1;
            }
            let lambda = eig[k..end].iter().map(|e| e.0).sum::<f64>() / (end - k) as f64;
            let shifted = &a - DMatrix::identity(n, n) * lambda;
            let rank = shifted.svd(false, false).rank(1e-8 * scale);
            if n - rank < end - k {
                eigenbasis = false;
            }
            k = end;
        }
    }
    Spectrum {
        eigenvalues: eig,
        real,
        eigenbasis,
        min_real,
        min_symmetric,
    }
}

/// Sampled monotonicity of force and velocity. Sufficient only.
pub fn check_monotone_multi(s: &Scenario, settings: &Settings) -> Verdict {
    let report = assumptions_report(s, settings)
        .into_iter()
        .find(|r| r.criterion == Criterion::MonotoneForce);
    match report {
        Some(r) if r.status() == Status::Yes => {
            Verdict::new(Outcome::Regular, Criterion::MonotoneForce, 0.0)
        }
        Some(r) => {
            let h = r.first_problem().expect("failing report has a hypothesis");
            Verdict::inconclusive(
                Criterion::MonotoneForce,
                format!("`{}` fails: {}", h.name, h.witness.as_deref().unwrap_or("")),
            )
        }
        None => Verdict::inconclusive(Criterion::MonotoneForce, "force class is not covered"),
    }
}

/// Linear force A·y + b: regular if the spectrum is real, non-negative and
/// diagonalizable, (A + Aᵀ)/2 is positive semidefinite and the velocity is
/// monotone. Sufficient only.
pub fn check_linear(s: &Scenario, settings: &Settings) -> Verdict {
    let ForceModel::Linear { matrix, .. } = &s.force else {
        return Verdict::inconclusive(Criterion::LinearSpectrum, "force is not linear");
    };
    let spectrum = linear_spectrum(matrix, settings.tol_eig);
    let c = Criterion::LinearSpectrum;
    if !spectrum.real {
        return Verdict::inconclusive(c, "complex spectrum");
    }
    if !spectrum.eigenbasis {
        return Verdict::inconclusive(c, "eigenvectors do not span the space");
    }
    if spectrum.min_real < -settings.tol_eig {
        return Verdict::inconclusive(c, format!("negative eigenvalue {}", spectrum.min_real));
    }
    if spectrum.min_symmetric < -settings.tol_eig {
        return Verdict::inconclusive(
            c,
            format!(
                "symmetric part has negative eigenvalue {}",
                spectrum.min_symmetric
            ),
        );
    }
    let report = assumptions_report(s, settings)
        .into_iter()
        .find(|r| r.criterion == c)
        .expect("linear force has a spectrum report");
    if let Some(h) = report.hypotheses.iter().find(|h| h.status != Status::Yes) {
        return Verdict::inconclusive(
            c,
            format!("`{}` fails: {}", h.name, h.witness.as_deref().unwrap_or("")),
        );
    }
    Verdict::new(
        Outcome::Regular,
        c,
        spectrum.min_real.min(spectrum.min_symmetric),
    )
}

/// Exact test for one pair under a common constant force.
pub fn check_constant_force_pair(
    x1: &[f64],
    x2: &[f64],
    v1: &[f64],
    v2: &[f64],
    tol_parallel: f64,
) -> Verdict {
    let (t, margin) = constant_force_pair(x1, x2, v1, v2, tol_parallel);
    match t {
        Some(t) => Verdict::new(Outcome::Collision, Criterion::ConstantForcePair, margin)
            .with_witness(Witness {
                x1: x1.to_vec(),
                x2: x2.to_vec(),
                time: Some(t),
                time_is_bound: false,
            }),
        None => Verdict::new(Outcome::Regular, Criterion::ConstantForcePair, margin),
    }
}

/// Pair test over every pair of grid labels. A colliding pair proves a
/// collision; a clean sweep proves nothing about the continuum.
pub fn check_constant_force_sweep(s: &Scenario, settings: &Settings) -> Verdict {
    let c = Criterion::ConstantForcePair;
    if let Err(e) = require(s, c, settings) {
        return Verdict::inconclusive(c, e.to_string());
    }
    let labels = s.labels();
    let vel: Vec<Vec<f64>> = labels.iter().map(|x| s.init.velocity_at(x)).collect();
    let n = labels.len();
    let hit = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            (i + 1..n)
                .filter_map(|j| {
                    let (t, m) = constant_force_pair(
                        &labels[i],
                        &labels[j],
                        &vel[i],
                        &vel[j],
                        settings.tol_parallel,
                    );
                    t.map(|t| (t, m, i, j))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then((a.2, a.3).cmp(&(b.2, b.3))));
    match hit {
        Some((t, m, i, j)) => check_constant_force_pair(
            &labels[i],
            &labels[j],
            &vel[i],
            &vel[j],
            settings.tol_parallel,
        )
        .with_location(labels[i].clone())
        .with_reason(format!("labels collide at t = {t} (pair margin {m})")),
        None => Verdict::inconclusive(
            c,
            "no sampled pair collides; the sweep does not cover the continuum",
        ),
    }
}

/// Colliding pair for a half-space step with F1_d > F2_d, released at rest.
///
/// Two labels offset along F2 − F1 meet after both crossed y_d = A.
pub fn halfspace_witness(f1: &[f64], f2: &[f64], a: f64, domain: &Domain) -> Option<Witness> {
    let d = f1.len() - 1;
    let diff: Vec<f64> = f2.iter().zip(f1).map(|(p, q)| p - q).collect();
    let norm = diff.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(f1[d] > 0.0) || !(diff[d] < 0.0) {
        return None;
    }
    let x1: Vec<f64> = domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(l, u)| 0.5 * (l + u))
        .collect();
    let h = 1e-3 * domain.span() / norm;
    let x2: Vec<f64> = x1.iter().zip(&diff).map(|(x, c)| x - h * c).collect();
    if !domain.contains(&x2) {
        return None;
    }
    let tau = |x: &[f64]| (2.0 * (a - x[d]) / f1[d]).sqrt();
    let (t1, t2) = (tau(&x1), tau(&x2));
    let s = t1 - t2;
    if !(s > 0.0) || h < 0.5 * s * s {
        return None;
    }
    Some(Witness {
        x1,
        x2,
        time: Some(h / s + 0.5 * (t1 + t2)),
        time_is_bound: false,
    })
}

/// Particles at rest below the plane y_d = A, force F1 below and F2 above:
/// no collisions iff F1_d ≤ F2_d.
pub fn check_halfspace_step(f1: &[f64], f2: &[f64], a: f64, domain: &Domain) -> Result<Verdict> {
    if f1.len() != f2.len() || f1.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            found: f1.len().max(f2.len()),
        });
    }
    let d = f1.len() - 1;
    if !(f1[d] > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "F1_d = {} must be positive",
            f1[d]
        )));
    }
    if f2[d] < 0.0 {
        return Err(Error::HypothesisViolated {
            hypothesis: "F2_d >= 0".into(),
            witness: format!("F2_d = {}; particles may oscillate across the plane", f2[d]),
        });
    }
    let margin = f2[d] - f1[d];
    let outcome = classify(margin, f1[d], 0.0, Inequality::NonStrict);
    let mut v = Verdict::new(outcome, Criterion::HalfSpaceStep, margin);
    if outcome == Outcome::Collision {
        match halfspace_witness(f1, f2, a, domain) {
            Some(w) => v = v.with_witness(w),
            None => {
                v.outcome = Outcome::Inconclusive;
                v.reason = Some("no witness pair fits inside the domain".into());
            }
        }
    }
    Ok(v)
}

/// Central field with radial speed g and angular speed h: sufficient that
/// ∫_{r1}^{r2} ∂_{r1} (2(E0(r1) − V(z, r1)))^{−1/2} dz < 1/g(r1) for all
/// r1 in the annulus and r2 > r1 up to the cutoff.
pub fn check_central(s: &Scenario, settings: &Settings) -> Result<Verdict> {
    let report = require(s, Criterion::CentralField, settings)?;
    let (ForceModel::Central { potential }, Velocity::Radial { g, h }) =
        (&s.force, &s.init.velocity)
    else {
        unreachable!("central report requires radial data");
    };
    let (big_r1, big_r2) = s.domain.bounds_1d();
    let r_cut = big_r2 + settings.cutoff_k * (big_r2 - big_r1);

    let phi = |z: f64, r: f64| {
        let m2 = (r * r * h.eval(r)).powi(2);
        let e0 = 0.5 * g.eval(r).powi(2) + potential.eval(r) + 0.5 * m2 / (r * r);
        let v = potential.eval(z) + 0.5 * m2 / (z * z);
        (2.0 * (e0 - v)).powf(-0.5)
    };
    let margin = |r1: f64, r2: f64| -> Result<f64> {
        let eta = 1e-6 * r1;
        let dphi = |z: f64| (phi(z, r1 + eta) - phi(z, r1 - eta)) / (2.0 * eta);
        let i = integrate(dphi, r1, r2, 1e-10, 1e-14)?;
        Ok(1.0 / g.eval(r1) - i.value)
    };

    let radii = s.domain.sample_axis(0, settings.grid_x);
    let (lo, hi) = (radii[0], radii[radii.len() - 1]);
    let at = |p: &[f64]| (p[0], p[0] + (p[1] * p[1]).max(1e-8) * (r_cut - p[0]));
    let grid = tensor_grid(
        &[lo, 0.0],
        &[hi, 1.0],
        &[settings.grid_x, settings.grid_y],
        &[uniform, uniform],
    );
    let r = minimize(grid, &[lo, 0.0], &[hi, 1.0], settings, |p| {
        let (r1, r2) = at(p);
        margin(r1, r2).map_err(|e| e.to_string())
    });
    let (r1, r2) = at(&r.point);
    let scale = 1.0 / g.eval(r1);
    let outcome = match classify(r.margin, scale, settings.band, Inequality::Strict) {
        Outcome::Regular if r.failure.is_none() => Outcome::Regular,
        _ => Outcome::Inconclusive,
    };
    let mut v =
        Verdict::new(outcome, Criterion::CentralField, r.margin).with_location(vec![r1, r2]);
    if let Some((p, msg)) = r.failure {
        let (a, b) = at(&p);
        v.reason = Some(format!("margin not evaluable at r1 = {a}, r2 = {b}: {msg}"));
    } else if outcome == Outcome::Inconclusive {
        v.reason = Some(format!(
            "sufficient condition fails at r1 = {r1}, r2 = {r2}"
        ));
    }
    Ok(temper(v, &report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{ScalarFn, VectorFn};
    use crate::scenario::{build_scenario, InitialData};

    #[test]
    fn diagonal_spectrum() {
        let s = linear_spectrum(&[vec![1.0, 0.0], vec![0.0, 2.0]], 1e-10);
        assert!(s.real && s.eigenbasis);
        assert!((s.min_real - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_is_complex() {
        let s = linear_spectrum(&[vec![0.0, -1.0], vec![1.0, 0.0]], 1e-10);
        assert!(!s.real);
    }

    #[test]
    fn jordan_block_lacks_basis() {
        let s = linear_spectrum(&[vec![1.0, 1.0], vec![0.0, 1.0]], 1e-10);
        assert!(s.real && !s.eigenbasis);
        let s = linear_spectrum(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1e-10);
        assert!(s.eigenbasis);
    }

    fn linear(m: Vec<Vec<f64>>, v: VectorFn) -> Scenario {
        build_scenario(
            Domain::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            ForceModel::Linear {
                matrix: m,
                b: vec![0.3, -0.2],
            },
            InitialData::new(Velocity::Vector(v)),
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn linear_verdicts() {
        let id = VectorFn::new(2, |x| x.to_vec());
        let st = Settings::default();
        let s = linear(vec![vec![1.0, 0.0], vec![0.0, 2.0]], id.clone());
        assert_eq!(check_linear(&s, &st).outcome, Outcome::Regular);
        let s = linear(vec![vec![-1.0, 0.0], vec![0.0, 1.0]], id.clone());
        assert_eq!(check_linear(&s, &st).outcome, Outcome::Inconclusive);
        let s = linear(vec![vec![0.0, -1.0], vec![1.0, 0.0]], id);
        let v = check_linear(&s, &st);
        assert_eq!(v.outcome, Outcome::Inconclusive);
        assert_eq!(v.reason.as_deref(), Some("complex spectrum"));
    }

    #[test]
    fn pair_cases() {
        let v =
            check_constant_force_pair(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[-1.0, 0.0], 1e-10);
        assert_eq!(v.outcome, Outcome::Collision);
        assert_eq!(v.witness.unwrap().time, Some(1.0));
        let v =
            check_constant_force_pair(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], 1e-10);
        assert_eq!(v.outcome, Outcome::Regular);
        let v =
            check_constant_force_pair(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0], 1e-10);
        assert_eq!(v.outcome, Outcome::Regular);
    }

    #[test]
    fn halfspace_cases() {
        let sq = Domain::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let v = check_halfspace_step(&[0.0, 1.0], &[0.0, 1.5], 2.0, &sq).unwrap();
        assert_eq!(v.outcome, Outcome::Regular);
        assert_eq!(v.margin, 0.5);
        let v = check_halfspace_step(&[0.0, 1.0], &[3.0, 0.5], 2.0, &sq).unwrap();
        assert_eq!(v.outcome, Outcome::Collision);
        assert!(v.witness.is_some());
        assert!(matches!(
            check_halfspace_step(&[0.0, 1.0], &[0.0, -0.1], 2.0, &sq),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn halfspace_witness_meets() {
        let sq = Domain::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let (f1, f2, a) = ([0.0, 1.0], [3.0, 0.5], 2.0);
        let w = halfspace_witness(&f1, &f2, a, &sq).unwrap();
        let t = w.time.unwrap();
        let pos = |x: &[f64]| {
            let tau = (2.0 * (a - x[1]) / f1[1]).sqrt();
            (0..2)
                .map(|k| x[k] + 0.5 * f1[k] * t * t + 0.5 * (f2[k] - f1[k]) * (t - tau).powi(2))
                .collect::<Vec<_>>()
        };
        let (p, q) = (pos(&w.x1), pos(&w.x2));
        assert!(
            (p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9,
            "{p:?} {q:?}"
        );
    }

    fn central(u: &str, g: &str) -> Scenario {
        build_scenario(
            Domain::annulus(1.0, 2.0).unwrap(),
            ForceModel::Central {
                potential: ScalarFn::parse(u).unwrap(),
            },
            InitialData::new(Velocity::Radial {
                g: ScalarFn::parse(g).unwrap(),
                h: ScalarFn::constant(0.0),
            }),
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn central_free_expansion_is_regular() {
        let v = check_central(&central("0", "r"), &Settings::default()).unwrap();
        assert_eq!(v.outcome, Outcome::Regular, "{v:?}");
        let (r1, r2) = (
            v.location.as_ref().unwrap()[0],
            v.location.as_ref().unwrap()[1],
        );
        let exact = 1.0 / r1 + (r2 - r1) / (r1 * r1);
        assert!((v.margin - exact).abs() < 1e-6, "{} vs {exact}", v.margin);
    }

    #[test]
    fn central_inner_faster_is_not_regular() {
        let v = check_central(&central("0", "1/r"), &Settings::default()).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
    }
}
