//! Analytic no-collision criteria.
//!
//! Every checker returns a [`Verdict`]: the outcome, the criterion that
//! produced it, a signed margin (non-negative on the regular side for
//! scalar thresholds) and, for collisions, a witness pair of labels.
//!
//! Criteria that are only sufficient never report a collision; they fall
//! back to [`Outcome::Inconclusive`].

mod gap;
mod multid;
pub mod search;
mod smooth;

use std::fmt;

pub use gap::{
    check_corollary_sufficient, check_one_gap_general, check_one_gap_zero_v, check_two_gap,
    two_gap_alpha, GapDiagnostics,
};
pub use multid::{
    check_central, check_constant_force_pair, check_constant_force_sweep, check_halfspace_step,
    check_linear, check_monotone_multi, halfspace_witness, linear_spectrum, Spectrum,
};
pub use smooth::{
    check_free_flight, check_smooth_general, check_smooth_general_on, check_smooth_positive_v,
};

use crate::error::{Error, Result};
use crate::scenario::{assumptions_report, CriterionReport, ForceModel, Scenario, Status};
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Regular,
    Collision,
    Inconclusive,
}

impl Outcome {
    /// Exit code convention of the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Regular => 0,
            Outcome::Collision => 1,
            Outcome::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Regular => "regular",
            Outcome::Collision => "collision",
            Outcome::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    /// Flight time decreasing in the label, for positive initial speed.
    SmoothPositiveVelocity,
    /// The integrated-by-parts inequality for F > 0, v ≥ 0.
    SmoothGeneral,
    /// No force: collision iff v′ < 0 somewhere.
    FreeFlight,
    /// One gap, particles at rest: regular iff F2 ≥ F1.
    OneGapRest,
    /// One gap with initial speed: two pointwise inequalities.
    OneGapGeneral,
    /// One gap with F2 = 0: a sufficient slope bound.
    OneGapCorollary,
    /// Two gaps at rest: B − A ≤ α(A − 1).
    TwoGap,
    /// Monotone force and monotone velocity in any dimension.
    MonotoneForce,
    /// Linear force with non-negative spectrum.
    LinearSpectrum,
    /// Constant force: a pair collides iff R ∥ V and (R, V) < 0.
    ConstantForcePair,
    /// Half-space step force from rest: regular iff F1_d ≤ F2_d.
    HalfSpaceStep,
    /// Central field with outward radial motion.
    CentralField,
    /// Global smooth solution of the pressureless Euler equation on the line.
    EulerGlobal,
    /// No criterion applies.
    NoCriterion,
}

impl Criterion {
    pub const ALL: [Criterion; 14] = [
        Criterion::SmoothPositiveVelocity,
        Criterion::SmoothGeneral,
        Criterion::FreeFlight,
        Criterion::OneGapRest,
        Criterion::OneGapGeneral,
        Criterion::OneGapCorollary,
        Criterion::TwoGap,
        Criterion::MonotoneForce,
        Criterion::LinearSpectrum,
        Criterion::ConstantForcePair,
        Criterion::HalfSpaceStep,
        Criterion::CentralField,
        Criterion::EulerGlobal,
        Criterion::NoCriterion,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Criterion::SmoothPositiveVelocity => "smooth-positive-velocity",
            Criterion::SmoothGeneral => "smooth-general",
            Criterion::FreeFlight => "free-flight",
            Criterion::OneGapRest => "one-gap-rest",
            Criterion::OneGapGeneral => "one-gap-general",
            Criterion::OneGapCorollary => "one-gap-corollary",
            Criterion::TwoGap => "two-gap",
            Criterion::MonotoneForce => "monotone-force",
            Criterion::LinearSpectrum => "linear-spectrum",
            Criterion::ConstantForcePair => "constant-force-pair",
            Criterion::HalfSpaceStep => "half-space-step",
            Criterion::CentralField => "central-field",
            Criterion::EulerGlobal => "euler-global",
            Criterion::NoCriterion => "none",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }

    /// Whether the criterion is necessary as well as sufficient.
    pub fn is_iff(self) -> bool {
        !matches!(
            self,
            Criterion::OneGapCorollary
                | Criterion::MonotoneForce
                | Criterion::LinearSpectrum
                | Criterion::CentralField
                | Criterion::NoCriterion
        )
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Two labels that collide, and when (exactly, or an upper bound).
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub time: Option<f64>,
    /// `time` bounds the collision time from above rather than giving it.
    pub time_is_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub criterion: Criterion,
    pub margin: f64,
    pub witness: Option<Witness>,
    /// Sample point where the margin was attained.
    pub location: Option<Vec<f64>>,
    pub reason: Option<String>,
}

impl Verdict {
    pub fn new(outcome: Outcome, criterion: Criterion, margin: f64) -> Self {
        Verdict {
            outcome,
            criterion,
            margin,
            witness: None,
            location: None,
            reason: None,
        }
    }

    pub fn inconclusive(criterion: Criterion, reason: impl Into<String>) -> Self {
        Verdict {
            reason: Some(reason.into()),
            ..Self::new(Outcome::Inconclusive, criterion, f64::NAN)
        }
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_location(mut self, p: Vec<f64>) -> Self {
        self.location = Some(p);
        self
    }

    pub fn with_reason(mut self, r: impl Into<String>) -> Self {
        self.reason = Some(r.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Inequality {
    /// Regular needs margin > 0.
    Strict,
    /// Regular needs margin ≥ 0.
    NonStrict,
}

/// Outcome of an iff-criterion from its margin. Inside the band of
/// half-width `band·scale` around the boundary the answer is inconclusive
/// (for non-strict inequalities only on the failing side).
pub(crate) fn classify(margin: f64, scale: f64, band: f64, kind: Inequality) -> Outcome {
    if margin.is_nan() {
        return Outcome::Inconclusive;
    }
    let w = band * scale.abs();
    match kind {
        Inequality::Strict if margin > w => Outcome::Regular,
        Inequality::Strict if margin >= -w => Outcome::Inconclusive,
        Inequality::NonStrict if margin >= 0.0 => Outcome::Regular,
        Inequality::NonStrict if margin >= -w => Outcome::Inconclusive,
        _ => Outcome::Collision,
    }
}

/// Fail with the first violated hypothesis of `criterion`.
pub(crate) fn require(
    s: &Scenario,
    criterion: Criterion,
    settings: &Settings,
) -> Result<CriterionReport> {
    let report = assumptions_report(s, settings)
        .into_iter()
        .find(|r| r.criterion == criterion)
        .ok_or_else(|| Error::HypothesisViolated {
            hypothesis: format!("force class matching {criterion}"),
            witness: s.force.kind().into(),
        })?;
    if let Some(h) = report.hypotheses.iter().find(|h| h.status == Status::No) {
        return Err(Error::HypothesisViolated {
            hypothesis: h.name.clone(),
            witness: h.witness.clone().unwrap_or_default(),
        });
    }
    Ok(report)
}

/// Downgrade a regular verdict when a hypothesis could only be checked up to
/// the cutoff.
pub(crate) fn temper(mut v: Verdict, report: &CriterionReport) -> Verdict {
    if v.outcome == Outcome::Regular && report.status() == Status::Unknown {
        let h = report
            .first_problem()
            .expect("unknown status has a hypothesis");
        v.outcome = Outcome::Inconclusive;
        v.reason = Some(format!(
            "hypothesis `{}` undecided: {}",
            h.name,
            h.witness.as_deref().unwrap_or("")
        ));
    }
    v
}

/// Label offset used for witness pairs next to a violating label.
pub(crate) fn neighbour(x: f64, lo: f64, hi: f64) -> (f64, f64) {
    let h = 1e-3 * (hi - lo);
    if x + h <= hi {
        (x, x + h)
    } else {
        (x - h, x)
    }
}

/// Key-value text form of a verdict.
pub fn verdict_text(v: &Verdict) -> String {
    use crate::simulator::fmt_point;
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "criterion: {}", v.criterion);
    let _ = writeln!(s, "outcome: {}", v.outcome);
    let _ = writeln!(s, "margin: {}", v.margin);
    match &v.witness {
        Some(w) => {
            let _ = writeln!(s, "witness: {} {}", fmt_point(&w.x1), fmt_point(&w.x2));
            let time = w.time.map_or("unknown".to_string(), |t| t.to_string());
            let kind = if w.time_is_bound { "bound" } else { "exact" };
            let _ = writeln!(s, "witness_time: {time} ({kind})");
        }
        None => {
            let _ = writeln!(s, "witness: none");
        }
    }
    if let Some(p) = &v.location {
        let _ = writeln!(s, "location: {}", fmt_point(p));
    }
    if let Some(r) = &v.reason {
        let _ = writeln!(s, "reason: {r}");
    }
    s
}

/// Combined verdict and the individual verdicts of every checker run.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoVerdict {
    pub verdict: Verdict,
    pub trace: Vec<Verdict>,
}

fn run(criterion: Criterion, r: Result<Verdict>) -> Verdict {
    r.unwrap_or_else(|e| Verdict::inconclusive(criterion, e.to_string()))
}

/// Run every checker that applies to the force class of `s` and combine.
///
/// A regular verdict from one checker next to a collision verdict from
/// another is a contradiction and raises `InternalInconsistency`.
pub fn check_auto(s: &Scenario, settings: &Settings) -> Result<AutoVerdict> {
    let mut trace = Vec::new();
    let reports = assumptions_report(s, settings);
    let applies = |c: Criterion| {
        reports
            .iter()
            .any(|r| r.criterion == c && r.status() != Status::No)
    };
    match &s.force {
        ForceModel::Smooth1D { .. } => {
            if applies(Criterion::FreeFlight) {
                trace.push(run(Criterion::FreeFlight, check_free_flight(s, settings)));
            }
            if applies(Criterion::SmoothPositiveVelocity) {
                trace.push(run(
                    Criterion::SmoothPositiveVelocity,
                    check_smooth_positive_v(s, settings),
                ));
            }
            if applies(Criterion::SmoothGeneral) {
                trace.push(run(
                    Criterion::SmoothGeneral,
                    check_smooth_general(s, settings),
                ));
            }
        }
        &ForceModel::OneGap { f1, f2, a } => {
            let dom = s.domain.bounds_1d();
            if applies(Criterion::OneGapRest) {
                trace.push(run(
                    Criterion::OneGapRest,
                    check_one_gap_zero_v(f1, f2, a, dom),
                ));
            }
            if applies(Criterion::OneGapGeneral) {
                let v = s.init.v1().expect("1D scenario has scalar velocity");
                trace.push(run(
                    Criterion::OneGapGeneral,
                    check_one_gap_general(f1, f2, a, v, &s.domain, settings),
                ));
            }
            if applies(Criterion::OneGapCorollary) {
                let v = s.init.v1().expect("1D scenario has scalar velocity");
                trace.push(check_corollary_sufficient(f1, v, &s.domain, settings));
            }
        }
        &ForceModel::TwoGap { f1, f2, f3, a, b } => {
            if applies(Criterion::TwoGap) {
                trace.push(run(
                    Criterion::TwoGap,
                    check_two_gap(f1, f2, f3, a, b, s.domain.bounds_1d()),
                ));
            }
        }
        ForceModel::ConstantVec { .. } => {
            trace.push(check_constant_force_sweep(s, settings));
            trace.push(check_monotone_multi(s, settings));
        }
        ForceModel::HalfSpaceStep { f1, f2, a } => {
            if applies(Criterion::HalfSpaceStep) {
                trace.push(run(
                    Criterion::HalfSpaceStep,
                    check_halfspace_step(f1, f2, *a, &s.domain),
                ));
            }
            trace.push(check_monotone_multi(s, settings));
        }
        ForceModel::Linear { .. } => {
            trace.push(check_linear(s, settings));
            trace.push(check_monotone_multi(s, settings));
        }
        ForceModel::Central { .. } => {
            trace.push(run(Criterion::CentralField, check_central(s, settings)));
        }
    }
    if trace.is_empty() {
        let why = reports
            .iter()
            .filter_map(|r| {
                r.first_problem()
                    .map(|h| format!("{}: {}", r.criterion, h.name))
            })
            .collect::<Vec<_>>()
            .join("; ");
        let v = Verdict::inconclusive(
            Criterion::NoCriterion,
            format!("no applicable criterion ({why})"),
        );
        return Ok(AutoVerdict {
            verdict: v.clone(),
            trace: vec![v],
        });
    }
    let regular = trace.iter().find(|v| v.outcome == Outcome::Regular);
    let collision = trace.iter().find(|v| v.outcome == Outcome::Collision);
    let verdict = match (regular, collision) {
        (Some(r), Some(c)) => {
            return Err(Error::InternalInconsistency(format!(
                "{} says regular (margin {}) but {} says collision (margin {})",
                r.criterion, r.margin, c.criterion, c.margin
            )))
        }
        (Some(r), None) => r.clone(),
        (None, Some(c)) => c.clone(),
        (None, None) => trace[0].clone(),
    };
    Ok(AutoVerdict { verdict, trace })
}
