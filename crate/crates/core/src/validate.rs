//! Analytic verdicts checked against the simulation oracle.

use std::fmt;
use std::fmt::Write as _;

use crate::error::Result;
use crate::regularity::{check_auto, verdict_text, Outcome, Verdict};
use crate::scenario::Scenario;
use crate::settings::Settings;
use crate::simulator::{detect_collisions, report_text, CollisionReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agreement {
    Agree,
    Disagree,
    /// The analytic side was inconclusive.
    Untestable,
}

impl Agreement {
    /// Exit code convention of the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Agreement::Agree => 0,
            Agreement::Untestable => 2,
            Agreement::Disagree => 4,
        }
    }
}

impl fmt::Display for Agreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Agreement::Agree => "AGREE",
            Agreement::Disagree => "DISAGREE",
            Agreement::Untestable => "UNTESTABLE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub analytic: Verdict,
    /// Every checker that ran.
    pub trace: Vec<Verdict>,
    pub simulation: CollisionReport,
    pub agreement: Agreement,
    pub note: Option<String>,
}

/// Compare an analytic verdict with a collision scan.
///
/// A predicted collision that the scan misses still agrees when the
/// predicted time lies beyond the scanned horizon.
pub fn compare(analytic: &Verdict, sim: &CollisionReport) -> (Agreement, Option<String>) {
    match (analytic.outcome, sim.found) {
        (Outcome::Inconclusive, _) => (Agreement::Untestable, None),
        (Outcome::Regular, false) | (Outcome::Collision, true) => (Agreement::Agree, None),
        (Outcome::Regular, true) => (
            Agreement::Disagree,
            Some(format!("simulation collides at t = {}", sim.t_first)),
        ),
        (Outcome::Collision, false) => {
            let t = analytic.witness.as_ref().and_then(|w| w.time);
            match t {
                Some(t) if t > sim.horizon => (
                    Agreement::Agree,
                    Some(format!(
                        "beyond horizon: predicted t = {t} > {}",
                        sim.horizon
                    )),
                ),
                _ => (
                    Agreement::Disagree,
                    Some(format!(
                        "no collision found up to {}; predicted t = {}",
                        sim.horizon,
                        t.map_or("unknown".into(), |t| t.to_string())
                    )),
                ),
            }
        }
    }
}

/// Run every applicable checker and the simulation oracle on `s`.
pub fn validate(s: &Scenario, settings: &Settings) -> Result<ValidationReport> {
    let auto = check_auto(s, settings)?;
    let simulation = detect_collisions(s, settings)?;
    let (agreement, note) = compare(&auto.verdict, &simulation);
    Ok(ValidationReport {
        analytic: auto.verdict,
        trace: auto.trace,
        simulation,
        agreement,
        note,
    })
}

/// Key-value text form, stable for a fixed seed.
pub fn validation_text(r: &ValidationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "agreement: {}", r.agreement);
    if let Some(n) = &r.note {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "analytic_margin: {}", r.analytic.margin);
    let _ = writeln!(s, "simulation_margin: {}", r.simulation.margin);
    let _ = writeln!(s, "[analytic]");
    s.push_str(&verdict_text(&r.analytic));
    for v in &r.trace {
        let _ = writeln!(s, "trace: {} {} {}", v.criterion, v.outcome, v.margin);
    }
    let _ = writeln!(s, "[simulation]");
    s.push_str(&report_text(&r.simulation));
    s
}
