//! Collision analysis for continua of non-interacting point particles.
//!
//! A [`Scenario`] fixes the initial labels, the external force and the
//! initial velocity. The [`regularity`] checkers decide from closed-form
//! criteria whether two particles can ever meet; the [`simulator`]
//! propagates a sampled ensemble and finds the first collision directly;
//! [`field`] rebuilds the Euler velocity field and densities on regular
//! flows.

pub mod error;
pub mod expr;
pub mod field;
pub mod func;
pub mod probe;
pub mod quadrature;
pub mod regularity;
pub mod scenario;
pub mod settings;
pub mod simulator;
pub mod validate;

pub use error::{Error, Result};
pub use func::{ScalarFn, VectorFn};
pub use regularity::{check_auto, verdict_text, AutoVerdict, Criterion, Outcome, Verdict, Witness};
pub use scenario::{Domain, ForceModel, InitialData, Scenario, Velocity};
pub use settings::Settings;
pub use simulator::{detect_collisions, report_text, CollisionReport};
pub use validate::{validate, validation_text, Agreement, ValidationReport};
