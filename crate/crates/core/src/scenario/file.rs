//! TOML scenario files.
//!
//! ```toml
//! horizon = 2.0                 # number or "inf"
//! velocity = "-atan(x)"         # 1D: expression; nD: array; central: { g = .., h = .. }
//! mass = "1"                    # optional
//! density = "1"                 # optional
//!
//! [domain]
//! kind = "interval"             # interval | box | annulus
//! lower = [-5.0]
//! upper = [5.0]
//!
//! [force]
//! kind = "smooth"               # smooth | one_gap | two_gap | constant | half_space | linear | central
//! f = "0"
//!
//! [grid]
//! counts = [2001]
//! ```
//!
//! A `[blowup]` table with expressions `z`, `dz`, `ddz` in `t` replaces the
//! domain, force and velocity entries.

use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::{Spanned, Table, Value};

use super::{
    build_blowup_scenario, build_scenario, BlowupCurve, Domain, ForceModel, GridSpec, InitialData,
    Scenario, Velocity,
};
use crate::error::{Error, Result};
use crate::expr::line_col;
use crate::func::{ScalarFn, VectorFn};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    horizon: Option<Spanned<Value>>,
    velocity: Option<Spanned<Value>>,
    mass: Option<Spanned<String>>,
    density: Option<Spanned<String>>,
    domain: Option<Spanned<DomainSpec>>,
    force: Option<Spanned<ForceSpec>>,
    grid: Option<GridFile>,
    blowup: Option<BlowupSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSpec {
    kind: Spanned<String>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    open_lower: Option<Vec<bool>>,
    open_upper: Option<Vec<bool>>,
    r1: Option<f64>,
    r2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForceSpec {
    kind: Spanned<String>,
    f: Option<Spanned<String>>,
    u: Option<Spanned<String>>,
    f1: Option<Value>,
    f2: Option<Value>,
    f3: Option<f64>,
    a: Option<f64>,
    b: Option<Value>,
    value: Option<Vec<f64>>,
    matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    counts: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlowupSpec {
    z: Spanned<String>,
    dz: Spanned<String>,
    ddz: Spanned<String>,
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: Range<usize>, message: impl Into<String>) -> Error {
        let (line, column) = line_col(self.src, span.start);
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Offset of the first character inside a quoted TOML string.
    fn string_body(&self, span: &Range<usize>) -> usize {
        let rest = &self.src[span.start..];
        if rest.starts_with("\"\"\"") || rest.starts_with("'''") {
            span.start + 3
        } else {
            span.start + 1
        }
    }

    /// Compile an expression, relocating parse errors into the file.
    fn scalar(&self, s: &Spanned<String>) -> Result<ScalarFn> {
        ScalarFn::parse(s.get_ref()).map_err(|e| self.relocate(e, s.span()))
    }

    fn relocate(&self, e: Error, span: Range<usize>) -> Error {
        match e {
            Error::Parse {
                line,
                column,
                message,
            } => {
                let body = self.string_body(&span);
                let inner = &self.src[body..span.end.max(body)];
                let offset = byte_offset(inner, line, column);
                let (line, column) = line_col(self.src, body + offset);
                Error::Parse {
                    line,
                    column,
                    message,
                }
            }
            other => other,
        }
    }
}

fn byte_offset(s: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in s.split('\n').enumerate() {
        if i + 1 == line {
            return off + column - 1;
        }
        off += l.len() + 1;
    }
    off
}

fn need<T>(ctx: &Ctx, v: Option<T>, span: &Range<usize>, what: &str) -> Result<T> {
    v.ok_or_else(|| ctx.err(span.clone(), format!("missing `{what}`")))
}

fn number(ctx: &Ctx, v: Option<&Value>, span: &Range<usize>, what: &str) -> Result<f64> {
    match v {
        Some(Value::Float(f)) => Ok(*f),
        Some(Value::Integer(i)) => Ok(*i as f64),
        Some(_) => Err(ctx.err(span.clone(), format!("`{what}` must be a number"))),
        None => Err(ctx.err(span.clone(), format!("missing `{what}`"))),
    }
}

fn vector(ctx: &Ctx, v: Option<&Value>, span: &Range<usize>, what: &str) -> Result<Vec<f64>> {
    let arr = match v {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(ctx.err(span.clone(), format!("`{what}` must be an array"))),
        None => return Err(ctx.err(span.clone(), format!("missing `{what}`"))),
    };
    arr.iter()
        .map(|x| number(ctx, Some(x), span, what))
        .collect()
}

/// Parse scenario text.
pub fn from_toml_str(src: &str) -> Result<Scenario> {
    let ctx = Ctx { src };
    let file: ScenarioFile = toml::from_str(src).map_err(|e| {
        let span = e.span().unwrap_or(0..0);
        ctx.err(span, e.message().to_string())
    })?;

    let horizon = match &file.horizon {
        None => f64::INFINITY,
        Some(h) => match h.get_ref() {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            Value::String(s) if matches!(s.as_str(), "inf" | "infinity") => f64::INFINITY,
            _ => return Err(ctx.err(h.span(), "`horizon` must be a number or \"inf\"")),
        },
    };

    let mut scenario = if let Some(b) = &file.blowup {
        let curve = BlowupCurve::new(ctx.scalar(&b.z)?, ctx.scalar(&b.dz)?, ctx.scalar(&b.ddz)?);
        let mut s = build_blowup_scenario(curve)?;
        s.horizon = horizon;
        s
    } else {
        let domain = file
            .domain
            .as_ref()
            .ok_or_else(|| ctx.err(0..0, "missing [domain] table"))?;
        let force = file
            .force
            .as_ref()
            .ok_or_else(|| ctx.err(0..0, "missing [force] table"))?;
        let domain = parse_domain(&ctx, domain)?;
        let force = parse_force(&ctx, force)?;
        let velocity = file
            .velocity
            .as_ref()
            .ok_or_else(|| ctx.err(0..0, "missing `velocity`"))?;
        let velocity = parse_velocity(&ctx, velocity, domain.dim())?;
        let mut init = InitialData::new(velocity);
        if let Some(m) = &file.mass {
            init.mass = ctx.scalar(m)?;
        }
        if let Some(rho) = &file.density {
            init.density = ctx.scalar(rho)?;
        }
        build_scenario(domain, force, init, horizon)?
    };
    if let Some(g) = &file.grid {
        if g.counts.is_empty() || g.counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidParameter(
                "grid counts must be at least 2 per coordinate".into(),
            ));
        }
        scenario.grid = GridSpec {
            counts: g.counts.clone(),
        };
    }
    Ok(scenario)
}

fn parse_domain(ctx: &Ctx, spec: &Spanned<DomainSpec>) -> Result<Domain> {
    let span = spec.span();
    let d = spec.get_ref();
    let mut domain = match d.kind.get_ref().as_str() {
        "interval" | "box" => {
            let lower = need(ctx, d.lower.clone(), &span, "lower")?;
            let upper = need(ctx, d.upper.clone(), &span, "upper")?;
            Domain::boxed(lower, upper)?
        }
        "annulus" => Domain::annulus(need(ctx, d.r1, &span, "r1")?, need(ctx, d.r2, &span, "r2")?)?,
        other => {
            return Err(ctx.err(
                d.kind.span(),
                format!("unknown domain kind `{other}`, expected interval, box or annulus"),
            ))
        }
    };
    let dim = domain.dim();
    for (axis, (lo, hi)) in d
        .open_lower
        .clone()
        .unwrap_or_else(|| vec![false; dim])
        .into_iter()
        .zip(d.open_upper.clone().unwrap_or_else(|| vec![false; dim]))
        .enumerate()
        .take(dim)
    {
        domain = domain.with_open(axis, lo, hi);
    }
    Ok(domain)
}

fn parse_force(ctx: &Ctx, spec: &Spanned<ForceSpec>) -> Result<ForceModel> {
    let span = spec.span();
    let f = spec.get_ref();
    let kind = f.kind.get_ref().as_str();
    Ok(match kind {
        "smooth" => {
            let expr = need(ctx, f.f.as_ref(), &span, "f")?;
            ForceModel::Smooth1D {
                force: ctx.scalar(expr)?,
            }
        }
        "one_gap" => ForceModel::OneGap {
            f1: number(ctx, f.f1.as_ref(), &span, "f1")?,
            f2: number(ctx, f.f2.as_ref(), &span, "f2")?,
            a: need(ctx, f.a, &span, "a")?,
        },
        "two_gap" => ForceModel::TwoGap {
            f1: number(ctx, f.f1.as_ref(), &span, "f1")?,
            f2: number(ctx, f.f2.as_ref(), &span, "f2")?,
            f3: need(ctx, f.f3, &span, "f3")?,
            a: need(ctx, f.a, &span, "a")?,
            b: number(ctx, f.b.as_ref(), &span, "b")?,
        },
        "constant" => ForceModel::ConstantVec {
            f: need(ctx, f.value.clone(), &span, "value")?,
        },
        "half_space" => ForceModel::HalfSpaceStep {
            f1: vector(ctx, f.f1.as_ref(), &span, "f1")?,
            f2: vector(ctx, f.f2.as_ref(), &span, "f2")?,
            a: need(ctx, f.a, &span, "a")?,
        },
        "linear" => ForceModel::Linear {
            matrix: need(ctx, f.matrix.clone(), &span, "matrix")?,
            b: vector(ctx, f.b.as_ref(), &span, "b")?,
        },
        "central" => {
            let expr = need(ctx, f.u.as_ref(), &span, "u")?;
            ForceModel::Central {
                potential: ctx.scalar(expr)?,
            }
        }
        other => {
            return Err(ctx.err(
                f.kind.span(),
                format!(
                    "unknown force kind `{other}`, expected one of smooth, one_gap, two_gap, \
                     constant, half_space, linear, central"
                ),
            ))
        }
    })
}

fn parse_velocity(ctx: &Ctx, v: &Spanned<Value>, dim: usize) -> Result<Velocity> {
    let span = v.span();
    match v.get_ref() {
        Value::String(s) => {
            let spanned = Spanned::new(span, s.clone());
            Ok(Velocity::Scalar(ctx.scalar(&spanned)?))
        }
        Value::Integer(_) | Value::Float(_) => {
            let c = number(ctx, Some(v.get_ref()), &span, "velocity")?;
            Ok(Velocity::Scalar(ScalarFn::constant(c)))
        }
        Value::Array(items) => {
            let srcs = items
                .iter()
                .map(|it| match it {
                    Value::String(s) => Ok(s.clone()),
                    Value::Integer(i) => Ok(i.to_string()),
                    Value::Float(f) => Ok(crate::func::format_number(*f)),
                    _ => Err(ctx.err(span.clone(), "velocity components must be expressions")),
                })
                .collect::<Result<Vec<_>>>()?;
            if srcs.len() != dim {
                return Err(ctx.err(
                    span,
                    format!("velocity has {} components, domain has {dim}", srcs.len()),
                ));
            }
            VectorFn::parse(&srcs)
                .map(Velocity::Vector)
                .map_err(|e| match e {
                    Error::Parse { message, .. } => ctx.err(span.clone(), message),
                    other => other,
                })
        }
        Value::Table(t) => {
            let get = |key: &str| -> Result<ScalarFn> {
                match t.get(key) {
                    Some(Value::String(s)) => ScalarFn::parse(s).map_err(|e| match e {
                        Error::Parse { message, .. } => ctx.err(span.clone(), message),
                        other => other,
                    }),
                    Some(Value::Integer(i)) => Ok(ScalarFn::constant(*i as f64)),
                    Some(Value::Float(f)) => Ok(ScalarFn::constant(*f)),
                    _ => Err(ctx.err(span.clone(), format!("radial velocity needs `{key}`"))),
                }
            };
            Ok(Velocity::Radial {
                g: get("g")?,
                h: get("h")?,
            })
        }
        _ => Err(ctx.err(span, "unsupported velocity value")),
    }
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    from_toml_str(&text)
}

fn src_of(f: &ScalarFn, what: &str) -> Result<String> {
    f.source()
        .map(str::to_string)
        .ok_or_else(|| Error::NotSerializable(format!("{what} is a closure without source text")))
}

fn float_array(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

/// Serialize a scenario whose functions all carry source text.
pub fn to_toml_string(s: &Scenario) -> Result<String> {
    let mut root = Table::new();
    root.insert(
        "horizon".into(),
        if s.horizon.is_finite() {
            Value::Float(s.horizon)
        } else {
            Value::String("inf".into())
        },
    );
    if let Some(curve) = &s.blowup {
        let mut b = Table::new();
        b.insert("z".into(), Value::String(src_of(&curve.z, "z")?));
        b.insert("dz".into(), Value::String(src_of(&curve.dz, "dz")?));
        b.insert("ddz".into(), Value::String(src_of(&curve.ddz, "ddz")?));
        root.insert("blowup".into(), Value::Table(b));
    } else {
        let velocity = match &s.init.velocity {
            Velocity::Scalar(v) => Value::String(src_of(v, "velocity")?),
            Velocity::Vector(v) => Value::Array(
                v.sources()
                    .ok_or_else(|| Error::NotSerializable("velocity is a closure".into()))?
                    .iter()
                    .map(|c| Value::String(c.clone()))
                    .collect(),
            ),
            Velocity::Radial { g, h } => {
                let mut t = Table::new();
                t.insert("g".into(), Value::String(src_of(g, "g")?));
                t.insert("h".into(), Value::String(src_of(h, "h")?));
                Value::Table(t)
            }
        };
        root.insert("velocity".into(), velocity);
        root.insert("mass".into(), Value::String(src_of(&s.init.mass, "mass")?));
        root.insert(
            "density".into(),
            Value::String(src_of(&s.init.density, "density")?),
        );

        let mut d = Table::new();
        match &s.domain {
            Domain::Box {
                lower,
                upper,
                open_lower,
                open_upper,
            } => {
                d.insert(
                    "kind".into(),
                    Value::String(if lower.len() == 1 { "interval" } else { "box" }.into()),
                );
                d.insert("lower".into(), float_array(lower));
                d.insert("upper".into(), float_array(upper));
                let flags =
                    |v: &[bool]| Value::Array(v.iter().map(|&b| Value::Boolean(b)).collect());
                d.insert("open_lower".into(), flags(open_lower));
                d.insert("open_upper".into(), flags(open_upper));
            }
            Domain::Annulus { r1, r2 } => {
                d.insert("kind".into(), Value::String("annulus".into()));
                d.insert("r1".into(), Value::Float(*r1));
                d.insert("r2".into(), Value::Float(*r2));
            }
        }
        root.insert("domain".into(), Value::Table(d));

        let mut f = Table::new();
        f.insert("kind".into(), Value::String(s.force.kind().into()));
        match &s.force {
            ForceModel::Smooth1D { force } => {
                f.insert("f".into(), Value::String(src_of(force, "force")?));
            }
            &ForceModel::OneGap { f1, f2, a } => {
                f.insert("f1".into(), Value::Float(f1));
                f.insert("f2".into(), Value::Float(f2));
                f.insert("a".into(), Value::Float(a));
            }
            &ForceModel::TwoGap { f1, f2, f3, a, b } => {
                f.insert("f1".into(), Value::Float(f1));
                f.insert("f2".into(), Value::Float(f2));
                f.insert("f3".into(), Value::Float(f3));
                f.insert("a".into(), Value::Float(a));
                f.insert("b".into(), Value::Float(b));
            }
            ForceModel::ConstantVec { f: v } => {
                f.insert("value".into(), float_array(v));
            }
            ForceModel::HalfSpaceStep { f1, f2, a } => {
                f.insert("f1".into(), float_array(f1));
                f.insert("f2".into(), float_array(f2));
                f.insert("a".into(), Value::Float(*a));
            }
            ForceModel::Linear { matrix, b } => {
                f.insert(
                    "matrix".into(),
                    Value::Array(matrix.iter().map(|r| float_array(r)).collect()),
                );
                f.insert("b".into(), float_array(b));
            }
            ForceModel::Central { potential } => {
                f.insert("u".into(), Value::String(src_of(potential, "potential")?));
            }
        }
        root.insert("force".into(), Value::Table(f));
    }
    let mut g = Table::new();
    g.insert(
        "counts".into(),
        Value::Array(
            s.grid
                .counts
                .iter()
                .map(|&c| Value::Integer(c as i64))
                .collect(),
        ),
    );
    root.insert("grid".into(), Value::Table(g));
    toml::to_string(&root).map_err(|e| Error::NotSerializable(e.to_string()))
}

pub fn write_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, to_toml_string(s)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILIPPOV: &str = r#"
horizon = 2.0
velocity = "-atan(x)"

[domain]
kind = "interval"
lower = [-5.0]
upper = [5.0]

[force]
kind = "smooth"
f = "0"

[grid]
counts = [2001]
"#;

    #[test]
    fn parses_smooth_scenario() {
        let s = from_toml_str(FILIPPOV).unwrap();
        assert_eq!(s.grid.counts, vec![2001]);
        assert_eq!(s.horizon, 2.0);
        assert!((s.v(1.0) + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((s.dv(0.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_force_kind_is_named() {
        let text = FILIPPOV.replace("kind = \"smooth\"", "kind = \"wobbly\"");
        match from_toml_str(&text) {
            Err(Error::Parse { message, line, .. }) => {
                assert!(message.contains("wobbly"), "{message}");
                assert_eq!(line, 11);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expression_errors_point_into_the_file() {
        let text = FILIPPOV.replace("-atan(x)", "-atan(x) + )");
        match from_toml_str(&text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 24)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("speed = 3\n{FILIPPOV}");
        assert!(matches!(
            from_toml_str(&text),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn vector_and_radial_velocities() {
        let text = r#"
horizon = 10
velocity = ["0", "x1 - x2"]
[domain]
kind = "box"
lower = [0, 0]
upper = [1, 1]
[force]
kind = "half_space"
f1 = [0, 1]
f2 = [3, 0.5]
a = 2
"#;
        let s = from_toml_str(text).unwrap();
        assert_eq!(s.init.velocity_at(&[0.5, 0.25]), vec![0.0, 0.25]);

        let text = r#"
horizon = 5
velocity = { g = "1", h = "0" }
[domain]
kind = "annulus"
r1 = 1
r2 = 2
[force]
kind = "central"
u = "1/r"
"#;
        let s = from_toml_str(text).unwrap();
        assert_eq!(s.dim(), 2);
        let v = s.init.velocity_at(&[0.0, 1.5]);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }
}
