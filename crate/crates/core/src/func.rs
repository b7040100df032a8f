//! Function handles used for forces, velocities, masses and densities.
//!
//! A handle is either compiled from an expression (and then remembers its
//! source text so scenarios can be written back out) or wraps a closure.
//! Every scalar handle carries a derivative: symbolic for expressions,
//! supplied by the caller, or a central difference with relative step
//! [`FD_ETA`].

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::expr::{Arity, Expr};

/// Relative step of the central-difference fallback derivative.
pub const FD_ETA: f64 = 1e-6;

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type FnN = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ScalarFn {
    value: Fn1,
    deriv: Fn1,
    source: Option<String>,
    constant: Option<f64>,
}

impl ScalarFn {
    pub fn constant(c: f64) -> Self {
        ScalarFn {
            value: Arc::new(move |_| c),
            deriv: Arc::new(|_| 0.0),
            source: Some(format_number(c)),
            constant: Some(c),
        }
    }

    /// Compile an expression in one variable; the derivative is symbolic.
    pub fn parse(src: &str) -> Result<Self> {
        let expr = Expr::parse(src, Arity::Scalar)?;
        let constant = expr.is_constant().then(|| expr.eval1(0.0));
        let d = expr.derivative(0);
        Ok(ScalarFn {
            value: Arc::new(move |x| expr.eval1(x)),
            deriv: Arc::new(move |x| d.eval1(x)),
            source: Some(src.trim().to_string()),
            constant,
        })
    }

    /// Wrap a closure; the derivative falls back to central differences.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let f: Fn1 = Arc::new(f);
        let g = f.clone();
        ScalarFn {
            value: f,
            deriv: Arc::new(move |x| {
                let h = FD_ETA * x.abs().max(1.0);
                (g(x + h) - g(x - h)) / (2.0 * h)
            }),
            source: None,
            constant: None,
        }
    }

    pub fn with_derivative(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFn {
            value: Arc::new(f),
            deriv: Arc::new(df),
            source: None,
            constant: None,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        (self.deriv)(x)
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(s) => write!(f, "ScalarFn({s})"),
            None => write!(f, "ScalarFn(<closure>)"),
        }
    }
}

/// A vector field R^d -> R^d given component-wise.
#[derive(Clone)]
pub struct VectorFn {
    components: Vec<FnN>,
    sources: Option<Vec<String>>,
}

impl VectorFn {
    pub fn constant(c: &[f64]) -> Self {
        VectorFn {
            components: c
                .iter()
                .map(|&v| Arc::new(move |_: &[f64]| v) as FnN)
                .collect(),
            sources: Some(c.iter().map(|&v| format_number(v)).collect()),
        }
    }

    pub fn parse(srcs: &[String]) -> Result<Self> {
        let dim = srcs.len();
        let mut components = Vec::with_capacity(dim);
        for s in srcs {
            let e = Expr::parse(s, Arity::Vector(dim))?;
            components.push(Arc::new(move |x: &[f64]| e.eval(x)) as FnN);
        }
        Ok(VectorFn {
            components,
            sources: Some(srcs.iter().map(|s| s.trim().to_string()).collect()),
        })
    }

    /// Build from a closure returning the full vector.
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let f = Arc::new(f);
        VectorFn {
            components: (0..dim)
                .map(|i| {
                    let f = f.clone();
                    Arc::new(move |x: &[f64]| f(x)[i]) as FnN
                })
                .collect(),
            sources: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c(x)).collect()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c(x);
        }
    }

    pub fn sources(&self) -> Option<&[String]> {
        self.sources.as_deref()
    }
}

impl fmt::Debug for VectorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sources {
            Some(s) => write!(f, "VectorFn({s:?})"),
            None => write!(f, "VectorFn(<closure>)"),
        }
    }
}

/// Shortest text that parses back to exactly `v`.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:?}");
    if v < 0.0 {
        format!("({s})")
    } else {
        s
    }
}
