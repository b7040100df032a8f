//! A small arithmetic expression language used for fields and forces in
//! scenario files.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | constant | variable | function '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos tan exp log sqrt atan tanh sinh cosh abs`.
//! Constants: `pi`, `e`. Scalar expressions take one argument and accept any
//! of `x y z r t` as its name; vector components use `x1 .. x9`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan,
    Tanh,
    Sinh,
    Cosh,
    Abs,
}

impl Function {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Function::Sin,
            "cos" => Function::Cos,
            "tan" => Function::Tan,
            "exp" => Function::Exp,
            "log" | "ln" => Function::Log,
            "sqrt" => Function::Sqrt,
            "atan" | "arctan" => Function::Atan,
            "tanh" => Function::Tanh,
            "sinh" => Function::Sinh,
            "cosh" => Function::Cosh,
            "abs" => Function::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Function::Sin => v.sin(),
            Function::Cos => v.cos(),
            Function::Tan => v.tan(),
            Function::Exp => v.exp(),
            Function::Log => v.ln(),
            Function::Sqrt => v.sqrt(),
            Function::Atan => v.atan(),
            Function::Tanh => v.tanh(),
            Function::Sinh => v.sinh(),
            Function::Cosh => v.cosh(),
            Function::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Function, Box<Expr>),
}

/// How identifiers resolve to argument slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    /// One argument, spelled `x`, `y`, `z`, `r` or `t`.
    Scalar,
    /// `dim` arguments spelled `x1 .. x{dim}`.
    Vector(usize),
}

impl Expr {
    pub fn parse(src: &str, arity: Arity) -> Result<Expr> {
        let mut p = Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            arity,
        };
        p.skip_ws();
        if p.pos == p.bytes.len() {
            return Err(p.error_at(p.pos, "empty expression"));
        }
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error_at(p.pos, "unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, args: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => args[*i],
            Expr::Neg(a) => -a.eval(args),
            Expr::Add(a, b) => a.eval(args) + b.eval(args),
            Expr::Sub(a, b) => a.eval(args) - b.eval(args),
            Expr::Mul(a, b) => a.eval(args) * b.eval(args),
            Expr::Div(a, b) => a.eval(args) / b.eval(args),
            Expr::Pow(a, b) => pow(a.eval(args), b.eval(args)),
            Expr::Call(f, a) => f.apply(a.eval(args)),
        }
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(std::slice::from_ref(&x))
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Symbolic partial derivative with respect to argument `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                Pow(b.clone(), Box::new(Num(2.0))),
            ),
            Pow(a, b) => {
                let da = a.derivative(var);
                if b.is_constant() {
                    let c = b.eval(&[0.0; 16]);
                    mul(mul(Num(c), Pow(a.clone(), Box::new(Num(c - 1.0)))), da)
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    let db = b.derivative(var);
                    mul(
                        self.clone(),
                        add(
                            mul(db, Call(Function::Log, a.clone())),
                            div(mul((**b).clone(), da), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.derivative(var);
                let a = (**a).clone();
                let outer = match f {
                    Function::Sin => Call(Function::Cos, Box::new(a)),
                    Function::Cos => neg(Call(Function::Sin, Box::new(a))),
                    Function::Tan => div(
                        Num(1.0),
                        Pow(
                            Box::new(Call(Function::Cos, Box::new(a))),
                            Box::new(Num(2.0)),
                        ),
                    ),
                    Function::Exp => Call(Function::Exp, Box::new(a)),
                    Function::Log => div(Num(1.0), a),
                    Function::Sqrt => div(Num(0.5), Call(Function::Sqrt, Box::new(a))),
                    Function::Atan => div(
                        Num(1.0),
                        add(Num(1.0), Pow(Box::new(a), Box::new(Num(2.0)))),
                    ),
                    Function::Tanh => sub(
                        Num(1.0),
                        Pow(
                            Box::new(Call(Function::Tanh, Box::new(a))),
                            Box::new(Num(2.0)),
                        ),
                    ),
                    Function::Sinh => Call(Function::Cosh, Box::new(a)),
                    Function::Cosh => Call(Function::Sinh, Box::new(a)),
                    Function::Abs => div(a.clone(), Call(Function::Abs, Box::new(a))),
                };
                mul(outer, inner)
            }
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b == 2.0 {
        a * a
    } else if b.fract() == 0.0 && b.abs() < 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match num(&a) {
        Some(v) => Expr::Num(-v),
        None => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Num(x / y),
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    arity: Arity,
}

impl Parser<'_> {
    fn error_at(&self, offset: usize, message: &str) -> Error {
        let (line, column) = line_col(self.src, offset);
        Error::Parse {
            line,
            column,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let start = match self.peek() {
            None => return Err(self.error_at(self.pos, "unexpected end of expression")),
            Some(_) => self.pos,
        };
        let c = self.bytes[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.error_at(self.pos, "expected `)`"));
            }
            self.pos += 1;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.bytes.len()
                && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            if let Some(f) = Function::from_name(name) {
                if self.peek() != Some(b'(') {
                    return Err(self.error_at(self.pos, &format!("expected `(` after `{name}`")));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error_at(self.pos, "expected `)`"));
                }
                self.pos += 1;
                return Ok(Expr::Call(f, Box::new(arg)));
            }
            return match name {
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "e" => Ok(Expr::Num(std::f64::consts::E)),
                _ => self
                    .variable(name)
                    .ok_or_else(|| self.error_at(start, &format!("unknown identifier `{name}`"))),
            };
        }
        Err(self.error_at(start, &format!("unexpected character `{}`", c as char)))
    }

    fn variable(&self, name: &str) -> Option<Expr> {
        match self.arity {
            Arity::Scalar => matches!(name, "x" | "y" | "z" | "r" | "t").then_some(Expr::Var(0)),
            Arity::Vector(dim) => {
                let idx: usize = name.strip_prefix('x')?.parse().ok()?;
                (1..=dim).contains(&idx).then(|| Expr::Var(idx - 1))
            }
        }
    }

    fn number(&mut self, start: usize) -> Result<Expr> {
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < b.len() && (b[look] == b'+' || b[look] == b'-') {
                look += 1;
            }
            if look < b.len() && b[look].is_ascii_digit() {
                self.pos = look;
                while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.error_at(start, "malformed number"))
    }
}

/// 1-based line and column of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |nl| before.len() - nl - 1)
        + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(src: &str) -> Expr {
        Expr::parse(src, Arity::Scalar).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(scalar("1 + 2 * 3").eval1(0.0), 7.0);
        assert_eq!(scalar("2 ^ 3 ^ 2").eval1(0.0), 512.0);
        assert_eq!(scalar("-x^2").eval1(3.0), -9.0);
        assert_eq!(scalar("2^-1").eval1(0.0), 0.5);
        assert_eq!(scalar("(1 - x) / 4").eval1(-3.0), 1.0);
        assert_eq!(scalar("1.5e2 + 2E-1").eval1(0.0), 150.2);
    }

    #[test]
    fn functions_and_constants() {
        assert!((scalar("-atan(x)").eval1(1.0) + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((scalar("exp(log(r))").eval1(2.5) - 2.5).abs() < 1e-15);
        assert!((scalar("cos(pi)").eval1(0.0) + 1.0).abs() < 1e-15);
        assert_eq!(scalar("sqrt(t) * e").eval1(4.0), 2.0 * std::f64::consts::E);
    }

    #[test]
    fn vector_variables() {
        let e = Expr::parse("x1 - 2*x2", Arity::Vector(2)).unwrap();
        assert_eq!(e.eval(&[1.0, 3.0]), -5.0);
        assert!(Expr::parse("x3", Arity::Vector(2)).is_err());
        assert!(Expr::parse("x1", Arity::Scalar).is_err());
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("1 + foo(x)", Arity::Scalar) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 5)),
            other => panic!("{other:?}"),
        }
        match Expr::parse("1 +\n  (x", Arity::Scalar) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 5)),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("", Arity::Scalar).is_err());
        assert!(Expr::parse("2 3", Arity::Scalar).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let cases = [
            "x^3 - 2*x",
            "sin(x) * exp(-x)",
            "atan(x) / (1 + x^2)",
            "sqrt(1 + x^2)",
            "x^x",
            "tanh(2*x) + cosh(x) - log(2 + x)",
            "1/(1+x)",
        ];
        for src in cases {
            let e = scalar(src);
            let d = e.derivative(0);
            for &x in &[0.3, 0.9, 1.7] {
                let h = 1e-6;
                let fd = (e.eval1(x + h) - e.eval1(x - h)) / (2.0 * h);
                let an = d.eval1(x);
                assert!(
                    (fd - an).abs() < 1e-7 * (1.0 + an.abs()),
                    "{src} at {x}: {fd} vs {an}"
                );
            }
        }
    }
}
