//! A small arithmetic expression language with symbolic differentiation.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! functions `sin cos tan exp log sqrt abs`, the constant `pi`, and names
//! bound by the caller either to variable slots or to constant values.
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// What a name in an expression refers to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Binding {
    Var(usize),
    Const(f64),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Expr {
                pos: start,
                message: format!("bad number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Expr {
                pos: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    resolve: &'a dyn Fn(&str) -> Option<Binding>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expr {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Op('(') => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Op('(') {
                    let Some(f) = Func::from_name(&name) else {
                        return Err(Error::Expr {
                            pos,
                            message: format!("unknown function `{name}`"),
                        });
                    };
                    self.bump();
                    let arg = self.sum()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match (self.resolve)(&name) {
                    Some(Binding::Var(i)) => Ok(Expr::Var(i)),
                    Some(Binding::Const(v)) => Ok(Expr::Const(v)),
                    None if name == "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    None => Err(Error::Expr {
                        pos,
                        message: format!("unknown name `{name}`"),
                    }),
                }
            }
            Tok::End => Err(Error::Expr {
                pos,
                message: "unexpected end of expression".into(),
            }),
            Tok::Op(c) => Err(Error::Expr {
                pos,
                message: format!("unexpected `{c}`"),
            }),
        }
    }
}

impl Expr {
    /// Parses `src`, resolving every identifier through `resolve`.
    pub fn parse(src: &str, resolve: &dyn Fn(&str) -> Option<Binding>) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            at: 0,
            resolve,
        };
        let e = p.sum()?;
        if *p.peek() != Tok::End {
            return p.err("trailing input");
        }
        Ok(e.simplify())
    }

    /// Parses with variables named by position in `vars` and constants from
    /// `consts`.
    pub fn parse_with(src: &str, vars: &[&str], consts: &[(&str, f64)]) -> Result<Expr> {
        let resolve = |name: &str| {
            if let Some(i) = vars.iter().position(|v| *v == name) {
                return Some(Binding::Var(i));
            }
            consts
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| Binding::Const(*v))
        };
        Expr::parse(src, &resolve)
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                if let Expr::Const(c) = **b {
                    if c.fract() == 0.0 && c.abs() <= 64.0 {
                        return base.powi(c as i32);
                    }
                }
                base.powf(b.eval(vars))
            }
            Expr::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, None) => x,
                (None, y) => y,
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Symbolic partial derivative with respect to variable slot `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        use Expr::*;
        let d = match self {
            Const(_) => Const(0.0),
            Var(i) => Const(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => {
                let num = sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                );
                div(num, pow((**b).clone(), Const(2.0)))
            }
            Pow(a, b) => {
                let da = a.derivative(var);
                if let Const(c) = **b {
                    mul(
                        mul(Const(c), pow((**a).clone(), Const(c - 1.0))),
                        da,
                    )
                } else {
                    let db = b.derivative(var);
                    let term = add(
                        mul(db, call(Func::Log, (**a).clone())),
                        div(mul((**b).clone(), da), (**a).clone()),
                    );
                    mul(self.clone(), term)
                }
            }
            Call(f, a) => {
                let da = a.derivative(var);
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => div(Const(1.0), pow(call(Func::Cos, inner), Const(2.0))),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(Const(1.0), inner),
                    Func::Sqrt => div(Const(0.5), call(Func::Sqrt, inner)),
                    Func::Abs => div(inner.clone(), call(Func::Abs, inner)),
                };
                mul(outer, da)
            }
        };
        d.simplify()
    }

    /// Constant folding and removal of trivial identities.
    pub fn simplify(self) -> Expr {
        use Expr::*;
        match self {
            Neg(a) => neg(a.simplify()),
            Add(a, b) => add(a.simplify(), b.simplify()),
            Sub(a, b) => sub(a.simplify(), b.simplify()),
            Mul(a, b) => mul(a.simplify(), b.simplify()),
            Div(a, b) => div(a.simplify(), b.simplify()),
            Pow(a, b) => pow(a.simplify(), b.simplify()),
            Call(f, a) => call(f, a.simplify()),
            e => e,
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (a, b) if a.is_zero() => b,
        (a, b) if b.is_zero() => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (a, b) if a.is_zero() || b.is_zero() => Expr::Const(0.0),
        (Expr::Const(1.0), b) => b,
        (a, Expr::Const(1.0)) => a,
        (Expr::Const(-1.0), b) => neg(b),
        (a, Expr::Const(-1.0)) => neg(a),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
        (a, _) if a.is_zero() => Expr::Const(0.0),
        (a, Expr::Const(1.0)) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(Expr::Pow(
            Box::new(Expr::Const(x)),
            Box::new(Expr::Const(y)),
        )
        .eval(&[])),
        (_, Expr::Const(0.0)) => Expr::Const(1.0),
        (a, Expr::Const(1.0)) => a,
        (a, b) => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(f.apply(c)),
        a => Expr::Call(f, Box::new(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Expr {
        Expr::parse_with(src, &["x", "y"], &[("theta", 3.0)]).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("-x^2").eval(&[3.0, 0.0]), -9.0);
        assert_eq!(p("2^3^2").eval(&[0.0, 0.0]), 512.0);
        assert_eq!(p("1 - 2 - 3").eval(&[0.0, 0.0]), -4.0);
        assert_eq!(p("8 / 4 / 2").eval(&[0.0, 0.0]), 1.0);
        assert_eq!(p("theta*x + y").eval(&[2.0, 1.0]), 7.0);
        assert_eq!(p("1.5e-1 * 2E1").eval(&[0.0, 0.0]), 3.0);
    }

    #[test]
    fn reports_positions() {
        let err = Expr::parse_with("x + zz", &["x"], &[]).unwrap_err();
        assert_eq!(
            err,
            Error::Expr {
                pos: 4,
                message: "unknown name `zz`".into()
            }
        );
        assert!(Expr::parse_with("x +", &["x"], &[]).is_err());
        assert!(Expr::parse_with("(x", &["x"], &[]).is_err());
        assert!(Expr::parse_with("foo(x)", &["x"], &[]).is_err());
        assert!(Expr::parse_with("x $ 1", &["x"], &[]).is_err());
    }

    #[test]
    fn derivatives_match_differences() {
        let exprs = [
            "x^3*y - sin(x*y)",
            "exp(x)/(1 + y^2)",
            "sqrt(1 + x^2) * log(2 + y)",
            "x^y",
            "tan(x) + cos(y)^2",
            "-y^2 + 4*y*x - theta*x^2",
        ];
        let pt = [0.7, 0.4];
        for src in exprs {
            let e = p(src);
            for var in 0..2 {
                let d = e.derivative(var);
                let h = 1e-6;
                let mut a = pt;
                let mut b = pt;
                a[var] += h;
                b[var] -= h;
                let fd = (e.eval(&a) - e.eval(&b)) / (2.0 * h);
                assert!(
                    (d.eval(&pt) - fd).abs() < 1e-7 * (1.0 + fd.abs()),
                    "{src} d/d{var}: {} vs {fd}",
                    d.eval(&pt)
                );
            }
        }
    }

    #[test]
    fn simplification_drops_dead_branches() {
        let e = p("x*y + 3");
        assert_eq!(e.derivative(0), Expr::Var(1));
        assert!(e.derivative(0).derivative(0).is_zero());
        assert_eq!(p("2*pi").eval(&[]), 2.0 * std::f64::consts::PI);
    }
}
