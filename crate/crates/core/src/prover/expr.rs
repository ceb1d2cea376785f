//! Expression trees over box variables and their prefix text form.
//!
//! ```text
//! expr := number | xN | (var N) | (const number)
//!       | (add e e ...) | (sub e e) | (mul e e ...) | (div e e) | (neg e)
//!       | (sqrt e) | (pow e N) | (min e e ...) | (max e e ...)
//!       | (cayley_menger_vol e e e e e e)        ; alias: cm
//! ```
//! `;` starts a comment running to the end of the line.

use std::fmt;

use num_rational::BigRational;

use crate::decimal::{self, parse_rational};
use crate::interval::{Interval, IntervalError};
use crate::voronoi::cayley_menger_144v2;

/// A decimal constant: its source text, exact value and enclosure.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    text: String,
    exact: BigRational,
    enclosure: Interval,
}

impl Constant {
    pub fn parse(text: &str) -> Option<Constant> {
        let exact = parse_rational(text).ok()?;
        let (lo, hi) = decimal::bracket_rational(&exact);
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        Some(Constant {
            text: text.trim().to_string(),
            exact,
            enclosure: Interval::new(lo, hi).ok()?,
        })
    }

    pub fn from_f64(x: f64) -> Constant {
        Constant::parse(&decimal::format_f64(x)).expect("finite float")
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn enclosure(&self) -> Interval {
        self.enclosure
    }

    pub fn approx(&self) -> f64 {
        self.enclosure.mid()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(Constant),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Pow(Box<Expr>, i32),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    /// Volume of the tetrahedron with edge lengths `d01, d02, d03, d12, d13, d23`.
    CayleyMenger(Box<[Expr; 6]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("variable x{0} is outside the domain dimension")]
    VarOutOfRange(usize),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn constant(x: f64) -> Expr {
        Expr::Const(Constant::from_f64(x))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::Sqrt(Box::new(a))
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        Expr::Pow(Box::new(a), n)
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        Expr::Min(Box::new(a), Box::new(b))
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        Expr::Max(Box::new(a), Box::new(b))
    }

    /// Smallest box dimension the expression can be evaluated on.
    pub fn dimension(&self) -> usize {
        match self {
            Expr::Var(i) => i + 1,
            Expr::Const(_) => 0,
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => a.dimension().max(b.dimension()),
            Expr::Sqrt(a) | Expr::Pow(a, _) => a.dimension(),
            Expr::CayleyMenger(args) => args.iter().map(Expr::dimension).max().unwrap_or(0),
        }
    }

    /// Enclosure of the range over the box `x`.
    pub fn eval_interval(&self, x: &[Interval]) -> Result<Interval, EvalError> {
        Ok(match self {
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::VarOutOfRange(*i))?,
            Expr::Const(c) => c.enclosure,
            Expr::Add(a, b) => a.eval_interval(x)? + b.eval_interval(x)?,
            Expr::Sub(a, b) => a.eval_interval(x)? - b.eval_interval(x)?,
            Expr::Mul(a, b) => {
                if a == b {
                    a.eval_interval(x)?.sqr()
                } else {
                    a.eval_interval(x)? * b.eval_interval(x)?
                }
            }
            Expr::Div(a, b) => a.eval_interval(x)?.div(&b.eval_interval(x)?)?,
            Expr::Sqrt(a) => a.eval_interval(x)?.sqrt()?,
            Expr::Pow(a, n) => a.eval_interval(x)?.powi(*n)?,
            Expr::Min(a, b) => a.eval_interval(x)?.min(&b.eval_interval(x)?),
            Expr::Max(a, b) => a.eval_interval(x)?.max(&b.eval_interval(x)?),
            Expr::CayleyMenger(args) => {
                let mut d = [Interval::ZERO; 6];
                for (slot, arg) in d.iter_mut().zip(args.iter()) {
                    *slot = arg.eval_interval(x)?.abs();
                }
                let form = cayley_menger_144v2(&d);
                form.sqrt()?.div(&Interval::point(12.0))?
            }
        })
    }

    /// Plain floating-point evaluation (NaN outside the natural domain).
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Var(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Const(c) => c.approx(),
            Expr::Add(a, b) => a.eval_f64(x) + b.eval_f64(x),
            Expr::Sub(a, b) => a.eval_f64(x) - b.eval_f64(x),
            Expr::Mul(a, b) => a.eval_f64(x) * b.eval_f64(x),
            Expr::Div(a, b) => a.eval_f64(x) / b.eval_f64(x),
            Expr::Sqrt(a) => a.eval_f64(x).sqrt(),
            Expr::Pow(a, n) => a.eval_f64(x).powi(*n),
            Expr::Min(a, b) => a.eval_f64(x).min(b.eval_f64(x)),
            Expr::Max(a, b) => a.eval_f64(x).max(b.eval_f64(x)),
            Expr::CayleyMenger(args) => {
                let d: [f64; 6] = std::array::from_fn(|k| args[k].eval_f64(x));
                let form = cm_f64(&d);
                form.max(0.0).sqrt() / 12.0
            }
        }
    }
}

fn cm_f64(d: &[f64; 6]) -> f64 {
    let (a, b, c) = (d[0] * d[0], d[1] * d[1], d[2] * d[2]);
    let x2 = a + b - d[3] * d[3];
    let y2 = a + c - d[4] * d[4];
    let z2 = b + c - d[5] * d[5];
    4.0 * a * b * c + x2 * y2 * z2 - a * z2 * z2 - b * y2 * y2 - c * x2 * x2
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Const(c) => write!(f, "{}", c.text),
            Expr::Add(a, b) => write!(f, "(add {a} {b})"),
            Expr::Sub(a, b) => write!(f, "(sub {a} {b})"),
            Expr::Mul(a, b) => write!(f, "(mul {a} {b})"),
            Expr::Div(a, b) => write!(f, "(div {a} {b})"),
            Expr::Sqrt(a) => write!(f, "(sqrt {a})"),
            Expr::Pow(a, n) => write!(f, "(pow {a} {n})"),
            Expr::Min(a, b) => write!(f, "(min {a} {b})"),
            Expr::Max(a, b) => write!(f, "(max {a} {b})"),
            Expr::CayleyMenger(args) => {
                write!(f, "(cayley_menger_vol")?;
                for a in args.iter() {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

// ---- parsing ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

struct Lexer {
    tokens: Vec<(Token, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

fn tokenize(src: &str) -> Lexer {
    let mut tokens = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut chars = src.chars().peekable();
    let mut atom = String::new();
    let mut atom_start = (1, 1);
    let flush = |atom: &mut String, start: (usize, usize), tokens: &mut Vec<(Token, usize, usize)>| {
        if !atom.is_empty() {
            tokens.push((Token::Atom(std::mem::take(atom)), start.0, start.1));
        }
    };
    while let Some(ch) = chars.next() {
        match ch {
            '(' | ')' => {
                flush(&mut atom, atom_start, &mut tokens);
                let tok = if ch == '(' { Token::Open } else { Token::Close };
                tokens.push((tok, line, col));
            }
            ';' => {
                flush(&mut atom, atom_start, &mut tokens);
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 0;
                        break;
                    }
                }
            }
            c if c.is_whitespace() => flush(&mut atom, atom_start, &mut tokens),
            c => {
                if atom.is_empty() {
                    atom_start = (line, col);
                }
                atom.push(c);
            }
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    flush(&mut atom, atom_start, &mut tokens);
    Lexer {
        tokens,
        pos: 0,
        end: (line, col),
    }
}

impl Lexer {
    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .map(|t| (t.1, t.2))
            .unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut lx = tokenize(src);
    let e = parse_node(&mut lx)?;
    if lx.peek().is_some() {
        return Err(lx.error("trailing input after expression"));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

fn parse_atom(lx: &Lexer, text: &str) -> Result<Expr, ParseError> {
    if let Some(idx) = text.strip_prefix('x') {
        return idx
            .parse::<usize>()
            .map(Expr::Var)
            .map_err(|_| lx.error(format!("bad variable `{text}`")));
    }
    Constant::parse(text)
        .map(Expr::Const)
        .ok_or_else(|| lx.error(format!("unknown atom `{text}`")))
}

fn parse_node(lx: &mut Lexer) -> Result<Expr, ParseError> {
    let start = lx.pos;
    match lx.next() {
        None => Err(lx.error("unexpected end of input")),
        Some(Token::Close) => {
            lx.pos = start;
            Err(lx.error("unexpected `)`"))
        }
        Some(Token::Atom(text)) => {
            lx.pos = start;
            let e = parse_atom(lx, &text)?;
            lx.pos = start + 1;
            Ok(e)
        }
        Some(Token::Open) => {
            let op_pos = lx.pos;
            let op = match lx.next() {
                Some(Token::Atom(op)) => op,
                _ => {
                    lx.pos = op_pos;
                    return Err(lx.error("expected an operator after `(`"));
                }
            };
            let e = match op.as_str() {
                "var" => {
                    let n = parse_integer(lx)?;
                    usize::try_from(n)
                        .map(Expr::Var)
                        .map_err(|_| lx.error("negative variable index"))?
                }
                "const" => {
                    let pos = lx.pos;
                    match lx.next() {
                        Some(Token::Atom(t)) => Constant::parse(&t).map(Expr::Const).ok_or_else(|| {
                            lx.pos = pos;
                            lx.error(format!("bad constant `{t}`"))
                        })?,
                        _ => {
                            lx.pos = pos;
                            return Err(lx.error("expected a decimal constant"));
                        }
                    }
                }
                "pow" => {
                    let base = parse_node(lx)?;
                    let n = parse_integer(lx)?;
                    let n = i32::try_from(n).map_err(|_| lx.error("exponent out of range"))?;
                    Expr::pow(base, n)
                }
                "sqrt" => Expr::sqrt(parse_node(lx)?),
                "neg" => Expr::sub(Expr::Const(Constant::parse("0").unwrap()), parse_node(lx)?),
                "sub" | "div" => {
                    let a = parse_node(lx)?;
                    let b = parse_node(lx)?;
                    if op == "sub" {
                        Expr::sub(a, b)
                    } else {
                        Expr::div(a, b)
                    }
                }
                "add" | "mul" | "min" | "max" => {
                    let mut acc = parse_node(lx)?;
                    let mut count = 1;
                    while lx.peek().is_some_and(|t| *t != Token::Close) {
                        let rhs = parse_node(lx)?;
                        acc = match op.as_str() {
                            "add" => Expr::add(acc, rhs),
                            "mul" => Expr::mul(acc, rhs),
                            "min" => Expr::min(acc, rhs),
                            _ => Expr::max(acc, rhs),
                        };
                        count += 1;
                    }
                    if count < 2 {
                        return Err(lx.error(format!("`{op}` needs at least two operands")));
                    }
                    acc
                }
                "cayley_menger_vol" | "cm" => {
                    let mut args = Vec::with_capacity(6);
                    for _ in 0..6 {
                        args.push(parse_node(lx)?);
                    }
                    let args: [Expr; 6] = args.try_into().expect("six operands");
                    Expr::CayleyMenger(Box::new(args))
                }
                other => {
                    lx.pos = op_pos;
                    return Err(lx.error(format!("unknown operator `{other}`")));
                }
            };
            match lx.next() {
                Some(Token::Close) => Ok(e),
                _ => {
                    lx.pos -= 1;
                    Err(lx.error(format!("expected `)` to close `{op}`")))
                }
            }
        }
    }
}

fn parse_integer(lx: &mut Lexer) -> Result<i64, ParseError> {
    let pos = lx.pos;
    match lx.next() {
        Some(Token::Atom(t)) => t.parse::<i64>().map_err(|_| {
            lx.pos = pos;
            lx.error(format!("expected an integer, found `{t}`"))
        }),
        _ => {
            lx.pos = pos;
            Err(lx.error("expected an integer"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_print_round_trip() {
        let src = "(sub (mul 2 x2) (add x0 x1))";
        let e = parse_expr(src).unwrap();
        assert_eq!(e.to_string(), src);
        assert_eq!(e.dimension(), 3);
        let e2 = parse_expr(&e.to_string()).unwrap();
        assert_eq!(e, e2);
        let nary = parse_expr("(add x0 x1 (var 2) (const 0.5)) ; trailing comment").unwrap();
        assert_eq!(nary.to_string(), "(add (add (add x0 x1) x2) 0.5)");
        let cm = parse_expr("(cm 2 2 2 2 2 2)").unwrap();
        assert!(cm.to_string().starts_with("(cayley_menger_vol"));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_expr("(add x0\n  (frob x1))").unwrap_err();
        assert_eq!((err.line, err.col), (2, 4));
        assert!(err.message.contains("frob"));
        assert!(parse_expr("(add x0").is_err());
        assert!(parse_expr("(add x0)").is_err());
        assert!(parse_expr("x0 x1").is_err());
        assert!(parse_expr("(pow x0 1.5)").is_err());
        assert!(parse_expr(")").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr("xq").is_err());
    }

    #[test]
    fn interval_eval_examples() {
        let e = parse_expr("(add (sub (mul x0 x0) (mul 2 x0)) 1)").unwrap();
        let r = e.eval_interval(&[Interval::new(0.0, 3.0).unwrap()]).unwrap();
        assert!(Interval::new(0.0, 4.0).unwrap().is_subset_of(&r));
        let c = parse_expr("5").unwrap();
        assert_eq!(c.eval_interval(&[]).unwrap(), Interval::point(5.0));
        let cm = parse_expr("(cm x0 x0 x0 x0 x0 x0)").unwrap();
        let v = cm.eval_interval(&[Interval::point(2.0)]).unwrap();
        assert!(v.contains(2.0 * 2f64.sqrt() / 3.0));
        let d = parse_expr("(div 1 x0)").unwrap();
        assert_eq!(
            d.eval_interval(&[Interval::new(-1.0, 1.0).unwrap()]),
            Err(EvalError::Interval(IntervalError::PossiblyUnbounded))
        );
        assert_eq!(parse_expr("x3").unwrap().eval_interval(&[Interval::ZERO]), Err(EvalError::VarOutOfRange(3)));
    }

    #[test]
    fn decimal_constants_are_enclosed() {
        let e = parse_expr("0.1").unwrap();
        let r = e.eval_interval(&[]).unwrap();
        assert!(r.lo() < r.hi());
        assert!((e.eval_f64(&[]) - 0.1).abs() < 1e-17);
    }
}
