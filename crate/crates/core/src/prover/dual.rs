//! Forward-mode differentiation over intervals.
//!
//! Evaluated on a box, a [`Dual`] carries a range enclosure together with an
//! enclosure of every partial derivative over that box. `min`/`max` on
//! overlapping branches take the hull of both gradients (a valid generalized
//! gradient for the mean-value argument).

use std::ops::{Add, Mul, Sub};

use crate::interval::Interval;
use crate::voronoi::{cayley_menger_144v2, Ring};

use super::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: Interval,
    pub grad: Vec<Interval>,
}

/// The derivative enclosure is unbounded or undefined somewhere in the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no bounded derivative enclosure on this box")]
pub struct Fallback;

impl Dual {
    pub fn constant_in(value: Interval, dim: usize) -> Dual {
        Dual {
            value,
            grad: vec![Interval::ZERO; dim],
        }
    }

    pub fn variable(value: Interval, index: usize, dim: usize) -> Dual {
        let mut grad = vec![Interval::ZERO; dim];
        grad[index] = Interval::ONE;
        Dual { value, grad }
    }

    fn scale(&self, k: Interval) -> Vec<Interval> {
        self.grad.iter().map(|g| *g * k).collect()
    }

    fn div(&self, rhs: &Dual) -> Result<Dual, Fallback> {
        let value = self.value.div(&rhs.value).map_err(|_| Fallback)?;
        let inv = rhs.value.recip().map_err(|_| Fallback)?;
        // (a/b)' = (a' - (a/b) b') / b
        let grad = self
            .grad
            .iter()
            .zip(&rhs.grad)
            .map(|(ga, gb)| (*ga - value * *gb) * inv)
            .collect();
        Ok(Dual { value, grad })
    }

    fn sqrt(&self) -> Result<Dual, Fallback> {
        if self.value.lo() <= 0.0 {
            return Err(Fallback);
        }
        let value = self.value.sqrt().map_err(|_| Fallback)?;
        let k = (value * 2.0).recip().map_err(|_| Fallback)?;
        Ok(Dual {
            grad: self.scale(k),
            value,
        })
    }

    fn powi(&self, n: i32) -> Result<Dual, Fallback> {
        let value = self.value.powi(n).map_err(|_| Fallback)?;
        if n == 0 {
            return Ok(Dual::constant_in(value, self.grad.len()));
        }
        let k = self.value.powi(n - 1).map_err(|_| Fallback)? * f64::from(n);
        Ok(Dual {
            grad: self.scale(k),
            value,
        })
    }

    fn select(&self, rhs: &Dual, take_min: bool) -> Dual {
        let (a, b) = (self.value, rhs.value);
        let (low, high) = if take_min { (self, rhs) } else { (rhs, self) };
        if a.hi() <= b.lo() {
            return low.clone();
        }
        if b.hi() <= a.lo() {
            return high.clone();
        }
        let value = if take_min { a.min(&b) } else { a.max(&b) };
        let grad = self.grad.iter().zip(&rhs.grad).map(|(x, y)| x.hull(y)).collect();
        Dual { value, grad }
    }
}

/// Component-wise combination; a missing gradient (from [`Ring::constant`]) is zero.
fn zip_grad(a: &[Interval], b: &[Interval], f: impl Fn(Interval, Interval) -> Interval) -> Vec<Interval> {
    let at = |g: &[Interval], k: usize| g.get(k).copied().unwrap_or(Interval::ZERO);
    (0..a.len().max(b.len())).map(|k| f(at(a, k), at(b, k))).collect()
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value + rhs.value,
            grad: zip_grad(&self.grad, &rhs.grad, |a, b| a + b),
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value - rhs.value,
            grad: zip_grad(&self.grad, &rhs.grad, |a, b| a - b),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual {
            value: self.value * rhs.value,
            grad: zip_grad(&self.grad, &rhs.grad, |ga, gb| ga * rhs.value + self.value * gb),
        }
    }
}

impl Ring for Dual {
    // The box dimension is unknown here; an empty gradient reads as zero.
    fn constant(x: f64) -> Self {
        Dual {
            value: Interval::point(x),
            grad: Vec::new(),
        }
    }
}

/// Range and gradient enclosures of `e` over the box `x`.
pub fn eval_dual(e: &Expr, x: &[Interval]) -> Result<Dual, Fallback> {
    let dim = x.len();
    Ok(match e {
        Expr::Var(i) => Dual::variable(*x.get(*i).ok_or(Fallback)?, *i, dim),
        Expr::Const(c) => Dual::constant_in(c.enclosure(), dim),
        Expr::Add(a, b) => eval_dual(a, x)? + eval_dual(b, x)?,
        Expr::Sub(a, b) => eval_dual(a, x)? - eval_dual(b, x)?,
        Expr::Mul(a, b) => {
            let da = eval_dual(a, x)?;
            if a == b {
                let value = da.value.sqr();
                let k = da.value * 2.0;
                Dual {
                    grad: da.scale(k),
                    value,
                }
            } else {
                da * eval_dual(b, x)?
            }
        }
        Expr::Div(a, b) => eval_dual(a, x)?.div(&eval_dual(b, x)?)?,
        Expr::Sqrt(a) => eval_dual(a, x)?.sqrt()?,
        Expr::Pow(a, n) => eval_dual(a, x)?.powi(*n)?,
        Expr::Min(a, b) => eval_dual(a, x)?.select(&eval_dual(b, x)?, true),
        Expr::Max(a, b) => eval_dual(a, x)?.select(&eval_dual(b, x)?, false),
        Expr::CayleyMenger(args) => {
            let mut d = Vec::with_capacity(6);
            for a in args.iter() {
                d.push(eval_dual(a, x)?);
            }
            let d: [Dual; 6] = d.try_into().expect("six operands");
            let mut form = cayley_menger_144v2(&d);
            if form.grad.len() != dim {
                form.grad.resize(dim, Interval::ZERO);
            }
            let vol = form.sqrt()?;
            let k = Interval::point(12.0).recip().map_err(|_| Fallback)?;
            Dual {
                value: vol.value * k,
                grad: vol.scale(k),
            }
        }
    })
}
