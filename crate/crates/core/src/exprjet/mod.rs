//! Expression language for curve components and flow speeds, evaluated in
//! truncated-Taylor (jet) arithmetic so derivatives come out exact.
//!
//! Grammar, whitespace-insensitive:
//!
//! ```text
//! expr  = term  { ("+" | "-") term } ;
//! term  = unary { ("*" | "/") unary } ;
//! unary = "-" unary | power ;
//! power = atom [ "^" unary ] ;          (* exponent must fold to an integer *)
//! atom  = number | "pi" | ident | func "(" expr ")" | "(" expr ")" ;
//! func  = "sin" | "cos" | "sinh" | "cosh" | "exp" | "sqrt" ;
//! ```
//!
//! `^` binds tighter than unary minus, so `-u^2` is `-(u^2)`, and chains to the
//! right: `u^2^3` is `u^8`.

mod jet;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use jet::Jet;

use crate::error::{Error, ParseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, x: &Jet) -> Result<Jet> {
        Ok(match self {
            Func::Sin => x.sin_cos().0,
            Func::Cos => x.sin_cos().1,
            Func::Sinh => x.sinh_cosh().0,
            Func::Cosh => x.sinh_cosh().1,
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Parses `text`, accepting any identifier as a variable.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse::Parser::new(text, None).parse()
}

/// Parses `text`, rejecting variables outside `allowed`.
pub fn parse_with_vars(text: &str, allowed: &[&str]) -> Result<Expr, ParseError> {
    parse::Parser::new(text, Some(allowed)).parse()
}

/// Taylor expansion of `e` in `var` at `point` to `order`, with every other
/// free variable taken from `env`.
pub fn eval_jet(
    e: &Expr,
    var: &str,
    point: f64,
    order: usize,
    env: &[(&str, f64)],
) -> Result<Jet> {
    e.eval_jet(var, point, order, env)
}

/// Plain value of `e` with all variables bound by `env`.
pub fn eval(e: &Expr, env: &[(&str, f64)]) -> Result<f64> {
    Ok(e.eval_with(&|name| lookup(env, name).map(|v| Jet::constant(v, 0)), 0)?.value())
}

fn lookup(env: &[(&str, f64)], name: &str) -> Option<f64> {
    env.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
}

impl Expr {
    pub fn eval_jet(&self, var: &str, point: f64, order: usize, env: &[(&str, f64)]) -> Result<Jet> {
        self.eval_with(
            &|name| {
                if name == var {
                    Some(Jet::variable(point, order))
                } else {
                    lookup(env, name).map(|v| Jet::constant(v, order))
                }
            },
            order,
        )
    }

    fn eval_with(&self, bind: &dyn Fn(&str) -> Option<Jet>, order: usize) -> Result<Jet> {
        Ok(match self {
            Expr::Num(x) => Jet::constant(*x, order),
            Expr::Var(name) => bind(name).ok_or_else(|| Error::UnboundVariable(name.clone()))?,
            Expr::Neg(a) => -&a.eval_with(bind, order)?,
            Expr::Add(a, b) => &a.eval_with(bind, order)? + &b.eval_with(bind, order)?,
            Expr::Sub(a, b) => &a.eval_with(bind, order)? - &b.eval_with(bind, order)?,
            Expr::Mul(a, b) => &a.eval_with(bind, order)? * &b.eval_with(bind, order)?,
            Expr::Div(a, b) => a.eval_with(bind, order)?.try_div(&b.eval_with(bind, order)?)?,
            Expr::Pow(a, e) => a.eval_with(bind, order)?.powi(*e)?,
            Expr::Call(f, a) => f.apply(&a.eval_with(bind, order)?)?,
        })
    }

    /// Value of a variable-free expression; `None` if any variable occurs or
    /// evaluation hits a domain error.
    pub fn constant_value(&self) -> Option<f64> {
        self.eval_with(&|_| None, 0).ok().map(|j| j.value())
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    fn is_atom(&self) -> bool {
        match self {
            Expr::Num(x) => *x >= 0.0,
            Expr::Var(_) | Expr::Call(..) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 => write!(f, "(-{})", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(n) => f.write_str(n),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, e) => {
                if a.is_atom() {
                    write!(f, "{a}^{e}")
                } else if matches!(**a, Expr::Pow(..)) {
                    write!(f, "({a})^{e}")
                } else {
                    // compound bases already print parenthesised
                    write!(f, "{a}^{e}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
