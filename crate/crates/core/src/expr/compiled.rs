use std::sync::Arc;

use super::{rational_to_f64, Expr, Func};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An expression with variables resolved to slot indices.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
    arity: usize,
}

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Slot(usize),
    Add(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    // source subtree kept for diagnostics
    Div(Box<Node>, Box<Node>, Arc<Expr>),
    Pow(Box<Node>, i32),
    Neg(Box<Node>),
    Exp(Box<Node>),
    Sqrt(Box<Node>, Arc<Expr>),
}

impl Compiled {
    pub(super) fn new(e: &Expr, vars: &[&str]) -> Result<Self> {
        Ok(Compiled {
            root: lower(e, vars)?,
            arity: vars.len(),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        if x.len() != self.arity {
            return Err(Error::dim(format!(
                "expression over {} variables evaluated at {} values",
                self.arity,
                x.len()
            )));
        }
        eval(&self.root, x)
    }
}

fn lower(e: &Expr, vars: &[&str]) -> Result<Node> {
    Ok(match e {
        Expr::Const(c) => Node::Const(rational_to_f64(c)),
        Expr::Var(v) => Node::Slot(
            vars.iter()
                .position(|name| name == v)
                .ok_or_else(|| Error::UnknownVariable(v.clone()))?,
        ),
        Expr::Add(a, b) => Node::Add(lower(a, vars)?.into(), lower(b, vars)?.into()),
        Expr::Mul(a, b) => Node::Mul(lower(a, vars)?.into(), lower(b, vars)?.into()),
        Expr::Div(a, b) => Node::Div(
            lower(a, vars)?.into(),
            lower(b, vars)?.into(),
            Arc::new(e.clone()),
        ),
        Expr::Pow(a, n) => Node::Pow(lower(a, vars)?.into(), *n),
        Expr::Neg(a) => Node::Neg(lower(a, vars)?.into()),
        Expr::Call(Func::Exp, a) => Node::Exp(lower(a, vars)?.into()),
        Expr::Call(Func::Sqrt, a) => Node::Sqrt(lower(a, vars)?.into(), Arc::new(e.clone())),
    })
}

fn eval<S: Scalar>(node: &Node, x: &[S]) -> Result<S> {
    Ok(match node {
        Node::Const(c) => S::constant(*c),
        Node::Slot(i) => x[*i].clone(),
        Node::Add(a, b) => eval(a, x)? + eval(b, x)?,
        Node::Mul(a, b) => eval(a, x)? * eval(b, x)?,
        Node::Div(a, b, src) => {
            let den = eval(b, x)?;
            if den.re() == 0.0 || !den.re().is_finite() {
                return Err(Error::Domain {
                    subtree: src.to_string(),
                    reason: format!("denominator evaluates to {}", den.re()),
                });
            }
            eval(a, x)? / den
        }
        Node::Pow(a, n) => {
            let base = eval(a, x)?;
            if *n < 0 && base.re() == 0.0 {
                return Err(Error::Domain {
                    subtree: format!("({:?})^{n}", a),
                    reason: "negative power of zero".into(),
                });
            }
            base.powi(*n)
        }
        Node::Neg(a) => -eval(a, x)?,
        Node::Exp(a) => eval(a, x)?.exp(),
        Node::Sqrt(a, src) => {
            let arg = eval(a, x)?;
            if arg.re() < 0.0 {
                return Err(Error::Domain {
                    subtree: src.to_string(),
                    reason: format!("square root of {}", arg.re()),
                });
            }
            arg.sqrt()
        }
    })
}
