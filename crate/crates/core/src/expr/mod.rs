//! Expression trees over named variables with exact rational constants.
//!
//! Trees are immutable and cheaply shareable (children are `Arc`s), which
//! keeps substitution-heavy constructions such as composed chart maps small.
//! There is no canonical simplification; identities are tested by
//! randomized evaluation ([`equal_on_samples`]).

mod compiled;
mod diff;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::sampling::{agree_on_samples, SampleBox};
use crate::scalar::{Dual, Scalar};

pub use compiled::Compiled;
pub use parse::parse;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(BigRational),
    Var(String),
    Add(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Neg(Arc<Expr>),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        assert!(den != 0, "zero denominator");
        Expr::Const(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(One::is_one)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::Const(x + y),
            _ if a.is_zero() => return b,
            _ if b.is_zero() => return a,
            _ => {}
        }
        Expr::Add(Arc::new(a), Arc::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(a, Expr::neg(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => return Expr::zero(),
            _ if a.is_one() => return b,
            _ if b.is_one() => return a,
            _ => {}
        }
        Expr::Mul(Arc::new(a), Arc::new(b))
    }

    /// Quotient; a literal zero denominator is rejected.
    pub fn div(a: Expr, b: Expr) -> Result<Expr> {
        if b.is_zero() {
            return Err(Error::Domain {
                subtree: format!("{a} / 0"),
                reason: "literal zero denominator".into(),
            });
        }
        Ok(match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x / y),
            _ if a.is_zero() => Expr::zero(),
            _ if b.is_one() => a,
            _ => Expr::Div(Arc::new(a), Arc::new(b)),
        })
    }

    pub fn pow(base: Expr, n: i32) -> Expr {
        match n {
            0 => Expr::one(),
            1 => base,
            _ => match base.as_const() {
                Some(c) if n > 0 => Expr::Const(num_traits::pow(c.clone(), n as usize)),
                _ => Expr::Pow(Arc::new(base), n),
            },
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => (*inner).clone(),
            other => Expr::Neg(Arc::new(other)),
        }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Arc::new(arg))
    }

    pub fn exp(arg: Expr) -> Expr {
        Expr::call(Func::Exp, arg)
    }

    pub fn sqrt(arg: Expr) -> Expr {
        Expr::call(Func::Sqrt, arg)
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        factors.into_iter().fold(Expr::one(), Expr::mul)
    }

    /// Free variable names, sorted.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
        }
    }

    /// Replace every occurrence of the named variables.
    pub fn substitute(&self, bindings: &[(&str, &Expr)]) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => bindings
                .iter()
                .find(|(name, _)| name == v)
                .map_or_else(|| self.clone(), |(_, e)| (*e).clone()),
            Expr::Add(a, b) => Expr::Add(
                Arc::new(a.substitute(bindings)),
                Arc::new(b.substitute(bindings)),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Arc::new(a.substitute(bindings)),
                Arc::new(b.substitute(bindings)),
            ),
            Expr::Div(a, b) => Expr::Div(
                Arc::new(a.substitute(bindings)),
                Arc::new(b.substitute(bindings)),
            ),
            Expr::Pow(a, n) => Expr::Pow(Arc::new(a.substitute(bindings)), *n),
            Expr::Neg(a) => Expr::Neg(Arc::new(a.substitute(bindings))),
            Expr::Call(f, a) => Expr::Call(*f, Arc::new(a.substitute(bindings))),
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> Expr {
        self.substitute(&[(from, &Expr::var(to))])
    }

    /// Exact symbolic derivative with respect to `var`.
    pub fn differentiate(&self, var: &str) -> Expr {
        diff::differentiate(self, var)
    }

    /// Compile against an ordered variable list for fast repeated evaluation.
    pub fn compile(&self, vars: &[&str]) -> Result<Compiled> {
        Compiled::new(self, vars)
    }

    /// Number of nodes in the tree (shared subtrees counted per use).
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
        }
    }
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        // numerator/denominator beyond f64 range individually
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

// Printing. Precedence levels: 1 sum, 2 product, 3 unary minus,
// 4 power, 5 atom. The output re-parses under the DSL grammar.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) => {
            if !c.is_integer() {
                2
            } else if c.is_negative() {
                3
            } else {
                5
            }
        }
        Expr::Var(_) | Expr::Call(..) => 5,
        Expr::Add(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(_, n) => {
            if *n < 0 {
                2
            } else {
                4
            }
        }
    }
}

fn write_prec(e: &Expr, required: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let own = precedence(e);
    if own < required {
        f.write_str("(")?;
        write_expr(e, f)?;
        f.write_str(")")
    } else {
        write_expr(e, f)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) => {
            if c.is_integer() {
                write!(f, "{}", c.numer())
            } else {
                write!(f, "{}/{}", c.numer(), c.denom())
            }
        }
        Expr::Var(v) => f.write_str(v),
        Expr::Add(a, b) => {
            write_prec(a, 1, f)?;
            match &**b {
                Expr::Neg(inner) => {
                    f.write_str(" - ")?;
                    write_prec(inner, 2, f)
                }
                Expr::Const(c) if c.is_negative() => {
                    f.write_str(" - ")?;
                    write_prec(&Expr::Const(-c.clone()), 2, f)
                }
                other => {
                    f.write_str(" + ")?;
                    write_prec(other, 2, f)
                }
            }
        }
        Expr::Mul(a, b) => {
            write_prec(a, 2, f)?;
            f.write_str("*")?;
            write_prec(b, 3, f)
        }
        Expr::Div(a, b) => {
            write_prec(a, 2, f)?;
            f.write_str("/")?;
            write_prec(b, 3, f)
        }
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_prec(a, 4, f)
        }
        Expr::Pow(a, n) => {
            if *n < 0 {
                f.write_str("1/")?;
                write_prec(a, 5, f)?;
                write!(f, "^{}", -n)
            } else {
                write_prec(a, 5, f)?;
                write!(f, "^{n}")
            }
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, f)?;
            f.write_str(")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

/// Parse a chain of definitions `name = expr`, each over `base_vars` and
/// the names defined before it, and inline earlier definitions into later
/// ones. Returns every definition in order, fully expanded.
pub fn expand_definitions(defs: &[(&str, &str)], base_vars: &[&str]) -> Result<Vec<(String, Expr)>> {
    let mut out: Vec<(String, Expr)> = Vec::with_capacity(defs.len());
    for (name, text) in defs {
        if base_vars.contains(name) || out.iter().any(|(n, _)| n == name) {
            return Err(Error::Validation(format!("`{name}` defined twice")));
        }
        let mut allowed: Vec<&str> = base_vars.to_vec();
        allowed.extend(out.iter().map(|(n, _)| n.as_str()));
        let raw = parse(text, &allowed)?;
        let bindings: Vec<(&str, &Expr)> = out.iter().map(|(n, e)| (n.as_str(), e)).collect();
        out.push((name.to_string(), raw.substitute(&bindings)));
    }
    Ok(out)
}

/// Ordered name → value bindings with unique names.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment<T> {
    entries: Vec<(String, T)>,
}

impl<T> Default for Environment<T> {
    fn default() -> Self {
        Environment {
            entries: Vec::new(),
        }
    }
}

impl<T: Clone> Environment<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, T)>) -> Result<Self> {
        let mut env = Self::new();
        for (k, v) in pairs {
            env.bind(k, v)?;
        }
        Ok(env)
    }

    pub fn bind(&mut self, name: &str, value: T) -> Result<()> {
        if self.entries.iter().any(|(k, _)| k == name) {
            return Err(Error::Validation(format!("duplicate binding `{name}`")));
        }
        self.entries.push((name.to_string(), value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&T> {
        self.entries.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(k, _)| k.as_str()).collect()
    }

    pub fn values(&self) -> Vec<T> {
        self.entries.iter().map(|(_, v)| v.clone()).collect()
    }
}

/// Evaluate in binary64.
pub fn evaluate(e: &Expr, env: &Environment<f64>) -> Result<f64> {
    evaluate_generic(e, env)
}

/// Evaluate over dual numbers; tangent slots follow the caller's seeding.
pub fn evaluate_dual(e: &Expr, env: &Environment<Dual<f64>>) -> Result<Dual<f64>> {
    evaluate_generic(e, env)
}

pub fn evaluate_generic<S: Scalar>(e: &Expr, env: &Environment<S>) -> Result<S> {
    let names = env.names();
    e.compile(&names)?.eval(&env.values())
}

/// Randomized identity test: true iff `|e1 − e2| ≤ tol·(1 + max(|e1|, |e2|))`
/// at `n_samples` points drawn uniformly from `[−2, 2]` per variable. Points
/// where either side is undefined are resampled.
pub fn equal_on_samples(
    e1: &Expr,
    e2: &Expr,
    vars: &[&str],
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<bool> {
    equal_on_samples_avoiding(e1, e2, vars, n_samples, tol, seed, &[])
}

/// As [`equal_on_samples`], additionally rejecting points within `1e-3` of
/// the zero sets of `avoid`.
pub fn equal_on_samples_avoiding(
    e1: &Expr,
    e2: &Expr,
    vars: &[&str],
    n_samples: usize,
    tol: f64,
    seed: u64,
    avoid: &[Expr],
) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let c1 = e1.compile(vars)?;
    let c2 = e2.compile(vars)?;
    let guards = avoid
        .iter()
        .map(|g| g.compile(vars))
        .collect::<Result<Vec<_>>>()?;
    let report = agree_on_samples(
        vars.len(),
        &SampleBox::default(),
        n_samples,
        seed,
        |x| {
            guards
                .iter()
                .all(|g| g.eval(x).is_ok_and(|v: f64| v.abs() >= crate::sampling::SINGULAR_MARGIN))
        },
        |x| c1.eval(x),
        |x| c2.eval(x),
    )?;
    Ok(report.max_relative <= tol)
}
