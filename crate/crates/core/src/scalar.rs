//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! dual numbers.
//!
//! Every evaluator in the crate is generic over [`Scalar`], so the same code
//! path yields values (`f64`), gradients (`Dual<f64>`) and second derivatives
//! (`Dual<Dual<f64>>`). Tangent vectors are stored sparsely at the tail: a
//! dual number with an empty tangent is a constant, and shorter tangents are
//! implicitly zero-padded.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(x: f64) -> Self;

    /// Innermost real value.
    fn re(&self) -> f64;

    fn exp(&self) -> Self;

    fn sqrt(&self) -> Self;

    fn powi(&self, n: i32) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn one() -> Self {
        Self::constant(1.0)
    }

    fn scale(&self, k: f64) -> Self {
        self.clone() * Self::constant(k)
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(x: f64) -> Self {
        x
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    #[inline]
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    #[inline]
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    #[inline]
    fn scale(&self, k: f64) -> Self {
        self * k
    }
}

/// First-order dual number `value + Σ tangents[i]·εᵢ` with `εᵢεⱼ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T> {
    pub value: T,
    pub tangents: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn new(value: T, tangents: Vec<T>) -> Self {
        Dual { value, tangents }
    }

    /// Independent variable number `slot` out of `len`.
    pub fn variable(value: T, slot: usize, len: usize) -> Self {
        let mut tangents = vec![T::zero(); len];
        tangents[slot] = T::one();
        Dual { value, tangents }
    }

    /// Tangent slot `i`, zero if not stored.
    pub fn tangent(&self, i: usize) -> T {
        self.tangents.get(i).cloned().unwrap_or_else(T::zero)
    }

    /// Tangent padded to `len` entries.
    pub fn gradient(&self, len: usize) -> Vec<T> {
        (0..len).map(|i| self.tangent(i)).collect()
    }

    fn map_tangents(&self, f: impl Fn(&T) -> T) -> Vec<T> {
        self.tangents.iter().map(f).collect()
    }
}

/// Seed a point as independent dual variables.
pub fn seed<T: Scalar>(x: &[T]) -> Vec<Dual<T>> {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| Dual::variable(v.clone(), i, n))
        .collect()
}

fn zip_tangents<T: Scalar>(a: &[T], b: &[T], f: impl Fn(Option<&T>, Option<&T>) -> T) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n).map(|i| f(a.get(i), b.get(i))).collect()
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let tangents = zip_tangents(&self.tangents, &rhs.tangents, |a, b| match (a, b) {
            (Some(a), Some(b)) => a.clone() + b.clone(),
            (Some(a), None) => a.clone(),
            (None, Some(b)) => b.clone(),
            (None, None) => T::zero(),
        });
        Dual {
            value: self.value + rhs.value,
            tangents,
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let tangents = zip_tangents(&self.tangents, &rhs.tangents, |a, b| match (a, b) {
            (Some(a), Some(b)) => a.clone() - b.clone(),
            (Some(a), None) => a.clone(),
            (None, Some(b)) => -b.clone(),
            (None, None) => T::zero(),
        });
        Dual {
            value: self.value - rhs.value,
            tangents,
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let tangents = zip_tangents(&self.tangents, &rhs.tangents, |a, b| match (a, b) {
            (Some(a), Some(b)) => a.clone() * rhs.value.clone() + self.value.clone() * b.clone(),
            (Some(a), None) => a.clone() * rhs.value.clone(),
            (None, Some(b)) => self.value.clone() * b.clone(),
            (None, None) => T::zero(),
        });
        Dual {
            value: self.value * rhs.value,
            tangents,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = T::one() / rhs.value.clone();
        let value = self.value.clone() * inv.clone();
        // (a/b)' = (a' - (a/b) b') / b
        let tangents = zip_tangents(&self.tangents, &rhs.tangents, |a, b| match (a, b) {
            (Some(a), Some(b)) => (a.clone() - value.clone() * b.clone()) * inv.clone(),
            (Some(a), None) => a.clone() * inv.clone(),
            (None, Some(b)) => -(value.clone() * b.clone()) * inv.clone(),
            (None, None) => T::zero(),
        });
        Dual { value, tangents }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            value: -self.value,
            tangents: self.tangents.into_iter().map(|t| -t).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(x: f64) -> Self {
        Dual {
            value: T::constant(x),
            tangents: Vec::new(),
        }
    }

    fn re(&self) -> f64 {
        self.value.re()
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        Dual {
            tangents: self.map_tangents(|t| t.clone() * e.clone()),
            value: e,
        }
    }

    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        let half_inv = T::one() / (s.clone() + s.clone());
        Dual {
            tangents: self.map_tangents(|t| t.clone() * half_inv.clone()),
            value: s,
        }
    }

    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let lower = self.value.powi(n - 1);
        let factor = lower.clone() * T::constant(n as f64);
        Dual {
            tangents: self.map_tangents(|t| t.clone() * factor.clone()),
            value: lower * self.value.clone(),
        }
    }

    fn scale(&self, k: f64) -> Self {
        Dual {
            value: self.value.scale(k),
            tangents: self.map_tangents(|t| t.scale(k)),
        }
    }
}

/// Gradient and value of `f` at `x` by one forward sweep.
pub fn value_and_gradient<F>(x: &[f64], f: F) -> crate::Result<(f64, Vec<f64>)>
where
    F: FnOnce(&[Dual<f64>]) -> crate::Result<Dual<f64>>,
{
    let d = f(&seed(x))?;
    Ok((d.value, d.gradient(x.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leibniz_rule_exact_on_integers() {
        let x = Dual::variable(2.0, 0, 2);
        let y = Dual::variable(3.0, 1, 2);
        let p = x.clone() * y.clone();
        assert_eq!(p.value, 6.0);
        assert_eq!(p.gradient(2), vec![3.0, 2.0]);
        let q = (x.clone() * x.clone() + y.clone()) * y;
        // d/dx = 2xy = 12, d/dy = x^2 + 2y = 10
        assert_eq!(q.gradient(2), vec![12.0, 10.0]);
        assert_eq!(x.powi(3).gradient(2), vec![12.0, 0.0]);
    }

    #[test]
    fn constants_have_zero_tangent() {
        let c = Dual::<f64>::constant(4.0);
        let x = Dual::variable(1.5, 0, 1);
        assert_eq!((c.clone() * x.clone()).tangent(0), 4.0);
        assert_eq!((c.clone() / x.clone()).tangent(0), -4.0 / 2.25);
        assert_eq!((x - c).tangent(0), 1.0);
    }

    #[test]
    fn nested_duals_give_second_derivatives() {
        // f(x, y) = x^2 y + exp(y), Hessian = [[2y, 2x], [2x, exp(y)]]
        let x0 = [1.5, -0.5];
        let outer = seed(&seed(&x0));
        let f = outer[0].clone() * outer[0].clone() * outer[1].clone() + outer[1].exp();
        let h: Vec<Vec<f64>> = (0..2)
            .map(|i| f.tangent(i).gradient(2))
            .collect();
        assert!((h[0][0] - 2.0 * x0[1]).abs() < 1e-15);
        assert!((h[0][1] - 2.0 * x0[0]).abs() < 1e-15);
        assert!((h[1][0] - 2.0 * x0[0]).abs() < 1e-15);
        assert!((h[1][1] - x0[1].exp()).abs() < 1e-15);
    }

    #[test]
    fn sqrt_and_division_match_closed_forms() {
        let x = Dual::variable(4.0, 0, 1);
        assert_eq!(x.sqrt().tangent(0), 0.25);
        let r = Dual::<f64>::one() / x;
        assert_eq!(r.tangent(0), -1.0 / 16.0);
    }
}
