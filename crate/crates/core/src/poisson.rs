//! Pointwise Poisson calculus: brackets, Hamiltonian vector fields,
//! Schouten brackets, Lie derivatives, wedges and commutators.
//!
//! Fields are evaluation procedures generic over [`Scalar`]; first
//! derivatives come from one dual-number sweep. A bivector field returns
//! only its upper triangle, so antisymmetry holds exactly.
//!
//! Conventions: `{f, g} = ∇f · π ∇g`, `X_H = π ∇H`,
//! `(X ∧ Z)^{ij} = X^i Z^j − X^j Z^i`, `[X, Y]^i = X^l ∂_l Y^i − Y^l ∂_l X^i`,
//! `(L_X π)^{ij} = X^l ∂_l π^{ij} − π^{lj} ∂_l X^i − π^{il} ∂_l X^j`, and the
//! Schouten bracket is the plain cyclic sum
//! `T^{ijk} = Σ_cyc Σ_l (πa^{il} ∂_l πb^{jk} + πb^{il} ∂_l πa^{jk})`.

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr};
use crate::linalg::Mat;
use crate::scalar::{seed, Dual, Scalar};

pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S>;
}

pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>>;
}

pub trait BivectorField: Sync {
    fn dim(&self) -> usize;

    /// Entries `π^{ij}`, `i < j`, row-major.
    fn upper<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>>;

    fn matrix<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        Ok(from_upper(self.dim(), &self.upper(x)?))
    }
}

/// Position of `(i, j)`, `i < j`, in the row-major upper triangle.
pub fn upper_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

pub fn from_upper<S: Scalar>(d: usize, upper: &[S]) -> Mat<S> {
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let v = upper[upper_index(d, i, j)].clone();
            m[(j, i)] = -v.clone();
            m[(i, j)] = v;
        }
    }
    m
}

pub fn to_upper<S: Scalar>(m: &Mat<S>) -> Vec<S> {
    let d = m.rows();
    let mut out = Vec::with_capacity(d * (d.saturating_sub(1)) / 2);
    for i in 0..d {
        for j in i + 1..d {
            out.push(m[(i, j)].clone());
        }
    }
    out
}

fn check_dim(expected: usize, x_len: usize) -> Result<()> {
    if expected != x_len {
        return Err(Error::dim(format!(
            "field of dimension {expected} evaluated at a point of dimension {x_len}"
        )));
    }
    Ok(())
}

pub fn gradient<F: ScalarField>(f: &F, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(f.dim(), x.len())?;
    Ok(f.eval(&seed(x))?.gradient(x.len()))
}

/// Value and Jacobian `J[i][l] = ∂_l X^i`.
pub fn value_and_jacobian<V: VectorField>(v: &V, x: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    check_dim(v.dim(), x.len())?;
    let d = x.len();
    let out = v.eval(&seed(x))?;
    let value = out.iter().map(|o| o.value).collect();
    Ok((value, Mat::from_fn(out.len(), d, |i, l| out[i].tangent(l))))
}

/// The bivector and its derivatives `dπ[l] = ∂_l π`.
pub fn bivector_with_derivatives<B: BivectorField>(
    b: &B,
    x: &[f64],
) -> Result<(Mat<f64>, Vec<Mat<f64>>)> {
    check_dim(b.dim(), x.len())?;
    let d = x.len();
    let m = b.matrix(&seed(x))?;
    let value = m.map(|v: &Dual<f64>| v.value);
    let derivs = (0..d).map(|l| m.map(|v| v.tangent(l))).collect();
    Ok((value, derivs))
}

pub fn bracket<F: ScalarField, G: ScalarField, B: BivectorField>(
    f: &F,
    g: &G,
    pi: &B,
    x: &[f64],
) -> Result<f64> {
    let df = gradient(f, x)?;
    let dg = gradient(g, x)?;
    let p = pi.matrix(x)?;
    Ok(crate::linalg::dot(&df, &p.matvec(&dg)))
}

pub fn hamiltonian_vector_field<B: BivectorField, F: ScalarField>(
    pi: &B,
    h: &F,
    x: &[f64],
) -> Result<Vec<f64>> {
    Ok(pi.matrix(x)?.matvec(&gradient(h, x)?))
}

/// Totally antisymmetric rank-3 array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub d: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d: usize) -> Self {
        Tensor3 {
            d,
            data: vec![0.0; d * d * d],
        }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.d + j) * self.d + k]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let d = self.d;
        self.data[(i * d + j) * d + k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        crate::linalg::max_abs(&self.data)
    }
}

/// Schouten bracket from tensor values and first derivatives.
pub fn schouten_from_parts(
    pa: &Mat<f64>,
    dpa: &[Mat<f64>],
    pb: &Mat<f64>,
    dpb: &[Mat<f64>],
) -> Tensor3 {
    let d = pa.rows();
    let term = |i: usize, j: usize, k: usize| -> f64 {
        (0..d)
            .map(|l| pa[(i, l)] * dpb[l][(j, k)] + pb[(i, l)] * dpa[l][(j, k)])
            .sum()
    };
    let mut t = Tensor3::zeros(d);
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                let v = term(i, j, k) + term(j, k, i) + term(k, i, j);
                t.set(i, j, k, v);
                t.set(j, k, i, v);
                t.set(k, i, j, v);
                t.set(j, i, k, -v);
                t.set(i, k, j, -v);
                t.set(k, j, i, -v);
            }
        }
    }
    t
}

pub fn schouten_at<A: BivectorField, B: BivectorField>(
    pa: &A,
    pb: &B,
    x: &[f64],
) -> Result<Tensor3> {
    let (a, da) = bivector_with_derivatives(pa, x)?;
    let (b, db) = bivector_with_derivatives(pb, x)?;
    Ok(schouten_from_parts(&a, &da, &b, &db))
}

/// `L_X π` from values, Jacobian `jx[i][l] = ∂_l X^i`, and `dπ[l]`.
pub fn lie_derivative_from_parts(
    xv: &[f64],
    jx: &Mat<f64>,
    p: &Mat<f64>,
    dp: &[Mat<f64>],
) -> Mat<f64> {
    let d = p.rows();
    let mut out = Mat::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let mut v = 0.0;
            for l in 0..d {
                v += xv[l] * dp[l][(i, j)] - p[(l, j)] * jx[(i, l)] - p[(i, l)] * jx[(j, l)];
            }
            out[(i, j)] = v;
            out[(j, i)] = -v;
        }
    }
    out
}

pub fn lie_derivative_bivector<V: VectorField, B: BivectorField>(
    x_field: &V,
    pi: &B,
    x: &[f64],
) -> Result<Mat<f64>> {
    let (xv, jx) = value_and_jacobian(x_field, x)?;
    let (p, dp) = bivector_with_derivatives(pi, x)?;
    Ok(lie_derivative_from_parts(&xv, &jx, &p, &dp))
}

/// Pointwise wedge of two vectors.
pub fn wedge_vectors(x: &[f64], z: &[f64]) -> Mat<f64> {
    let d = x.len();
    Mat::from_fn(d, d, |i, j| x[i] * z[j] - x[j] * z[i])
}

/// The bivector field `X ∧ Z`.
pub struct Wedge<'a, X, Z> {
    pub x: &'a X,
    pub z: &'a Z,
}

pub fn wedge<'a, X: VectorField, Z: VectorField>(x: &'a X, z: &'a Z) -> Wedge<'a, X, Z> {
    Wedge { x, z }
}

impl<X: VectorField, Z: VectorField> BivectorField for Wedge<'_, X, Z> {
    fn dim(&self) -> usize {
        self.x.dim()
    }

    fn upper<S: Scalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let a = self.x.eval(p)?;
        let b = self.z.eval(p)?;
        let d = a.len();
        let mut out = Vec::with_capacity(d * d.saturating_sub(1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                out.push(a[i].clone() * b[j].clone() - a[j].clone() * b[i].clone());
            }
        }
        Ok(out)
    }
}

pub fn commutator<X: VectorField, Y: VectorField>(xf: &X, yf: &Y, x: &[f64]) -> Result<Vec<f64>> {
    let (xv, jx) = value_and_jacobian(xf, x)?;
    let (yv, jy) = value_and_jacobian(yf, x)?;
    Ok(commutator_from_parts(&xv, &jx, &yv, &jy))
}

pub fn commutator_from_parts(xv: &[f64], jx: &Mat<f64>, yv: &[f64], jy: &Mat<f64>) -> Vec<f64> {
    let d = xv.len();
    (0..d)
        .map(|i| (0..d).map(|l| xv[l] * jy[(i, l)] - yv[l] * jx[(i, l)]).sum())
        .collect()
}

/// `Π₀ = [[0, I], [−I, 0]]` on `2n` coordinates, padded by `extra` zero
/// rows and columns.
#[derive(Clone, Copy, Debug)]
pub struct Canonical {
    pub n: usize,
    pub extra: usize,
}

impl BivectorField for Canonical {
    fn dim(&self) -> usize {
        2 * self.n + self.extra
    }

    fn upper<S: Scalar>(&self, _x: &[S]) -> Result<Vec<S>> {
        let d = self.dim();
        let mut out = vec![S::zero(); d * d.saturating_sub(1) / 2];
        for i in 0..self.n {
            out[upper_index(d, i, self.n + i)] = S::one();
        }
        Ok(out)
    }
}

/// `Π₁ = [[0, Λ], [−Λ, 0]]` in separation coordinates, `Λ = diag(λ)`,
/// padded by `extra` zero rows and columns.
#[derive(Clone, Copy, Debug)]
pub struct DiagonalLambda {
    pub n: usize,
    pub extra: usize,
}

impl BivectorField for DiagonalLambda {
    fn dim(&self) -> usize {
        2 * self.n + self.extra
    }

    fn upper<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim();
        let mut out = vec![S::zero(); d * d.saturating_sub(1) / 2];
        for i in 0..self.n {
            out[upper_index(d, i, self.n + i)] = x[i].clone();
        }
        Ok(out)
    }
}

/// A bivector whose upper triangle is given by expressions.
#[derive(Clone, Debug)]
pub struct ExprBivector {
    d: usize,
    entries: Vec<Compiled>,
}

impl ExprBivector {
    /// `upper` lists `π^{ij}`, `i < j`, row-major, over `vars`.
    pub fn new(upper: &[Expr], vars: &[&str]) -> Result<Self> {
        let d = vars.len();
        if upper.len() != d * d.saturating_sub(1) / 2 {
            return Err(Error::dim(format!(
                "{} upper-triangle entries for dimension {d}",
                upper.len()
            )));
        }
        Ok(ExprBivector {
            d,
            entries: upper
                .iter()
                .map(|e| e.compile(vars))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

impl BivectorField for ExprBivector {
    fn dim(&self) -> usize {
        self.d
    }

    fn upper<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        check_dim(self.d, x.len())?;
        self.entries.iter().map(|c| c.eval(x)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ExprScalar {
    d: usize,
    e: Compiled,
}

impl ExprScalar {
    pub fn new(e: &Expr, vars: &[&str]) -> Result<Self> {
        Ok(ExprScalar {
            d: vars.len(),
            e: e.compile(vars)?,
        })
    }
}

impl ScalarField for ExprScalar {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        self.e.eval(x)
    }
}

#[derive(Clone, Debug)]
pub struct ExprVector {
    d: usize,
    es: Vec<Compiled>,
}

impl ExprVector {
    pub fn new(es: &[Expr], vars: &[&str]) -> Result<Self> {
        Ok(ExprVector {
            d: vars.len(),
            es: es.iter().map(|e| e.compile(vars)).collect::<Result<Vec<_>>>()?,
        })
    }
}

impl VectorField for ExprVector {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        self.es.iter().map(|c| c.eval(x)).collect()
    }
}

/// The constant unit vector field `∂/∂x_slot`.
#[derive(Clone, Copy, Debug)]
pub struct Coordinate {
    pub d: usize,
    pub slot: usize,
}

impl VectorField for Coordinate {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval<S: Scalar>(&self, _x: &[S]) -> Result<Vec<S>> {
        Ok((0..self.d)
            .map(|i| if i == self.slot { S::one() } else { S::zero() })
            .collect())
    }
}

/// The coordinate function `x ↦ x_slot`.
#[derive(Clone, Copy, Debug)]
pub struct CoordinateFunction {
    pub d: usize,
    pub slot: usize,
}

impl ScalarField for CoordinateFunction {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        Ok(x[self.slot].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    const QP: [&str; 2] = ["q", "p"];

    #[test]
    fn canonical_brackets() {
        let pi0 = Canonical { n: 2, extra: 0 };
        let x = [0.3, -0.2, 1.1, 0.5];
        for i in 0..2 {
            for j in 0..2 {
                let q = CoordinateFunction { d: 4, slot: i };
                let p = CoordinateFunction { d: 4, slot: 2 + j };
                let b = bracket(&q, &p, &pi0, &x).unwrap();
                assert_eq!(b, if i == j { 1.0 } else { 0.0 });
            }
        }
        let pi1 = DiagonalLambda { n: 2, extra: 0 };
        let l = CoordinateFunction { d: 4, slot: 0 };
        let m = CoordinateFunction { d: 4, slot: 2 };
        assert_eq!(bracket(&l, &m, &pi1, &x).unwrap(), 0.3);
        assert_eq!(bracket(&l, &l, &pi1, &x).unwrap(), 0.0);
    }

    #[test]
    fn harmonic_vector_field() {
        let h = ExprScalar::new(&parse("p^2/2 + q^2/2", &QP).unwrap(), &QP).unwrap();
        let x = hamiltonian_vector_field(&Canonical { n: 1, extra: 0 }, &h, &[0.4, -0.7]).unwrap();
        assert_eq!(x, vec![-0.7, -0.4]);
        let mu = CoordinateFunction { d: 4, slot: 2 };
        let x = hamiltonian_vector_field(&DiagonalLambda { n: 2, extra: 0 }, &mu, &[1.5, 0.2, 0.3, 0.4])
            .unwrap();
        assert_eq!(x, vec![1.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn schouten_of_base_tensors_vanishes() {
        let x = [0.3, -1.2, 0.9, 0.5, -0.1, 1.7];
        let p0 = Canonical { n: 3, extra: 0 };
        let p1 = DiagonalLambda { n: 3, extra: 0 };
        assert_eq!(schouten_at(&p0, &p0, &x).unwrap().max_abs(), 0.0);
        assert_eq!(schouten_at(&p1, &p1, &x).unwrap().max_abs(), 0.0);
        assert_eq!(schouten_at(&p0, &p1, &x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn schouten_detects_non_poisson() {
        // π^{12} = z, π^{13} = 0, π^{23} = y: [π,π]^{123} = 2z (two-argument sum)
        let vars = ["x", "y", "z"];
        let up = vec![
            parse("z", &vars).unwrap(),
            Expr::zero(),
            parse("y", &vars).unwrap(),
        ];
        let b = ExprBivector::new(&up, &vars).unwrap();
        let t = schouten_at(&b, &b, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.get(0, 1, 2), 6.0);
        assert_eq!(t.get(1, 0, 2), -6.0);
        // su(2)-type bracket π^{12} = z, π^{13} = −y, π^{23} = x is Poisson
        let up = vec![
            parse("z", &vars).unwrap(),
            parse("-y", &vars).unwrap(),
            parse("x", &vars).unwrap(),
        ];
        let b = ExprBivector::new(&up, &vars).unwrap();
        assert!(schouten_at(&b, &b, &[1.0, 2.0, 3.0]).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn wedge_and_commutator_basics() {
        let w = wedge_vectors(&[1.0, 0.0], &[0.0, 1.0]);
        assert_eq!(w.to_rows(), vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert_eq!(wedge_vectors(&[0.3, 0.7], &[0.3, 0.7]).max_abs(), 0.0);
        let dq = ExprVector::new(&[Expr::one()], &["q"]).unwrap();
        let qdq = ExprVector::new(&[Expr::var("q")], &["q"]).unwrap();
        assert_eq!(commutator(&dq, &qdq, &[0.37]).unwrap(), vec![1.0]);
        assert_eq!(commutator(&qdq, &qdq, &[0.37]).unwrap(), vec![0.0]);
    }

    #[test]
    fn lie_derivative_constant_cases() {
        let z = Coordinate { d: 4, slot: 1 };
        let p0 = Canonical { n: 2, extra: 0 };
        let l = lie_derivative_bivector(&z, &p0, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn upper_index_enumerates_triangle() {
        let d = 5;
        let mut k = 0;
        for i in 0..d {
            for j in i + 1..d {
                assert_eq!(upper_index(d, i, j), k);
                k += 1;
            }
        }
    }
}
