//! Small dense matrices and pivoted elimination over any [`Scalar`].
//!
//! Pivots are chosen by the real part, so elimination over dual numbers
//! follows exactly the same path as the plain `f64` solve and propagates
//! derivatives through it.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative pivot threshold below which a matrix is declared singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data: Vec<T> = rows.into_iter().flatten().collect();
        assert_eq!(data.len(), r * c, "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows);
        Mat::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).fold(T::zero(), |acc, k| {
                acc + self[(i, k)].clone() * rhs[(k, j)].clone()
            })
        })
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// `vᵀ M`.
    pub fn vecmat(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len());
        (0..self.cols)
            .map(|j| {
                (0..self.rows).fold(T::zero(), |acc, i| {
                    acc + v[i].clone() * self[(i, j)].clone()
                })
            })
            .collect()
    }

    pub fn re(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Scalar::re).collect(),
        }
    }

    fn row_scale(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.re().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Solves `self · X = rhs` by partially pivoted Gaussian elimination.
    pub fn solve(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        if self.rows != self.cols || rhs.rows != self.rows {
            return Err(Error::dim(format!(
                "solve: {}x{} system with {} right-hand rows",
                self.rows, self.cols, rhs.rows
            )));
        }
        let n = self.rows;
        let scale = self.row_scale();
        let mut a = self.clone();
        let mut b = rhs.clone();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].re().abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > SINGULAR_RTOL * scale) {
                return Err(Error::singular(format!(
                    "pivot {pmax:e} at column {k} relative to scale {scale:e}"
                )));
            }
            if p != k {
                a.swap_rows(p, k);
                b.swap_rows(p, k);
            }
            let inv = T::one() / a[(k, k)].clone();
            for i in k + 1..n {
                let factor = a[(i, k)].clone() * inv.clone();
                for j in k..n {
                    let t = factor.clone() * a[(k, j)].clone();
                    a[(i, j)] = a[(i, j)].clone() - t;
                }
                for j in 0..b.cols {
                    let t = factor.clone() * b[(k, j)].clone();
                    b[(i, j)] = b[(i, j)].clone() - t;
                }
            }
        }
        for j in 0..b.cols {
            for i in (0..n).rev() {
                let mut acc = b[(i, j)].clone();
                for k in i + 1..n {
                    acc = acc - a[(i, k)].clone() * b[(k, j)].clone();
                }
                b[(i, j)] = acc / a[(i, i)].clone();
            }
        }
        Ok(b)
    }

    pub fn solve_vec(&self, rhs: &[T]) -> Result<Vec<T>> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i].clone());
        Ok(self.solve(&b)?.column(0))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Mat<f64> {
    /// Determinant by partially pivoted elimination.
    pub fn det(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
                .unwrap_or(k);
            if a[(p, k)] == 0.0 {
                return 0.0;
            }
            if p != k {
                a.swap_rows(p, k);
                det = -det;
            }
            det *= a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    a[(i, j)] -= f * a[(k, j)];
                }
            }
        }
        det
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, rhs: &Mat<f64>) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}
