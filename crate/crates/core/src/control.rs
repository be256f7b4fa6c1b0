//! The control matrix `F = S⁻¹ΛS`, by elimination and by Cramer's rule.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{Mat, SINGULAR_RTOL};
use crate::phase::PhasePoint;
use crate::stackel::{Partition, SeparationSystem};

#[derive(Clone, Debug, PartialEq)]
pub struct ControlMatrix {
    pub values: Mat<f64>,
    partition: Partition,
}

impl ControlMatrix {
    pub fn new(values: Mat<f64>, partition: Partition) -> Self {
        ControlMatrix { values, partition }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// `F_{i,j}^{k,l}`: row `(k, i)`, column `(l, j)`, all 1-based.
    pub fn block(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.values[(self.partition.global(k, i), self.partition.global(l, j))]
    }

    /// `Fᵢ^{k,l} = F_{i,1}^{k,l}`.
    pub fn first(&self, k: usize, l: usize, i: usize) -> f64 {
        self.block(k, l, i, 1)
    }

    /// Maximum deviation from the block pattern: ones on each within-block
    /// superdiagonal, zeros everywhere outside the first column of a block.
    pub fn sparsity_residual(&self) -> f64 {
        let p = &self.partition;
        let mut worst: f64 = 0.0;
        for row in p.indices() {
            for col in p.indices() {
                if col.j == 1 {
                    continue;
                }
                let expected = if row.k == col.k && col.j == row.j + 1 {
                    1.0
                } else {
                    0.0
                };
                worst = worst.max((self.values[(row.global, col.global)] - expected).abs());
            }
        }
        worst
    }

    /// Character map of the block pattern: `*` first-column entry,
    /// `1` superdiagonal one, `.` structural zero.
    pub fn pattern(&self) -> Vec<String> {
        let p = &self.partition;
        p.indices()
            .map(|row| {
                p.indices()
                    .map(|col| {
                        if col.j == 1 {
                            '*'
                        } else if row.k == col.k && col.j == row.j + 1 {
                            '1'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `max_i |det(F − λᵢ I)|`.
    pub fn spectrum_residual(&self, lambdas: &[f64]) -> f64 {
        let n = self.values.rows();
        lambdas
            .iter()
            .map(|&l| {
                Mat::from_fn(n, n, |i, j| {
                    self.values[(i, j)] - if i == j { l } else { 0.0 }
                })
                .det()
                .abs()
            })
            .fold(0.0, f64::max)
    }
}

fn coords<'a>(sys: &SeparationSystem, pt: &'a PhasePoint) -> Result<&'a [f64]> {
    if pt.n != sys.n() {
        return Err(Error::dim("point and system dimensions differ"));
    }
    Ok(&pt.coords[..2 * pt.n])
}

/// `F = S⁻¹ Λ S` by elimination.
pub fn control_matrix_at(sys: &SeparationSystem, pt: &PhasePoint) -> Result<ControlMatrix> {
    let (_, f) = sys.hamiltonians_and_control(coords(sys, pt)?)?;
    Ok(ControlMatrix::new(f, sys.partition().clone()))
}

fn checked_det(s: &Mat<f64>) -> Result<f64> {
    let scale: f64 = (0..s.rows())
        .map(|i| s.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let det = s.det();
    if det.abs() <= SINGULAR_RTOL * scale.powi(s.rows() as i32) {
        return Err(Error::singular(format!("det S = {det:e}")));
    }
    Ok(det)
}

/// `F_rp = det S^(rp) / det S`, where `S^(rp)` is `S` with column `r`
/// replaced by `(λᵢ S_i^p)ᵢ`.
pub fn control_matrix_cramer_at(sys: &SeparationSystem, pt: &PhasePoint) -> Result<ControlMatrix> {
    let x = coords(sys, pt)?;
    let n = sys.n();
    let s = sys.stackel_matrix(x)?;
    let det = checked_det(&s)?;
    let f = Mat::from_fn(n, n, |r, p| {
        let mut sr = s.clone();
        for i in 0..n {
            sr[(i, r)] = x[i] * s[(i, p)];
        }
        sr.det() / det
    });
    Ok(ControlMatrix::new(f, sys.partition().clone()))
}

/// `Fᵢ^{k,l} = det Sᵢ^(k,l) / det S`, with column `(k, i)` replaced by
/// `(φᵢˡ λᵢ^{n_l})ᵢ`. Keys are `(k, l, i)`, 1-based.
pub fn first_column_blocks_at(
    sys: &SeparationSystem,
    pt: &PhasePoint,
) -> Result<BTreeMap<(usize, usize, usize), f64>> {
    let x = coords(sys, pt)?;
    let n = sys.n();
    let p = sys.partition();
    let s = sys.stackel_matrix(x)?;
    let det = checked_det(&s)?;
    let mut out = BTreeMap::new();
    for l in 1..=sys.m() {
        let nl = p.size(l) as i32;
        let column = (0..n)
            .map(|i| Ok(sys.phi_at(i, l, &x[i], &x[n + i])? * x[i].powi(nl)))
            .collect::<Result<Vec<f64>>>()?;
        for idx in p.indices() {
            let mut sk = s.clone();
            for i in 0..n {
                sk[(i, idx.global)] = column[i];
            }
            out.insert((idx.k, l, idx.j), sk.det() / det);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};

    fn sys2() -> SeparationSystem {
        SeparationSystem::curve(
            "b2",
            vec![2],
            vec![Expr::one()],
            parse("m^2/2", &["l", "m"]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn two_dof_both_formulas() {
        let pt = PhasePoint::separation(vec![2.0, 1.0, 2.0, 0.0], 2, 0).unwrap();
        let f = control_matrix_at(&sys2(), &pt).unwrap();
        let expected = [[3.0, 1.0], [-2.0, 0.0]];
        let c = control_matrix_cramer_at(&sys2(), &pt).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((f.values[(i, j)] - expected[i][j]).abs() < 1e-14);
                assert!((c.values[(i, j)] - expected[i][j]).abs() < 1e-14);
            }
        }
        assert!(f.sparsity_residual() < 1e-14);
        assert!(f.spectrum_residual(&[2.0, 1.0]) < 1e-13);
        let first = first_column_blocks_at(&sys2(), &pt).unwrap();
        assert!((first[&(1, 1, 1)] - 3.0).abs() < 1e-14);
        assert!((first[&(1, 1, 2)] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn one_dof_is_lambda() {
        let sys = SeparationSystem::curve(
            "b1",
            vec![1],
            vec![Expr::one()],
            parse("m^2/2", &["l", "m"]).unwrap(),
        )
        .unwrap();
        let pt = PhasePoint::separation(vec![0.8, -0.2], 1, 0).unwrap();
        assert_eq!(control_matrix_at(&sys, &pt).unwrap().values[(0, 0)], 0.8);
        assert_eq!(control_matrix_cramer_at(&sys, &pt).unwrap().values[(0, 0)], 0.8);
    }

    #[test]
    fn pattern_marks_blocks() {
        let f = ControlMatrix::new(Mat::zeros(3, 3), Partition::new(vec![2, 1]).unwrap());
        assert_eq!(f.pattern(), vec!["*1*", "*.*", "*.*"]);
    }
}
