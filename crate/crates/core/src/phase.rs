//! Phase-space points and coordinate charts.
//!
//! A chart maps separation coordinates `(l1..ln, m1..mn)` to target
//! coordinates `(q1..qn, p1..pn)`. Point transforms store only `q(λ)` and
//! lift momenta canonically; full maps store all `2n` expressions. Trailing
//! Casimir coordinates of an extended point pass through unchanged.

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr};
use crate::linalg::Mat;
use crate::scalar::{seed, Scalar};

pub const SEPARATION_CHART: &str = "separation";

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub coords: Vec<f64>,
    pub chart: String,
    pub n: usize,
    pub m: usize,
}

impl PhasePoint {
    pub fn new(coords: Vec<f64>, chart: &str, n: usize, m: usize) -> Result<Self> {
        if coords.len() != 2 * n + m {
            return Err(Error::dim(format!(
                "phase point with n = {n}, m = {m} needs {} coordinates, got {}",
                2 * n + m,
                coords.len()
            )));
        }
        Ok(PhasePoint {
            coords,
            chart: chart.to_string(),
            n,
            m,
        })
    }

    pub fn separation(coords: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        Self::new(coords, SEPARATION_CHART, n, m)
    }

    pub fn positions(&self) -> &[f64] {
        &self.coords[..self.n]
    }

    pub fn momenta(&self) -> &[f64] {
        &self.coords[self.n..2 * self.n]
    }

    pub fn casimirs(&self) -> &[f64] {
        &self.coords[2 * self.n..]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    PointTransform,
    FullMap,
}

pub fn source_names(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("l{i}"))
        .chain((1..=n).map(|i| format!("m{i}")))
        .collect()
}

pub fn target_names(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("q{i}"))
        .chain((1..=n).map(|i| format!("p{i}")))
        .collect()
}

fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[derive(Clone, Debug)]
pub struct CoordinateChart {
    name: String,
    n: usize,
    kind: ChartKind,
    source: Vec<String>,
    target: Vec<String>,
    exprs: Vec<Expr>,
    compiled: Vec<Compiled>,
    // ∂q_i/∂λ_j for point transforms
    position_jacobian: Vec<Vec<Compiled>>,
    inverse: Option<Box<CoordinateChart>>,
}

impl CoordinateChart {
    /// Point transform `q = q(λ)` over `l1..ln`, lifted by `μ = (∂q/∂λ)ᵀ p`.
    pub fn point_transform(name: &str, positions: Vec<Expr>) -> Result<Self> {
        let n = positions.len();
        let source = source_names(n);
        let vars = as_strs(&source);
        let lambda_vars = &vars[..n];
        for e in &positions {
            if let Some(v) = e.variables().into_iter().find(|v| !lambda_vars.contains(&v.as_str())) {
                return Err(Error::Validation(format!(
                    "chart `{name}`: point transform position depends on `{v}`"
                )));
            }
        }
        let compiled = positions
            .iter()
            .map(|e| e.compile(&vars))
            .collect::<Result<Vec<_>>>()?;
        let position_jacobian = positions
            .iter()
            .map(|e| {
                lambda_vars
                    .iter()
                    .map(|v| e.differentiate(v).compile(&vars))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoordinateChart {
            name: name.to_string(),
            n,
            kind: ChartKind::PointTransform,
            target: target_names(n),
            source,
            exprs: positions,
            compiled,
            position_jacobian,
            inverse: None,
        })
    }

    /// Explicit map: `2n` expressions over `l1..ln, m1..mn`.
    pub fn full_map(name: &str, map: Vec<Expr>) -> Result<Self> {
        if !map.len().is_multiple_of(2) || map.is_empty() {
            return Err(Error::dim(format!(
                "chart `{name}`: full map needs 2n expressions, got {}",
                map.len()
            )));
        }
        let n = map.len() / 2;
        let source = source_names(n);
        let vars = as_strs(&source);
        let compiled = map
            .iter()
            .map(|e| e.compile(&vars))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoordinateChart {
            name: name.to_string(),
            n,
            kind: ChartKind::FullMap,
            target: target_names(n),
            source,
            exprs: map,
            compiled,
            position_jacobian: Vec::new(),
            inverse: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        let positions = (1..=n).map(|i| Expr::var(&format!("l{i}"))).collect();
        let mut c = Self::point_transform("identity", positions).expect("identity chart");
        c.inverse = Some(Box::new(c.clone()));
        c
    }

    /// Register an inverse chart (target → source). Its source/target roles
    /// are swapped relative to `self`; the expressions still use `l`, `m`
    /// names for its inputs.
    pub fn with_inverse(mut self, inverse: CoordinateChart) -> Result<Self> {
        if inverse.n != self.n {
            return Err(Error::dim("inverse chart dimension differs"));
        }
        self.inverse = Some(Box::new(inverse));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ChartKind {
        self.kind
    }

    pub fn source(&self) -> &[String] {
        &self.source
    }

    pub fn target(&self) -> &[String] {
        &self.target
    }

    pub fn expressions(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn inverse(&self) -> Option<&CoordinateChart> {
        self.inverse.as_deref()
    }

    /// Realize the map on a (possibly extended) coordinate vector.
    pub fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.n;
        if x.len() < 2 * n {
            return Err(Error::dim(format!(
                "chart `{}` over n = {n} applied to {} coordinates",
                self.name,
                x.len()
            )));
        }
        let base = &x[..2 * n];
        let mut out = Vec::with_capacity(x.len());
        match self.kind {
            ChartKind::FullMap => {
                for c in &self.compiled {
                    out.push(c.eval(base)?);
                }
            }
            ChartKind::PointTransform => {
                for c in &self.compiled {
                    out.push(c.eval(base)?);
                }
                let mut jt = Mat::<S>::zeros(n, n);
                for (i, row) in self.position_jacobian.iter().enumerate() {
                    for (j, c) in row.iter().enumerate() {
                        jt[(j, i)] = c.eval(base)?;
                    }
                }
                let p = jt.solve_vec(&base[n..]).map_err(|_| Error::SingularJacobian {
                    chart: self.name.clone(),
                })?;
                out.extend(p);
            }
        }
        out.extend(x[2 * n..].iter().cloned());
        Ok(out)
    }

    /// Map a target point back to separation coordinates, using the
    /// registered inverse or, failing that, Newton iteration from `guess`.
    pub fn preimage(&self, y: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        if let Some(inv) = &self.inverse {
            return inv.apply(y);
        }
        let guess = guess.ok_or_else(|| {
            Error::Validation(format!(
                "chart `{}` has no registered inverse; a starting point is required",
                self.name
            ))
        })?;
        let d = 2 * self.n;
        let mut x = guess[..d].to_vec();
        let target = &y[..d];
        let scale = 1.0 + crate::linalg::max_abs(target);
        for _ in 0..60 {
            let jac = self.jacobian(&x)?;
            let fx = self.apply(&x)?;
            let r: Vec<f64> = fx.iter().zip(target).map(|(a, b)| a - b).collect();
            if crate::linalg::max_abs(&r) <= 1e-14 * scale {
                let mut out = x;
                out.extend_from_slice(&y[d..]);
                return Ok(out);
            }
            let step = jac.solve_vec(&r).map_err(|_| Error::SingularJacobian {
                chart: self.name.clone(),
            })?;
            for (xi, si) in x.iter_mut().zip(&step) {
                *xi -= si;
            }
        }
        let fx = self.apply(&x)?;
        let r: f64 = fx
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if r <= 1e-9 * scale {
            let mut out = x;
            out.extend_from_slice(&y[d..]);
            Ok(out)
        } else {
            Err(Error::SingularJacobian {
                chart: format!("{} (Newton preimage stalled at residual {r:e})", self.name),
            })
        }
    }

    /// Jacobian of the realized map over the first `2n` coordinates.
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat<f64>> {
        let d = 2 * self.n;
        let y = self.apply(&seed(&x[..d]))?;
        Ok(Mat::from_fn(d, d, |i, j| y[i].tangent(j)))
    }
}

pub fn apply_chart(chart: &CoordinateChart, x: &PhasePoint) -> Result<PhasePoint> {
    if x.n != chart.n {
        return Err(Error::dim(format!(
            "chart `{}` has n = {}, point has n = {}",
            chart.name, chart.n, x.n
        )));
    }
    PhasePoint::new(chart.apply(&x.coords)?, &chart.name, x.n, x.m)
}

/// Full Jacobian of the realized map, identity on Casimir coordinates.
pub fn chart_jacobian(chart: &CoordinateChart, x: &PhasePoint) -> Result<Mat<f64>> {
    let d = x.coords.len();
    let y = chart.apply(&seed(&x.coords))?;
    Ok(Mat::from_fn(d, d, |i, j| y[i].tangent(j)))
}

/// Canonical symplectic matrix `Ω = [[0, I], [−I, 0]]` of size `2n`.
pub fn omega(n: usize) -> Mat<f64> {
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        if j == i + n {
            1.0
        } else if i == j + n {
            -1.0
        } else {
            0.0
        }
    })
}

/// `max |J Ω Jᵀ − Ω|` over the `2n` phase block.
pub fn canonicity_residual(chart: &CoordinateChart, x: &PhasePoint) -> Result<f64> {
    oriented_canonicity_residual(chart, x, 1.0)
}

/// `max |J Ω Jᵀ − s Ω|`; `s = −1` tests for an anti-symplectic map.
pub fn oriented_canonicity_residual(
    chart: &CoordinateChart,
    x: &PhasePoint,
    orientation: f64,
) -> Result<f64> {
    let n = chart.n;
    let j = chart.jacobian(&x.coords)?;
    let om = omega(n);
    let jojt = j.matmul(&om).matmul(&j.transpose());
    Ok(jojt.sub(&om.map(|v| v * orientation)).max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn viete3() -> CoordinateChart {
        let v = ["l1", "l2", "l3"];
        let s1 = parse("l1 + l2 + l3", &v).unwrap();
        let s2 = parse("l1*l2 + l1*l3 + l2*l3", &v).unwrap();
        let s3 = parse("l1*l2*l3", &v).unwrap();
        CoordinateChart::point_transform("viete", vec![s1, s2, s3]).unwrap()
    }

    #[test]
    fn identity_chart_is_identity() {
        let c = CoordinateChart::identity(2);
        let x = PhasePoint::separation(vec![0.3, -1.0, 0.7, 1.1], 2, 0).unwrap();
        assert_eq!(apply_chart(&c, &x).unwrap().coords, x.coords);
        let j = chart_jacobian(&c, &x).unwrap();
        assert_eq!(j, Mat::identity(4));
    }

    #[test]
    fn scaling_chart_jacobian_and_canonicity() {
        let lift = CoordinateChart::point_transform("scale", vec![parse("2*l1", &["l1"]).unwrap()])
            .unwrap();
        let x = PhasePoint::separation(vec![0.4, 1.0], 1, 0).unwrap();
        let j = chart_jacobian(&lift, &x).unwrap();
        assert_eq!(j.to_rows(), vec![vec![2.0, 0.0], vec![0.0, 0.5]]);
        assert!(canonicity_residual(&lift, &x).unwrap() < 1e-15);
        let naive = CoordinateChart::full_map(
            "naive",
            vec![parse("2*l1", &["l1"]).unwrap(), parse("m1", &["m1"]).unwrap()],
        )
        .unwrap();
        assert_eq!(canonicity_residual(&naive, &x).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_roots_are_singular() {
        let c = viete3();
        let x = PhasePoint::separation(vec![1.0, 1.0, 3.0, 0.1, 0.2, 0.3], 3, 0).unwrap();
        assert!(matches!(
            apply_chart(&c, &x),
            Err(Error::SingularJacobian { .. })
        ));
    }

    #[test]
    fn newton_preimage_recovers_source() {
        let c = viete3();
        let x = [0.5, -1.2, 1.7, 0.3, -0.4, 0.9];
        let y = c.apply(&x).unwrap();
        let guess = [0.45, -1.1, 1.8, 0.0, 0.0, 0.0];
        let back = c.preimage(&y, Some(&guess)).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
