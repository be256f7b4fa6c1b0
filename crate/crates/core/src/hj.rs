//! Separated Hamilton–Jacobi quadratures for relations quadratic in the
//! momenta, `Σ_k φᵏ(λᵢ) H⁽ᵏ⁾(λᵢ) = ½ fᵢ(λᵢ) μᵢ² + γᵢ(λᵢ)`.
//!
//! With energies `a = H(x)`, row `i` gives `μᵢ = sᵢ √Rᵢ(λᵢ, a)` where
//! `Rᵢ = 2(⟨Sᵢ(λᵢ), a⟩ − γᵢ(λᵢ)) / fᵢ(λᵢ)`, and
//! `bⱼ = Σᵢ ∫_{λᵢ⁰}^{λᵢ} S_{ij}(s) / (fᵢ(s) μᵢ(s, a)) ds`.
//! Along the flow of `H_k` these satisfy `ḃⱼ = δⱼₖ`.

use crate::error::{Error, Result};
use crate::expr::{equal_on_samples, Compiled, Expr};
use crate::flows::integrate;
use crate::phase::PhasePoint;
use crate::poisson::Canonical;
use crate::quad;
use crate::stackel::{HamiltonianField, SeparationData, SeparationSystem};

#[derive(Clone, Debug)]
pub struct QuadraticClassData {
    system: SeparationSystem,
    pub f: Vec<Expr>,
    pub gamma: Vec<Expr>,
    f_c: Vec<Compiled>,
    gamma_c: Vec<Compiled>,
}

fn not_quadratic(why: impl Into<String>) -> Error {
    Error::NotQuadratic(why.into())
}

impl QuadraticClassData {
    /// Splits each `ψᵢ` into `½fᵢμ² + γᵢ` with `f = ∂²ψ/∂m²`, `γ = ψ|_{m=0}`.
    /// Fails unless the split is exact, `f` and every `φ` are free of `m`.
    pub fn from_system(sys: &SeparationSystem) -> Result<Self> {
        let (phis, psis): (Vec<&Vec<Expr>>, Vec<&Expr>) = match sys.data() {
            SeparationData::Curve { phi, psi } => (vec![phi; sys.n()], vec![psi; sys.n()]),
            SeparationData::PerRow { phi, psi } => (phi.iter().collect(), psi.iter().collect()),
        };
        if phis.iter().any(|row| row.iter().any(|p| p.variables().contains("m"))) {
            return Err(not_quadratic("a block function depends on the momentum"));
        }
        let mut f = Vec::new();
        let mut gamma = Vec::new();
        for (i, psi) in psis.iter().enumerate() {
            let fi = psi.differentiate("m").differentiate("m");
            if fi.variables().contains("m") {
                return Err(not_quadratic(format!("ψ of row {} is not quadratic in m", i + 1)));
            }
            let gi = psi.substitute(&[("m", &Expr::zero())]);
            let rebuilt = Expr::add(
                Expr::mul(Expr::mul(Expr::ratio(1, 2), fi.clone()), Expr::pow(Expr::var("m"), 2)),
                gi.clone(),
            );
            if !equal_on_samples(psi, &rebuilt, &["l", "m"], 20, 1e-12, 0)? {
                return Err(not_quadratic(format!(
                    "ψ of row {} has a term linear in m",
                    i + 1
                )));
            }
            f.push(fi);
            gamma.push(gi);
        }
        let f_c = f.iter().map(|e| e.compile(&["l"])).collect::<Result<_>>()?;
        let gamma_c = gamma.iter().map(|e| e.compile(&["l"])).collect::<Result<_>>()?;
        Ok(QuadraticClassData {
            system: sys.clone(),
            f,
            gamma,
            f_c,
            gamma_c,
        })
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn system(&self) -> &SeparationSystem {
        &self.system
    }

    /// Row `i` of `S` at `λ` (the basis functions multiplying `a`).
    pub fn row_basis(&self, i: usize, lambda: f64) -> Result<Vec<f64>> {
        let p = self.system.partition();
        p.indices()
            .map(|idx| {
                let phi = self.system.phi_at(i, idx.k, &lambda, &0.0)?;
                Ok(phi * lambda.powi((p.size(idx.k) - idx.j) as i32))
            })
            .collect()
    }

    fn f_at(&self, i: usize, lambda: f64) -> Result<f64> {
        let v: f64 = self.f_c[i].eval(&[lambda])?;
        if v == 0.0 || !v.is_finite() {
            return Err(Error::Domain {
                subtree: self.f[i].to_string(),
                reason: format!("f vanishes at λ = {lambda}"),
            });
        }
        Ok(v)
    }

    pub fn radicand(&self, i: usize, lambda: f64, a: &[f64]) -> Result<f64> {
        let row = self.row_basis(i, lambda)?;
        let lin: f64 = row.iter().zip(a).map(|(r, a)| r * a).sum();
        let g: f64 = self.gamma_c[i].eval(&[lambda])?;
        Ok(2.0 * (lin - g) / self.f_at(i, lambda)?)
    }
}

/// Reference point, branch signs and quadrature tolerance for `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionData {
    pub reference: Vec<f64>,
    pub signs: Vec<f64>,
    pub tol: f64,
}

/// `μ = s √R` on row `i`; a non-positive radicand is a turning point.
pub fn momentum_branch(
    data: &QuadraticClassData,
    i: usize,
    lambda: f64,
    a: &[f64],
    sign: f64,
) -> Result<f64> {
    let r = data.radicand(i, lambda, a)?;
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::TurningPoint {
            row: i + 1,
            lambda,
            radicand: r,
        });
    }
    Ok(sign.signum() * r.sqrt())
}

/// `bⱼ = ∂W/∂aⱼ` at separation positions `lambda`.
pub fn action_derivatives(
    data: &QuadraticClassData,
    lambda: &[f64],
    a: &[f64],
    action: &ActionData,
) -> Result<Vec<f64>> {
    let n = data.n();
    if lambda.len() != n || a.len() != n || action.reference.len() != n || action.signs.len() != n {
        return Err(Error::dim("action data length differs from n"));
    }
    let mut b = vec![0.0; n];
    let row_tol = action.tol / n as f64;
    for i in 0..n {
        for (j, bj) in b.iter_mut().enumerate() {
            let q = quad::integrate(
                |s| {
                    let mu = momentum_branch(data, i, s, a, action.signs[i])?;
                    Ok(data.row_basis(i, s)?[j] / (data.f_at(i, s)? * mu))
                },
                action.reference[i],
                lambda[i],
                row_tol,
            )?;
            *bj += q.value;
        }
    }
    Ok(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearizationReport {
    /// 1-based index of the flow that was integrated.
    pub flow: usize,
    pub t_max: f64,
    pub times: Vec<f64>,
    /// `b[s][j]` at `times[s]`.
    pub b: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
    /// Per component, max deviation of `b` from its fitted line.
    pub fit_residuals: Vec<f64>,
    /// Max normalized drift of the energies `a`.
    pub energy_drift: f64,
    /// Max `|μ(t) − sᵢ√Rᵢ(λ(t), a)|` along the trajectory.
    pub branch_error: f64,
}

impl LinearizationReport {
    /// Max `|slopeⱼ − δⱼₖ|`.
    pub fn slope_error(&self) -> f64 {
        self.slopes
            .iter()
            .enumerate()
            .map(|(j, s)| (s - if j + 1 == self.flow { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

/// Fit `y ≈ α + βt` by least squares; returns `(β, max |y − α − βt|)`.
fn fit_line(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let alpha = ym - beta * tm;
    let worst = t
        .iter()
        .zip(y)
        .map(|(a, b)| (b - alpha - beta * a).abs())
        .fold(0.0, f64::max);
    (beta, worst)
}

/// Evaluation points used for the slope fit.
const FIT_POINTS: usize = 100;

fn run_linearization(
    data: &QuadraticClassData,
    flow: usize,
    x0: &[f64],
    t_max: f64,
    dt: f64,
    tol: f64,
) -> Result<LinearizationReport> {
    let sys = data.system();
    let n = sys.n();
    let pi0 = Canonical { n, extra: 0 };
    let h = HamiltonianField::new(sys, flow - 1)?;
    let start = PhasePoint::separation(x0.to_vec(), n, 0)?;
    let traj = integrate(&pi0, &h, &start, t_max, dt)?;
    let a = sys.hamiltonians(x0)?;
    let action = ActionData {
        reference: x0[..n].to_vec(),
        signs: x0[n..2 * n].iter().map(|m| m.signum()).collect(),
        tol,
    };
    let stride = (traj.len() / FIT_POINTS).max(1);
    let mut times = Vec::new();
    let mut bs = Vec::new();
    let mut energy_drift: f64 = 0.0;
    let mut branch_error: f64 = 0.0;
    for (s, (t, state)) in traj.times.iter().zip(&traj.states).enumerate() {
        let x = &state.coords;
        let e = sys.hamiltonians(x)?;
        for (ej, aj) in e.iter().zip(&a) {
            energy_drift = energy_drift.max((ej - aj).abs() / (1.0 + aj.abs()));
        }
        for i in 0..n {
            // The radicand only touches zero between steps, so a turning
            // point shows up as μᵢ leaving its branch.
            if x[n + i] * action.signs[i] < 0.0 {
                return Err(Error::TurningPoint {
                    row: i + 1,
                    lambda: x[i],
                    radicand: data.radicand(i, x[i], &a)?,
                });
            }
            let mu = momentum_branch(data, i, x[i], &a, action.signs[i])?;
            branch_error = branch_error.max((mu - x[n + i]).abs());
        }
        if s % stride == 0 || s + 1 == traj.len() {
            times.push(*t);
            bs.push(action_derivatives(data, &x[..n], &a, &action)?);
        }
    }
    let mut slopes = Vec::with_capacity(n);
    let mut fit_residuals = Vec::with_capacity(n);
    for j in 0..n {
        let y: Vec<f64> = bs.iter().map(|b| b[j]).collect();
        let (beta, r) = fit_line(&times, &y);
        slopes.push(beta);
        fit_residuals.push(r);
    }
    Ok(LinearizationReport {
        flow,
        t_max,
        times,
        b: bs,
        slopes,
        fit_residuals,
        energy_drift,
        branch_error,
    })
}

/// Integrate the flow of `H_flow` (1-based) from `x0` in separation
/// coordinates, evaluate `b(t)` with reference point `x0` and fit slopes.
/// A turning point on the way halves `t_max` (up to 8 times); the report
/// records the horizon actually used.
pub fn linearization_check(
    data: &QuadraticClassData,
    flow: usize,
    x0: &[f64],
    t_max: f64,
    dt: f64,
    tol: f64,
) -> Result<LinearizationReport> {
    if flow == 0 || flow > data.n() {
        return Err(Error::dim(format!("flow index {flow} out of range 1..={}", data.n())));
    }
    if x0.len() != 2 * data.n() {
        return Err(Error::dim("initial point must have 2n coordinates"));
    }
    let mut horizon = t_max;
    let mut last_err = None;
    for _ in 0..=8 {
        match run_linearization(data, flow, x0, horizon, dt, tol) {
            Err(e @ Error::TurningPoint { .. }) => {
                last_err = Some(e);
                horizon *= 0.5;
            }
            other => return other,
        }
    }
    Err(last_err.expect("loop ran"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn benenti(n: usize, psi: &str) -> SeparationSystem {
        SeparationSystem::curve("b", vec![n], vec![Expr::one()], parse(psi, &["l", "m"]).unwrap())
            .unwrap()
    }

    #[test]
    fn split_of_quadratic_psi() {
        let d = QuadraticClassData::from_system(&benenti(2, "l*m^2/2 + l^3")).unwrap();
        let e = parse("l", &["l"]).unwrap();
        assert!(equal_on_samples(&d.f[0], &e, &["l"], 10, 1e-14, 1).unwrap());
        let g = parse("l^3", &["l"]).unwrap();
        assert!(equal_on_samples(&d.gamma[1], &g, &["l"], 10, 1e-14, 1).unwrap());
    }

    #[test]
    fn non_quadratic_rejected() {
        for psi in ["m^3", "m^2/2 + m", "exp(m)"] {
            let r = QuadraticClassData::from_system(&benenti(1, psi));
            assert!(matches!(r, Err(Error::NotQuadratic(_))), "{psi}");
        }
    }

    #[test]
    fn harmonic_branch() {
        let d = QuadraticClassData::from_system(&benenti(1, "m^2/2 + l^2/2")).unwrap();
        let mu = momentum_branch(&d, 0, 0.5, &[1.0], 1.0).unwrap();
        assert!((mu - (2.0f64 - 0.25).sqrt()).abs() < 1e-15);
        assert!(matches!(
            momentum_branch(&d, 0, 2.0, &[1.0], 1.0),
            Err(Error::TurningPoint { row: 1, .. })
        ));
    }

    #[test]
    fn free_two_dof_branch() {
        let d = QuadraticClassData::from_system(&benenti(2, "m^2/2")).unwrap();
        let (a, l) = ([0.7, 1.3], 0.4);
        let mu = momentum_branch(&d, 1, l, &a, -1.0).unwrap();
        assert!((mu + (2.0 * (a[0] * l + a[1])).sqrt()).abs() < 1e-15);
        // substituting back into the relation
        assert!((a[0] * l + a[1] - 0.5 * mu * mu).abs() < 1e-12);
    }

    #[test]
    fn harmonic_action_closed_form() {
        let d = QuadraticClassData::from_system(&benenti(1, "m^2/2 + l^2/2")).unwrap();
        let a = 1.0;
        let act = ActionData {
            reference: vec![0.2],
            signs: vec![1.0],
            tol: 1e-12,
        };
        let b = action_derivatives(&d, &[0.9], &[a], &act).unwrap();
        let r = (2.0 * a).sqrt();
        let expected = (0.9 / r).asin() - (0.2 / r).asin();
        assert!((b[0] - expected).abs() < 1e-10);
        assert_eq!(action_derivatives(&d, &[0.2], &[a], &act).unwrap(), vec![0.0]);
    }

    #[test]
    fn harmonic_slope_is_one() {
        let d = QuadraticClassData::from_system(&benenti(1, "m^2/2 + l^2/2")).unwrap();
        let rep = linearization_check(&d, 1, &[0.1, 0.8], 0.1, 1e-4, 1e-10).unwrap();
        assert!((rep.slopes[0] - 1.0).abs() < 1e-4);
        assert!(rep.energy_drift < 1e-8);
        assert!(rep.branch_error < 1e-6);
    }

    #[test]
    fn momentum_sign_change_shortens_horizon() {
        // μ̇ = −λ, so μ crosses zero near t = 0.05.
        let d = QuadraticClassData::from_system(&benenti(1, "m^2/2 + l^2/2")).unwrap();
        let rep = linearization_check(&d, 1, &[1.0, 0.05], 0.1, 1e-4, 1e-10).unwrap();
        assert!(rep.t_max <= 0.05, "horizon {}", rep.t_max);
        assert!((rep.slopes[0] - 1.0).abs() < 1e-3);
        assert!(rep.branch_error < 1e-6);
    }
}
