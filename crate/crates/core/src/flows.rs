//! Fixed-step RK4 integration of Hamiltonian vector fields `π∇H`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::phase::PhasePoint;
use crate::poisson::{hamiltonian_vector_field, BivectorField, ScalarField};

pub const METHOD: &str = "rk4";

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub dt: f64,
    pub method: &'static str,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("trajectory holds its initial point")
    }

    /// Header `t,x1,...,xd`, one row per recorded state, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.coords.len());
        let mut out = String::from("t");
        for i in 1..=d {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:.16e}");
            for v in &s.coords {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Integration stopped early; `partial` holds every state reached.
#[derive(Clone, Debug)]
pub struct FlowInterrupted {
    pub partial: Trajectory,
    pub time: f64,
    pub error: Error,
}

impl From<FlowInterrupted> for Error {
    fn from(f: FlowInterrupted) -> Self {
        f.error
    }
}

fn rk4_step<B: BivectorField, F: ScalarField>(pi: &B, h: &F, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let shifted = |k: &[f64], c: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    let k1 = hamiltonian_vector_field(pi, h, x)?;
    let k2 = hamiltonian_vector_field(pi, h, &shifted(&k1, 0.5 * dt))?;
    let k3 = hamiltonian_vector_field(pi, h, &shifted(&k2, 0.5 * dt))?;
    let k4 = hamiltonian_vector_field(pi, h, &shifted(&k3, dt))?;
    let next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain {
            subtree: "flow step".into(),
            reason: "state left the finite range".into(),
        });
    }
    Ok(next)
}

/// Integrate `ẋ = π∇H` from `x0` over `[0, t_max]` in `ceil(t_max/dt)` equal
/// steps (so the last time is exactly `t_max`).
pub fn integrate<B: BivectorField, F: ScalarField>(
    pi: &B,
    h: &F,
    x0: &PhasePoint,
    t_max: f64,
    dt: f64,
) -> std::result::Result<Trajectory, FlowInterrupted> {
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        dt,
        method: METHOD,
    };
    let fail = |traj: Trajectory, time: f64, error: Error| FlowInterrupted {
        partial: traj,
        time,
        error,
    };
    if !(dt > 0.0 && dt.is_finite()) || !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(fail(
            traj,
            0.0,
            Error::Validation(format!("need dt > 0 and t_max ≥ 0, got dt = {dt}, t_max = {t_max}")),
        ));
    }
    if pi.dim() != x0.coords.len() || h.dim() != x0.coords.len() {
        return Err(fail(traj, 0.0, Error::dim("field and initial point dimensions differ")));
    }
    let steps = (t_max / dt).ceil() as usize;
    if steps == 0 {
        return Ok(traj);
    }
    let h_step = t_max / steps as f64;
    traj.dt = h_step;
    let mut x = x0.coords.clone();
    for s in 1..=steps {
        match rk4_step(pi, h, &x, h_step) {
            Ok(next) => x = next,
            Err(e) => {
                let t = traj.times[traj.len() - 1];
                return Err(fail(traj, t, e));
            }
        }
        traj.times.push(s as f64 * h_step);
        traj.states.push(PhasePoint {
            coords: x.clone(),
            ..x0.clone()
        });
    }
    Ok(traj)
}

/// Per invariant, `max_t |I(x(t)) − I(x(0))| / (1 + |I(x(0))|)`.
pub fn conservation_report<F: ScalarField>(traj: &Trajectory, invariants: &[F]) -> Result<Vec<f64>> {
    invariants
        .iter()
        .map(|inv| {
            let i0: f64 = inv.eval(&traj.states[0].coords)?;
            let mut worst: f64 = 0.0;
            for s in &traj.states {
                let v: f64 = inv.eval(&s.coords)?;
                worst = worst.max((v - i0).abs());
            }
            Ok(worst / (1.0 + i0.abs()))
        })
        .collect()
}

/// `‖Φ_a^τ(Φ_b^τ(x0)) − Φ_b^τ(Φ_a^τ(x0))‖_∞` with RK4 step `dt`.
pub fn commuting_flows_residual<B: BivectorField, Fa: ScalarField, Fb: ScalarField>(
    pi: &B,
    ha: &Fa,
    hb: &Fb,
    x0: &PhasePoint,
    tau: f64,
    dt: f64,
) -> Result<f64> {
    let ab = integrate(pi, ha, integrate(pi, hb, x0, tau, dt)?.last(), tau, dt)?;
    let ba = integrate(pi, hb, integrate(pi, ha, x0, tau, dt)?.last(), tau, dt)?;
    let diff: Vec<f64> = ab
        .last()
        .coords
        .iter()
        .zip(&ba.last().coords)
        .map(|(a, b)| a - b)
        .collect();
    Ok(max_abs(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::poisson::{Canonical, ExprScalar};

    fn field(src: &str) -> ExprScalar {
        ExprScalar::new(&parse(src, &["q", "p"]).unwrap(), &["q", "p"]).unwrap()
    }

    fn start(q: f64, p: f64) -> PhasePoint {
        PhasePoint::new(vec![q, p], "qp", 1, 0).unwrap()
    }

    const PI0: Canonical = Canonical { n: 1, extra: 0 };

    #[test]
    fn harmonic_oscillator_returns() {
        let t = 2.0 * std::f64::consts::PI;
        let traj = integrate(&PI0, &field("p^2/2 + q^2/2"), &start(1.0, 0.0), t, 1e-3).unwrap();
        let end = &traj.last().coords;
        assert!((end[0] - 1.0).abs() < 1e-8 && end[1].abs() < 1e-8);
        assert!((traj.times[traj.len() - 1] - t).abs() < 1e-12);
    }

    #[test]
    fn constant_hamiltonian_is_stationary() {
        let traj = integrate(&PI0, &field("3"), &start(0.3, -0.7), 1.0, 0.1).unwrap();
        assert!(traj.states.iter().all(|s| s.coords == vec![0.3, -0.7]));
    }

    #[test]
    fn csv_layout_round_trips() {
        let traj = integrate(&PI0, &field("p^2/2"), &start(0.1, 1.0 / 3.0), 0.2, 0.1).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,x2"));
        let row: Vec<f64> = lines.nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[1], traj.states[2].coords[0]);
        assert_eq!(row[2], 1.0 / 3.0);
    }

    #[test]
    fn exact_invariant_has_no_drift() {
        let traj = integrate(&PI0, &field("p"), &start(0.0, 0.5), 3.0, 0.01).unwrap();
        let drift = conservation_report(&traj, &[field("p"), field("1")]).unwrap();
        assert!(drift[0] <= 1e-10);
        assert_eq!(drift[1], 0.0);
    }

    #[test]
    fn domain_error_keeps_partial_trajectory() {
        // q̇ = −1 drives q through 0, where ∂H/∂q stops being real
        let h = field("sqrt(q) - p");
        let err = integrate(&PI0, &h, &start(0.05, 0.0), 1.0, 0.01).unwrap_err();
        assert!(!err.partial.is_empty());
        assert!(err.time < 1.0);
    }

    #[test]
    fn bad_step_is_rejected() {
        assert!(integrate(&PI0, &field("p"), &start(0.0, 0.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn equal_flows_commute() {
        let h = field("p^2/2 + q^4");
        let r = commuting_flows_residual(&PI0, &h, &h, &start(0.4, 0.2), 0.1, 1e-3).unwrap();
        assert!(r < 1e-14);
    }
}
