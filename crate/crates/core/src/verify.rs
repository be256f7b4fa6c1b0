//! The verification battery: one registry of checks shared by the runner,
//! the CLI filter and the generated catalog.

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{control_matrix_cramer_at, ControlMatrix};
use crate::error::{Error, Result};
use crate::lift::{
    casimir_pencil_residual_at, commutator_identity_residual_at, double_involutivity_residual_at,
    extended_separation_residual, f_recursion_residual_at, gz_chain_residuals_at,
    involutivity_residual_at, lie_identity_residual_at, quasi_bih_residual_at, schouten_residuals_at,
    ExtendedSystem, Residual,
};
use crate::linalg::max_abs;
use crate::phase::PhasePoint;
use crate::sampling::{SampleBox, Sampler};
use crate::scalar::seed;
use crate::stackel::{separation_residual, SeparationSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckId {
    Separation,
    Involutivity,
    ControlCramer,
    ControlSpectrum,
    BlockSparsity,
    QuasiBih,
    FRecursion,
    GradientFd,
    ExtendedSeparation,
    Pi1Poisson,
    Compatibility,
    GzChains,
    CasimirPencil,
    LieIdentity,
    CommutatorIdentity,
    DoubleInvolutivity,
}

/// Catalog data for one check.
#[derive(Clone, Copy, Debug)]
pub struct CheckInfo {
    pub id: &'static str,
    /// Formula the check is anchored to.
    pub anchor: &'static str,
    pub statement: &'static str,
    pub tolerance: f64,
    pub samples: usize,
    /// Runs on the extended phase space (Casimirs sampled in `[−1, 1]`).
    pub extended: bool,
    pub modules: &'static [&'static str],
}

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const SCHOUTEN_TOL: f64 = 1e-7;
/// Spectral parameters drawn per point for the Casimir-pencil check.
pub const PENCIL_LAMBDAS: usize = 10;
/// Central-difference step of the gradient oracle.
pub const FD_STEP: f64 = 1e-6;

impl CheckId {
    pub const ALL: [CheckId; 16] = [
        CheckId::Separation,
        CheckId::Involutivity,
        CheckId::ControlCramer,
        CheckId::ControlSpectrum,
        CheckId::BlockSparsity,
        CheckId::QuasiBih,
        CheckId::FRecursion,
        CheckId::GradientFd,
        CheckId::ExtendedSeparation,
        CheckId::Pi1Poisson,
        CheckId::Compatibility,
        CheckId::GzChains,
        CheckId::CasimirPencil,
        CheckId::LieIdentity,
        CheckId::CommutatorIdentity,
        CheckId::DoubleInvolutivity,
    ];

    pub fn info(self) -> CheckInfo {
        let c = |id, anchor, statement, tolerance, samples, extended, modules| CheckInfo {
            id,
            anchor,
            statement,
            tolerance,
            samples,
            extended,
            modules,
        };
        match self {
            CheckId::Separation => c(
                "separation",
                "Σ_k S_i^k(λ_i, μ_i) H^{(k)}(λ_i) = ψ_i(λ_i, μ_i)",
                "The solved Hamiltonians satisfy every separation relation.",
                1e-10,
                DEFAULT_SAMPLES,
                false,
                &["stackel"],
            ),
            CheckId::Involutivity => c(
                "involutivity",
                "{H_i, H_j}_{Π_0} = 0",
                "The Hamiltonians Poisson-commute under the canonical tensor.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                false,
                &["stackel", "poisson", "lift"],
            ),
            CheckId::ControlCramer => c(
                "control-cramer",
                "F = (S^{−1} Λ_n S)",
                "F from elimination equals F from the determinant-ratio formula, \
                 max |F − F_cramer| ≤ tol·(1 + max |F|).",
                1e-10,
                200,
                false,
                &["stackel", "control"],
            ),
            CheckId::ControlSpectrum => c(
                "control-spectrum",
                "det(F − λ_i I) = 0",
                "Each λ_i is an eigenvalue of F; the residual is the first-order eigenvalue \
                 error |det(F − λ_i I)| / Π_{j≠i} |λ_j − λ_i|.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                false,
                &["control"],
            ),
            CheckId::BlockSparsity => c(
                "block-sparsity",
                "F_{i,j}^{k,l} = δ_{kl} δ_{j,i+1} for j > 1",
                "Outside the first column of each block, F has ones on the within-block \
                 superdiagonal and zeros elsewhere.",
                1e-10,
                DEFAULT_SAMPLES,
                false,
                &["control"],
            ),
            CheckId::QuasiBih => c(
                "quasi-bih",
                "Π_1 dH_i = Σ_j F_{ij} Π_0 dH_j",
                "Quasi-bi-Hamiltonian identity in full form and in block form \
                 Π_1 dH_i^{(k)} = Π_0 dH_{i+1}^{(k)} + Σ_l F_i^{k,l} Π_0 dH_1^{(l)}.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                false,
                &["stackel", "control", "lift"],
            ),
            CheckId::FRecursion => c(
                "f-recursion",
                "Π_1 dF_i^{k,l} = Π_0 dF_{i+1}^{k,l} + Σ_r F_i^{k,r} Π_0 dF_1^{r,l}",
                "First-column entries of F obey the same recursion as the Hamiltonians, \
                 with F_{n_k+1}^{k,l} = 0.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                false,
                &["control", "lift"],
            ),
            CheckId::GradientFd => c(
                "gradient-fd",
                "∂_a H_i ≈ (H_i(x + h e_a) − H_i(x − h e_a)) / 2h",
                "Dual-number gradients of all H_i and F entries match central differences \
                 with h = 1e-6.",
                1e-6,
                DEFAULT_SAMPLES,
                false,
                &["expr", "stackel", "control"],
            ),
            CheckId::ExtendedSeparation => c(
                "extended-separation",
                "Σ_k S_i^k h^{(k)}(λ_i) = ψ_i, h^{(k)}(λ) = Σ_{j=0}^{n_k} h_j^{(k)} λ^{n_k−j}",
                "The extended Hamiltonians, including the Casimirs, satisfy the extended \
                 separation relations.",
                1e-10,
                DEFAULT_SAMPLES,
                true,
                &["lift"],
            ),
            CheckId::Pi1Poisson => c(
                "pi1-poisson",
                "[π_1, π_1]_S = 0",
                "The lifted tensor π_1 = π_1D + Σ_k X_1^{(k)} ∧ Z_k is Poisson.",
                SCHOUTEN_TOL,
                50,
                true,
                &["poisson", "lift"],
            ),
            CheckId::Compatibility => c(
                "compatibility",
                "[π_0, π_1]_S = 0",
                "π_0 and π_1 are compatible, so π_1 − λ π_0 is a Poisson pencil.",
                SCHOUTEN_TOL,
                50,
                true,
                &["poisson", "lift"],
            ),
            CheckId::GzChains => c(
                "gz-chains",
                "π_0 dh_0^{(k)} = 0, π_1 dh_{i}^{(k)} = π_0 dh_{i+1}^{(k)}, π_1 dh_{n_k}^{(k)} = 0",
                "Every block forms a bi-Hamiltonian chain that starts and ends at Casimirs.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                true,
                &["lift"],
            ),
            CheckId::CasimirPencil => c(
                "casimir-pencil",
                "(π_1 − λ π_0) d h^{(k)}(λ) = 0",
                "The polynomial h^{(k)}(λ) is a Casimir of the pencil, checked at 10 random λ \
                 per point.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                true,
                &["lift"],
            ),
            CheckId::LieIdentity => c(
                "lie-identity",
                "L_{X_1^{(r)}} π_1D = Σ_l π_0 dF_1^{r,l} ∧ X_1^{(l)}",
                "Lie derivative of the diagonal tensor along the first chain vector fields.",
                SCHOUTEN_TOL,
                DEFAULT_SAMPLES,
                true,
                &["poisson", "lift"],
            ),
            CheckId::CommutatorIdentity => c(
                "commutator-identity",
                "[X_1^{(i)}, Z_j] = π_0 dF_1^{i,j}",
                "Commutator of the first chain fields with the Casimir directions Z_j = ∂/∂c_j.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                true,
                &["poisson", "lift"],
            ),
            CheckId::DoubleInvolutivity => c(
                "double-involutivity",
                "{h_i^{(k)}, h_j^{(l)}}_{π_0} = {h_i^{(k)}, h_j^{(l)}}_{π_1} = 0",
                "All extended Hamiltonians commute under both tensors.",
                DEFAULT_TOL,
                DEFAULT_SAMPLES,
                true,
                &["lift"],
            ),
        }
    }

    pub fn id(self) -> &'static str {
        self.info().id
    }

    pub fn from_id(id: &str) -> Option<CheckId> {
        CheckId::ALL.into_iter().find(|c| c.id() == id)
    }

    /// Residual at one regular point (extended when the check is).
    pub fn evaluate(self, sys: &SeparationSystem, ext: &ExtendedSystem, x: &[f64], aux: &[f64]) -> Result<Residual> {
        let n = sys.n();
        let base = &x[..2 * n];
        match self {
            CheckId::Separation => {
                let (r, scale) = separation_residual(sys, base)?;
                Ok(Residual::new(r, scale))
            }
            CheckId::Involutivity => involutivity_residual_at(sys, base),
            CheckId::ControlCramer => {
                let pt = PhasePoint::separation(base.to_vec(), n, 0)?;
                let (_, f) = sys.hamiltonians_and_control(base)?;
                let fc = control_matrix_cramer_at(sys, &pt)?;
                Ok(Residual::new(f.sub(&fc.values).max_abs(), 1.0 + f.max_abs()))
            }
            CheckId::ControlSpectrum => {
                let (_, f) = sys.hamiltonians_and_control(base)?;
                let lambda = &base[..n];
                let mut worst: f64 = 0.0;
                for (i, &li) in lambda.iter().enumerate() {
                    let shifted = crate::linalg::Mat::from_fn(n, n, |a, b| {
                        f[(a, b)] - if a == b { li } else { 0.0 }
                    });
                    let gap: f64 = lambda
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, lj)| (lj - li).abs())
                        .product();
                    worst = worst.max(shifted.det().abs() / gap);
                }
                Ok(Residual::new(worst, 1.0 + max_abs(lambda)))
            }
            CheckId::BlockSparsity => {
                let (_, f) = sys.hamiltonians_and_control(base)?;
                let cm = ControlMatrix::new(f, sys.partition().clone());
                Ok(Residual::new(cm.sparsity_residual(), 1.0))
            }
            CheckId::QuasiBih => quasi_bih_residual_at(sys, base),
            CheckId::FRecursion => f_recursion_residual_at(sys, base),
            CheckId::GradientFd => gradient_fd_residual(sys, base),
            CheckId::ExtendedSeparation => Ok(extended_separation_residual(ext, x)?.1),
            CheckId::Pi1Poisson => Ok(schouten_residuals_at(ext, x)?.0),
            CheckId::Compatibility => Ok(schouten_residuals_at(ext, x)?.1),
            CheckId::GzChains => Ok(gz_chain_residuals_at(ext, x)?
                .into_iter()
                .map(|l| l.residual)
                .fold(Residual::zero(), Residual::worst)),
            CheckId::CasimirPencil => {
                let mut worst = Residual::zero();
                for &l in aux {
                    worst = worst.worst(casimir_pencil_residual_at(ext, x, l)?.1);
                }
                Ok(worst)
            }
            CheckId::LieIdentity => lie_identity_residual_at(ext, x),
            CheckId::CommutatorIdentity => commutator_identity_residual_at(ext, x),
            CheckId::DoubleInvolutivity => double_involutivity_residual_at(ext, x),
        }
    }
}

/// Dual gradients of `H` and `F` against central differences.
pub fn gradient_fd_residual(sys: &SeparationSystem, x: &[f64]) -> Result<Residual> {
    let d = x.len();
    let (hd, fd) = sys.hamiltonians_and_control(&seed(x))?;
    let mut exact: Vec<Vec<f64>> = hd.iter().map(|h| h.gradient(d)).collect();
    let n = fd.rows();
    exact.extend((0..n * n).map(|q| fd[(q / n, q % n)].gradient(d)));
    let mut worst = Residual::zero();
    let mut numeric = vec![vec![0.0; d]; exact.len()];
    for a in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[a] += FD_STEP;
        xm[a] -= FD_STEP;
        let (hp, fp) = sys.hamiltonians_and_control(&xp)?;
        let (hm, fm) = sys.hamiltonians_and_control(&xm)?;
        let plus: Vec<f64> = hp.into_iter().chain(fp.to_rows().into_iter().flatten()).collect();
        let minus: Vec<f64> = hm.into_iter().chain(fm.to_rows().into_iter().flatten()).collect();
        for (q, row) in numeric.iter_mut().enumerate() {
            row[a] = (plus[q] - minus[q]) / (2.0 * FD_STEP);
        }
    }
    for (e, num) in exact.iter().zip(&numeric) {
        let diff: Vec<f64> = e.iter().zip(num).map(|(a, b)| a - b).collect();
        worst = worst.worst(Residual::new(max_abs(&diff), 1.0 + max_abs(e)));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Overrides every check's default sample count.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Overrides every check's default tolerance.
    pub tol: Option<f64>,
    /// Checks to run; `None` runs the whole registry.
    pub checks: Option<Vec<CheckId>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: None,
            seed: DEFAULT_SEED,
            tol: None,
            checks: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub anchor: String,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Max over samples of `value / scale`.
    pub max_residual: f64,
    pub mean_residual: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Environment {
    pub version: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub system: String,
    pub n: usize,
    pub m: usize,
    pub partition: Vec<usize>,
    pub environment: Environment,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Whether any check stopped on a numerical error rather than a residual.
    pub fn has_errors(&self) -> bool {
        self.checks.iter().any(|c| c.error.is_some())
    }
}

/// Sample points for a check: regular base points, Casimirs when extended,
/// and the auxiliary spectral parameters.
fn draw_points(sys: &SeparationSystem, info: &CheckInfo, samples: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut sampler = Sampler::new(seed);
    (0..samples)
        .map(|_| {
            let x = if info.extended {
                sys.sample_extended_point(&mut sampler)?
            } else {
                sys.sample_point(&mut sampler)?
            };
            let aux = if info.id == CheckId::CasimirPencil.id() {
                sampler.vector(PENCIL_LAMBDAS, SampleBox::default())
            } else {
                Vec::new()
            };
            Ok((x, aux))
        })
        .collect()
}

/// Run one check; evaluation fans out over points, the reduction is
/// sequential in draw order.
pub fn run_check(sys: &SeparationSystem, check: CheckId, opts: &VerifyOptions) -> CheckRecord {
    let info = check.info();
    let samples = opts.samples.unwrap_or(info.samples);
    let tolerance = opts.tol.unwrap_or(info.tolerance);
    let ext = ExtendedSystem::new(sys.clone());
    let outcome: Result<Vec<f64>> = draw_points(sys, &info, samples, opts.seed).and_then(|pts| {
        pts.par_iter()
            .map(|(x, aux)| check.evaluate(sys, &ext, x, aux).map(|r| r.normalized()))
            .collect()
    });
    let (max_residual, mean_residual, error) = match outcome {
        Ok(vals) => {
            let max = vals.iter().copied().fold(0.0, f64::max);
            let mean = if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 };
            let error = vals
                .iter()
                .any(|v| !v.is_finite())
                .then(|| "non-finite residual".to_string());
            (max, mean, error)
        }
        Err(e) => (f64::INFINITY, f64::INFINITY, Some(e.to_string())),
    };
    let clean = |v: f64| if v.is_finite() { v } else { f64::MAX };
    CheckRecord {
        check: info.id.to_string(),
        anchor: info.anchor.to_string(),
        samples,
        seed: opts.seed,
        tolerance,
        max_residual: clean(max_residual),
        mean_residual: clean(mean_residual),
        pass: error.is_none() && max_residual <= tolerance,
        error,
    }
}

pub fn run_verify(sys: &SeparationSystem, opts: &VerifyOptions) -> VerificationReport {
    let checks: Vec<CheckId> = opts.checks.clone().unwrap_or_else(|| CheckId::ALL.to_vec());
    let records: Vec<CheckRecord> = checks.iter().map(|&c| run_check(sys, c, opts)).collect();
    VerificationReport {
        system: sys.name().to_string(),
        n: sys.n(),
        m: sys.m(),
        partition: sys.partition().sizes().to_vec(),
        environment: Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: opts.seed,
        },
        pass: records.iter().all(|r| r.pass),
        checks: records,
    }
}

/// Parse a comma-separated check filter.
pub fn parse_check_filter(list: &str) -> Result<Vec<CheckId>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|id| {
            CheckId::from_id(id).ok_or_else(|| {
                let known: Vec<&str> = CheckId::ALL.iter().map(|c| c.id()).collect();
                Error::Validation(format!("unknown check `{id}`; known: {}", known.join(", ")))
            })
        })
        .collect()
}
