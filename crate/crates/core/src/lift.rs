//! The extended phase space `M × ℝᵐ` and the bi-Hamiltonian lift.
//!
//! Extended coordinates are `(λ₁..λₙ, μ₁..μₙ, c₁..c_m)`. The extended
//! Hamiltonians are `h₀⁽ᵏ⁾ = c_k` and `hᵢ⁽ᵏ⁾ = Hᵢ⁽ᵏ⁾ − Σ_l Fᵢ^{k,l} c_l`;
//! `π₀`, `π₁D` are the base tensors padded with zeros and
//! `π₁ = π₁D + Σ_k X₁⁽ᵏ⁾ ∧ Z_k` with `X₁⁽ᵏ⁾ = π₀∇h₁⁽ᵏ⁾`, `Z_k = ∂/∂c_k`.
//!
//! Every residual function returns a [`Residual`]: the max-norm of the
//! defect and the scale `1 + max-norm of the terms entering the identity`.

use crate::error::Result;
use crate::linalg::{max_abs, Mat};
use crate::poisson::{
    lie_derivative_from_parts, schouten_from_parts, upper_index, wedge_vectors, BivectorField,
    Canonical, DiagonalLambda, ScalarField, VectorField,
};
use crate::scalar::{seed, Dual, Scalar};
use crate::stackel::SeparationSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn new(value: f64, scale: f64) -> Self {
        Residual { value, scale }
    }

    pub fn zero() -> Self {
        Residual::new(0.0, 1.0)
    }

    pub fn normalized(&self) -> f64 {
        self.value / self.scale
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.value <= tol * self.scale
    }

    /// The worse of two residuals, by normalized value.
    pub fn worst(self, other: Residual) -> Residual {
        if other.normalized() > self.normalized() || self.normalized().is_nan() {
            other
        } else {
            self
        }
    }
}

/// Residual of `Σ terms − 0` where every term's size enters the scale.
fn residual_of(defect: &[f64], terms: &[&[f64]]) -> Residual {
    let scale = 1.0 + terms.iter().map(|t| max_abs(t)).fold(0.0, f64::max);
    Residual::new(max_abs(defect), scale)
}

fn apply_pi0(n: usize, grad: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for a in 0..n {
        out[a] = grad[n + a];
        out[n + a] = -grad[a];
    }
    out
}

fn apply_pi1d(n: usize, lambda: &[f64], grad: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for a in 0..n {
        out[a] = lambda[a] * grad[n + a];
        out[n + a] = -lambda[a] * grad[a];
    }
    out
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|x| x * k).collect()
}

fn axpy(acc: &mut [f64], k: f64, v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += k * b;
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Hamiltonian gradients (rows, over `(λ, μ)`) and the control matrix.
pub fn base_gradients_and_control(
    sys: &SeparationSystem,
    x: &[f64],
) -> Result<(Vec<Vec<f64>>, Mat<f64>)> {
    let d = 2 * sys.n();
    let (h, f) = sys.hamiltonians_and_control(&seed(&x[..d]))?;
    Ok((
        h.iter().map(|v| v.gradient(d)).collect(),
        f.map(|v: &Dual<f64>| v.value),
    ))
}

/// Residual of `Π₁∇Hᵢ = Σ_j F_ij Π₀∇H_j` from pointwise parts: tensors as
/// matrices, gradients as rows, `F` as a matrix.
pub fn quasi_bih_from_parts(
    pi0: &Mat<f64>,
    pi1: &Mat<f64>,
    grads: &[Vec<f64>],
    f: &Mat<f64>,
) -> Residual {
    let pi0_dh: Vec<Vec<f64>> = grads.iter().map(|g| pi0.matvec(g)).collect();
    let mut worst = Residual::zero();
    for (i, g) in grads.iter().enumerate() {
        let lhs = pi1.matvec(g);
        let mut rhs = vec![0.0; lhs.len()];
        let mut terms = vec![lhs.clone()];
        for (j, v) in pi0_dh.iter().enumerate() {
            axpy(&mut rhs, f[(i, j)], v);
            terms.push(scaled(v, f[(i, j)]));
        }
        let refs: Vec<&[f64]> = terms.iter().map(Vec::as_slice).collect();
        worst = worst.worst(residual_of(&sub(&lhs, &rhs), &refs));
    }
    worst
}

/// Quasi-bi-Hamiltonian identity in separation coordinates, in both the
/// full form `Π₁∇Hᵢ = Σ_j F_ij Π₀∇H_j` and the block form
/// `Π₁∇Hᵢ⁽ᵏ⁾ = Π₀∇H_{i+1}⁽ᵏ⁾ + Σ_l Fᵢ^{k,l} Π₀∇H₁⁽ˡ⁾`.
pub fn quasi_bih_residual_at(sys: &SeparationSystem, x: &[f64]) -> Result<Residual> {
    let n = sys.n();
    let d = 2 * n;
    let (grads, f) = base_gradients_and_control(sys, x)?;
    let lambda = &x[..n];
    let full = {
        let pi0 = Canonical { n, extra: 0 }.matrix(&x[..d])?;
        let pi1 = DiagonalLambda { n, extra: 0 }.matrix(&x[..d])?;
        quasi_bih_from_parts(&pi0, &pi1, &grads, &f)
    };
    let p = sys.partition();
    let pi0_dh: Vec<Vec<f64>> = grads.iter().map(|g| apply_pi0(n, g, d)).collect();
    let mut worst = full;
    for idx in p.indices() {
        let lhs = apply_pi1d(n, lambda, &grads[idx.global], d);
        let next = if idx.j < p.size(idx.k) {
            pi0_dh[p.global(idx.k, idx.j + 1)].clone()
        } else {
            vec![0.0; d]
        };
        let mut rhs = next.clone();
        let mut terms = vec![lhs.clone(), next];
        for l in 1..=sys.m() {
            let coeff = f[(idx.global, p.global(l, 1))];
            let v = &pi0_dh[p.global(l, 1)];
            axpy(&mut rhs, coeff, v);
            terms.push(scaled(v, coeff));
        }
        let refs: Vec<&[f64]> = terms.iter().map(Vec::as_slice).collect();
        worst = worst.worst(residual_of(&sub(&lhs, &rhs), &refs));
    }
    Ok(worst)
}

/// `Π₁∇Fᵢ^{k,l} = Π₀∇F_{i+1}^{k,l} + Σ_r Fᵢ^{k,r} Π₀∇F₁^{r,l}`,
/// `F_{n_k+1}^{k,l} = 0`.
pub fn f_recursion_residual_at(sys: &SeparationSystem, x: &[f64]) -> Result<Residual> {
    let n = sys.n();
    let d = 2 * n;
    let m = sys.m();
    let p = sys.partition();
    let (_, fd) = sys.hamiltonians_and_control(&seed(&x[..d]))?;
    let first = |k: usize, l: usize, i: usize| &fd[(p.global(k, i), p.global(l, 1))];
    let lambda = &x[..n];
    let mut worst = Residual::zero();
    for k in 1..=m {
        for l in 1..=m {
            for i in 1..=p.size(k) {
                let g = first(k, l, i).gradient(d);
                let lhs = apply_pi1d(n, lambda, &g, d);
                let next = if i < p.size(k) {
                    apply_pi0(n, &first(k, l, i + 1).gradient(d), d)
                } else {
                    vec![0.0; d]
                };
                let mut rhs = next.clone();
                let mut terms = vec![lhs.clone(), next];
                for r in 1..=m {
                    let coeff = first(k, r, i).value;
                    let v = apply_pi0(n, &first(r, l, 1).gradient(d), d);
                    axpy(&mut rhs, coeff, &v);
                    terms.push(scaled(&v, coeff));
                }
                let refs: Vec<&[f64]> = terms.iter().map(Vec::as_slice).collect();
                worst = worst.worst(residual_of(&sub(&lhs, &rhs), &refs));
            }
        }
    }
    Ok(worst)
}

/// `|{Hᵢ, H_j}_{Π₀}|` against `1 + |∇Hᵢ||∇H_j|`, worst pair.
pub fn involutivity_residual_at(sys: &SeparationSystem, x: &[f64]) -> Result<Residual> {
    let n = sys.n();
    let (grads, _) = base_gradients_and_control(sys, x)?;
    let mut worst = Residual::zero();
    for i in 0..n {
        for j in i + 1..n {
            let pg = apply_pi0(n, &grads[j], 2 * n);
            let b = crate::linalg::dot(&grads[i], &pg);
            let scale = 1.0 + norm2(&grads[i]) * norm2(&grads[j]);
            worst = worst.worst(Residual::new(b.abs(), scale));
        }
    }
    Ok(worst)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct ExtendedSystem {
    base: SeparationSystem,
}

impl ExtendedSystem {
    pub fn new(base: SeparationSystem) -> Self {
        ExtendedSystem { base }
    }

    pub fn base(&self) -> &SeparationSystem {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn m(&self) -> usize {
        self.base.m()
    }

    pub fn dim(&self) -> usize {
        2 * self.n() + self.m()
    }

    /// `h[k-1][i] = hᵢ⁽ᵏ⁾` for `i = 0..=n_k`.
    pub fn extended_hamiltonians<S: Scalar>(&self, x: &[S]) -> Result<Vec<Vec<S>>> {
        let n = self.n();
        let p = self.base.partition();
        let (h, f) = self.base.hamiltonians_and_control(&x[..2 * n])?;
        let c = &x[2 * n..2 * n + self.m()];
        Ok((1..=self.m())
            .map(|k| {
                let mut block = vec![c[k - 1].clone()];
                for i in 1..=p.size(k) {
                    let g = p.global(k, i);
                    let mut v = h[g].clone();
                    for l in 1..=self.m() {
                        v = v - f[(g, p.global(l, 1))].clone() * c[l - 1].clone();
                    }
                    block.push(v);
                }
                block
            })
            .collect())
    }

    pub fn pi0(&self) -> Canonical {
        Canonical {
            n: self.n(),
            extra: self.m(),
        }
    }

    pub fn pi1d(&self) -> DiagonalLambda {
        DiagonalLambda {
            n: self.n(),
            extra: self.m(),
        }
    }

    pub fn pi1(&self) -> Pi1<'_> {
        Pi1 { ext: self }
    }

    pub fn x1(&self, k: usize) -> X1<'_> {
        X1 { ext: self, k }
    }

    pub fn h(&self, k: usize, i: usize) -> ExtendedHamiltonian<'_> {
        ExtendedHamiltonian { ext: self, k, i }
    }

    pub fn first_column(&self, k: usize, l: usize, i: usize) -> FirstColumnEntry<'_> {
        FirstColumnEntry { ext: self, k, l, i }
    }

    /// `X₁⁽ᵏ⁾` for every block, from one dual sweep.
    fn x1_all<S: Scalar>(&self, x: &[S]) -> Result<Vec<Vec<S>>> {
        let n = self.n();
        let d = self.dim();
        let h = self.extended_hamiltonians(&seed(x))?;
        Ok(h.iter()
            .map(|block| {
                let g = block[1].gradient(d);
                let mut out = vec![S::zero(); d];
                for a in 0..n {
                    out[a] = g[n + a].clone();
                    out[n + a] = -g[a].clone();
                }
                out
            })
            .collect())
    }

    /// Gradients of all extended Hamiltonians, `grads[k-1][i]`.
    pub fn hamiltonian_gradients(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let d = self.dim();
        Ok(self
            .extended_hamiltonians(&seed(x))?
            .iter()
            .map(|b| b.iter().map(|h| h.gradient(d)).collect())
            .collect())
    }
}

pub struct ExtendedHamiltonian<'a> {
    ext: &'a ExtendedSystem,
    k: usize,
    i: usize,
}

impl ScalarField for ExtendedHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.ext.dim()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        Ok(self.ext.extended_hamiltonians(x)?[self.k - 1][self.i].clone())
    }
}

/// `Fᵢ^{k,l}` as a field on the extended space (independent of `c`).
pub struct FirstColumnEntry<'a> {
    ext: &'a ExtendedSystem,
    k: usize,
    l: usize,
    i: usize,
}

impl ScalarField for FirstColumnEntry<'_> {
    fn dim(&self) -> usize {
        self.ext.dim()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let p = self.ext.base.partition();
        let (_, f) = self.ext.base.hamiltonians_and_control(&x[..2 * self.ext.n()])?;
        Ok(f[(p.global(self.k, self.i), p.global(self.l, 1))].clone())
    }
}

/// `X₁⁽ᵏ⁾ = π₀∇h₁⁽ᵏ⁾`.
pub struct X1<'a> {
    ext: &'a ExtendedSystem,
    k: usize,
}

impl VectorField for X1<'_> {
    fn dim(&self) -> usize {
        self.ext.dim()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.ext.x1_all(x)?.swap_remove(self.k - 1))
    }
}

/// `π₁ = π₁D + Σ_k X₁⁽ᵏ⁾ ∧ Z_k`.
pub struct Pi1<'a> {
    ext: &'a ExtendedSystem,
}

impl BivectorField for Pi1<'_> {
    fn dim(&self) -> usize {
        self.ext.dim()
    }

    fn upper<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.ext.n();
        let d = self.dim();
        let mut out = self.ext.pi1d().upper(x)?;
        for (k, xk) in self.ext.x1_all(x)?.into_iter().enumerate() {
            let col = 2 * n + k;
            for (a, v) in xk.into_iter().enumerate().take(2 * n) {
                let slot = upper_index(d, a, col);
                out[slot] = out[slot].clone() + v;
            }
        }
        Ok(out)
    }
}

pub fn extended_hamiltonians_at(ext: &ExtendedSystem, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    ext.extended_hamiltonians(x)
}

pub fn pi1_at(ext: &ExtendedSystem, x: &[f64]) -> Result<Mat<f64>> {
    ext.pi1().matrix(x)
}

/// Per row: `Σ_k φᵢᵏ h⁽ᵏ⁾(λᵢ) − ψᵢ` with `h⁽ᵏ⁾(λ) = Σ_{i=0}^{n_k} λ^{n_k−i} hᵢ⁽ᵏ⁾`.
pub fn extended_separation_residual(
    ext: &ExtendedSystem,
    x: &[f64],
) -> Result<(Vec<f64>, Residual)> {
    let n = ext.n();
    let sys = ext.base();
    let h = ext.extended_hamiltonians(x)?;
    let mut rows = Vec::with_capacity(n);
    let mut size: f64 = 0.0;
    for i in 0..n {
        let (l, mu) = (x[i], x[n + i]);
        let mut acc = 0.0;
        for k in 1..=ext.m() {
            let phi = sys.phi_at(i, k, &l, &mu)?;
            let nk = sys.partition().size(k);
            let poly: f64 = (0..=nk).map(|j| l.powi((nk - j) as i32) * h[k - 1][j]).sum();
            let mag: f64 = (0..=nk)
                .map(|j| (l.powi((nk - j) as i32) * h[k - 1][j]).abs())
                .fold(0.0, f64::max);
            size = size.max((phi * mag).abs());
            acc += phi * poly;
        }
        let psi = sys.psi_row_at(i, &l, &mu)?;
        size = size.max(psi.abs());
        rows.push(acc - psi);
    }
    let r = Residual::new(max_abs(&rows), 1.0 + size);
    Ok((rows, r))
}

/// A labelled chain-link residual.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainLink {
    pub k: usize,
    pub label: String,
    pub vector: Vec<f64>,
    pub residual: Residual,
}

/// For each block: `π₀∇h₀`, `π₁∇hᵢ − π₀∇h_{i+1}` (`i = 0..n_k−1`) and
/// `π₁∇h_{n_k}`.
pub fn gz_chain_residuals_at(ext: &ExtendedSystem, x: &[f64]) -> Result<Vec<ChainLink>> {
    let grads = ext.hamiltonian_gradients(x)?;
    let pi0 = ext.pi0().matrix(x)?;
    let pi1 = ext.pi1().matrix(x)?;
    let mut out = Vec::new();
    for (k0, block) in grads.iter().enumerate() {
        let k = k0 + 1;
        let nk = block.len() - 1;
        let start = pi0.matvec(&block[0]);
        out.push(ChainLink {
            k,
            label: format!("pi0 dh0({k})"),
            residual: residual_of(&start, &[&start]),
            vector: start,
        });
        for i in 0..nk {
            let a = pi1.matvec(&block[i]);
            let b = pi0.matvec(&block[i + 1]);
            let v = sub(&a, &b);
            out.push(ChainLink {
                k,
                label: format!("pi1 dh{i}({k}) - pi0 dh{}({k})", i + 1),
                residual: residual_of(&v, &[&a, &b]),
                vector: v,
            });
        }
        let end = pi1.matvec(&block[nk]);
        // scale by the size of the tensor applied to the gradient
        let scale = 1.0 + pi1.max_abs() * max_abs(&block[nk]);
        out.push(ChainLink {
            k,
            label: format!("pi1 dh{nk}({k})"),
            residual: Residual::new(max_abs(&end), scale),
            vector: end,
        });
    }
    Ok(out)
}

/// `(π₁ − λ π₀)∇h⁽ᵏ⁾(λ)` for each block.
pub fn casimir_pencil_residual_at(
    ext: &ExtendedSystem,
    x: &[f64],
    lambda: f64,
) -> Result<(Vec<Vec<f64>>, Residual)> {
    let d = ext.dim();
    let grads = ext.hamiltonian_gradients(x)?;
    let pi0 = ext.pi0().matrix(x)?;
    let pi1 = ext.pi1().matrix(x)?;
    let pencil = Mat::from_fn(d, d, |i, j| pi1[(i, j)] - lambda * pi0[(i, j)]);
    let mut vectors = Vec::new();
    let mut worst = Residual::zero();
    for block in &grads {
        let nk = block.len() - 1;
        let mut g = vec![0.0; d];
        let mut gmag: f64 = 0.0;
        for (i, gi) in block.iter().enumerate() {
            let w = lambda.powi((nk - i) as i32);
            axpy(&mut g, w, gi);
            gmag = gmag.max(w.abs() * max_abs(gi));
        }
        let v = pencil.matvec(&g);
        let scale = 1.0 + pencil.max_abs() * gmag;
        worst = worst.worst(Residual::new(max_abs(&v), scale));
        vectors.push(v);
    }
    Ok((vectors, worst))
}

fn schouten_scale(a: &Mat<f64>, da: &[Mat<f64>], b: &Mat<f64>, db: &[Mat<f64>]) -> f64 {
    let dmax = |ds: &[Mat<f64>]| ds.iter().map(Mat::max_abs).fold(0.0, f64::max);
    1.0 + a.max_abs() * dmax(db) + b.max_abs() * dmax(da)
}

/// `[π₁, π₁]` and `[π₀, π₁]` residuals.
pub fn schouten_residuals_at(ext: &ExtendedSystem, x: &[f64]) -> Result<(Residual, Residual)> {
    let (p1, dp1) = crate::poisson::bivector_with_derivatives(&ext.pi1(), x)?;
    let (p0, dp0) = crate::poisson::bivector_with_derivatives(&ext.pi0(), x)?;
    let t11 = schouten_from_parts(&p1, &dp1, &p1, &dp1);
    let t01 = schouten_from_parts(&p0, &dp0, &p1, &dp1);
    Ok((
        Residual::new(t11.max_abs(), schouten_scale(&p1, &dp1, &p1, &dp1)),
        Residual::new(t01.max_abs(), schouten_scale(&p0, &dp0, &p1, &dp1)),
    ))
}

/// `L_{X₁⁽ʳ⁾} π₁D − Σ_l π₀∇F₁^{r,l} ∧ X₁⁽ˡ⁾`, worst `r`.
pub fn lie_identity_residual_at(ext: &ExtendedSystem, x: &[f64]) -> Result<Residual> {
    let m = ext.m();
    let (pd, dpd) = crate::poisson::bivector_with_derivatives(&ext.pi1d(), x)?;
    let pi0 = ext.pi0().matrix(x)?;
    let xs: Vec<(Vec<f64>, Mat<f64>)> = (1..=m)
        .map(|k| crate::poisson::value_and_jacobian(&ext.x1(k), x))
        .collect::<Result<_>>()?;
    let mut worst = Residual::zero();
    for r in 1..=m {
        let (xv, jx) = &xs[r - 1];
        let lie = lie_derivative_from_parts(xv, jx, &pd, &dpd);
        let mut rhs = Mat::zeros(pd.rows(), pd.cols());
        let mut rhs_mag: f64 = 0.0;
        for l in 1..=m {
            let df = crate::poisson::gradient(&ext.first_column(r, l, 1), x)?;
            let w = wedge_vectors(&pi0.matvec(&df), &xs[l - 1].0);
            rhs_mag = rhs_mag.max(w.max_abs());
            rhs = Mat::from_fn(rhs.rows(), rhs.cols(), |i, j| rhs[(i, j)] + w[(i, j)]);
        }
        let defect = lie.sub(&rhs).max_abs();
        let jmax = jx.max_abs();
        let dmax = dpd.iter().map(Mat::max_abs).fold(0.0, f64::max);
        let scale = 1.0 + (max_abs(xv) * dmax).max(2.0 * pd.max_abs() * jmax).max(rhs_mag);
        worst = worst.worst(Residual::new(defect, scale));
    }
    Ok(worst)
}

/// `[X₁⁽ⁱ⁾, Z_j] − π₀∇F₁^{i,j}`, worst pair.
pub fn commutator_identity_residual_at(ext: &ExtendedSystem, x: &[f64]) -> Result<Residual> {
    let m = ext.m();
    let n = ext.n();
    let pi0 = ext.pi0().matrix(x)?;
    let mut worst = Residual::zero();
    for i in 1..=m {
        for j in 1..=m {
            let z = crate::poisson::Coordinate {
                d: ext.dim(),
                slot: 2 * n + j - 1,
            };
            let lhs = crate::poisson::commutator(&ext.x1(i), &z, x)?;
            let rhs = pi0.matvec(&crate::poisson::gradient(&ext.first_column(i, j, 1), x)?);
            worst = worst.worst(residual_of(&sub(&lhs, &rhs), &[&lhs, &rhs]));
        }
    }
    Ok(worst)
}

/// All extended Hamiltonians pairwise, under `π₀` and under `π₁`.
pub fn double_involutivity_residual_at(ext: &ExtendedSystem, x: &[f64]) -> Result<Residual> {
    let grads: Vec<Vec<f64>> = ext.hamiltonian_gradients(x)?.into_iter().flatten().collect();
    let mut worst = Residual::zero();
    for pi in [ext.pi0().matrix(x)?, ext.pi1().matrix(x)?] {
        let norm = pi.max_abs();
        for a in 0..grads.len() {
            let pg = pi.matvec(&grads[a]);
            for b in a + 1..grads.len() {
                let v = crate::linalg::dot(&grads[b], &pg);
                let scale = 1.0 + norm * norm2(&grads[a]) * norm2(&grads[b]);
                worst = worst.worst(Residual::new(v.abs(), scale));
            }
        }
    }
    Ok(worst)
}

/// `π₀∇c_l = 0` and `π₁∇c_l = X₁⁽ˡ⁾`.
pub fn casimir_residual_at(ext: &ExtendedSystem, x: &[f64]) -> Result<Residual> {
    let n = ext.n();
    let d = ext.dim();
    let pi0 = ext.pi0().matrix(x)?;
    let pi1 = ext.pi1().matrix(x)?;
    let mut worst = Residual::zero();
    for l in 1..=ext.m() {
        let mut dc = vec![0.0; d];
        dc[2 * n + l - 1] = 1.0;
        let a = pi0.matvec(&dc);
        worst = worst.worst(residual_of(&a, &[]));
        let b = pi1.matvec(&dc);
        let xl = ext.x1(l).eval(x)?;
        worst = worst.worst(residual_of(&sub(&b, &xl), &[&b, &xl]));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};

    fn one_dof() -> ExtendedSystem {
        let sys = SeparationSystem::curve(
            "h",
            vec![1],
            vec![Expr::one()],
            parse("m^2/2 + l^2/2", &["l", "m"]).unwrap(),
        )
        .unwrap();
        ExtendedSystem::new(sys)
    }

    #[test]
    fn one_dof_extension_by_hand() {
        let ext = one_dof();
        let x = [0.7, -0.4, 0.3];
        let h = ext.extended_hamiltonians(&x).unwrap();
        let psi = 0.5 * 0.16 + 0.5 * 0.49;
        assert_eq!(h[0][0], 0.3);
        assert!((h[0][1] - (psi - 0.7 * 0.3)).abs() < 1e-15);
        // h1 = ψ − λc; π₁∇h₁ = 0
        let pi1 = pi1_at(&ext, &x).unwrap();
        let g = ext.hamiltonian_gradients(&x).unwrap();
        assert!(max_abs(&pi1.matvec(&g[0][1])) < 1e-15);
    }

    #[test]
    fn zero_casimirs_reduce_to_base() {
        let sys = SeparationSystem::curve(
            "b",
            vec![2],
            vec![Expr::one()],
            parse("m^2/2", &["l", "m"]).unwrap(),
        )
        .unwrap();
        let ext = ExtendedSystem::new(sys.clone());
        let x = [0.5, -1.0, 0.3, 0.8, 0.0];
        let h = ext.extended_hamiltonians(&x).unwrap();
        let base = sys.hamiltonians(&x[..4]).unwrap();
        assert_eq!(&h[0][1..], &base[..]);
    }

    #[test]
    fn one_dof_identities_hold() {
        let ext = one_dof();
        let x = [0.7, -0.4, 0.3];
        for link in gz_chain_residuals_at(&ext, &x).unwrap() {
            assert!(link.residual.passes(1e-14), "{}", link.label);
        }
        assert!(quasi_bih_residual_at(ext.base(), &x).unwrap().passes(1e-15));
        assert!(f_recursion_residual_at(ext.base(), &x).unwrap().passes(1e-15));
        let (s11, s01) = schouten_residuals_at(&ext, &x).unwrap();
        assert!(s11.passes(1e-14) && s01.passes(1e-14));
    }
}
