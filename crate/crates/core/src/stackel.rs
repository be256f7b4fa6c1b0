//! Separation relations and the generalized Stäckel matrix.
//!
//! Row `i` of a system reads
//! `Σ_k φᵢᵏ(λᵢ, μᵢ) · Σ_j λᵢ^(n_k − j) H_j⁽ᵏ⁾ = ψᵢ(λᵢ, μᵢ)`,
//! so the Hamiltonians solve the linear system `S·H = ψ` pointwise.
//! Separation coordinates are ordered `(λ₁..λₙ, μ₁..μₙ)`.

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr};
use crate::linalg::{max_abs, Mat};
use crate::phase::{CoordinateChart, PhasePoint};
use crate::poisson::ScalarField;
use crate::sampling::{SampleBox, Sampler, SINGULAR_MARGIN};
use crate::scalar::{seed, Scalar};

/// Position of a Hamiltonian within the block decomposition.
/// `k` and `j` are 1-based; `global` is the 0-based column index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockIndex {
    pub k: usize,
    pub j: usize,
    pub global: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::BadPartition("empty partition".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::BadPartition(format!("zero-sized block in {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Partition { sizes, offsets })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Size `n_k` of block `k` (1-based).
    pub fn size(&self, k: usize) -> usize {
        self.sizes[k - 1]
    }

    /// Global 0-based column of `(k, j)`, both 1-based.
    pub fn global(&self, k: usize, j: usize) -> usize {
        debug_assert!(j >= 1 && j <= self.sizes[k - 1]);
        self.offsets[k - 1] + j - 1
    }

    pub fn index(&self, k: usize, j: usize) -> BlockIndex {
        BlockIndex {
            k,
            j,
            global: self.global(k, j),
        }
    }

    /// Inverse of [`Partition::global`].
    pub fn locate(&self, global: usize) -> BlockIndex {
        let k = self
            .offsets
            .iter()
            .rposition(|&o| o <= global)
            .expect("global index in range");
        BlockIndex {
            k: k + 1,
            j: global - self.offsets[k] + 1,
            global,
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = BlockIndex> + '_ {
        (1..=self.m()).flat_map(move |k| (1..=self.size(k)).map(move |j| self.index(k, j)))
    }
}

/// The functions entering the separation relations, over variables `l`, `m`.
#[derive(Clone, Debug, PartialEq)]
pub enum SeparationData {
    /// Every row shares `φᵏ(l, m)` and `ψ(l, m)`.
    Curve { phi: Vec<Expr>, psi: Expr },
    /// `phi[i][k-1]` and `psi[i]` per row.
    PerRow { phi: Vec<Vec<Expr>>, psi: Vec<Expr> },
}

#[derive(Clone, Debug)]
pub struct SeparationSystem {
    name: String,
    partition: Partition,
    data: SeparationData,
    phi_c: Vec<Vec<Compiled>>,
    psi_c: Vec<Compiled>,
    charts: Vec<CoordinateChart>,
    singular: Vec<Expr>,
    singular_c: Vec<Compiled>,
}

const ROW_VARS: [&str; 2] = ["l", "m"];

impl SeparationSystem {
    /// A separation-curve system.
    pub fn curve(name: &str, partition: Vec<usize>, phi: Vec<Expr>, psi: Expr) -> Result<Self> {
        let partition = Partition::new(partition)?;
        let n = partition.n();
        let phi_row = phi
            .iter()
            .map(|e| e.compile(&ROW_VARS))
            .collect::<Result<Vec<_>>>()?;
        let psi_row = psi.compile(&ROW_VARS)?;
        Self::build(
            name,
            partition,
            SeparationData::Curve { phi, psi },
            vec![phi_row; n],
            vec![psi_row; n],
        )
    }

    /// Row-dependent separation relations.
    pub fn per_row(
        name: &str,
        partition: Vec<usize>,
        phi: Vec<Vec<Expr>>,
        psi: Vec<Expr>,
    ) -> Result<Self> {
        let partition = Partition::new(partition)?;
        let phi_c = phi
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.compile(&ROW_VARS))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let psi_c = psi
            .iter()
            .map(|e| e.compile(&ROW_VARS))
            .collect::<Result<Vec<_>>>()?;
        Self::build(
            name,
            partition,
            SeparationData::PerRow { phi, psi },
            phi_c,
            psi_c,
        )
    }

    fn build(
        name: &str,
        partition: Partition,
        data: SeparationData,
        phi_c: Vec<Vec<Compiled>>,
        psi_c: Vec<Compiled>,
    ) -> Result<Self> {
        let n = partition.n();
        let m = partition.m();
        if phi_c.len() != n || psi_c.len() != n {
            return Err(Error::Validation(format!(
                "{} rows of φ and {} of ψ for n = {n}",
                phi_c.len(),
                psi_c.len()
            )));
        }
        if phi_c.iter().any(|row| row.len() != m) {
            return Err(Error::Validation(format!(
                "every row needs {m} block functions φ"
            )));
        }
        let last_is_one = match &data {
            SeparationData::Curve { phi, .. } => phi[m - 1].is_one(),
            SeparationData::PerRow { phi, .. } => phi.iter().all(|r| r[m - 1].is_one()),
        };
        if !last_is_one {
            return Err(Error::Validation(
                "normalization: the last block function φ must be 1".into(),
            ));
        }
        Ok(SeparationSystem {
            name: name.to_string(),
            partition,
            data,
            phi_c,
            psi_c,
            charts: Vec::new(),
            singular: Vec::new(),
            singular_c: Vec::new(),
        })
    }

    pub fn with_chart(mut self, chart: CoordinateChart) -> Result<Self> {
        if chart.n() != self.n() {
            return Err(Error::dim(format!(
                "chart `{}` has n = {}, system has n = {}",
                chart.name(),
                chart.n(),
                self.n()
            )));
        }
        self.charts.push(chart);
        Ok(self)
    }

    /// Declare an extra singular set `{e = 0}` over `l1..ln, m1..mn`.
    pub fn with_singular(mut self, e: Expr) -> Result<Self> {
        let names = crate::phase::source_names(self.n());
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        self.singular_c.push(e.compile(&vars)?);
        self.singular.push(e);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn data(&self) -> &SeparationData {
        &self.data
    }

    pub fn charts(&self) -> &[CoordinateChart] {
        &self.charts
    }

    pub fn chart(&self, name: &str) -> Option<&CoordinateChart> {
        self.charts.iter().find(|c| c.name() == name)
    }

    pub fn singular_sets(&self) -> &[Expr] {
        &self.singular
    }

    pub fn is_curve(&self) -> bool {
        matches!(self.data, SeparationData::Curve { .. })
    }

    /// `φᵢᵏ` for row `i` (0-based) and block `k` (1-based).
    pub fn phi_at<S: Scalar>(&self, i: usize, k: usize, l: &S, m: &S) -> Result<S> {
        self.phi_c[i][k - 1].eval(&[l.clone(), m.clone()])
    }

    pub fn psi_row_at<S: Scalar>(&self, i: usize, l: &S, m: &S) -> Result<S> {
        self.psi_c[i].eval(&[l.clone(), m.clone()])
    }

    fn check_len<S>(&self, x: &[S]) -> Result<()> {
        if x.len() < 2 * self.n() {
            return Err(Error::dim(format!(
                "system `{}` needs {} separation coordinates, got {}",
                self.name,
                2 * self.n(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Generalized Stäckel matrix at `x = (λ, μ, …)`.
    pub fn stackel_matrix<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        self.check_len(x)?;
        let n = self.n();
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            let (l, m) = (&x[i], &x[n + i]);
            for k in 1..=self.m() {
                let phi = self.phi_at(i, k, l, m)?;
                let nk = self.partition.size(k);
                for j in 1..=nk {
                    s[(i, self.partition.global(k, j))] = phi.clone() * l.powi((nk - j) as i32);
                }
            }
        }
        Ok(s)
    }

    pub fn psi<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_len(x)?;
        let n = self.n();
        (0..n).map(|i| self.psi_row_at(i, &x[i], &x[n + i])).collect()
    }

    /// Hamiltonians in global order, solving `S·H = ψ`.
    pub fn hamiltonians<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        self.stackel_matrix(x)?.solve_vec(&self.psi(x)?)
    }

    /// Hamiltonians and control matrix `F = S⁻¹ΛS` from one factorization.
    pub fn hamiltonians_and_control<S: Scalar>(&self, x: &[S]) -> Result<(Vec<S>, Mat<S>)> {
        let n = self.n();
        let s = self.stackel_matrix(x)?;
        let psi = self.psi(x)?;
        let rhs = Mat::from_fn(n, n + 1, |i, j| {
            if j == 0 {
                psi[i].clone()
            } else {
                x[i].clone() * s[(i, j - 1)].clone()
            }
        });
        let sol = s.solve(&rhs)?;
        let h = sol.column(0);
        let f = Mat::from_fn(n, n, |i, j| sol[(i, j + 1)].clone());
        Ok((h, f))
    }

    /// `|det S| / Π_i ‖row_i‖₂`, in `[0, 1]`; small values mean S is
    /// nearly singular.
    pub fn hadamard_ratio(&self, x: &[f64]) -> Result<f64> {
        let s = self.stackel_matrix(x)?;
        let norms: f64 = (0..s.rows())
            .map(|i| s.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .product();
        if norms == 0.0 {
            return Ok(0.0);
        }
        Ok(s.det().abs() / norms)
    }

    /// Whether `x` keeps the sampling margins: distinct λ, declared singular
    /// expressions away from zero, finite data, and a solvable Stäckel matrix
    /// with Hadamard ratio at least [`MIN_HADAMARD_RATIO`].
    pub fn is_regular(&self, x: &[f64]) -> bool {
        let n = self.n();
        if x.len() < 2 * n {
            return false;
        }
        for i in 0..n {
            for j in i + 1..n {
                if (x[i] - x[j]).abs() < SINGULAR_MARGIN {
                    return false;
                }
            }
        }
        let base = &x[..2 * n];
        let guards_ok = self
            .singular_c
            .iter()
            .all(|g| g.eval(base).is_ok_and(|v: f64| v.abs() >= SINGULAR_MARGIN));
        if !guards_ok {
            return false;
        }
        match (self.hadamard_ratio(base), self.hamiltonians(base)) {
            (Ok(r), Ok(h)) => r >= MIN_HADAMARD_RATIO && h.iter().all(|v| v.is_finite()),
            _ => false,
        }
    }

    /// A regular separation point from `[−2, 2]^{2n}`.
    pub fn sample_point(&self, sampler: &mut Sampler) -> Result<Vec<f64>> {
        let d = 2 * self.n();
        sampler.draw_accepted(|s| s.vector(d, SampleBox::default()), |x| self.is_regular(x))
    }

    /// A regular extended point: base coordinates as in
    /// [`sample_point`](Self::sample_point), Casimirs from `[−1, 1]^m`.
    pub fn sample_extended_point(&self, sampler: &mut Sampler) -> Result<Vec<f64>> {
        let mut x = self.sample_point(sampler)?;
        x.extend(sampler.vector(self.m(), SampleBox::casimir()));
        Ok(x)
    }
}

/// `H_g` (0-based global index) as a field on the base phase space.
pub struct HamiltonianField<'a> {
    sys: &'a SeparationSystem,
    index: usize,
}

impl<'a> HamiltonianField<'a> {
    pub fn new(sys: &'a SeparationSystem, index: usize) -> Result<Self> {
        if index >= sys.n() {
            return Err(Error::dim(format!(
                "Hamiltonian index {index} out of range for n = {}",
                sys.n()
            )));
        }
        Ok(HamiltonianField { sys, index })
    }
}

impl ScalarField for HamiltonianField<'_> {
    fn dim(&self) -> usize {
        2 * self.sys.n()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        Ok(self.sys.hamiltonians(x)?.swap_remove(self.index))
    }
}

/// Samples whose Stäckel matrix has Hadamard ratio below this are rejected.
pub const MIN_HADAMARD_RATIO: f64 = 1e-6;

fn separation_coords<'a>(sys: &SeparationSystem, pt: &'a PhasePoint) -> Result<&'a [f64]> {
    if pt.n != sys.n() {
        return Err(Error::dim(format!(
            "point has n = {}, system has n = {}",
            pt.n,
            sys.n()
        )));
    }
    if pt.chart != crate::phase::SEPARATION_CHART {
        return Err(Error::Validation(format!(
            "expected separation coordinates, got chart `{}`",
            pt.chart
        )));
    }
    Ok(&pt.coords[..2 * pt.n])
}

pub fn stackel_matrix_at(sys: &SeparationSystem, pt: &PhasePoint) -> Result<Mat<f64>> {
    let x = separation_coords(sys, pt)?;
    let s = sys.stackel_matrix(x)?;
    s.solve_vec(&vec![0.0; s.rows()])?;
    Ok(s)
}

pub fn hamiltonians_at(sys: &SeparationSystem, pt: &PhasePoint) -> Result<Vec<f64>> {
    sys.hamiltonians(separation_coords(sys, pt)?)
}

/// Row `i` is `∇Hᵢ` over `(λ, μ)`, from `∂H = S⁻¹(∂ψ − ∂S·H)`.
pub fn hamiltonian_gradients_at(sys: &SeparationSystem, pt: &PhasePoint) -> Result<Mat<f64>> {
    let x = separation_coords(sys, pt)?;
    let n = sys.n();
    let d = 2 * n;
    let xd = seed(x);
    let sd = sys.stackel_matrix(&xd)?;
    let psid = sys.psi(&xd)?;
    let s = sd.map(|v| v.value);
    let psi: Vec<f64> = psid.iter().map(|v| v.value).collect();
    let h = s.solve_vec(&psi)?;
    let rhs = Mat::from_fn(n, d, |i, a| {
        let ds_h: f64 = (0..n).map(|j| sd[(i, j)].tangent(a) * h[j]).sum();
        psid[i].tangent(a) - ds_h
    });
    s.solve(&rhs)
}

/// Hamiltonians at a point given in `chart` coordinates. The preimage uses
/// the chart's registered inverse, or Newton iteration started at `guess`
/// (separation coordinates).
pub fn hamiltonians_in_chart(
    sys: &SeparationSystem,
    chart: &CoordinateChart,
    pt_chart: &PhasePoint,
    guess: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if pt_chart.chart != chart.name() {
        return Err(Error::Validation(format!(
            "point is in chart `{}`, expected `{}`",
            pt_chart.chart,
            chart.name()
        )));
    }
    let x = chart.preimage(&pt_chart.coords, guess)?;
    sys.hamiltonians(&x[..2 * sys.n()])
}

/// `max_i |Σ_j S_ij H_j − ψ_i|` together with the scale `1 + max|S||H| + max|ψ|`.
pub fn separation_residual(sys: &SeparationSystem, x: &[f64]) -> Result<(f64, f64)> {
    let s = sys.stackel_matrix(x)?;
    let psi = sys.psi(x)?;
    let h = s.solve_vec(&psi)?;
    let sh = s.matvec(&h);
    let r = sh
        .iter()
        .zip(&psi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = 1.0 + s.max_abs() * max_abs(&h) + max_abs(&psi);
    Ok((r, scale))
}
