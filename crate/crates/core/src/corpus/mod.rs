//! Built-in systems: three worked three-degree-of-freedom examples with their
//! printed closed forms, and the class generators.
//!
//! Every printed item is compared with the generic pipeline at seeded
//! regular points. Items known to be misprinted carry a [`Quarantine`] with
//! the corrected form; the regression reports them as quarantined as long as
//! the printed form disagrees and the correction agrees.

mod examples;
mod generators;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{parse, Compiled, Expr};
use crate::lift::{quasi_bih_from_parts, ExtendedSystem, Residual};
use crate::linalg::Mat;
use crate::phase::{omega, target_names};
use crate::poisson::{gradient, schouten_at, BivectorField, Canonical, ExprBivector, ExprScalar};
use crate::sampling::Sampler;
use crate::stackel::SeparationSystem;

pub use examples::{example1, example2, example3};
pub use generators::{benenti, cubic_class, exponential_class, multi_block};

/// A pipeline quantity a printed item is compared against.
#[derive(Clone, Debug, PartialEq)]
pub enum Quantity {
    /// `H_g`, 0-based global index.
    Hamiltonian(usize),
    /// `F[r][c]`, 0-based.
    Control(usize, usize),
    /// `hᵢ⁽ᵏ⁾` (`i = 0` is the Casimir `c_k`); `k` 1-based.
    Extended { k: usize, i: usize },
    /// Entry `(i, j)` (0-based) of `s·J Π₁ Jᵀ`, the diagonal-λ tensor pushed
    /// to the entry's chart with its orientation sign `s`.
    Pi1(usize, usize),
    /// A function of the separation coordinates `l1..ln, m1..mn`.
    Separation(Expr),
}

/// A known misprint: why, and the form that does agree with the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Quarantine {
    pub reason: String,
    pub resolution: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrintedItem {
    pub id: String,
    pub quantity: Quantity,
    pub printed: Expr,
    pub quarantine: Option<Quarantine>,
}

/// How the variables of printed expressions are obtained from a point.
#[derive(Clone, Debug)]
pub enum PrintedContext {
    /// `q1..qn, p1..pn` from a registered chart, then the Casimirs.
    /// `orientation` is `+1` for a canonical chart, `−1` for an
    /// anti-canonical one.
    Chart { chart: String, orientation: f64 },
    /// `H1..Hn` of a reference system on the same separation coordinates,
    /// `s1..sn` the elementary symmetric functions of `λ`, `Hb1..Hbn` the
    /// entry's own Hamiltonians, then the Casimirs.
    StackelTransform { reference: Box<SeparationSystem> },
}

/// Printed tensors and functions, after resolving misprints, in the
/// coordinates of a chart.
#[derive(Clone, Debug)]
pub struct PrintedData {
    pub hamiltonians: Vec<Expr>,
    /// Upper triangle of `Π₁`, row-major.
    pub pi1_upper: Vec<Expr>,
    pub control: Vec<Vec<Expr>>,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub system: SeparationSystem,
    pub context: PrintedContext,
    pub items: Vec<PrintedItem>,
    pub printed: Option<PrintedData>,
    pub chart_hamiltonians: Option<ChartHamiltonians>,
}

/// The entry's Hamiltonians (global order) as closed forms over
/// `q1..qn, p1..pn` of a chart. The chart carries `orientation · Π₀` in
/// canonical form, so flows can be integrated there, away from the
/// collisions `λᵢ = λⱼ` where the separation coordinates degenerate.
#[derive(Clone, Debug)]
pub struct ChartHamiltonians {
    pub chart: String,
    pub orientation: f64,
    pub hamiltonians: Vec<Expr>,
}

impl ChartHamiltonians {
    fn new(chart: &str, orientation: f64, sources: &[&str]) -> Result<Self> {
        let names = target_names(sources.len());
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(ChartHamiltonians {
            chart: chart.into(),
            orientation,
            hamiltonians: sources.iter().map(|h| parse(h, &vars)).collect::<Result<_>>()?,
        })
    }

    pub fn n(&self) -> usize {
        self.hamiltonians.len()
    }

    /// `orientation · Π₀` over `q, p`.
    pub fn poisson(&self) -> Result<ExprBivector> {
        let n = self.n();
        let d = 2 * n;
        let names = target_names(n);
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut upper = vec![Expr::zero(); d * (d - 1) / 2];
        let unit = if self.orientation < 0.0 { Expr::int(-1) } else { Expr::one() };
        for i in 0..n {
            upper[crate::poisson::upper_index(d, i, n + i)] = unit.clone();
        }
        ExprBivector::new(&upper, &vars)
    }

    pub fn fields(&self) -> Result<Vec<ExprScalar>> {
        let names = target_names(self.n());
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        self.hamiltonians.iter().map(|h| ExprScalar::new(h, &vars)).collect()
    }
}

/// `c` for a single block, `c1..cm` otherwise.
pub fn casimir_names(m: usize) -> Vec<String> {
    if m == 1 {
        vec!["c".into()]
    } else {
        (1..=m).map(|k| format!("c{k}")).collect()
    }
}

/// Elementary symmetric polynomials `σ₁..σₙ` of `x`.
pub fn elementary_symmetric(x: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for &v in x {
        e.push(0.0);
        for k in (1..e.len()).rev() {
            e[k] += v * e[k - 1];
        }
    }
    e.remove(0);
    e
}

impl CorpusEntry {
    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    /// Variable names printed expressions may use.
    pub fn printed_vars(&self) -> Vec<String> {
        let n = self.n();
        let mut v = match &self.context {
            PrintedContext::Chart { .. } => target_names(n),
            PrintedContext::StackelTransform { .. } => ["H", "s", "Hb"]
                .iter()
                .flat_map(|p| (1..=n).map(move |i| format!("{p}{i}")))
                .collect(),
        };
        v.extend(casimir_names(self.m()));
        v
    }

    pub fn parse(&self, src: &str) -> Result<Expr> {
        let vars = self.printed_vars();
        let names: Vec<&str> = vars.iter().map(String::as_str).collect();
        parse(src, &names)
    }

    fn chart_orientation(&self) -> Option<(&crate::phase::CoordinateChart, f64)> {
        match &self.context {
            PrintedContext::Chart { chart, orientation } => {
                self.system.chart(chart).map(|c| (c, *orientation))
            }
            PrintedContext::StackelTransform { .. } => None,
        }
    }

    /// Values of [`printed_vars`](Self::printed_vars) at an extended point.
    pub fn printed_env(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut env = match &self.context {
            PrintedContext::Chart { chart, .. } => {
                let c = self
                    .system
                    .chart(chart)
                    .ok_or_else(|| Error::Validation(format!("no chart `{chart}`")))?;
                c.apply(&x[..2 * n])?
            }
            PrintedContext::StackelTransform { reference } => {
                let mut v = reference.hamiltonians(&x[..2 * n])?;
                v.extend(elementary_symmetric(&x[..n]));
                v.extend(self.system.hamiltonians(&x[..2 * n])?);
                v
            }
        };
        env.extend_from_slice(&x[2 * n..]);
        Ok(env)
    }

    /// The entry's chart point `y` and tensor `s·J Π₁ Jᵀ` at `x`.
    pub fn pushed_pi1(&self, x: &[f64]) -> Result<Mat<f64>> {
        let (chart, s) = self
            .chart_orientation()
            .ok_or_else(|| Error::Validation(format!("`{}` has no printed chart", self.name)))?;
        let n = self.n();
        let j = chart.jacobian(&x[..2 * n])?;
        let pi1 = Mat::from_fn(2 * n, 2 * n, |a, b| {
            if b == a + n {
                x[a]
            } else if a == b + n {
                -x[b]
            } else {
                0.0
            }
        });
        Ok(j.matmul(&pi1).matmul(&j.transpose()).map(|v| s * v))
    }
}

/// Pipeline values at one extended point, computed on demand.
struct PipelinePoint<'a> {
    entry: &'a CorpusEntry,
    ext: &'a ExtendedSystem,
    x: &'a [f64],
    hf: Option<(Vec<f64>, Mat<f64>)>,
    h_ext: Option<Vec<Vec<f64>>>,
    pi1: Option<Mat<f64>>,
    sep: &'a [Compiled],
}

impl PipelinePoint<'_> {
    fn value(&mut self, q: &Quantity, sep_slot: usize) -> Result<f64> {
        let n = self.entry.n();
        match q {
            Quantity::Hamiltonian(_) | Quantity::Control(..) if self.hf.is_none() => {
                self.hf = Some(self.entry.system.hamiltonians_and_control(&self.x[..2 * n])?);
                self.value(q, sep_slot)
            }
            Quantity::Hamiltonian(g) => Ok(self.hf.as_ref().expect("set").0[*g]),
            Quantity::Control(r, c) => Ok(self.hf.as_ref().expect("set").1[(*r, *c)]),
            Quantity::Extended { k, i } => {
                if self.h_ext.is_none() {
                    self.h_ext = Some(self.ext.extended_hamiltonians(self.x)?);
                }
                Ok(self.h_ext.as_ref().expect("set")[k - 1][*i])
            }
            Quantity::Pi1(i, j) => {
                if self.pi1.is_none() {
                    self.pi1 = Some(self.entry.pushed_pi1(self.x)?);
                }
                Ok(self.pi1.as_ref().expect("set")[(*i, *j)])
            }
            Quantity::Separation(_) => self.sep[sep_slot].eval(&self.x[..2 * n]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegressionStatus {
    Pass,
    Fail,
    /// Known misprint: printed form disagrees, its correction agrees.
    Quarantined,
    /// Quarantined item whose printed form agrees after all.
    StaleQuarantine,
    /// Quarantined item whose correction disagrees too.
    ResolutionFail,
}

impl RegressionStatus {
    pub fn is_failure(self) -> bool {
        matches!(
            self,
            RegressionStatus::Fail | RegressionStatus::StaleQuarantine | RegressionStatus::ResolutionFail
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            RegressionStatus::Pass => "pass",
            RegressionStatus::Fail => "FAIL",
            RegressionStatus::Quarantined => "quarantined",
            RegressionStatus::StaleQuarantine => "FAIL (stale quarantine)",
            RegressionStatus::ResolutionFail => "FAIL (resolution disagrees)",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionRecord {
    pub id: String,
    pub status: RegressionStatus,
    /// max over samples of `|printed − pipeline| / (1 + max(|printed|, |pipeline|))`
    pub printed_relative: f64,
    pub resolved_relative: Option<f64>,
    pub reason: Option<String>,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Chart images used by the regression stay in `[−B, B]`. The printed
/// forms are polynomials of degree up to six in the chart coordinates, so
/// far out their values are dominated by cancellation between huge terms.
pub const REGRESSION_CHART_BOUND: f64 = 5.0;

/// Minimum `|λᵢ − λⱼ|` at regression points. Charts built from divided
/// differences `μᵢ / Π(λᵢ − λⱼ)` cancel catastrophically near collisions.
pub const REGRESSION_MIN_GAP: f64 = 0.1;

/// Compare every printed item with the pipeline at `samples` regular
/// extended points drawn with `seed`; an item passes at relative error
/// `tol`. Points come from [`sample_printed_point`].
pub fn run_regression(entry: &CorpusEntry, samples: usize, seed: u64, tol: f64) -> Result<Vec<RegressionRecord>> {
    let vars = entry.printed_vars();
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    let sep_names = crate::phase::source_names(entry.n());
    let sep_vars: Vec<&str> = sep_names.iter().map(String::as_str).collect();
    let mut sep = Vec::new();
    let mut sep_slot = Vec::new();
    let mut printed = Vec::new();
    let mut resolved = Vec::new();
    for item in &entry.items {
        sep_slot.push(sep.len());
        if let Quantity::Separation(e) = &item.quantity {
            sep.push(e.compile(&sep_vars)?);
        }
        printed.push(item.printed.compile(&names)?);
        resolved.push(
            item.quarantine
                .as_ref()
                .map(|q| q.resolution.compile(&names))
                .transpose()?,
        );
    }
    let ext = ExtendedSystem::new(entry.system.clone());
    let mut sampler = Sampler::new(seed);
    let mut worst_printed = vec![0.0f64; entry.items.len()];
    let mut worst_resolved = vec![0.0f64; entry.items.len()];
    for _ in 0..samples {
        let x = sample_printed_point(entry, &mut sampler)?;
        let env = entry.printed_env(&x)?;
        let mut point = PipelinePoint {
            entry,
            ext: &ext,
            x: &x,
            hf: None,
            h_ext: None,
            pi1: None,
            sep: &sep,
        };
        for (idx, item) in entry.items.iter().enumerate() {
            let truth = point.value(&item.quantity, sep_slot[idx])?;
            let p: f64 = printed[idx].eval(&env)?;
            worst_printed[idx] = worst_printed[idx].max(relative(p, truth));
            if let Some(r) = &resolved[idx] {
                let v: f64 = r.eval(&env)?;
                worst_resolved[idx] = worst_resolved[idx].max(relative(v, truth));
            }
        }
    }
    Ok(entry
        .items
        .iter()
        .enumerate()
        .map(|(idx, item)| {
            let agrees = worst_printed[idx] <= tol;
            let (status, resolved_relative) = match &item.quarantine {
                None if agrees => (RegressionStatus::Pass, None),
                None => (RegressionStatus::Fail, None),
                Some(_) => {
                    let r = worst_resolved[idx];
                    let status = if agrees {
                        RegressionStatus::StaleQuarantine
                    } else if r > tol {
                        RegressionStatus::ResolutionFail
                    } else {
                        RegressionStatus::Quarantined
                    };
                    (status, Some(r))
                }
            };
            RegressionRecord {
                id: item.id.clone(),
                status,
                printed_relative: worst_printed[idx],
                resolved_relative,
                reason: item.quarantine.as_ref().map(|q| q.reason.clone()),
            }
        })
        .collect())
}

/// A regular extended point at which the printed forms evaluate
/// accurately: `|λᵢ − λⱼ| ≥` [`REGRESSION_MIN_GAP`] and, for chart-based
/// entries, chart image in `[−B, B]`, `B =` [`REGRESSION_CHART_BOUND`].
pub fn sample_printed_point(entry: &CorpusEntry, sampler: &mut Sampler) -> Result<Vec<f64>> {
    let chart = entry.chart_orientation().map(|(c, _)| c);
    let n = entry.n();
    let well_conditioned = |x: &[f64]| {
        let separated = (0..n).all(|i| (i + 1..n).all(|j| (x[i] - x[j]).abs() >= REGRESSION_MIN_GAP));
        separated
            && chart.is_none_or(|c| {
                c.apply(&x[..2 * n])
                    .is_ok_and(|y: Vec<f64>| y.iter().all(|v| v.abs() <= REGRESSION_CHART_BOUND))
            })
    };
    sampler.draw_accepted(
        |s| entry.system.sample_extended_point(s),
        |x| x.as_ref().map_or(true, |x| well_conditioned(x)),
    )?
}

/// Count of records per status.
pub fn regression_summary(records: &[RegressionRecord]) -> BTreeMap<RegressionStatus, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        *out.entry(r.status).or_insert(0) += 1;
    }
    out
}

fn printed_data(entry: &CorpusEntry) -> Result<&PrintedData> {
    entry
        .printed
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("`{}` has no printed tensor data", entry.name)))
}

fn chart_vars(n: usize) -> Vec<String> {
    target_names(n)
}

/// Printed `Π₁` (resolved, upper triangle completed antisymmetrically) as a
/// field over `q1..qn, p1..pn`.
pub fn printed_pi1(entry: &CorpusEntry) -> Result<ExprBivector> {
    let names = chart_vars(entry.n());
    let vars: Vec<&str> = names.iter().map(String::as_str).collect();
    ExprBivector::new(&printed_data(entry)?.pi1_upper, &vars)
}

/// Chart image (phase block only) of a separation point.
pub fn chart_point(entry: &CorpusEntry, x: &[f64]) -> Result<Vec<f64>> {
    let n = entry.n();
    let (chart, _) = entry
        .chart_orientation()
        .ok_or_else(|| Error::Validation(format!("`{}` has no printed chart", entry.name)))?;
    chart.apply(&x[..2 * n])
}

/// `Π₁∇Hᵢ = Σ_j F_ij Π₀∇H_j` evaluated entirely from printed (resolved)
/// data at the chart image of `x`.
pub fn printed_quasi_bih_residual(entry: &CorpusEntry, x: &[f64]) -> Result<Residual> {
    let data = printed_data(entry)?;
    let n = entry.n();
    let names = chart_vars(n);
    let vars: Vec<&str> = names.iter().map(String::as_str).collect();
    let y = chart_point(entry, x)?;
    let grads = data
        .hamiltonians
        .iter()
        .map(|h| gradient(&ExprScalar::new(h, &vars)?, &y))
        .collect::<Result<Vec<_>>>()?;
    let f = Mat::from_rows(
        data.control
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.compile(&vars)?.eval(&y))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?,
    );
    let pi1 = printed_pi1(entry)?.matrix(&y)?;
    Ok(quasi_bih_from_parts(&omega(n), &pi1, &grads, &f))
}

/// Schouten brackets `[Π₁, Π₁]` and `[Π₀, Π₁]` of the printed tensor at the
/// chart image of `x`, as residuals with scale `1 + max|Π₁|`.
pub fn printed_schouten_residuals(entry: &CorpusEntry, x: &[f64]) -> Result<(Residual, Residual)> {
    let pi1 = printed_pi1(entry)?;
    let pi0 = Canonical { n: entry.n(), extra: 0 };
    let y = chart_point(entry, x)?;
    let scale = 1.0 + pi1.matrix(&y)?.max_abs();
    Ok((
        Residual::new(schouten_at(&pi1, &pi1, &y)?.max_abs(), scale),
        Residual::new(schouten_at(&pi0, &pi1, &y)?.max_abs(), scale),
    ))
}

/// The systems every battery runs over: the three worked examples,
/// `benenti(4)` with `γ = λ⁴` and `exponential_class(2)` with `γ = λ²`.
pub fn standard_systems() -> Result<Vec<SeparationSystem>> {
    let l = |s: &str| parse(s, &["l"]);
    Ok(vec![
        example1()?.system,
        example2()?.system,
        example3()?.system,
        benenti(4, Expr::one(), l("l^4")?)?,
        exponential_class(2, Expr::one(), Expr::one(), l("l^2")?)?,
    ])
}

/// Names accepted by [`builtin`], in the order of [`standard_systems`].
pub const BUILTIN_NAMES: [&str; 5] = ["example1", "example2", "example3", "benenti4", "exponential2"];

/// A standard system by name.
pub fn builtin(name: &str) -> Result<Option<SeparationSystem>> {
    match BUILTIN_NAMES.iter().position(|n| *n == name) {
        Some(i) => Ok(Some(standard_systems()?.swap_remove(i))),
        None => Ok(None),
    }
}

/// A worked example with its printed data.
pub fn entry(name: &str) -> Result<Option<CorpusEntry>> {
    match name {
        "example1" => example1().map(Some),
        "example2" => example2().map(Some),
        "example3" => example3().map(Some),
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_symmetric_of_three() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0]), vec![6.0, 11.0, 6.0]);
    }

    #[test]
    fn chart_hamiltonians_match_pipeline() {
        use crate::poisson::ScalarField;
        for entry in [example1().unwrap(), example2().unwrap(), example3().unwrap()] {
            let ch = entry.chart_hamiltonians.as_ref().unwrap();
            let chart = entry.system.chart(&ch.chart).unwrap();
            let fields = ch.fields().unwrap();
            let mut s = Sampler::new(3);
            let mut worst = 0.0f64;
            for _ in 0..50 {
                let x = entry.system.sample_point(&mut s).unwrap();
                let y: Vec<f64> = chart.apply(&x).unwrap();
                if y.iter().any(|v| v.abs() > REGRESSION_CHART_BOUND) {
                    continue;
                }
                let h = entry.system.hamiltonians(&x).unwrap();
                for (f, want) in fields.iter().zip(&h) {
                    let got: f64 = f.eval(&y).unwrap();
                    worst = worst.max(relative(got, *want));
                }
            }
            assert!(worst < 1e-9, "{}: {worst:e}", entry.name);
        }
    }

    #[test]
    fn printed_items_regress() {
        for entry in [example1().unwrap(), example2().unwrap(), example3().unwrap()] {
            let recs = run_regression(&entry, 100, 7, 1e-9).unwrap();
            for r in &recs {
                println!("{:<24} {:<28} {:.2e} {:?}", r.id, r.status.label(), r.printed_relative, r.resolved_relative);
            }
            assert!(recs.iter().all(|r| !r.status.is_failure()), "{}", entry.name);
        }
    }

    #[test]
    fn casimir_naming() {
        assert_eq!(casimir_names(1), vec!["c"]);
        assert_eq!(casimir_names(2), vec!["c1", "c2"]);
    }
}
