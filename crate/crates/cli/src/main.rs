use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stackel_core::catalog::generate_catalog;
use stackel_core::control::control_matrix_at;
use stackel_core::corpus::{self, run_regression, BUILTIN_NAMES};
use stackel_core::flows::{conservation_report, integrate};
use stackel_core::hj::{linearization_check, QuadraticClassData};
use stackel_core::phase::PhasePoint;
use stackel_core::poisson::{BivectorField, Canonical, ScalarField};
use stackel_core::sampling::{SampleBox, Sampler};
use stackel_core::specfile::{export_spec, load_spec};
use stackel_core::stackel::HamiltonianField;
use stackel_core::verify::{parse_check_filter, run_verify, VerifyOptions, DEFAULT_SEED};
use stackel_core::{Error, SeparationSystem};

const EXIT_CHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Verification toolkit for Stäckel-separable Hamiltonian systems.
///
/// SPEC is a system file or `builtin:NAME`, NAME one of
/// example1, example2, example3, benenti4, exponential2.
#[derive(Parser)]
#[command(name = "stackel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification battery and write a JSON report.
    Verify {
        spec: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Override every check's tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Comma-separated check ids (see `stackel catalog`).
        #[arg(long)]
        checks: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print dimensions, the block pattern of F and the chain layout.
    Show { spec: String },
    /// Integrate the flow of one Hamiltonian in separation coordinates.
    Integrate {
        spec: String,
        /// 1-based Hamiltonian index.
        #[arg(long, default_value_t = 1)]
        flow: usize,
        #[command(flatten)]
        start: Start,
        #[arg(long, default_value_t = 5.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Largest acceptable normalized drift of any Hamiltonian.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Trajectory CSV path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Conservation report (JSON) path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Integrate in the printed chart of a worked example
        /// (`builtin:example1..3`); --x0 is then `q1,..,qn,p1,..,pn`, drawn
        /// from [−1, 1] when omitted.
        #[arg(long)]
        chart: bool,
    },
    /// Check that the flow of one Hamiltonian is linear in the action derivatives.
    Hj {
        spec: String,
        #[arg(long, default_value_t = 1)]
        flow: usize,
        #[command(flatten)]
        start: Start,
        #[arg(long, default_value_t = 0.1)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        /// Quadrature tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Largest acceptable |slope − δ|.
        #[arg(long, default_value_t = 1e-3)]
        slope_tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare a worked example's printed data with the pipeline.
    Regress {
        /// example1, example2 or example3.
        name: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Write a system in the system-file format.
    Export {
        spec: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the markdown catalog of verification checks.
    Catalog {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Start {
    /// Initial point `l1,..,ln,m1,..,mn`; drawn with --seed when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

enum Failure {
    Check(String),
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(spec: &str) -> Result<SeparationSystem, Failure> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return corpus::builtin(name)?.ok_or_else(|| {
            Failure::Input(format!("unknown builtin `{name}`; known: {}", BUILTIN_NAMES.join(", ")))
        });
    }
    Ok(load_spec(Path::new(spec))?)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn start_point(sys: &SeparationSystem, start: &Start) -> Result<Vec<f64>, Failure> {
    match &start.x0 {
        Some(x) if x.len() == 2 * sys.n() => Ok(x.clone()),
        Some(x) => Err(Failure::Input(format!(
            "--x0 has {} values, expected {}",
            x.len(),
            2 * sys.n()
        ))),
        None => Ok(sys.sample_point(&mut Sampler::new(start.seed))?),
    }
}

fn check_flow(sys: &SeparationSystem, flow: usize) -> Outcome {
    if flow == 0 || flow > sys.n() {
        return Err(Failure::Input(format!("--flow must be in 1..={}", sys.n())));
    }
    Ok(())
}

fn cmd_verify(
    spec: &str,
    samples: Option<usize>,
    seed: u64,
    tol: Option<f64>,
    checks: Option<&str>,
    report_path: Option<&Path>,
) -> Outcome {
    let sys = load(spec)?;
    let checks = checks.map(parse_check_filter).transpose()?;
    let opts = VerifyOptions {
        samples,
        seed,
        tol,
        checks,
    };
    let report = run_verify(&sys, &opts);
    println!("system {} (n = {}, partition {:?}, seed {seed})", report.system, report.n, report.partition);
    for c in &report.checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        print!(
            "  {status:4}  {:22} max {:.3e}  mean {:.3e}  tol {:.0e}  ({} samples)",
            c.check, c.max_residual, c.mean_residual, c.tolerance, c.samples
        );
        match &c.error {
            Some(e) => println!("  error: {e}"),
            None => println!(),
        }
    }
    if let Some(p) = report_path {
        write_or_print(Some(p), &report.to_json())?;
    }
    let failed = report.checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        println!("all {} checks pass", report.checks.len());
        Ok(())
    } else if report.has_errors() {
        Err(Failure::Numerical(format!("{failed} check(s) failed, some with evaluation errors")))
    } else {
        Err(Failure::Check(format!("{failed} check(s) failed")))
    }
}

fn cmd_show(spec: &str) -> Outcome {
    let sys = load(spec)?;
    let p = sys.partition();
    println!("system     {}", sys.name());
    println!("n          {}", sys.n());
    println!("m          {}", sys.m());
    println!("partition  {:?}", p.sizes());
    println!("charts     {}", sys.charts().iter().map(|c| c.name()).collect::<Vec<_>>().join(", "));
    let x = sys.sample_point(&mut Sampler::new(DEFAULT_SEED))?;
    let f = control_matrix_at(&sys, &PhasePoint::separation(x, sys.n(), 0)?)?;
    println!("F pattern (* first column, 1 superdiagonal, . zero)");
    for row in f.pattern() {
        println!("  {row}");
    }
    println!("chains (h0 is the Casimir c_k)");
    for k in 1..=p.m() {
        let links: Vec<String> = (0..=p.size(k)).map(|i| format!("h{i}({k})")).collect();
        println!("  block {k}: {}", links.join(" -> "));
    }
    Ok(())
}

struct Run<'a> {
    flow: usize,
    start: &'a Start,
    t_max: f64,
    dt: f64,
    tol: f64,
}

fn finish_integration<B: BivectorField, F: ScalarField>(
    name: &str,
    run: &Run,
    pi: &B,
    fields: &[F],
    x0: PhasePoint,
    output: Option<&Path>,
    report_path: Option<&Path>,
) -> Outcome {
    let traj = integrate(pi, &fields[run.flow - 1], &x0, run.t_max, run.dt).map_err(|f| {
        if let Some(p) = output {
            let _ = f.partial.write_csv(p);
        }
        eprintln!("flow stopped at t = {}", f.time);
        Failure::from(f.error)
    })?;
    if let Some(p) = output {
        traj.write_csv(p)?;
    }
    let drift = conservation_report(&traj, fields)?;
    println!(
        "flow H{} in {} coordinates, {} steps of {:.3e} to t = {}",
        run.flow,
        x0.chart,
        traj.len() - 1,
        traj.dt,
        run.t_max
    );
    for (i, d) in drift.iter().enumerate() {
        println!("  H{} drift {d:.3e}", i + 1);
    }
    let worst = drift.iter().copied().fold(0.0, f64::max);
    if let Some(p) = report_path {
        let doc = json!({
            "system": name,
            "chart": x0.chart,
            "flow": run.flow,
            "t_max": run.t_max,
            "dt": traj.dt,
            "method": traj.method,
            "x0": x0.coords,
            "drift": drift,
            "tolerance": run.tol,
            "pass": worst <= run.tol,
        });
        write_or_print(Some(p), &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")))?;
    }
    if worst <= run.tol {
        Ok(())
    } else {
        Err(Failure::Check(format!("drift {worst:.3e} exceeds {:.0e}", run.tol)))
    }
}

fn cmd_integrate(spec: &str, run: &Run, output: Option<&Path>, report_path: Option<&Path>) -> Outcome {
    let sys = load(spec)?;
    check_flow(&sys, run.flow)?;
    let x0 = start_point(&sys, run.start)?;
    let pt = PhasePoint::separation(x0, sys.n(), 0)?;
    let fields = (0..sys.n())
        .map(|i| HamiltonianField::new(&sys, i))
        .collect::<stackel_core::Result<Vec<_>>>()?;
    let pi = Canonical { n: sys.n(), extra: 0 };
    finish_integration(sys.name(), run, &pi, &fields, pt, output, report_path)
}

fn cmd_integrate_chart(spec: &str, run: &Run, output: Option<&Path>, report_path: Option<&Path>) -> Outcome {
    let name = spec
        .strip_prefix("builtin:")
        .ok_or_else(|| Failure::Input("--chart needs builtin:example1, example2 or example3".into()))?;
    let entry = corpus::entry(name)?
        .ok_or_else(|| Failure::Input(format!("`{name}` has no printed chart")))?;
    let ch = entry
        .chart_hamiltonians
        .as_ref()
        .ok_or_else(|| Failure::Input(format!("`{name}` has no chart Hamiltonians")))?;
    let n = ch.n();
    check_flow(&entry.system, run.flow)?;
    let x0 = match &run.start.x0 {
        Some(x) if x.len() == 2 * n => x.clone(),
        Some(x) => return Err(Failure::Input(format!("--x0 has {} values, expected {}", x.len(), 2 * n))),
        None => Sampler::new(run.start.seed).vector(2 * n, SampleBox::casimir()),
    };
    let pt = PhasePoint::new(x0, &ch.chart, n, 0)?;
    finish_integration(&entry.name, run, &ch.poisson()?, &ch.fields()?, pt, output, report_path)
}

#[allow(clippy::too_many_arguments)]
fn cmd_hj(
    spec: &str,
    flow: usize,
    start: &Start,
    t_max: f64,
    dt: f64,
    tol: f64,
    slope_tol: f64,
    report_path: Option<&Path>,
) -> Outcome {
    let sys = load(spec)?;
    check_flow(&sys, flow)?;
    let data = QuadraticClassData::from_system(&sys)?;
    let x0 = start_point(&sys, start)?;
    let rep = linearization_check(&data, flow, &x0, t_max, dt, tol)?;
    println!("flow H{flow} over t in [0, {}]", rep.t_max);
    println!("  j  slope            expected  fit residual");
    for (j, (s, r)) in rep.slopes.iter().zip(&rep.fit_residuals).enumerate() {
        let want = if j + 1 == flow { 1.0 } else { 0.0 };
        println!("  {}  {s:+.10e}  {want}         {r:.3e}", j + 1);
    }
    println!("  energy drift {:.3e}, branch error {:.3e}", rep.energy_drift, rep.branch_error);
    let pass = rep.slope_error() <= slope_tol && rep.energy_drift <= 1e-8;
    if let Some(p) = report_path {
        let doc = json!({
            "system": sys.name(),
            "flow": flow,
            "t_max": rep.t_max,
            "dt": dt,
            "quadrature_tol": tol,
            "x0": x0,
            "slopes": rep.slopes,
            "fit_residuals": rep.fit_residuals,
            "slope_error": rep.slope_error(),
            "energy_drift": rep.energy_drift,
            "branch_error": rep.branch_error,
            "pass": pass,
        });
        write_or_print(Some(p), &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")))?;
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "slope error {:.3e} (tol {slope_tol:.0e}), energy drift {:.3e} (tol 1e-8)",
            rep.slope_error(),
            rep.energy_drift
        )))
    }
}

fn cmd_regress(name: &str, samples: usize, seed: u64, tol: f64) -> Outcome {
    let entry = corpus::entry(name)?
        .ok_or_else(|| Failure::Input(format!("no printed data for `{name}`; use example1..example3")))?;
    let records = run_regression(&entry, samples, seed, tol)?;
    let mut failures = 0;
    for r in &records {
        failures += usize::from(r.status.is_failure());
        let resolved = r.resolved_relative.map(|v| format!("  resolved {v:.2e}")).unwrap_or_default();
        println!("  {:28} {:12} printed {:.2e}{resolved}", r.id, r.status.label(), r.printed_relative);
        if let Some(reason) = &r.reason {
            println!("      {reason}");
        }
    }
    for (status, count) in corpus::regression_summary(&records) {
        println!("{:12} {count}", status.label());
    }
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{failures} item(s) failed")))
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Verify {
            spec,
            samples,
            seed,
            tol,
            checks,
            report,
        } => cmd_verify(&spec, samples, seed, tol, checks.as_deref(), report.as_deref()),
        Command::Show { spec } => cmd_show(&spec),
        Command::Integrate {
            spec,
            flow,
            start,
            t_max,
            dt,
            tol,
            output,
            report,
            chart,
        } => {
            let run = Run {
                flow,
                start: &start,
                t_max,
                dt,
                tol,
            };
            if chart {
                cmd_integrate_chart(&spec, &run, output.as_deref(), report.as_deref())
            } else {
                cmd_integrate(&spec, &run, output.as_deref(), report.as_deref())
            }
        }
        Command::Hj {
            spec,
            flow,
            start,
            t_max,
            dt,
            tol,
            slope_tol,
            report,
        } => cmd_hj(&spec, flow, &start, t_max, dt, tol, slope_tol, report.as_deref()),
        Command::Regress {
            name,
            samples,
            seed,
            tol,
        } => cmd_regress(&name, samples, seed, tol),
        Command::Export { spec, output } => write_or_print(output.as_deref(), &export_spec(&load(&spec)?)),
        Command::Catalog { output } => write_or_print(output.as_deref(), &generate_catalog()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failure: {msg}");
            ExitCode::from(EXIT_CHECK)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
