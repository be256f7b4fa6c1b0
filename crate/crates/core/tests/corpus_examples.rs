use stackel_core::corpus::{
    benenti, example1, example2, example3, exponential_class, multi_block, printed_schouten_residuals,
    sample_printed_point, CorpusEntry,
};
use stackel_core::expr::parse;
use stackel_core::flows::commuting_flows_residual;
use stackel_core::hj::{linearization_check, QuadraticClassData};
use stackel_core::phase::{oriented_canonicity_residual, PhasePoint};
use stackel_core::poisson::{commutator, Canonical, ExprScalar, ExprVector};
use stackel_core::sampling::Sampler;
use stackel_core::specfile::{export_spec, parse_spec};
use stackel_core::verify::{run_check, CheckId, VerifyOptions, SCHOUTEN_TOL};
use stackel_core::{Expr, SeparationSystem};

const QP3: [&str; 6] = ["q1", "q2", "q3", "p1", "p2", "p3"];

fn l(s: &str) -> Expr {
    parse(s, &["l"]).unwrap()
}

fn max_rel_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}

fn same_hamiltonians(a: &SeparationSystem, b: &SeparationSystem, seed: u64) {
    let mut s = Sampler::new(seed);
    for _ in 0..30 {
        let x = a.sample_point(&mut s).unwrap();
        let gap = max_rel_gap(&a.hamiltonians(&x).unwrap(), &b.hamiltonians(&x).unwrap());
        assert!(gap < 1e-12, "{} vs {}: {gap:e}", a.name(), b.name());
    }
}

#[test]
fn example1_is_benenti_with_quarter_f() {
    let gen = benenti(3, Expr::ratio(1, 4), Expr::zero()).unwrap();
    same_hamiltonians(&example1().unwrap().system, &gen, 1);
}

#[test]
fn example2_is_two_block_multi_block() {
    let gen = multi_block(&[2, 0], vec![2, 1], Expr::ratio(1, 4), Expr::zero()).unwrap();
    same_hamiltonians(&example2().unwrap().system, &gen, 2);
}

fn printed_tensor_is_poisson(entry: &CorpusEntry, seed: u64) {
    let mut s = Sampler::new(seed);
    for _ in 0..20 {
        let x = sample_printed_point(entry, &mut s).unwrap();
        let (self_bracket, with_pi0) = printed_schouten_residuals(entry, &x).unwrap();
        assert!(self_bracket.passes(SCHOUTEN_TOL), "{} [Π₁,Π₁] {:e}", entry.name, self_bracket.normalized());
        assert!(with_pi0.passes(SCHOUTEN_TOL), "{} [Π₀,Π₁] {:e}", entry.name, with_pi0.normalized());
    }
}

#[test]
fn printed_pi1_of_example1_is_poisson_and_compatible() {
    printed_tensor_is_poisson(&example1().unwrap(), 3);
}

#[test]
fn printed_pi1_of_example3_is_poisson_and_compatible() {
    printed_tensor_is_poisson(&example3().unwrap(), 4);
}

#[test]
fn example3_chart_is_anti_symplectic() {
    let sys = example3().unwrap().system;
    let chart = sys.chart("polynomial").unwrap();
    let mut s = Sampler::new(5);
    for _ in 0..20 {
        let x = PhasePoint::separation(sys.sample_point(&mut s).unwrap(), 3, 0).unwrap();
        let anti = oriented_canonicity_residual(chart, &x, -1.0).unwrap();
        let scale = 1.0 + chart.jacobian(&x.coords).unwrap().max_abs().powi(2);
        assert!(anti / scale < 1e-12, "anti-symplectic residual {anti:e}");
        assert!(oriented_canonicity_residual(chart, &x, 1.0).unwrap() > 1.0);
    }
}

fn canonical_field(h: &Expr) -> ExprVector {
    let (q, p) = QP3.split_at(3);
    let comps: Vec<Expr> = p
        .iter()
        .map(|v| h.differentiate(v))
        .chain(q.iter().map(|v| Expr::neg(h.differentiate(v))))
        .collect();
    ExprVector::new(&comps, &QP3).unwrap()
}

#[test]
fn non_commuting_flows_follow_the_commutator() {
    let ha = example1().unwrap().chart_hamiltonians.unwrap().hamiltonians[0].clone();
    let hb = parse("q1*p2 + q3^2/2", &QP3).unwrap();
    let (xa, xb) = (canonical_field(&ha), canonical_field(&hb));
    let (fa, fb) = (ExprScalar::new(&ha, &QP3).unwrap(), ExprScalar::new(&hb, &QP3).unwrap());
    let pi0 = Canonical { n: 3, extra: 0 };
    let tau = 1e-2;
    let mut s = Sampler::new(6);
    for _ in 0..5 {
        let y = s.vector(6, stackel_core::sampling::SampleBox { lo: -1.0, hi: 1.0 });
        let predicted = tau * tau * commutator(&xa, &xb, &y).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let x0 = PhasePoint::new(y, "flat", 3, 0).unwrap();
        let observed = commuting_flows_residual(&pi0, &fa, &fb, &x0, tau, 1e-4).unwrap();
        let ratio = observed / predicted;
        assert!((0.5..=2.0).contains(&ratio), "observed {observed:e}, predicted {predicted:e}");
    }
}

#[test]
fn exponential_class_is_involutive() {
    let sys = exponential_class(3, Expr::one(), Expr::ratio(1, 2), l("l^3")).unwrap();
    let opts = VerifyOptions {
        samples: Some(50),
        ..VerifyOptions::default()
    };
    for check in [CheckId::Separation, CheckId::Involutivity, CheckId::QuasiBih] {
        let rec = run_check(&sys, check, &opts);
        assert!(rec.pass, "{}: {:e} {:?}", rec.check, rec.max_residual, rec.error);
    }
}

#[test]
fn quartic_potential_linearizes() {
    let sys = benenti(2, Expr::one(), l("l^4")).unwrap();
    let data = QuadraticClassData::from_system(&sys).unwrap();
    let mut s = Sampler::new(7);
    for _ in 0..3 {
        let x0 = sys.sample_point(&mut s).unwrap();
        for flow in 1..=2 {
            let rep = linearization_check(&data, flow, &x0, 0.1, 1e-4, 1e-10).unwrap();
            assert!(rep.slope_error() < 1e-3, "flow {flow}: slopes {:?}", rep.slopes);
            assert!(rep.energy_drift < 1e-8, "flow {flow}: drift {:e}", rep.energy_drift);
        }
    }
}

#[test]
fn exported_spec_round_trips() {
    for entry in [example1().unwrap(), example3().unwrap()] {
        let text = export_spec(&entry.system);
        let back = parse_spec(&text, "exported").unwrap();
        assert_eq!(back.partition().sizes(), entry.system.partition().sizes());
        assert_eq!(back.charts().len(), entry.system.charts().len());
        same_hamiltonians(&entry.system, &back, 8);
        let mut s = Sampler::new(9);
        for (a, b) in entry.system.charts().iter().zip(back.charts()) {
            for _ in 0..10 {
                let x = entry.system.sample_point(&mut s).unwrap();
                assert!(max_rel_gap(&a.apply(&x).unwrap(), &b.apply(&x).unwrap()) < 1e-12);
            }
        }
        assert_eq!(export_spec(&back), text);
    }
}
