use proptest::prelude::*;

use stackel_core::corpus::{benenti, cubic_class, multi_block};
use stackel_core::expr::parse;
use stackel_core::poisson::{bracket, gradient, Canonical, ExprScalar};
use stackel_core::sampling::Sampler;
use stackel_core::{Expr, SeparationSystem};

const VARS: [&str; 4] = ["q1", "q2", "p1", "p2"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0..VARS.len()).prop_map(|i| Expr::var(VARS[i])),
        (-3i64..=3).prop_map(Expr::int),
        (-3i64..=3, 1i64..=4).prop_map(|(a, b)| Expr::ratio(a, b)),
    ]
}

fn polynomial() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), 0i32..=3).prop_map(|(a, k)| Expr::pow(a, k)),
            inner.prop_map(Expr::neg),
        ]
    })
}

fn smooth() -> impl Strategy<Value = Expr> {
    polynomial().prop_recursive(2, 8, 1, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::exp(Expr::mul(Expr::ratio(1, 4), a))),
            inner.prop_map(|a| Expr::sqrt(Expr::add(Expr::int(2), Expr::pow(a, 2)))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, VARS.len())
}

fn eval(e: &Expr, x: &[f64]) -> f64 {
    e.compile(&VARS).unwrap().eval(x).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// `{g, h}` for the canonical tensor on `(q1, q2, p1, p2)`, symbolically.
fn canonical_bracket(g: &Expr, h: &Expr) -> Expr {
    Expr::sum((1..=2).map(|i| {
        let (q, p) = (format!("q{i}"), format!("p{i}"));
        Expr::sub(
            Expr::mul(g.differentiate(&q), h.differentiate(&p)),
            Expr::mul(g.differentiate(&p), h.differentiate(&q)),
        )
    }))
}

fn field(e: &Expr) -> ExprScalar {
    ExprScalar::new(e, &VARS).unwrap()
}

const PI0: Canonical = Canonical { n: 2, extra: 0 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_parse_back(e in smooth(), x in point()) {
        let back = parse(&e.to_string(), &VARS).unwrap();
        prop_assert!(close(eval(&e, &x), eval(&back, &x), 1e-12), "{e} vs {back}");
    }

    #[test]
    fn dual_gradient_matches_symbolic_and_finite_differences(e in smooth(), x in point()) {
        let g = gradient(&field(&e), &x).unwrap();
        let h = 1e-6;
        for (i, v) in VARS.iter().enumerate() {
            let symbolic = eval(&e.differentiate(v), &x);
            prop_assert!(close(g[i], symbolic, 1e-10), "∂{v}: {} vs {symbolic}", g[i]);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (eval(&e, &xp) - eval(&e, &xm)) / (2.0 * h);
            prop_assert!(close(g[i], fd, 1e-5), "∂{v}: {} vs fd {fd}", g[i]);
        }
    }

    #[test]
    fn mixed_partials_commute(e in smooth(), x in point(), i in 0..4usize, j in 0..4usize) {
        let a = eval(&e.differentiate(VARS[i]).differentiate(VARS[j]), &x);
        let b = eval(&e.differentiate(VARS[j]).differentiate(VARS[i]), &x);
        prop_assert!(close(a, b, 1e-10));
    }

    #[test]
    fn bracket_obeys_leibniz(f in polynomial(), g in polynomial(), h in polynomial(), x in point()) {
        let lhs = bracket(&field(&f), &field(&Expr::mul(g.clone(), h.clone())), &PI0, &x).unwrap();
        let rhs = bracket(&field(&f), &field(&g), &PI0, &x).unwrap() * eval(&h, &x)
            + eval(&g, &x) * bracket(&field(&f), &field(&h), &PI0, &x).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn bracket_obeys_jacobi(f in polynomial(), g in polynomial(), h in polynomial(), x in point()) {
        let terms = [
            bracket(&field(&f), &field(&canonical_bracket(&g, &h)), &PI0, &x).unwrap(),
            bracket(&field(&g), &field(&canonical_bracket(&h, &f)), &PI0, &x).unwrap(),
            bracket(&field(&h), &field(&canonical_bracket(&f, &g)), &PI0, &x).unwrap(),
        ];
        let scale = terms.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        prop_assert!(terms.iter().sum::<f64>().abs() <= 1e-10 * scale, "{terms:?}");
    }

    #[test]
    fn hamiltonians_are_symmetric_in_the_separation_pairs(
        seed in any::<u64>(),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
        family in 0..3usize,
    ) {
        let sys = curve_system(family);
        let mut s = Sampler::new(seed);
        let x = sys.sample_point(&mut s).unwrap();
        let n = sys.n();
        let mut y = x.clone();
        for (i, &p) in perm.iter().enumerate() {
            y[i] = x[p];
            y[n + i] = x[n + p];
        }
        let (hx, hy) = (sys.hamiltonians(&x).unwrap(), sys.hamiltonians(&y).unwrap());
        for (a, b) in hx.iter().zip(&hy) {
            prop_assert!(close(*a, *b, 1e-9), "{hx:?} vs {hy:?}");
        }
    }
}

fn curve_system(family: usize) -> SeparationSystem {
    let l = |s: &str| parse(s, &["l"]).unwrap();
    match family {
        0 => benenti(3, l("1 + l"), l("l^4")).unwrap(),
        1 => multi_block(&[1, 0], vec![2, 1], Expr::one(), l("l^3")).unwrap(),
        _ => cubic_class(1, 2, Expr::one(), l("l"), l("l^2")).unwrap(),
    }
}
