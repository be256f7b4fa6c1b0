//! The three worked examples and their printed closed forms.

use super::{ChartHamiltonians, CorpusEntry, PrintedContext, PrintedData, PrintedItem, Quantity, Quarantine};
use crate::error::Result;
use crate::expr::{expand_definitions, parse, Expr};
use crate::phase::CoordinateChart;
use crate::stackel::SeparationSystem;

const L3: [&str; 3] = ["l1", "l2", "l3"];
const LM3: [&str; 6] = ["l1", "l2", "l3", "m1", "m2", "m3"];

fn row(src: &str) -> Result<Expr> {
    parse(src, &["l", "m"])
}

impl CorpusEntry {
    fn item(&mut self, id: &str, quantity: Quantity, printed: &str) -> Result<()> {
        let printed = self.parse(printed)?;
        self.items.push(PrintedItem {
            id: format!("{}/{id}", self.name),
            quantity,
            printed,
            quarantine: None,
        });
        Ok(())
    }

    fn misprint(
        &mut self,
        id: &str,
        quantity: Quantity,
        printed: &str,
        resolution: &str,
        reason: &str,
    ) -> Result<()> {
        self.item(id, quantity, printed)?;
        let resolution = self.parse(resolution)?;
        self.items.last_mut().expect("pushed").quarantine = Some(Quarantine {
            reason: reason.to_string(),
            resolution,
        });
        Ok(())
    }

    /// One item per off-diagonal entry of a printed `2n × 2n` tensor.
    /// `fixes` maps 1-based `(i, j)` to `(resolution, reason)`.
    fn tensor_items(
        &mut self,
        rows: &[&[&str]],
        factor: &str,
        fixes: &[((usize, usize), &str, &str)],
    ) -> Result<()> {
        for (i, r) in rows.iter().enumerate() {
            for (j, src) in r.iter().enumerate() {
                if i == j {
                    continue;
                }
                let id = format!("Pi1({},{})", i + 1, j + 1);
                let printed = format!("({factor})*({src})");
                match fixes.iter().find(|f| f.0 == (i + 1, j + 1)) {
                    Some((_, fix, why)) => {
                        let fix = format!("({factor})*({fix})");
                        self.misprint(&id, Quantity::Pi1(i, j), &printed, &fix, why)?
                    }
                    None => self.item(&id, Quantity::Pi1(i, j), &printed)?,
                }
            }
        }
        Ok(())
    }

    fn control_items(&mut self, rows: &[[&str; 3]], fixes: &[((usize, usize), &str, &str)]) -> Result<()> {
        for (i, r) in rows.iter().enumerate() {
            for (j, src) in r.iter().enumerate() {
                let id = format!("F({},{})", i + 1, j + 1);
                match fixes.iter().find(|f| f.0 == (i + 1, j + 1)) {
                    Some((_, fix, why)) => self.misprint(&id, Quantity::Control(i, j), src, fix, why)?,
                    None => self.item(&id, Quantity::Control(i, j), src)?,
                }
            }
        }
        Ok(())
    }

    fn parse_all(&self, srcs: &[&str]) -> Result<Vec<Expr>> {
        srcs.iter().map(|s| self.parse(s)).collect()
    }

    fn upper_of(&self, rows: &[&[&str]], factor: &str) -> Result<Vec<Expr>> {
        let mut out = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for src in &r[i + 1..] {
                out.push(self.parse(&format!("({factor})*({src})"))?);
            }
        }
        Ok(out)
    }
}

/// Flat coordinates of the free quadratic curve: `q₁ = σ₁`,
/// `q₂ = 2(σ₂ − q₁²/4)`, `q₃ = 4σ₃ − q₁q₂`, lifted canonically.
pub(crate) fn flat_chart() -> Result<CoordinateChart> {
    let defs = expand_definitions(
        &[
            ("s1", "l1 + l2 + l3"),
            ("s2", "l1*l2 + l1*l3 + l2*l3"),
            ("s3", "l1*l2*l3"),
            ("q1", "s1"),
            ("q2", "2*(s2 - q1^2/4)"),
            ("q3", "4*s3 - q1*q2"),
        ],
        &L3,
    )?;
    CoordinateChart::point_transform("flat", defs[3..].iter().map(|(_, e)| e.clone()).collect())
}

const EX1_H: [&str; 3] = [
    "p1*p3 + p2^2/2",
    "q3*p3^2/2 - q1*p2^2/2 + q2*p2*p3/2 - p1*p2/2 - q1*p1*p3/2",
    "q2^2*p3^2/8 + q1^2*p2^2/8 + p1^2/8 + q1*p1*p2/4 + q2*p1*p3/4 - q1*q2*p2*p3/4 - q3*p2*p3/2",
];

const EX1_PI1: [&[&str]; 6] = [
    &["0", "0", "0", "q1", "-1", "0"],
    &["0", "0", "0", "q2", "0", "-1"],
    &["0", "0", "0", "2*q3", "q2", "q1"],
    &["-q1", "-q2", "-2*q3", "0", "p2", "p3"],
    &["1", "0", "-q2", "-p2", "0", "0"],
    &["0", "1", "-q1", "-p3", "0", "0"],
];

/// `H₁λ² + H₂λ + H₃ = μ²/8` with its flat chart.
pub fn example1() -> Result<CorpusEntry> {
    let system = SeparationSystem::curve("example1", vec![3], vec![Expr::one()], row("m^2/8")?)?
        .with_chart(flat_chart()?)?;
    let mut e = CorpusEntry {
        name: "example1".into(),
        system,
        context: PrintedContext::Chart {
            chart: "flat".into(),
            orientation: 1.0,
        },
        items: Vec::new(),
        printed: None,
        chart_hamiltonians: None,
    };
    for (g, h) in EX1_H.iter().enumerate() {
        e.item(&format!("H{}", g + 1), Quantity::Hamiltonian(g), h)?;
    }
    e.tensor_items(&EX1_PI1, "1/2", &[])?;
    let f_printed = [
        ["q1", "1", "0"],
        ["-q1^2/4 - q2^2/2", "0", "1"],
        ["q1*q2/2 + q3/4", "0", "0"],
    ];
    let f_true = [
        ["q1", "1", "0"],
        ["-q1^2/4 - q2/2", "0", "1"],
        ["q1*q2/4 + q3/4", "0", "0"],
    ];
    e.control_items(
        &f_printed,
        &[
            ((2, 1), f_true[1][0], "q2 printed squared"),
            ((3, 1), f_true[2][0], "coefficient of q1*q2 printed as 1/2"),
        ],
    )?;
    e.item("h0", Quantity::Extended { k: 1, i: 0 }, "c")?;
    e.item("h1", Quantity::Extended { k: 1, i: 1 }, &format!("{} - c*q1", EX1_H[0]))?;
    e.misprint(
        "h2",
        Quantity::Extended { k: 1, i: 2 },
        "q3*p3^2/2 - q1^2*p2^2/2 + q2*p2*p3/2 - p1*p2/2 - q1*p1*p3/2 + (q1^2/4 + q2^2/2)*c",
        &format!("{} + (q1^2/4 + q2/2)*c", EX1_H[1]),
        "p2^2 coefficient printed with q1^2 instead of q1; c coefficient inherits the F(2,1) slip",
    )?;
    e.misprint(
        "h3",
        Quantity::Extended { k: 1, i: 3 },
        &format!("{} - (q1*q2/2 + q3/4)*c", EX1_H[2]),
        &format!("{} - (q1*q2/4 + q3/4)*c", EX1_H[2]),
        "c coefficient inherits the F(3,1) slip",
    )?;
    e.chart_hamiltonians = Some(ChartHamiltonians::new("flat", 1.0, &EX1_H)?);
    e.printed = Some(PrintedData {
        hamiltonians: e.parse_all(&EX1_H)?,
        pi1_upper: e.upper_of(&EX1_PI1, "1/2")?,
        control: f_true.iter().map(|r| e.parse_all(r)).collect::<Result<_>>()?,
    });
    Ok(e)
}

/// `λ²(H₁⁽¹⁾λ + H₂⁽¹⁾) + H₁⁽²⁾ = μ²/8`, compared with the first example
/// through the elementary symmetric functions of `λ`.
pub fn example2() -> Result<CorpusEntry> {
    let system = SeparationSystem::curve(
        "example2",
        vec![2, 1],
        vec![row("l^2")?, Expr::one()],
        row("m^2/8")?,
    )?
    .with_chart(flat_chart()?)?
    .with_singular(parse("l1*l2 + l1*l3 + l2*l3", &LM3)?)?;
    let reference = example1()?.system;
    let mut e = CorpusEntry {
        name: "example2".into(),
        system,
        context: PrintedContext::StackelTransform {
            reference: Box::new(reference),
        },
        items: Vec::new(),
        printed: None,
        chart_hamiltonians: None,
    };
    e.item("Hbar1", Quantity::Hamiltonian(0), "-H2/s2")?;
    e.misprint(
        "Hbar2",
        Quantity::Hamiltonian(1),
        "H1 - s1/s2*H2",
        "H1 + s1/s2*H2",
        "sign of the H2 term",
    )?;
    e.misprint(
        "Hbar3",
        Quantity::Hamiltonian(2),
        "H3 - s3/s2*H2",
        "H3 + s3/s2*H2",
        "sign of the H2 term",
    )?;
    e.control_items(
        &[
            ["s1 - s3/s2", "1", "-1/s2"],
            ["-s2 + s1*s3/s2", "0", "s1/s2"],
            ["s3/s2", "0", "s3/s2"],
        ],
        &[((3, 1), "s3^2/s2", "s3 printed without its square")],
    )?;
    e.item("h0(1)", Quantity::Extended { k: 1, i: 0 }, "c1")?;
    e.item(
        "h1(1)",
        Quantity::Extended { k: 1, i: 1 },
        "Hb1 - (s1 - s3/s2)*c1 + c2/s2",
    )?;
    e.item(
        "h2(1)",
        Quantity::Extended { k: 1, i: 2 },
        "Hb2 + (s2 - s1*s3/s2)*c1 - s1/s2*c2",
    )?;
    e.item("h0(2)", Quantity::Extended { k: 2, i: 0 }, "c2")?;
    e.misprint(
        "h1(2)",
        Quantity::Extended { k: 2, i: 1 },
        "Hb3 - s2^2/s2*c1 - s3/s2*c2",
        "Hb3 - s3^2/s2*c1 - s3/s2*c2",
        "c1 coefficient printed as s2^2/s2; F(3,1) gives s3^2/s2",
    )?;
    // the resolved relations with H from the first example and s(q)
    let s_of_q = ["q1", "q2/2 + q1^2/4", "(q3 + q1*q2)/4"];
    let hbar = ["-H2/s2", "H1 + s1/s2*H2", "H3 + s3/s2*H2"].map(|h| {
        let mut h = h.to_string();
        for i in 1..=3 {
            h = h.replace(&format!("H{i}"), &format!("({})", EX1_H[i - 1]));
            h = h.replace(&format!("s{i}"), &format!("({})", s_of_q[i - 1]));
        }
        h
    });
    let hbar: Vec<&str> = hbar.iter().map(String::as_str).collect();
    e.chart_hamiltonians = Some(ChartHamiltonians::new("flat", 1.0, &hbar)?);
    Ok(e)
}

/// The cubic example's chart, `(λ, μ) → (q, p)`: `u` are the elementary
/// symmetric functions of `λ`, `v` the coefficients of the parabola through
/// the points `(λᵢ, μᵢ)`.
const EX3_CHART: [(&str, &str); 17] = [
    ("u1", "l1 + l2 + l3"),
    ("u2", "l1*l2 + l1*l3 + l2*l3"),
    ("u3", "l1*l2*l3"),
    ("w1", "m1/((l1 - l2)*(l1 - l3))"),
    ("w2", "m2/((l2 - l1)*(l2 - l3))"),
    ("w3", "m3/((l3 - l1)*(l3 - l2))"),
    ("v1", "w1 + w2 + w3"),
    ("v2", "-(w1*(l2 + l3) + w2*(l1 + l3) + w3*(l1 + l2))"),
    ("v3", "w1*l2*l3 + w2*l1*l3 + w3*l1*l2"),
    ("q1", "-1/v1"),
    ("q3", "v2*q1 - u1"),
    ("q2", "(u1 + 3*q3)/3"),
    ("s", "(3*q3^2 + 5*q1^3 - 6*q2*q3 - u2)/q1"),
    ("t", "v3 + q3^2/q1 - 3*q2*q3/q1 + 4*q1^2"),
    ("p2", "3*(s - t)"),
    ("p3", "s - p2"),
    ("p1", "(u3 + q3^3 + 9*q1^3*q3 - q1*q3*s + 6*q1^3*q2 - 3*q2*q3^2)/q1^2"),
];

pub(crate) fn cubic_chart() -> Result<(CoordinateChart, Vec<(String, Expr)>)> {
    let defs = expand_definitions(&EX3_CHART, &LM3)?;
    let get = |name: &str| {
        defs.iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e.clone())
            .expect("defined")
    };
    let map = ["q1", "q2", "q3", "p1", "p2", "p3"].map(get).to_vec();
    Ok((CoordinateChart::full_map("polynomial", map)?, defs))
}

const EX3_H: [&str; 3] = [
    "p2*p3 + p2^2/3 + p3^2 - 7*q1^2*p3 - 4*q1^2*p2 - 3*q2*p1 + 18*q1*q2^2 + 13*q1^4 + 12*q3*q1*q2",
    "12*q1^3*q2 + 8*q1^3*q3 - 2*q1^2*p1 + (-6*q1*q2 - 4*q1*q3)*p3 + p1*p3",
    "p2*p3^2/3 + p2^2*p3/3 + 2/27*p2^3 - q1^2*p3^2 - 4/3*q1^2*p2^2 - q2*p1*p2 - q1*p1^2 \
     - 10/3*q1^2*p3*p2 + (q3 - 3*q2)*p1*p3 + (21*q1^2*q2 + 6*q3*q1^2)*p1 \
     + (4*q3*q1*q2 + 6*q1*q2^2 + 22/3*q1^4)*p2 \
     + (7*q1^4 + 18*q1*q2^2 + 6*q3*q1*q2 - 4*q1*q3^2)*p3 \
     - 8*q1^3*q3^2 - 72*q3*q1^3*q2 - 90*q1^3*q2^2 - 12*q1^6",
];

const A_PRINTED: &str = "(-p2/3 + p3/3 - 3*q1^2)";
const A_TRUE: &str = "(p2/3 + p3/3 - 3*q1^2)";
const B: &str = "(54*q1*q2 + 24*q1*q3 - 3*p1)";
const C: &str = "(-24*q1*q2 - 12*q1*q3 + p1)";

fn ex3_pi1(a: &str, fixed: bool) -> Vec<Vec<String>> {
    let mut m: Vec<Vec<String>> = [
        ["0", "0", "0", "-q3", "3*q1", "2*q2"],
        ["0", "0", "-q1/3", "A", "3*q2 - q3", "-q2"],
        ["0", "q1/3", "0", "2*q1^2", "0", "-q3"],
        ["-q3", "-A", "-2*q1^2", "0", "B", "C"],
        ["1 - 3*q1", "-3*q2 + q3", "0", "-B", "0", "-24*q1^2"],
        ["2*q1", "q2", "q3", "-C", "24*q1^2", "0"],
    ]
    .iter()
    .map(|r| {
        r.iter()
            .map(|s| s.replace('A', a).replace('B', B).replace('C', C))
            .collect()
    })
    .collect();
    if fixed {
        m[3][0] = "q3".into();
        m[4][0] = "-3*q1".into();
        m[0][5] = "-2*q1".into();
    }
    m
}

const EX3_F: [[&str; 3]; 3] = [
    ["-q3", "-q1", "0"],
    ["-p2/3 + q1^2", "-2*q3 + 3*q2", "1"],
    [
        "5*q3*q1^2 + 6*q1^2*q2 - q1*p1 - q3*p2/3",
        "-4*q1^3 - q3^2 + 3*q2*q3 + 2/3*q1*p2 + q1*p3",
        "0",
    ],
];

/// `μH₁⁽¹⁾ + H₁⁽²⁾λ + H₂⁽²⁾ = μ³` with its polynomial chart.
pub fn example3() -> Result<CorpusEntry> {
    let (chart, defs) = cubic_chart()?;
    let v1 = defs.iter().find(|(n, _)| n == "v1").expect("defined").1.clone();
    let system = SeparationSystem::curve("example3", vec![1, 2], vec![row("m")?, Expr::one()], row("m^3")?)?
        .with_chart(chart)?
        .with_singular(v1)?;
    let mut e = CorpusEntry {
        name: "example3".into(),
        system,
        context: PrintedContext::Chart {
            chart: "polynomial".into(),
            orientation: -1.0,
        },
        items: Vec::new(),
        printed: None,
        chart_hamiltonians: None,
    };
    let relations = [
        ("u1", "3*q2 - 3*q3"),
        ("u2", "-q1*p2 - q1*p3 + 3*q3^2 + 5*q1^3 - 6*q2*q3"),
        ("v1", "-1/q1"),
        ("v2", "(3*q2 - 2*q3)/q1"),
        ("v3", "p3 + 2/3*p2 - q3^2/q1 + 3*q2*q3/q1 - 4*q1^2"),
    ];
    let def = |name: &str| defs.iter().find(|(n, _)| n == name).expect("defined").1.clone();
    for (name, printed) in relations {
        e.item(&format!("chart/{name}"), Quantity::Separation(def(name)), printed)?;
    }
    e.misprint(
        "chart/u3",
        Quantity::Separation(def("u3")),
        "-q3^3 - 9*q1^3*q3 + q1*q3*p2 + q1*q3*p3 - 2/27*q1^3*q2 + q1^2*p1 + 3*q2*q3^2",
        "-q3^3 - 9*q1^3*q3 + q1*q3*p2 + q1*q3*p3 - 6*q1^3*q2 + q1^2*p1 + 3*q2*q3^2",
        "q1^3*q2 coefficient printed as -2/27; the other printed data need -6",
    )?;
    for (g, h) in EX3_H.iter().enumerate() {
        e.item(&format!("H{}", g + 1), Quantity::Hamiltonian(g), h)?;
    }
    let printed = ex3_pi1(A_PRINTED, false);
    let fixed = ex3_pi1(A_TRUE, true);
    let rows: Vec<Vec<&str>> = printed.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let row_refs: Vec<&[&str]> = rows.iter().map(Vec::as_slice).collect();
    let why_a = "A printed with -p2/3; antisymmetry with the other printed entries forces +p2/3";
    e.tensor_items(
        &row_refs,
        "1",
        &[
            ((4, 1), &fixed[3][0], "not the negative of the printed (1,4) entry"),
            ((5, 1), &fixed[4][0], "not the negative of the printed (1,5) entry"),
            ((1, 6), &fixed[0][5], "not the negative of the printed (6,1) entry"),
            ((2, 4), &fixed[1][3], why_a),
            ((4, 2), &fixed[3][1], why_a),
        ],
    )?;
    e.control_items(&EX3_F, &[])?;
    e.item("h0(1)", Quantity::Extended { k: 1, i: 0 }, "c1")?;
    e.item(
        "h1(1)",
        Quantity::Extended { k: 1, i: 1 },
        &format!("{} + q3*c1 + q1*c2", EX3_H[0]),
    )?;
    e.item("h0(2)", Quantity::Extended { k: 2, i: 0 }, "c2")?;
    e.item(
        "h1(2)",
        Quantity::Extended { k: 2, i: 1 },
        &format!("{} + (p2/3 - q1^2)*c1 + (2*q3 - 3*q2)*c2", EX3_H[1]),
    )?;
    e.item(
        "h2(2)",
        Quantity::Extended { k: 2, i: 2 },
        &format!(
            "{} - ({})*c1 - ({})*c2",
            EX3_H[2], EX3_F[2][0], EX3_F[2][1]
        ),
    )?;
    let fixed_rows: Vec<Vec<&str>> = fixed.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let fixed_refs: Vec<&[&str]> = fixed_rows.iter().map(Vec::as_slice).collect();
    e.chart_hamiltonians = Some(ChartHamiltonians::new("polynomial", -1.0, &EX3_H)?);
    e.printed = Some(PrintedData {
        hamiltonians: e.parse_all(&EX3_H)?,
        pi1_upper: e.upper_of(&fixed_refs, "1")?,
        control: EX3_F.iter().map(|r| e.parse_all(r)).collect::<Result<_>>()?,
    });
    Ok(e)
}
