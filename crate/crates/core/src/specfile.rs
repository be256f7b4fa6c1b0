//! Line-oriented system files.
//!
//! ```text
//! # comment
//! [system]
//! name = example1
//! n = 3
//! partition = 3
//!
//! [block 1]
//! phi = 1
//!
//! [psi]
//! psi = m^2/8
//!
//! [chart flat]
//! kind = point
//! s2 = l1*l2 + l1*l3 + l2*l3
//! q1 = l1 + l2 + l3
//! q2 = 2*(s2 - q1^2/4)
//! q3 = 4*l1*l2*l3 - q1*q2
//!
//! [singular]
//! sigma2 = l1*l2 + l1*l3 + l2*l3
//! ```
//!
//! Block functions and `ψ` are expressions in `l`, `m`; giving `phi1..phin`
//! or `psi1..psin` instead makes the relations row-dependent. Chart keys
//! other than the targets (`q1..qn` for `kind = point`, also `p1..pn` for
//! `kind = map`) are auxiliary definitions, inlined in order. Singular
//! entries are expressions in `l1..ln, m1..mn` whose zero set is avoided.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::{expand_definitions, parse, Expr};
use crate::phase::{source_names, target_names, ChartKind, CoordinateChart};
use crate::stackel::{SeparationData, SeparationSystem};

#[derive(Debug)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Debug)]
struct Section {
    line: usize,
    kind: String,
    arg: Option<String>,
    entries: Vec<Entry>,
}

struct Ctx<'a> {
    path: &'a str,
}

impl Ctx<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            message: message.into(),
        }
    }

    fn expr(&self, e: &Entry, vars: &[&str]) -> Result<Expr> {
        parse(&e.value, vars).map_err(|err| self.located(e, err))
    }

    fn located(&self, e: &Entry, err: Error) -> Error {
        match err {
            Error::Syntax { position, message } => {
                self.err(e.line, format!("`{}`: column {position}: {message}", e.key))
            }
            Error::UnknownVariable(v) => self.err(e.line, format!("`{}`: unknown variable `{v}`", e.key)),
            other => self.err(e.line, format!("`{}`: {other}", e.key)),
        }
    }
}

fn sections(text: &str, ctx: &Ctx) -> Result<Vec<Section>> {
    let mut out: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| ctx.err(line, "unterminated section header"))?
                .trim();
            let mut words = header.split_whitespace();
            let kind = words.next().ok_or_else(|| ctx.err(line, "empty section header"))?;
            let arg = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(ctx.err(line, format!("malformed section header `[{header}]`")));
            }
            out.push(Section {
                line,
                kind: kind.to_string(),
                arg,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ctx.err(line, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ctx.err(line, format!("invalid key `{key}`")));
        }
        let section = out
            .last_mut()
            .ok_or_else(|| ctx.err(line, "entry before any section header"))?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(ctx.err(line, format!("duplicate key `{key}`")));
        }
        section.entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

fn get<'a>(s: &'a Section, key: &str) -> Option<&'a Entry> {
    s.entries.iter().find(|e| e.key == key)
}

/// One value or one per row (`key1..keyn`), never both.
enum RowValues<'a> {
    Shared(&'a Entry),
    PerRow(Vec<&'a Entry>),
}

fn row_values<'a>(s: &'a Section, key: &str, n: usize, ctx: &Ctx) -> Result<RowValues<'a>> {
    let shared = get(s, key);
    let per: Vec<Option<&Entry>> = (1..=n).map(|i| get(s, &format!("{key}{i}"))).collect();
    let any_per = per.iter().any(Option::is_some);
    for e in &s.entries {
        let known = e.key == key
            || e.key
                .strip_prefix(key)
                .and_then(|r| r.parse::<usize>().ok())
                .is_some_and(|i| (1..=n).contains(&i));
        if !known {
            return Err(ctx.err(e.line, format!("unexpected key `{}` in [{}]", e.key, s.kind)));
        }
    }
    match (shared, any_per) {
        (Some(e), false) => Ok(RowValues::Shared(e)),
        (None, true) => {
            let missing: Vec<usize> = (1..=n).filter(|i| per[i - 1].is_none()).collect();
            if !missing.is_empty() {
                return Err(ctx.err(s.line, format!("[{}]: missing `{key}{}`", s.kind, missing[0])));
            }
            Ok(RowValues::PerRow(per.into_iter().flatten().collect()))
        }
        (Some(e), true) => Err(ctx.err(e.line, format!("both `{key}` and per-row `{key}i` given"))),
        (None, false) => Err(ctx.err(s.line, format!("[{}]: missing `{key}`", s.kind))),
    }
}

fn build_chart(s: &Section, n: usize, ctx: &Ctx) -> Result<CoordinateChart> {
    let name = s
        .arg
        .as_deref()
        .ok_or_else(|| ctx.err(s.line, "chart section needs a name: [chart <name>]"))?;
    let kind = match get(s, "kind").map(|e| e.value.as_str()) {
        None | Some("point") => ChartKind::PointTransform,
        Some("map") => ChartKind::FullMap,
        Some(other) => {
            let line = get(s, "kind").map_or(s.line, |e| e.line);
            return Err(ctx.err(line, format!("chart kind must be `point` or `map`, got `{other}`")));
        }
    };
    let sources = source_names(n);
    let base: Vec<&str> = match kind {
        ChartKind::PointTransform => sources[..n].iter().map(String::as_str).collect(),
        ChartKind::FullMap => sources.iter().map(String::as_str).collect(),
    };
    let targets: Vec<String> = match kind {
        ChartKind::PointTransform => target_names(n)[..n].to_vec(),
        ChartKind::FullMap => target_names(n),
    };
    let defs: Vec<&Entry> = s.entries.iter().filter(|e| e.key != "kind").collect();
    let pairs: Vec<(&str, &str)> = defs.iter().map(|e| (e.key.as_str(), e.value.as_str())).collect();
    let expanded = expand_definitions(&pairs, &base).map_err(|err| {
        // re-run prefixes to find the offending line
        let bad = (1..=pairs.len())
            .find(|&k| expand_definitions(&pairs[..k], &base).is_err())
            .unwrap_or(pairs.len());
        ctx.located(defs[bad - 1], err)
    })?;
    let map = targets
        .iter()
        .map(|t| {
            expanded
                .iter()
                .find(|(n, _)| n == t)
                .map(|(_, e)| e.clone())
                .ok_or_else(|| ctx.err(s.line, format!("chart `{name}`: missing target `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let chart = match kind {
        ChartKind::PointTransform => CoordinateChart::point_transform(name, map),
        ChartKind::FullMap => CoordinateChart::full_map(name, map),
    };
    chart.map_err(|e| ctx.err(s.line, e.to_string()))
}

/// Parse a system file; `path` labels diagnostics.
pub fn parse_spec(text: &str, path: &str) -> Result<SeparationSystem> {
    let ctx = Ctx { path };
    let secs = sections(text, &ctx)?;
    fn find<'a>(secs: &'a [Section], kind: &'a str) -> impl Iterator<Item = &'a Section> {
        secs.iter().filter(move |s| s.kind == kind)
    }
    for s in &secs {
        if !["system", "block", "psi", "chart", "singular"].contains(&s.kind.as_str()) {
            return Err(ctx.err(s.line, format!("unknown section [{}]", s.kind)));
        }
    }
    let once = |kind: &'static str| -> Result<&Section> {
        let mut it = find(&secs, kind);
        let s = it.next().ok_or_else(|| ctx.err(0, format!("missing [{kind}] section")))?;
        if let Some(dup) = it.next() {
            return Err(ctx.err(dup.line, format!("duplicate [{kind}] section")));
        }
        Ok(s)
    };
    let system = once("system")?;
    for e in &system.entries {
        if !["name", "n", "partition"].contains(&e.key.as_str()) {
            return Err(ctx.err(e.line, format!("unexpected key `{}` in [system]", e.key)));
        }
    }
    let name = get(system, "name").map_or("system", |e| e.value.as_str());
    let n_entry = get(system, "n").ok_or_else(|| ctx.err(system.line, "[system]: missing `n`"))?;
    let n: usize = n_entry
        .value
        .parse()
        .map_err(|_| ctx.err(n_entry.line, format!("`n` must be a positive integer, got `{}`", n_entry.value)))?;
    let partition: Vec<usize> = match get(system, "partition") {
        None => vec![n],
        Some(e) => e
            .value
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| ctx.err(e.line, format!("partition must be comma-separated integers, got `{}`", e.value)))?,
    };
    if partition.iter().sum::<usize>() != n {
        return Err(Error::Validation(format!(
            "partition {partition:?} sums to {}, but n = {n}",
            partition.iter().sum::<usize>()
        )));
    }
    let m = partition.len();

    let mut blocks: Vec<Option<&Section>> = vec![None; m];
    for s in find(&secs, "block") {
        let k: usize = s
            .arg
            .as_deref()
            .and_then(|a| a.parse().ok())
            .filter(|k| (1..=m).contains(k))
            .ok_or_else(|| ctx.err(s.line, format!("block header must be [block k] with 1 ≤ k ≤ {m}")))?;
        if blocks[k - 1].replace(s).is_some() {
            return Err(ctx.err(s.line, format!("duplicate [block {k}]")));
        }
    }
    let row_vars = ["l", "m"];
    let mut phi_shared: Vec<Option<Expr>> = Vec::new();
    let mut phi_rows: Vec<Option<Vec<Expr>>> = Vec::new();
    for (k, b) in blocks.iter().enumerate() {
        let b = b.ok_or_else(|| Error::Validation(format!("missing [block {}] section", k + 1)))?;
        match row_values(b, "phi", n, &ctx)? {
            RowValues::Shared(e) => {
                phi_shared.push(Some(ctx.expr(e, &row_vars)?));
                phi_rows.push(None);
            }
            RowValues::PerRow(es) => {
                phi_shared.push(None);
                phi_rows.push(Some(es.iter().map(|e| ctx.expr(e, &row_vars)).collect::<Result<_>>()?));
            }
        }
    }
    let psi_sec = once("psi")?;
    let psi = row_values(psi_sec, "psi", n, &ctx)?;
    let all_shared = phi_shared.iter().all(Option::is_some) && matches!(psi, RowValues::Shared(_));
    let mut sys = if all_shared {
        let RowValues::Shared(e) = psi else { unreachable!() };
        SeparationSystem::curve(
            name,
            partition,
            phi_shared.into_iter().flatten().collect(),
            ctx.expr(e, &row_vars)?,
        )?
    } else {
        let psi_rows: Vec<Expr> = match psi {
            RowValues::Shared(e) => vec![ctx.expr(e, &row_vars)?; n],
            RowValues::PerRow(es) => es.iter().map(|e| ctx.expr(e, &row_vars)).collect::<Result<_>>()?,
        };
        let phi: Vec<Vec<Expr>> = (0..n)
            .map(|i| {
                (0..m)
                    .map(|k| match (&phi_shared[k], &phi_rows[k]) {
                        (Some(e), _) => e.clone(),
                        (None, Some(rows)) => rows[i].clone(),
                        (None, None) => unreachable!("every block has φ"),
                    })
                    .collect()
            })
            .collect();
        SeparationSystem::per_row(name, partition, phi, psi_rows)?
    };
    for s in find(&secs, "chart") {
        sys = sys.with_chart(build_chart(s, n, &ctx)?)?;
    }
    let sing_vars = source_names(n);
    let sing_refs: Vec<&str> = sing_vars.iter().map(String::as_str).collect();
    for s in find(&secs, "singular") {
        for e in &s.entries {
            sys = sys.with_singular(ctx.expr(e, &sing_refs)?)?;
        }
    }
    Ok(sys)
}

pub fn load_spec(path: &Path) -> Result<SeparationSystem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_spec(&text, &path.display().to_string())
}

/// Serialize a system (charts with auxiliary definitions already inlined).
pub fn export_spec(sys: &SeparationSystem) -> String {
    let mut out = String::new();
    let n = sys.n();
    let sizes: Vec<String> = sys.partition().sizes().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "[system]\nname = {}\nn = {n}\npartition = {}", sys.name(), sizes.join(", "));
    match sys.data() {
        SeparationData::Curve { phi, psi } => {
            for (k, p) in phi.iter().enumerate() {
                let _ = writeln!(out, "\n[block {}]\nphi = {p}", k + 1);
            }
            let _ = writeln!(out, "\n[psi]\npsi = {psi}");
        }
        SeparationData::PerRow { phi, psi } => {
            for k in 0..sys.m() {
                let _ = writeln!(out, "\n[block {}]", k + 1);
                for (i, row) in phi.iter().enumerate() {
                    let _ = writeln!(out, "phi{} = {}", i + 1, row[k]);
                }
            }
            let _ = writeln!(out, "\n[psi]");
            for (i, p) in psi.iter().enumerate() {
                let _ = writeln!(out, "psi{} = {p}", i + 1);
            }
        }
    }
    for chart in sys.charts() {
        let kind = match chart.kind() {
            ChartKind::PointTransform => "point",
            ChartKind::FullMap => "map",
        };
        let _ = writeln!(out, "\n[chart {}]\nkind = {kind}", chart.name());
        for (t, e) in chart.target().iter().zip(chart.expressions()) {
            let _ = writeln!(out, "{t} = {e}");
        }
    }
    if !sys.singular_sets().is_empty() {
        let _ = writeln!(out, "\n[singular]");
        for (i, e) in sys.singular_sets().iter().enumerate() {
            let _ = writeln!(out, "s{} = {e}", i + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX: &str = "\
# three free particles on a line
[system]
name = demo
n = 3
partition = 2, 1

[block 1]
phi = l^2
[block 2]
phi = 1

[psi]
psi = m^2/8   # kinetic only

[singular]
sigma2 = l1*l2 + l1*l3 + l2*l3
";

    #[test]
    fn parses_blocks_and_singular_sets() {
        let sys = parse_spec(EX, "demo.stk").unwrap();
        assert_eq!(sys.partition().sizes(), &[2, 1]);
        assert_eq!(sys.singular_sets().len(), 1);
        assert!(sys.is_curve());
    }

    #[test]
    fn partition_must_sum_to_n() {
        let bad = EX.replace("partition = 2, 1", "partition = 2, 2");
        assert!(matches!(parse_spec(&bad, "x"), Err(Error::Validation(_))));
    }

    #[test]
    fn normalization_enforced() {
        let bad = EX.replace("[block 2]\nphi = 1", "[block 2]\nphi = l");
        assert!(matches!(parse_spec(&bad, "x"), Err(Error::Validation(_))));
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let bad = EX.replace("psi = m^2/8", "psi = m^2/");
        match parse_spec(&bad, "demo.stk") {
            Err(Error::Parse { path, line, message }) => {
                assert_eq!(path, "demo.stk");
                assert_eq!(line, 13);
                assert!(message.contains("column"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let unknown = EX.replace("psi = m^2/8", "psi = z^2");
        assert!(matches!(parse_spec(&unknown, "x"), Err(Error::Parse { line: 13, .. })));
    }

    #[test]
    fn structural_errors() {
        assert!(parse_spec("n = 3", "x").is_err());
        assert!(parse_spec("[system]\nn = 1\n[block 1]\nphi = 1\n[psi]\npsi = m\n[wat]\n", "x").is_err());
        let dup = "[system]\nn = 1\nn = 2\n";
        assert!(matches!(parse_spec(dup, "x"), Err(Error::Parse { line: 3, .. })));
        let missing_block = "[system]\nn = 2\npartition = 1, 1\n[block 2]\nphi = 1\n[psi]\npsi = m^2\n";
        assert!(matches!(parse_spec(missing_block, "x"), Err(Error::Validation(_))));
    }

    #[test]
    fn per_row_psi() {
        let text = "[system]\nn = 2\n[block 1]\nphi = 1\n[psi]\npsi1 = m^2/2\npsi2 = m^2/2 + l^2\n";
        let sys = parse_spec(text, "x").unwrap();
        assert!(!sys.is_curve());
        let again = parse_spec(&export_spec(&sys), "y").unwrap();
        assert!(!again.is_curve());
    }

    #[test]
    fn chart_auxiliaries_are_inlined() {
        let text = "[system]\nn = 1\n[block 1]\nphi = 1\n[psi]\npsi = m^2/2\n\
                    [chart sq]\nkind = point\nu = l1 + 1\nq1 = u^2\n";
        let sys = parse_spec(text, "x").unwrap();
        let chart = sys.chart("sq").unwrap();
        let y = chart.apply(&[1.0, 4.0]).unwrap();
        assert_eq!(y, vec![4.0, 1.0]);
        let missing = text.replace("q1 = u^2", "q9 = u^2");
        assert!(parse_spec(&missing, "x").is_err());
    }
}
