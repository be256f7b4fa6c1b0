//! Markdown catalog of the verification checks, generated from the registry
//! in [`crate::verify`].

use std::fmt::Write as _;

use crate::verify::CheckId;

pub fn generate_catalog() -> String {
    let mut out = String::new();
    out.push_str("# Verification checks\n\n");
    out.push_str(
        "Generated by `stackel catalog` from the check registry; do not edit by hand.\n\
         A check passes when the largest normalized residual over all sample points\n\
         is at most its tolerance. `--tol` overrides every tolerance and `--samples`\n\
         every sample count.\n\n",
    );
    out.push_str("| id | anchor | tolerance | samples | space | modules |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for c in CheckId::ALL {
        let i = c.info();
        let _ = writeln!(
            out,
            "| `{}` | `{}` | {:e} | {} | {} | {} |",
            i.id,
            i.anchor.replace('|', "\\|"),
            i.tolerance,
            i.samples,
            if i.extended { "extended" } else { "phase" },
            i.modules.join(", ")
        );
    }
    for c in CheckId::ALL {
        let i = c.info();
        let _ = write!(
            out,
            "\n## `{}`\n\n```text\n{}\n```\n\n{}\n\n- tolerance: {:e}\n- samples: {}\n- modules: {}\n",
            i.id,
            i.anchor,
            i.statement,
            i.tolerance,
            i.samples,
            i.modules.join(", ")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_listed_once() {
        let doc = generate_catalog();
        for c in CheckId::ALL {
            assert_eq!(doc.matches(&format!("\n## `{}`\n", c.id())).count(), 1, "{}", c.id());
        }
        assert_eq!(doc.matches("\n## `").count(), CheckId::ALL.len());
        assert!(doc.contains("F = (S^{−1} Λ_n S)"));
    }

    #[test]
    fn tolerances_match_registry() {
        let doc = generate_catalog();
        for c in CheckId::ALL {
            let i = c.info();
            let section = doc.split(&format!("## `{}`", i.id)).nth(1).unwrap();
            assert!(section.contains(&format!("- tolerance: {:e}\n", i.tolerance)));
        }
    }

    #[test]
    fn checked_in_copy_is_current() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/checks.md");
        let on_disk = std::fs::read_to_string(path).expect("docs/checks.md exists");
        assert!(
            on_disk == generate_catalog(),
            "docs/checks.md is stale; regenerate with `stackel catalog > docs/checks.md`"
        );
    }
}
