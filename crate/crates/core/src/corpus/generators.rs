//! Parameterized separation-curve families. `f`, `γ` are expressions in `l`.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::stackel::SeparationSystem;

fn check_row_expr(what: &str, e: &Expr) -> Result<()> {
    if let Some(v) = e.variables().into_iter().find(|v| v != "l") {
        return Err(Error::Validation(format!("{what} may only depend on `l`, found `{v}`")));
    }
    Ok(())
}

fn m() -> Expr {
    Expr::var("m")
}

/// `Σ_j Hⱼ λ^{n−j} = ½ f(λ) μ² + γ(λ)`.
pub fn benenti(n: usize, f: Expr, gamma: Expr) -> Result<SeparationSystem> {
    check_row_expr("f", &f)?;
    check_row_expr("γ", &gamma)?;
    let psi = Expr::add(
        Expr::mul(Expr::mul(Expr::ratio(1, 2), f), Expr::pow(m(), 2)),
        gamma,
    );
    SeparationSystem::curve(&format!("benenti({n})"), vec![n], vec![Expr::one()], psi)
}

/// `μ H⁽¹⁾(λ) + H⁽²⁾(λ) = ⅓ f(λ) μ³ + μ γ₁(λ) + γ₂(λ)` with blocks of sizes
/// `n1`, `n2`.
pub fn cubic_class(n1: usize, n2: usize, f: Expr, gamma1: Expr, gamma2: Expr) -> Result<SeparationSystem> {
    check_row_expr("f", &f)?;
    check_row_expr("γ₁", &gamma1)?;
    check_row_expr("γ₂", &gamma2)?;
    let psi = Expr::sum([
        Expr::mul(Expr::mul(Expr::ratio(1, 3), f), Expr::pow(m(), 3)),
        Expr::mul(m(), gamma1),
        gamma2,
    ]);
    SeparationSystem::curve(&format!("cubic({n1},{n2})"), vec![n1, n2], vec![m(), Expr::one()], psi)
}

/// `Σ_k λ^{α_k} H⁽ᵏ⁾(λ) = ½ f(λ) μ² + γ(λ)`; the last exponent must be 0.
pub fn multi_block(alpha: &[u32], partition: Vec<usize>, f: Expr, gamma: Expr) -> Result<SeparationSystem> {
    if alpha.len() != partition.len() {
        return Err(Error::BadPartition(format!(
            "{} exponents for {} blocks",
            alpha.len(),
            partition.len()
        )));
    }
    if alpha.last() != Some(&0) {
        return Err(Error::BadPartition("the last block exponent must be 0".into()));
    }
    check_row_expr("f", &f)?;
    check_row_expr("γ", &gamma)?;
    let phi = alpha
        .iter()
        .map(|&a| Expr::pow(Expr::var("l"), a as i32))
        .collect();
    let psi = Expr::add(
        Expr::mul(Expr::mul(Expr::ratio(1, 2), f), Expr::pow(m(), 2)),
        gamma,
    );
    let tag: Vec<String> = alpha.iter().map(u32::to_string).collect();
    SeparationSystem::curve(&format!("multi_block({})", tag.join(",")), partition, phi, psi)
}

/// `Σ_j Hⱼ λ^{n−j} = exp(aμ) + exp(−bμ) + γ(λ)`.
pub fn exponential_class(n: usize, a: Expr, b: Expr, gamma: Expr) -> Result<SeparationSystem> {
    for (what, e) in [("a", &a), ("b", &b)] {
        if !e.variables().is_empty() {
            return Err(Error::Validation(format!("{what} must be a constant")));
        }
    }
    check_row_expr("γ", &gamma)?;
    let psi = Expr::sum([
        Expr::exp(Expr::mul(a, m())),
        Expr::exp(Expr::neg(Expr::mul(b, m()))),
        gamma,
    ]);
    SeparationSystem::curve(&format!("exponential({n})"), vec![n], vec![Expr::one()], psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn l(src: &str) -> Expr {
        parse(src, &["l"]).unwrap()
    }

    #[test]
    fn zero_size_is_bad_partition() {
        assert!(matches!(benenti(0, Expr::one(), Expr::zero()), Err(Error::BadPartition(_))));
        assert!(matches!(
            multi_block(&[1, 0], vec![2, 0], Expr::one(), Expr::zero()),
            Err(Error::BadPartition(_))
        ));
        assert!(matches!(
            multi_block(&[2, 1], vec![2, 1], Expr::one(), Expr::zero()),
            Err(Error::BadPartition(_))
        ));
        assert!(matches!(
            multi_block(&[0], vec![2, 1], Expr::one(), Expr::zero()),
            Err(Error::BadPartition(_))
        ));
    }

    #[test]
    fn cubic_rows_follow_block_powers() {
        let sys = cubic_class(1, 2, Expr::one(), Expr::zero(), Expr::zero()).unwrap();
        let x = [0.5, -1.0, 1.5, 0.3, 0.2, -0.4];
        let s = sys.stackel_matrix(&x).unwrap();
        assert_eq!(s.row(1), vec![0.2, -1.0, 1.0]);
    }

    #[test]
    fn foreign_variables_rejected() {
        assert!(benenti(2, parse("m", &["m"]).unwrap(), Expr::zero()).is_err());
        assert!(exponential_class(2, l("l"), Expr::one(), Expr::zero()).is_err());
        assert!(benenti(2, l("l^2 + 1"), l("l^3")).is_ok());
    }
}
