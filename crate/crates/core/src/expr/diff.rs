use super::{Expr, Func};

pub(super) fn differentiate(e: &Expr, var: &str) -> Expr {
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(v) => {
            if v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Add(a, b) => Expr::add(differentiate(a, var), differentiate(b, var)),
        Expr::Mul(a, b) => Expr::add(
            Expr::mul(differentiate(a, var), (**b).clone()),
            Expr::mul((**a).clone(), differentiate(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            if db.is_zero() {
                return Expr::Div(da.into(), b.clone());
            }
            // (a'b - ab') / b^2
            let num = Expr::sub(
                Expr::mul(da, (**b).clone()),
                Expr::mul((**a).clone(), db),
            );
            if num.is_zero() {
                Expr::zero()
            } else {
                Expr::Div(num.into(), Expr::pow((**b).clone(), 2).into())
            }
        }
        Expr::Pow(a, n) => {
            let da = differentiate(a, var);
            Expr::mul(
                Expr::mul(Expr::int(*n as i64), Expr::pow((**a).clone(), n - 1)),
                da,
            )
        }
        Expr::Neg(a) => Expr::neg(differentiate(a, var)),
        Expr::Call(Func::Exp, a) => Expr::mul(e.clone(), differentiate(a, var)),
        Expr::Call(Func::Sqrt, a) => {
            let da = differentiate(a, var);
            if da.is_zero() {
                return Expr::zero();
            }
            // a' / (2 sqrt(a))
            Expr::Div(da.into(), Expr::mul(Expr::int(2), e.clone()).into())
        }
    }
}
