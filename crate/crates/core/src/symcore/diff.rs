use std::sync::Arc;

use super::atom::Atom;
use super::expr::{Elementary, Expr, OpaqueCall};
use super::normal::normalize;
use super::SymError;

/// Exact partial derivative of `e` with respect to `v`, normalized.
///
/// Opaque calls differentiate by the chain rule over their arguments, bumping
/// the derivative count of each argument slot.
pub fn diff(e: &Expr, v: &Atom) -> Result<Expr, SymError> {
    normalize(&diff_raw(e, v))
}

fn diff_raw(e: &Expr, v: &Atom) -> Expr {
    if !e.contains_atom(v) {
        return Expr::zero();
    }
    match e {
        Expr::Num(_) => Expr::zero(),
        Expr::Atom(a) => {
            if a == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Add(ts) => Expr::sum(ts.iter().map(|t| diff_raw(t, v)).collect()),
        Expr::Mul(fs) => {
            let mut terms = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                if !f.contains_atom(v) {
                    continue;
                }
                let mut factors: Vec<Expr> = fs.iter().cloned().collect();
                factors[i] = diff_raw(f, v);
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Expr::Pow(be) => {
            let (base, exponent) = (&be.0, &be.1);
            if !exponent.contains_atom(v) {
                // e * b^(e-1) * b'
                Expr::product(vec![
                    exponent.clone(),
                    base.clone().pow(exponent - Expr::one()),
                    diff_raw(base, v),
                ])
            } else {
                // b^e * (e' ln b + e b'/b)
                Expr::product(vec![
                    e.clone(),
                    Expr::sum(vec![
                        Expr::product(vec![diff_raw(exponent, v), base.clone().ln()]),
                        Expr::product(vec![exponent.clone(), diff_raw(base, v), base.clone().recip()]),
                    ]),
                ])
            }
        }
        Expr::Func(f, arg) => {
            let inner = diff_raw(arg, v);
            let a = arg.as_ref().clone();
            let outer = match f {
                Elementary::Sin => a.cos(),
                Elementary::Cos => -a.sin(),
                Elementary::Exp => a.exp(),
                Elementary::Ln => a.recip(),
                Elementary::Sqrt => Expr::product(vec![Expr::rational(1, 2), a.pow(Expr::rational(-1, 2))]),
            };
            Expr::product(vec![outer, inner])
        }
        Expr::Opaque(call) => {
            let mut terms = Vec::new();
            for (i, arg) in call.args.iter().enumerate() {
                if !arg.contains_atom(v) {
                    continue;
                }
                let mut derivs = call.derivs.clone();
                derivs[i] += 1;
                let bumped = Expr::Opaque(Arc::new(OpaqueCall {
                    name: call.name.clone(),
                    args: call.args.clone(),
                    derivs,
                }));
                terms.push(Expr::product(vec![diff_raw(arg, v), bumped]));
            }
            Expr::sum(terms)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_free;

    fn d(s: &str, v: &str) -> Expr {
        diff(&parse_free(s).unwrap(), &Atom::free(v)).unwrap()
    }

    fn n(s: &str) -> Expr {
        normalize(&parse_free(s).unwrap()).unwrap()
    }

    #[test]
    fn power_rule_symbolic_exponent() {
        assert_eq!(d("x^n", "x"), n("n*x^(n-1)"));
    }

    #[test]
    fn opaque_bookkeeping() {
        assert_eq!(d("T(t)", "t"), n("T'(t)"));
        assert_eq!(d("T'(t)", "t"), n("T''(t)"));
        assert_eq!(d("f(t, x)", "x"), n("f[0,1](t, x)"));
        // Mixed partials commute.
        assert_eq!(diff(&d("f(t, x)", "x"), &Atom::free("t")).unwrap(), diff(&d("f(t, x)", "t"), &Atom::free("x")).unwrap());
    }

    #[test]
    fn exponential_over_cube() {
        let got = d("exp(x)/x^3", "x");
        assert_eq!(normalize(&(got - n("exp(x)*(x-3)/x^4"))).unwrap(), Expr::zero());
    }

    #[test]
    fn unrelated_atom_is_zero() {
        assert_eq!(d("sin(y)*exp(z)", "x"), Expr::zero());
    }

    #[test]
    fn exponent_depending_on_variable() {
        let got = d("x^x", "x");
        assert_eq!(normalize(&(got - n("x^x*(ln(x) + 1)"))).unwrap(), Expr::zero());
    }
}
