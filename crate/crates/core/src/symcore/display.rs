//! Infix rendering that parses back to the same tree.

use std::fmt;

use num_traits::{One, Signed, Zero};

use super::expr::{Expr, Rational};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

pub fn render(e: &Expr) -> String {
    match e {
        Expr::Add(terms) => {
            let mut out = String::new();
            for (i, t) in terms.iter().enumerate() {
                let (negative, body) = signed_term(t);
                match (i, negative) {
                    (0, true) => {
                        out.push('-');
                        out.push_str(&body);
                    }
                    (0, false) => out.push_str(&body),
                    (_, true) => {
                        out.push_str(" - ");
                        out.push_str(&body);
                    }
                    (_, false) => {
                        out.push_str(" + ");
                        out.push_str(&body);
                    }
                }
            }
            out
        }
        _ => {
            let (negative, body) = signed_term(e);
            if negative {
                format!("-{body}")
            } else {
                body
            }
        }
    }
}

/// Splits a non-sum term into its sign and the rendering of its magnitude.
fn signed_term(e: &Expr) -> (bool, String) {
    let (coef, factors): (Rational, Vec<&Expr>) = match e {
        Expr::Num(q) => (q.clone(), Vec::new()),
        Expr::Mul(fs) => {
            let mut coef = Rational::one();
            let mut rest = Vec::new();
            for f in fs.iter() {
                match f {
                    Expr::Num(q) => coef *= q,
                    other => rest.push(other),
                }
            }
            (coef, rest)
        }
        other => (Rational::one(), vec![other]),
    };
    let negative = coef.is_negative();
    let coef = coef.abs();
    if factors.is_empty() {
        return (negative, render_rational(&coef));
    }

    let mut numer: Vec<String> = Vec::new();
    let mut denom: Vec<String> = Vec::new();
    for f in factors {
        match f {
            Expr::Pow(be) => match be.1.as_num() {
                Some(q) if q.is_negative() => {
                    let positive = -q.clone();
                    if positive.is_one() {
                        denom.push(render_base(&be.0));
                    } else {
                        denom.push(format!("{}^{}", render_base(&be.0), render_exponent(&Expr::Num(positive))));
                    }
                }
                _ => numer.push(render_factor(f)),
            },
            other => numer.push(render_factor(other)),
        }
    }
    let p = coef.numer().clone();
    let q = coef.denom().clone();
    if !p.is_one() || numer.is_empty() {
        numer.insert(0, p.to_string());
    }
    if !q.is_one() {
        denom.insert(0, q.to_string());
    }
    let mut out = numer.join("*");
    match denom.len() {
        0 => {}
        1 => {
            out.push('/');
            out.push_str(&denom[0]);
        }
        _ => {
            out.push_str("/(");
            out.push_str(&denom.join("*"));
            out.push(')');
        }
    }
    (negative, out)
}

fn render_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn render_factor(e: &Expr) -> String {
    match e {
        Expr::Pow(be) => format!("{}^{}", render_base(&be.0), render_exponent(&be.1)),
        Expr::Add(_) => format!("({})", render(e)),
        Expr::Num(q) if !q.is_integer() || q.is_negative() => format!("({})", render_rational(q)),
        Expr::Num(q) => render_rational(q),
        Expr::Mul(_) => format!("({})", render(e)),
        _ => render_leaf(e).expect("leaf"),
    }
}

fn render_base(e: &Expr) -> String {
    match e {
        Expr::Atom(_) | Expr::Func(..) | Expr::Opaque(_) => render_leaf(e).expect("leaf"),
        Expr::Num(q) if q.is_integer() && !q.is_negative() => render_rational(q),
        _ => format!("({})", render(e)),
    }
}

fn render_exponent(e: &Expr) -> String {
    match e {
        Expr::Num(q) if q.is_integer() && !q.is_negative() => render_rational(q),
        Expr::Atom(a) => a.name().to_string(),
        _ => format!("({})", render(e)),
    }
}

pub(crate) fn render_call(name: &str, args: &[Expr], derivs: &[u32]) -> String {
    let args: Vec<String> = args.iter().map(render).collect();
    let args = args.join(", ");
    if derivs.iter().all(|d| d.is_zero()) {
        format!("{name}({args})")
    } else if derivs.len() == 1 {
        format!("{name}{}({args})", "'".repeat(derivs[0] as usize))
    } else {
        let idx: Vec<String> = derivs.iter().map(u32::to_string).collect();
        format!("{name}[{}]({args})", idx.join(","))
    }
}

impl fmt::Display for super::expr::OpaqueCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_call(&self.name, &self.args, &self.derivs))
    }
}

fn render_leaf(e: &Expr) -> Option<String> {
    match e {
        Expr::Atom(a) => Some(a.name().to_string()),
        Expr::Func(f, arg) => Some(format!("{}({})", f.name(), render(arg))),
        Expr::Opaque(call) => Some(call.to_string()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use crate::symcore::normal::normalize;
    use crate::symcore::parse::parse_free;

    fn show(s: &str) -> String {
        normalize(&parse_free(s).unwrap()).unwrap().to_string()
    }

    #[test]
    fn readable_forms() {
        assert_eq!(show("x/2 - 3"), "-3 + x/2");
        assert_eq!(show("-x/(2*N)"), "-x/(2*N)");
        assert_eq!(show("T'(t)"), "T'(t)");
        assert_eq!(show("x^(n-3)"), "x^(-3 + n)");
        assert_eq!(show("1/(n-3)"), "1/(-3 + n)");
    }

    #[test]
    fn render_parses_back() {
        for s in ["-x^(-3/2)*N^2 + 5/32*v/(L*x^7)", "exp(x)*(x - 3)^(1/2)", "f[1,0](t, x)^2 - T''(t)/2", "(-1)^n*2^(1/3)"] {
            let e = normalize(&parse_free(s).unwrap()).unwrap();
            let back = normalize(&parse_free(&e.to_string()).unwrap()).unwrap();
            assert_eq!(back, e, "{s} rendered as {e}");
        }
    }
}
