use std::collections::BTreeMap;
use std::sync::Arc;

use super::atom::Atom;
use super::diff::diff;
use super::expr::{Expr, OpaqueCall};
use super::normal::normalize;
use super::SymError;

/// Simultaneous substitution of atoms, followed by normalization.
pub fn substitute(e: &Expr, bindings: &BTreeMap<Atom, Expr>) -> Result<Expr, SymError> {
    if bindings.is_empty() {
        return normalize(e);
    }
    normalize(&replace_atoms(e, bindings))
}

/// Substitution keyed by arbitrary expressions; only atom keys are allowed.
pub fn substitute_exprs(e: &Expr, bindings: &[(Expr, Expr)]) -> Result<Expr, SymError> {
    let mut map = BTreeMap::new();
    for (k, v) in bindings {
        match k {
            Expr::Atom(a) => {
                map.insert(a.clone(), v.clone());
            }
            other => return Err(SymError::Usage(format!("substitution key `{other}` is not an atom"))),
        }
    }
    substitute(e, &map)
}

fn replace_atoms(e: &Expr, bindings: &BTreeMap<Atom, Expr>) -> Expr {
    match e {
        Expr::Num(_) => e.clone(),
        Expr::Atom(a) => bindings.get(a).cloned().unwrap_or_else(|| e.clone()),
        Expr::Add(ts) => Expr::sum(ts.iter().map(|t| replace_atoms(t, bindings)).collect()),
        Expr::Mul(fs) => Expr::product(fs.iter().map(|f| replace_atoms(f, bindings)).collect()),
        Expr::Pow(be) => replace_atoms(&be.0, bindings).pow(replace_atoms(&be.1, bindings)),
        Expr::Func(f, a) => Expr::func(*f, replace_atoms(a, bindings)),
        Expr::Opaque(call) => Expr::Opaque(Arc::new(OpaqueCall {
            name: call.name.clone(),
            args: call.args.iter().map(|a| replace_atoms(a, bindings)).collect(),
            derivs: call.derivs.clone(),
        })),
    }
}

/// Replaces every application of the opaque function `name` (and its
/// derivatives) by `body`, a function of the placeholder atoms `params`.
///
/// `T := 1` turns `T(t)` into `1` and `T'(t)` into `0`.
pub fn substitute_function(e: &Expr, name: &str, params: &[Atom], body: &Expr) -> Result<Expr, SymError> {
    let mut cache = BTreeMap::new();
    let replaced = replace_function(e, name, params, body, &mut cache)?;
    normalize(&replaced)
}

fn replace_function(
    e: &Expr,
    name: &str,
    params: &[Atom],
    body: &Expr,
    cache: &mut BTreeMap<Vec<u32>, Expr>,
) -> Result<Expr, SymError> {
    let rec = |x: &Expr, cache: &mut BTreeMap<Vec<u32>, Expr>| replace_function(x, name, params, body, cache);
    Ok(match e {
        Expr::Num(_) | Expr::Atom(_) => e.clone(),
        Expr::Add(ts) => Expr::sum(ts.iter().map(|t| rec(t, cache)).collect::<Result<_, _>>()?),
        Expr::Mul(fs) => Expr::product(fs.iter().map(|f| rec(f, cache)).collect::<Result<_, _>>()?),
        Expr::Pow(be) => rec(&be.0, cache)?.pow(rec(&be.1, cache)?),
        Expr::Func(f, a) => Expr::func(*f, rec(a, cache)?),
        Expr::Opaque(call) => {
            let args = call.args.iter().map(|a| rec(a, cache)).collect::<Result<Vec<_>, _>>()?;
            if &*call.name != name {
                return Ok(Expr::Opaque(Arc::new(OpaqueCall {
                    name: call.name.clone(),
                    args,
                    derivs: call.derivs.clone(),
                })));
            }
            if args.len() != params.len() {
                return Err(SymError::Usage(format!(
                    "function `{name}` bound with {} parameters but applied to {} arguments",
                    params.len(),
                    args.len()
                )));
            }
            let derived = match cache.get(&call.derivs) {
                Some(d) => d.clone(),
                None => {
                    let mut d = normalize(body)?;
                    for (slot, &count) in call.derivs.iter().enumerate() {
                        for _ in 0..count {
                            d = diff(&d, &params[slot])?;
                        }
                    }
                    cache.insert(call.derivs.clone(), d.clone());
                    d
                }
            };
            let map: BTreeMap<Atom, Expr> = params.iter().cloned().zip(args).collect();
            replace_atoms(&derived, &map)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_free;

    fn n(s: &str) -> Expr {
        normalize(&parse_free(s).unwrap()).unwrap()
    }

    #[test]
    fn simultaneous_substitution() {
        let mut b = BTreeMap::new();
        b.insert(Atom::free("y"), n("2*x"));
        assert_eq!(substitute(&n("x + y"), &b).unwrap(), n("3*x"));
        // Simultaneous, not sequential.
        let mut swap = BTreeMap::new();
        swap.insert(Atom::free("x"), n("y"));
        swap.insert(Atom::free("y"), n("x"));
        assert_eq!(substitute(&n("x - 2*y"), &swap).unwrap(), n("y - 2*x"));
    }

    #[test]
    fn identity_is_noop() {
        let e = n("sin(x)/(y + 1) + T'(t)");
        assert_eq!(substitute(&e, &BTreeMap::new()).unwrap(), e);
    }

    #[test]
    fn non_atom_key_rejected() {
        let err = substitute_exprs(&n("x"), &[(n("x + 1"), n("2"))]).unwrap_err();
        assert!(matches!(err, SymError::Usage(_)));
    }

    #[test]
    fn function_substitution_differentiates_body() {
        let s = Atom::free("s");
        let e = n("T(t)*a + T'(t)*b + T''(t)");
        let got = substitute_function(&e, "T", &[s.clone()], &n("s^3")).unwrap();
        assert_eq!(got, n("t^3*a + 3*t^2*b + 6*t"));
        let got = substitute_function(&e, "T", &[s], &Expr::one()).unwrap();
        assert_eq!(got, n("a"));
    }
}
