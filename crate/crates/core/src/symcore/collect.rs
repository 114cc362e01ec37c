use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};

use super::atom::Atom;
use super::expr::Expr;
use super::normal::{normalize, Monomial, SumForm};
use super::SymError;

/// Coefficients of a polynomial in a list of indeterminates.
///
/// Keys are exponent vectors aligned with `indeterminates`; coefficients are
/// normalized, nonzero, and free of the indeterminates.
#[derive(Clone, Debug, PartialEq)]
pub struct Collected {
    pub indeterminates: Vec<Atom>,
    pub terms: BTreeMap<Vec<u32>, Expr>,
}

impl Collected {
    pub fn coefficient(&self, exponents: &[u32]) -> Expr {
        self.terms.get(exponents).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn monomial(&self, exponents: &[u32]) -> Expr {
        let factors = self
            .indeterminates
            .iter()
            .zip(exponents)
            .filter(|(_, &k)| k > 0)
            .map(|(a, &k)| Expr::atom(a).powi(k as i64))
            .collect();
        Expr::product(factors)
    }

    /// Sum of monomial times coefficient, normalized.
    pub fn reconstruct(&self) -> Result<Expr, SymError> {
        let terms = self.terms.iter().map(|(k, c)| self.monomial(k) * c).collect();
        normalize(&Expr::sum(terms))
    }

    /// Total degree of the highest monomial, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.iter().sum()).max()
    }
}

/// Separates `e` by monomials in `indeterminates`.
pub fn collect(e: &Expr, indeterminates: &[Atom]) -> Result<Collected, SymError> {
    let form = SumForm::from_expr(&normalize(e)?)?;
    let mut groups: BTreeMap<Vec<u32>, SumForm> = BTreeMap::new();
    for (mono, coef) in &form.terms {
        let mut key = vec![0u32; indeterminates.len()];
        let mut rest = Monomial::new();
        for (base, exponent) in mono {
            if let Some(i) = base.as_atom().and_then(|a| indeterminates.iter().position(|x| x == a)) {
                key[i] = nonnegative_integer(exponent).ok_or_else(|| separation(base, exponent, &indeterminates[i]))?;
                continue;
            }
            if let Some(x) = indeterminates.iter().find(|x| base.contains_atom(x) || exponent.contains_atom(x)) {
                return Err(separation(base, exponent, x));
            }
            rest.insert(base.clone(), exponent.clone());
        }
        let mut single = SumForm::default();
        single.terms.insert(rest, coef.clone());
        groups.entry(key).or_default().add_assign(single);
    }
    let mut terms = BTreeMap::new();
    for (key, group) in groups {
        if group.is_empty() || group.vanishes()? {
            continue;
        }
        terms.insert(key, group.to_expr());
    }
    Ok(Collected { indeterminates: indeterminates.to_vec(), terms })
}

fn nonnegative_integer(e: &Expr) -> Option<u32> {
    match e {
        Expr::Num(q) if q.is_integer() && !q.is_negative() => q.to_integer().to_u32(),
        _ => None,
    }
}

fn separation(base: &Expr, exponent: &Expr, x: &Atom) -> SymError {
    let subtree = if exponent.is_one_tree() { base.clone() } else { base.clone().pow(exponent.clone()) };
    SymError::Separation { subtree: subtree.to_string(), indeterminate: x.name().to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_free;

    fn n(s: &str) -> Expr {
        normalize(&parse_free(s).unwrap()).unwrap()
    }

    #[test]
    fn velocity_classes() {
        let xd = Atom::free("xdot");
        let nd = Atom::free("Ndot");
        let c = collect(&n("Tp*xdot^2/(2*N) + xip*xdot*Ndot"), &[xd.clone(), nd.clone()]).unwrap();
        assert_eq!(c.terms.len(), 2);
        assert_eq!(c.coefficient(&[2, 0]), n("Tp/(2*N)"));
        assert_eq!(c.coefficient(&[1, 1]), n("xip"));
        assert_eq!(normalize(&(c.reconstruct().unwrap() - n("Tp*xdot^2/(2*N) + xip*xdot*Ndot"))).unwrap(), Expr::zero());
    }

    #[test]
    fn zero_is_empty() {
        assert!(collect(&Expr::zero(), &[Atom::free("x")]).unwrap().terms.is_empty());
    }

    #[test]
    fn non_polynomial_dependence_is_reported() {
        let err = collect(&n("sin(xdot) + xdot"), &[Atom::free("xdot")]).unwrap_err();
        match err {
            SymError::Separation { subtree, indeterminate } => {
                assert_eq!(subtree, "sin(xdot)");
                assert_eq!(indeterminate, "xdot");
            }
            other => panic!("{other:?}"),
        }
        assert!(collect(&n("1/xdot"), &[Atom::free("xdot")]).is_err());
    }

    #[test]
    fn coefficients_cancelling_as_rational_functions_drop_out() {
        let c = collect(&n("v*(1/(n-3) - 1/n - 3/(n*(n-3))) + v^2"), &[Atom::free("v")]).unwrap();
        assert_eq!(c.terms.len(), 1);
        assert_eq!(c.coefficient(&[2]), Expr::one());
    }
}
