//! Canonical normal form.
//!
//! An expression is normalized into a sum of terms `c * prod(base^exp)`:
//!
//! * `c` is an exact rational; bases are atoms, function calls, rational
//!   numbers (only under non-integer exponents) or sums (only under
//!   exponents that are not positive integers);
//! * exponents are themselves normalized expressions, so `x^(n-3) * x^3`
//!   merges to `x^n`;
//! * positive integer powers of sums are expanded;
//! * a sum raised to a negative integer has its monomial and rational
//!   content pulled out and is made monic, so `1/(6 - 2n)` becomes
//!   `-1/2 * (n - 3)^-1`.
//!
//! A nonempty expanded form can still be zero as a rational function
//! (`1/(n-3) - 1/n - 3/(n(n-3))`). [`normalize`] clears sum denominators
//! and returns zero when the numerator vanishes.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::expr::{Elementary, Expr, OpaqueCall, Rational};
use super::SymError;

pub(crate) type Monomial = BTreeMap<Expr, Expr>;

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct SumForm {
    pub(crate) terms: BTreeMap<Monomial, Rational>,
}

/// Returns the canonical representative of `e`.
pub fn normalize(e: &Expr) -> Result<Expr, SymError> {
    let form = SumForm::from_expr(e)?;
    if form.vanishes()? {
        return Ok(Expr::zero());
    }
    Ok(form.to_expr())
}

fn rational_pow(base: &Rational, k: &BigInt) -> Result<Rational, SymError> {
    use num_traits::ToPrimitive;
    let k = k
        .to_i32()
        .ok_or_else(|| SymError::Malformed(format!("exponent {k} too large for exact power")))?;
    if base.is_zero() && k < 0 {
        return Err(SymError::Malformed("division by zero".into()));
    }
    Ok(num_traits::pow::Pow::pow(base, k))
}

fn exp_add(a: &Expr, b: &Expr) -> Result<Expr, SymError> {
    match (a, b) {
        (Expr::Num(p), Expr::Num(q)) => Ok(Expr::Num(p + q)),
        _ => normalize(&Expr::sum(vec![a.clone(), b.clone()])),
    }
}

fn exp_mul(a: &Expr, b: &Expr) -> Result<Expr, SymError> {
    match (a, b) {
        (Expr::Num(p), Expr::Num(q)) => Ok(Expr::Num(p * q)),
        _ if a.is_one_tree() => Ok(b.clone()),
        _ if b.is_one_tree() => Ok(a.clone()),
        _ => normalize(&Expr::product(vec![a.clone(), b.clone()])),
    }
}

fn positive_integer(e: &Expr) -> Option<u32> {
    use num_traits::ToPrimitive;
    match e {
        Expr::Num(q) if q.is_integer() && q.is_positive() => q.to_integer().to_u32(),
        _ => None,
    }
}

impl SumForm {
    pub(crate) fn constant(q: Rational) -> Self {
        let mut f = SumForm::default();
        if !q.is_zero() {
            f.terms.insert(Monomial::new(), q);
        }
        f
    }

    fn factor(base: Expr, exponent: Expr) -> Self {
        let mut m = Monomial::new();
        m.insert(base, exponent);
        let mut f = SumForm::default();
        f.terms.insert(m, Rational::one());
        f
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, mono: Monomial, coef: Rational) {
        if coef.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + coef;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub(crate) fn add_assign(&mut self, other: SumForm) {
        for (m, c) in other.terms {
            self.add_term(m, c);
        }
    }

    fn scale(&self, q: &Rational) -> SumForm {
        let mut out = SumForm::default();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * q);
        }
        out
    }

    pub(crate) fn from_expr(e: &Expr) -> Result<SumForm, SymError> {
        match e {
            Expr::Num(q) => Ok(SumForm::constant(q.clone())),
            Expr::Atom(_) => Ok(SumForm::factor(e.clone(), Expr::one())),
            Expr::Add(ts) => {
                let mut acc = SumForm::default();
                for t in ts.iter() {
                    acc.add_assign(SumForm::from_expr(t)?);
                }
                Ok(acc)
            }
            Expr::Mul(fs) => {
                let mut acc = SumForm::constant(Rational::one());
                for f in fs.iter() {
                    let next = SumForm::from_expr(f)?;
                    acc = acc.mul(&next)?;
                }
                Ok(acc)
            }
            Expr::Pow(be) => {
                let exponent = normalize(&be.1)?;
                let base = SumForm::from_expr(&be.0)?;
                base.pow(&exponent)
            }
            Expr::Func(f, arg) => {
                let arg = normalize(arg)?;
                if *f == Elementary::Sqrt {
                    return SumForm::from_expr(&arg)?.pow(&Expr::rational(1, 2));
                }
                if let Some(q) = arg.as_num() {
                    if q.is_zero() {
                        match f {
                            Elementary::Sin => return Ok(SumForm::default()),
                            Elementary::Cos | Elementary::Exp => {
                                return Ok(SumForm::constant(Rational::one()))
                            }
                            Elementary::Ln => {
                                return Err(SymError::Malformed("ln(0) is undefined".into()))
                            }
                            Elementary::Sqrt => unreachable!(),
                        }
                    }
                    if *f == Elementary::Ln && q.is_one() {
                        return Ok(SumForm::default());
                    }
                }
                Ok(SumForm::factor(Expr::func(*f, arg), Expr::one()))
            }
            Expr::Opaque(call) => {
                let args = call.args.iter().map(normalize).collect::<Result<Vec<_>, _>>()?;
                let call = OpaqueCall { name: call.name.clone(), args, derivs: call.derivs.clone() };
                Ok(SumForm::factor(Expr::Opaque(std::sync::Arc::new(call)), Expr::one()))
            }
        }
    }

    pub(crate) fn to_expr(&self) -> Expr {
        let terms = self
            .terms
            .iter()
            .map(|(mono, c)| {
                let mut factors = Vec::with_capacity(mono.len() + 1);
                if !c.is_one() || mono.is_empty() {
                    factors.push(Expr::Num(c.clone()));
                }
                for (b, e) in mono {
                    if e.is_one_tree() {
                        factors.push(b.clone());
                    } else {
                        factors.push(b.clone().pow(e.clone()));
                    }
                }
                Expr::product(factors)
            })
            .collect();
        Expr::sum(terms)
    }

    pub(crate) fn mul(&self, other: &SumForm) -> Result<SumForm, SymError> {
        let mut out = SumForm::default();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_assign(mul_terms(m1, c1, m2, c2)?);
            }
        }
        Ok(out)
    }

    fn pow_uint(&self, k: u32) -> Result<SumForm, SymError> {
        let mut result = SumForm::constant(Rational::one());
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    pub(crate) fn pow(&self, exponent: &Expr) -> Result<SumForm, SymError> {
        if exponent.is_zero_tree() {
            return Ok(SumForm::constant(Rational::one()));
        }
        if self.is_empty() {
            return match exponent {
                Expr::Num(q) if q.is_positive() => Ok(SumForm::default()),
                Expr::Num(_) => Err(SymError::Malformed("division by zero".into())),
                _ => Err(SymError::Malformed("zero raised to a symbolic power".into())),
            };
        }
        if let Some(k) = positive_integer(exponent) {
            return self.pow_uint(k);
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            return pow_term(m, c, exponent);
        }
        let negative_integer = matches!(exponent, Expr::Num(q) if q.is_integer() && q.is_negative());
        if !negative_integer {
            return Ok(SumForm::factor(self.to_expr(), exponent.clone()));
        }
        let (content, lead, primitive) = self.extract_content()?;
        if primitive.is_empty() {
            return Err(SymError::Malformed("division by zero".into()));
        }
        let mut out = pow_term(&content, &lead, exponent)?;
        let prim_pow = if primitive.terms.len() == 1 {
            primitive.pow(exponent)?
        } else {
            SumForm::factor(primitive.to_expr(), exponent.clone())
        };
        out = out.mul(&prim_pow)?;
        Ok(out)
    }

    /// Splits a multi-term sum into `content * lead * primitive` where
    /// `content` is the common monomial factor (integer exponents only) and
    /// `primitive` has leading coefficient one.
    fn extract_content(&self) -> Result<(Monomial, Rational, SumForm), SymError> {
        let mut content = Monomial::new();
        let mut current = self.clone();
        for _ in 0..8 {
            let step = integer_content(&current);
            if step.is_empty() {
                break;
            }
            let inverse: Monomial = step
                .iter()
                .map(|(b, e)| (b.clone(), Expr::Num(-e.as_num().unwrap().clone())))
                .collect();
            let mut next = SumForm::default();
            for (m, c) in &current.terms {
                next.add_assign(mul_terms(m, c, &inverse, &Rational::one())?);
            }
            for (b, e) in step {
                let merged = match content.get(&b) {
                    Some(prev) => exp_add(prev, &e)?,
                    None => e,
                };
                if merged.is_zero_tree() {
                    content.remove(&b);
                } else {
                    content.insert(b, merged);
                }
            }
            current = next;
            if current.terms.len() <= 1 {
                break;
            }
        }
        let lead = match current.terms.iter().next_back() {
            Some((_, c)) => c.clone(),
            None => Rational::one(),
        };
        let primitive = current.scale(&lead.recip());
        Ok((content, lead, primitive))
    }

    /// True when this form is zero as a rational function of its kernels.
    pub(crate) fn vanishes(&self) -> Result<bool, SymError> {
        if self.is_empty() {
            return Ok(true);
        }
        let mut denominator = Monomial::new();
        for mono in self.terms.keys() {
            for (b, e) in mono {
                if let (Expr::Add(_), Expr::Num(q)) = (b, e) {
                    if q.is_integer() && q.is_negative() {
                        let k = -q.clone();
                        let entry = denominator.entry(b.clone()).or_insert_with(|| Expr::Num(k.clone()));
                        if k > *entry.as_num().unwrap() {
                            *entry = Expr::Num(k);
                        }
                    }
                }
            }
        }
        if denominator.is_empty() {
            return Ok(false);
        }
        let mut numerator = SumForm::default();
        for (m, c) in &self.terms {
            numerator.add_assign(mul_terms(m, c, &denominator, &Rational::one())?);
        }
        Ok(numerator.is_empty())
    }
}

/// Common monomial factor over bases carrying integer exponents.
fn integer_content(form: &SumForm) -> Monomial {
    let mut mins: BTreeMap<Expr, Rational> = BTreeMap::new();
    for mono in form.terms.keys() {
        for (b, e) in mono {
            if matches!(b, Expr::Num(_)) {
                continue;
            }
            if let Expr::Num(q) = e {
                if q.is_integer() {
                    mins.entry(b.clone()).or_insert_with(|| q.clone());
                }
            }
        }
    }
    for (b, min) in mins.iter_mut() {
        for mono in form.terms.keys() {
            let q = match mono.get(b) {
                Some(Expr::Num(q)) if q.is_integer() => q.clone(),
                Some(_) => {
                    // Mixed symbolic exponent; leave this base alone.
                    *min = Rational::zero();
                    break;
                }
                None => Rational::zero(),
            };
            if q < *min {
                *min = q;
            }
        }
    }
    mins.into_iter().filter(|(_, q)| !q.is_zero()).map(|(b, q)| (b, Expr::Num(q))).collect()
}

fn mul_terms(m1: &Monomial, c1: &Rational, m2: &Monomial, c2: &Rational) -> Result<SumForm, SymError> {
    let (small, large) = if m1.len() <= m2.len() { (m1, m2) } else { (m2, m1) };
    let mut merged = large.clone();
    let mut touched = false;
    for (b, e) in small {
        match merged.get_mut(b) {
            Some(prev) => {
                *prev = exp_add(prev, e)?;
                touched = true;
            }
            None => {
                merged.insert(b.clone(), e.clone());
            }
        }
    }
    let coef = c1 * c2;
    touched |= merged.iter().any(|(b, e)| matches!(b, Expr::Add(_)) && positive_integer(e).is_some());
    if !touched {
        // Disjoint bases cannot trigger folding or expansion.
        let mut out = SumForm::default();
        out.add_term(merged, coef);
        return Ok(out);
    }
    fixup(merged, coef)
}

/// Restores the monomial invariants after exponents changed.
fn fixup(mono: Monomial, coef: Rational) -> Result<SumForm, SymError> {
    let mut out = Monomial::new();
    let mut coef = coef;
    let mut expansions = Vec::new();
    for (base, exp) in mono {
        if exp.is_zero_tree() {
            continue;
        }
        match (&base, &exp) {
            (Expr::Num(b), Expr::Num(q)) => {
                let whole = q.floor();
                let frac = q - &whole;
                coef *= rational_pow(b, &whole.to_integer())?;
                if !frac.is_zero() {
                    out.insert(base.clone(), Expr::Num(frac));
                }
            }
            (Expr::Add(_), _) if positive_integer(&exp).is_some() => {
                expansions.push((base.clone(), positive_integer(&exp).unwrap()));
            }
            _ => {
                out.insert(base, exp);
            }
        }
    }
    let mut result = SumForm::default();
    result.add_term(out, coef);
    for (base, k) in expansions {
        let s = SumForm::from_expr(&base)?;
        result = result.mul(&s.pow_uint(k)?)?;
    }
    Ok(result)
}

fn pow_term(mono: &Monomial, coef: &Rational, exponent: &Expr) -> Result<SumForm, SymError> {
    let mut out = Monomial::new();
    let mut new_coef = Rational::one();
    match exponent {
        Expr::Num(q) if q.is_integer() => {
            new_coef = rational_pow(coef, &q.to_integer())?;
        }
        _ => {
            if !coef.is_one() {
                if coef.is_negative() {
                    out.insert(Expr::int(-1), exponent.clone());
                }
                let magnitude = coef.abs();
                if !magnitude.is_one() {
                    out.insert(Expr::Num(magnitude), exponent.clone());
                }
            }
        }
    }
    for (b, e) in mono {
        let scaled = exp_mul(e, exponent)?;
        match out.get_mut(b) {
            Some(prev) => *prev = exp_add(prev, &scaled)?,
            None => {
                out.insert(b.clone(), scaled);
            }
        }
    }
    fixup(out, new_coef)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_free;

    fn n(s: &str) -> Expr {
        normalize(&parse_free(s).unwrap()).unwrap()
    }

    #[test]
    fn ring_collection() {
        assert_eq!(n("x + x"), n("2*x"));
        assert_eq!(n("(1/(2*N))*2"), n("1/N"));
        assert_eq!(n("x*x^(n-1)"), n("x^n"));
        assert_eq!(n("(x+1)^2 - x^2 - 2*x - 1"), Expr::zero());
    }

    #[test]
    fn sum_denominators_are_monic() {
        assert_eq!(n("1/(6 - 2*n)"), n("-1/2/(n - 3)"));
        assert_eq!(n("1/(x^2 + x)"), n("1/x/(x + 1)"));
    }

    #[test]
    fn rational_function_zero() {
        assert_eq!(n("1/(n-3) - 1/n - 3/(n*(n-3))"), Expr::zero());
        assert_eq!(n("(x+1)/(x+1) - 1"), Expr::zero());
        assert_ne!(n("1/(n-3) - 1/n"), Expr::zero());
    }

    #[test]
    fn numeric_radicals() {
        assert_eq!(n("sqrt(2)*sqrt(2)"), Expr::int(2));
        assert_eq!(n("2^(3/2)"), n("2*2^(1/2)"));
        assert_eq!(n("(x^2)^(1/2)"), n("x"));
    }

    #[test]
    fn division_by_zero_is_malformed() {
        assert!(matches!(normalize(&parse_free("1/(x - x)").unwrap()), Err(SymError::Malformed(_))));
        assert!(normalize(&parse_free("0^(-2)").unwrap()).is_err());
    }

    #[test]
    fn constant_folding_of_functions() {
        assert_eq!(n("sin(x - x) + cos(0) + exp(0) + ln(1)"), Expr::int(2));
    }
}
