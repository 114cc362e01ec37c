use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{Signed, ToPrimitive};

use super::atom::Atom;
use super::expr::{Elementary, Expr, OpaqueCall, Rational};
use super::SymError;

/// Scalar field the evaluator can run over.
///
/// Implemented for `f64` here and for the double-double type used by the
/// high-precision integrator.
pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn from_rational(q: &Rational) -> Self;
    fn to_f64(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;
    /// Principal `q`-th root of a non-negative value.
    fn root(self, q: u32) -> Self;

    fn powf(self, y: Self) -> Self {
        (self.ln() * y).exp()
    }

    fn abs(self) -> Self {
        if self < Self::from_f64(0.0) {
            -self
        } else {
            self
        }
    }

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_rational(q: &Rational) -> Self {
        rational_to_f64(q)
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn root(self, q: u32) -> Self {
        match q {
            1 => self,
            2 => f64::sqrt(self),
            3 => f64::cbrt(self),
            _ => f64::powf(self, 1.0 / q as f64),
        }
    }
    fn powf(self, y: Self) -> Self {
        f64::powf(self, y)
    }
}

pub(crate) fn rational_to_f64(q: &Rational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Scale down huge components before converting.
            let bits = q.numer().bits().max(q.denom().bits()) as i64 - 900;
            let shift = bits.max(0) as u64;
            let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// Numeric binding for an opaque function.
#[derive(Clone)]
pub enum FunctionBinding {
    /// A constant function; every derivative is zero.
    Constant(f64),
    /// Evaluates the function (or its partial derivative given by the
    /// multi-index) at the argument values.
    Callable(Arc<dyn Fn(&[f64], &[u32]) -> Option<f64> + Send + Sync>),
}

impl Debug for FunctionBinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionBinding::Constant(c) => write!(f, "Constant({c})"),
            FunctionBinding::Callable(_) => f.write_str("Callable(..)"),
        }
    }
}

pub type FunctionTable = BTreeMap<String, FunctionBinding>;

/// Evaluates `e` in double precision.
pub fn eval_num(e: &Expr, point: &BTreeMap<Atom, f64>, functions: &FunctionTable) -> Result<f64, SymError> {
    let atoms = |a: &Atom| point.get(a).copied();
    let calls = |call: &OpaqueCall, args: &[f64]| -> Result<f64, SymError> {
        match functions.get(&*call.name) {
            Some(FunctionBinding::Constant(c)) => Ok(if call.is_underived() { *c } else { 0.0 }),
            Some(FunctionBinding::Callable(f)) => f(args, &call.derivs)
                .ok_or_else(|| SymError::Domain(format!("function `{}` undefined at {args:?}", call.name))),
            None => Err(SymError::UnboundFunction(call.to_string())),
        }
    };
    eval_generic(e, &atoms, &calls)
}

/// Evaluates `e` over any [`Real`], with caller-supplied atom and call lookup.
pub fn eval_generic<R: Real>(
    e: &Expr,
    atoms: &dyn Fn(&Atom) -> Option<R>,
    calls: &dyn Fn(&OpaqueCall, &[R]) -> Result<R, SymError>,
) -> Result<R, SymError> {
    let zero = R::from_f64(0.0);
    let v = match e {
        Expr::Num(q) => R::from_rational(q),
        Expr::Atom(a) => atoms(a).ok_or_else(|| SymError::UnboundAtom(a.name().to_string()))?,
        Expr::Add(ts) => {
            let mut acc = zero;
            for t in ts.iter() {
                acc = acc + eval_generic(t, atoms, calls)?;
            }
            acc
        }
        Expr::Mul(fs) => {
            let mut acc = R::from_f64(1.0);
            for f in fs.iter() {
                acc = acc * eval_generic(f, atoms, calls)?;
            }
            acc
        }
        Expr::Pow(be) => {
            let base = eval_generic(&be.0, atoms, calls)?;
            match &be.1 {
                Expr::Num(q) => pow_rational(base, q)?,
                exponent => {
                    let y = eval_generic(exponent, atoms, calls)?;
                    pow_real(base, y)?
                }
            }
        }
        Expr::Func(f, arg) => {
            let a = eval_generic(arg, atoms, calls)?;
            match f {
                Elementary::Sin => a.sin(),
                Elementary::Cos => a.cos(),
                Elementary::Exp => a.exp(),
                Elementary::Ln => {
                    if a <= zero {
                        return Err(SymError::Domain(format!("ln of non-positive value {:?}", a.to_f64())));
                    }
                    a.ln()
                }
                Elementary::Sqrt => {
                    if a < zero {
                        return Err(SymError::Domain(format!("sqrt of negative value {:?}", a.to_f64())));
                    }
                    a.sqrt()
                }
            }
        }
        Expr::Opaque(call) => {
            let args = call.args.iter().map(|a| eval_generic(a, atoms, calls)).collect::<Result<Vec<_>, _>>()?;
            calls(call, &args)?
        }
    };
    if !v.is_finite() {
        return Err(SymError::Domain(format!("non-finite value in `{e}`")));
    }
    Ok(v)
}

pub(crate) fn pow_rational<R: Real>(base: R, q: &Rational) -> Result<R, SymError> {
    let zero = R::from_f64(0.0);
    let p = q.numer().to_i32().ok_or_else(|| SymError::Domain("exponent too large".into()))?;
    let d = q.denom().to_u32().ok_or_else(|| SymError::Domain("exponent too large".into()))?;
    if base == zero {
        return if q.is_positive() {
            Ok(zero)
        } else {
            Err(SymError::Domain("division by zero".into()))
        };
    }
    if d == 1 {
        return Ok(base.powi(p));
    }
    if base < zero {
        return Err(SymError::Domain(format!("negative base {:?} under exponent {q}", base.to_f64())));
    }
    Ok(base.root(d).powi(p))
}

pub(crate) fn pow_real<R: Real>(base: R, y: R) -> Result<R, SymError> {
    let zero = R::from_f64(0.0);
    if base > zero {
        return Ok(base.powf(y));
    }
    let yf = y.to_f64();
    if yf.fract() == 0.0 && yf.abs() < i32::MAX as f64 {
        if base == zero && yf <= 0.0 {
            return Err(SymError::Domain("division by zero".into()));
        }
        return Ok(base.powi(yf as i32));
    }
    if base == zero && yf > 0.0 {
        return Ok(zero);
    }
    Err(SymError::Domain(format!("base {:?} under non-integer exponent {yf}", base.to_f64())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_free;

    fn at(s: &str, vals: &[(&str, f64)]) -> Result<f64, SymError> {
        let point = vals.iter().map(|(n, v)| (Atom::free(n), *v)).collect();
        eval_num(&parse_free(s).unwrap(), &point, &FunctionTable::new())
    }

    #[test]
    fn direct_arithmetic() {
        assert_eq!(at("x^2", &[("x", 3.0)]).unwrap(), 9.0);
        let h = at("xdot^2/(2*N) + N/2*x^2", &[("N", 1.0), ("x", 0.0), ("xdot", 2f64.sqrt())]).unwrap();
        assert!((h - 1.0).abs() < 1e-15);
        let v = at("exp(x)*(x-3)/x^4", &[("x", 1.0)]).unwrap();
        assert!((v + 2.0 * std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(matches!(at("x + y", &[("x", 1.0)]), Err(SymError::UnboundAtom(ref a)) if a == "y"));
        assert!(matches!(at("ln(x)", &[("x", -1.0)]), Err(SymError::Domain(_))));
        assert!(matches!(at("1/x", &[("x", 0.0)]), Err(SymError::Domain(_))));
        assert!(matches!(at("T(t)", &[("t", 0.0)]), Err(SymError::UnboundFunction(_))));
    }

    #[test]
    fn constant_function_binding() {
        let mut f = FunctionTable::new();
        f.insert("T".into(), FunctionBinding::Constant(2.5));
        let point = [(Atom::free("t"), 0.3)].into_iter().collect();
        assert_eq!(eval_num(&parse_free("T(t) + T'(t)").unwrap(), &point, &f).unwrap(), 2.5);
    }
}
