use std::collections::BTreeSet;
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::atom::Atom;

pub type Rational = BigRational;

/// Elementary functions understood by the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Elementary {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Elementary {
    pub fn name(self) -> &'static str {
        match self {
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Exp => "exp",
            Elementary::Ln => "ln",
            Elementary::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Elementary::Sin,
            "cos" => Elementary::Cos,
            "exp" => Elementary::Exp,
            "ln" => Elementary::Ln,
            "sqrt" => Elementary::Sqrt,
            _ => return None,
        })
    }
}

/// Application of an undeclared function, e.g. `T(t)` or `xi0(t, x, N)`.
///
/// `derivs[i]` counts partial derivatives taken in argument slot `i`, so
/// mixed partials commute by construction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpaqueCall {
    pub name: Arc<str>,
    pub args: Vec<Expr>,
    pub derivs: Vec<u32>,
}

impl OpaqueCall {
    pub fn is_underived(&self) -> bool {
        self.derivs.iter().all(|&d| d == 0)
    }
}

/// Symbolic expression.
///
/// Values returned from [`Expr::normalize`] (and from every kernel operation)
/// are canonical: sums and products are flattened and sorted, rational
/// coefficients are collected, and no floating-point value appears anywhere.
/// The arithmetic operators build raw trees; call `normalize` on the result.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Num(Rational),
    Atom(Atom),
    Add(Arc<Vec<Expr>>),
    Mul(Arc<Vec<Expr>>),
    Pow(Arc<(Expr, Expr)>),
    Func(Elementary, Arc<Expr>),
    Opaque(Arc<OpaqueCall>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(Rational::zero())
    }

    pub fn one() -> Expr {
        Expr::Num(Rational::one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Num(Rational::from_integer(BigInt::from(n)))
    }

    pub fn rational(p: i64, q: i64) -> Expr {
        Expr::Num(Rational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn atom(a: &Atom) -> Expr {
        Expr::Atom(a.clone())
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::Add(Arc::new(terms)),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        match factors.len() {
            0 => Expr::one(),
            1 => factors.into_iter().next().unwrap(),
            _ => Expr::Mul(Arc::new(factors)),
        }
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::Pow(Arc::new((self, exponent)))
    }

    pub fn powi(self, k: i64) -> Expr {
        self.pow(Expr::int(k))
    }

    pub fn recip(self) -> Expr {
        self.powi(-1)
    }

    pub fn func(f: Elementary, arg: Expr) -> Expr {
        Expr::Func(f, Arc::new(arg))
    }

    pub fn sin(self) -> Expr {
        Expr::func(Elementary::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::func(Elementary::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::func(Elementary::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::func(Elementary::Ln, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::func(Elementary::Sqrt, self)
    }

    /// Underived opaque function application.
    pub fn opaque(name: &str, args: Vec<Expr>) -> Expr {
        let derivs = vec![0; args.len()];
        Expr::Opaque(Arc::new(OpaqueCall { name: Arc::from(name), args, derivs }))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self {
            Expr::Num(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Expr::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Syntactic zero test; exact for normalized expressions.
    pub fn is_zero_tree(&self) -> bool {
        matches!(self, Expr::Num(q) if q.is_zero())
    }

    pub fn is_one_tree(&self) -> bool {
        matches!(self, Expr::Num(q) if q.is_one())
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::Atom(_) => Vec::new(),
            Expr::Add(ts) | Expr::Mul(ts) => ts.iter().collect(),
            Expr::Pow(be) => vec![&be.0, &be.1],
            Expr::Func(_, a) => vec![a.as_ref()],
            Expr::Opaque(call) => call.args.iter().collect(),
        }
    }

    pub fn contains_atom(&self, atom: &Atom) -> bool {
        match self {
            Expr::Atom(a) => a == atom,
            _ => self.children().into_iter().any(|c| c.contains_atom(atom)),
        }
    }

    pub fn contains_any(&self, atoms: &[Atom]) -> bool {
        atoms.iter().any(|a| self.contains_atom(a))
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        if let Expr::Atom(a) = self {
            out.insert(a.clone());
        }
        for c in self.children() {
            c.collect_atoms(out);
        }
    }

    /// Distinct opaque calls (with their derivative indices) in the tree.
    pub fn opaque_calls(&self) -> BTreeSet<OpaqueCall> {
        let mut out = BTreeSet::new();
        self.collect_opaque(&mut out);
        out
    }

    fn collect_opaque(&self, out: &mut BTreeSet<OpaqueCall>) {
        if let Expr::Opaque(call) = self {
            out.insert(call.as_ref().clone());
        }
        for c in self.children() {
            c.collect_opaque(out);
        }
    }

    /// Number of nodes, used for diagnostics and benchmarks.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }
}

impl From<&Atom> for Expr {
    fn from(a: &Atom) -> Self {
        Expr::Atom(a.clone())
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(q: Rational) -> Self {
        Expr::Num(q)
    }
}

macro_rules! raw_binop {
    ($trait:ident, $method:ident, $build:expr) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $build(self, rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $build(self, rhs.clone())
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $build(self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $build(self.clone(), rhs)
            }
        }
    };
}

raw_binop!(Add, add, |a, b| Expr::sum(vec![a, b]));
raw_binop!(Sub, sub, |a, b: Expr| Expr::sum(vec![a, Expr::product(vec![Expr::int(-1), b])]));
raw_binop!(Mul, mul, |a, b| Expr::product(vec![a, b]));
raw_binop!(Div, div, |a, b: Expr| Expr::product(vec![a, b.recip()]));

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product(vec![Expr::int(-1), self])
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}
