//! Unevaluated sum of two doubles, about 106 bits of mantissa.
//!
//! Needed where RK4 truncation error falls below double rounding, so the
//! convergence order of the integrator would otherwise be invisible.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::symcore::{Rational, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const LN2: DoubleDouble = DoubleDouble { hi: 0.693_147_180_559_945_3, lo: 2.319_046_813_846_299_6e-17 };
const TWO_PI: DoubleDouble = DoubleDouble { hi: 6.283_185_307_179_586, lo: 2.449_293_598_294_706_4e-16 };

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn from_bigint(n: &BigInt) -> Self {
        let hi = n.to_f64().unwrap_or(f64::NAN);
        if !hi.is_finite() {
            return DoubleDouble { hi, lo: 0.0 };
        }
        let rest = n - BigInt::from_f64(hi).unwrap_or_default();
        DoubleDouble::new(hi, rest.to_f64().unwrap_or(0.0))
    }

    fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        DoubleDouble { hi: self.hi * s, lo: self.lo * s }
    }

    fn recip(self) -> Self {
        DoubleDouble::ONE / self
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * DoubleDouble::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * DoubleDouble::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from_f64(q3)
    }
}

impl Real for DoubleDouble {
    fn from_f64(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }

    fn from_rational(q: &Rational) -> Self {
        DoubleDouble::from_bigint(q.numer()) / DoubleDouble::from_bigint(q.denom())
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from_f64(self.hi.sqrt());
        }
        let q = DoubleDouble::from_f64(self.hi.sqrt());
        q + (self - q * q) / (q + q)
    }

    fn root(self, n: u32) -> Self {
        match n {
            1 => self,
            2 => self.sqrt(),
            _ => {
                if self.hi <= 0.0 {
                    return DoubleDouble::from_f64(self.hi.powf(1.0 / n as f64));
                }
                let nn = DoubleDouble::from_f64(n as f64);
                let mut x = DoubleDouble::from_f64(self.hi.powf(1.0 / n as f64));
                for _ in 0..2 {
                    let xn1 = x.powi(n as i32 - 1);
                    x = x - (xn1 * x - self) / (nn * xn1);
                }
                x
            }
        }
    }

    fn powi(self, k: i32) -> Self {
        let mut base = if k < 0 { self.recip() } else { self };
        let mut e = k.unsigned_abs();
        let mut acc = DoubleDouble::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return DoubleDouble::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return DoubleDouble::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * DoubleDouble::from_f64(k)).ldexp(-10);
        // expm1 by Taylor series on |r| < 2^-10, then undo the scaling with
        // s -> 2s + s^2 so the leading 1 never absorbs low bits.
        let mut term = r;
        let mut s = r;
        for i in 2..=20 {
            term = term * r / DoubleDouble::from_f64(i as f64);
            s = s + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            s = s * (DoubleDouble::from_f64(2.0) + s);
        }
        let sum = s + DoubleDouble::ONE;
        sum.ldexp(k as i32)
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from_f64(f64::NAN);
        }
        let mut y = DoubleDouble::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - DoubleDouble::ONE;
        }
        y
    }

    fn sin(self) -> Self {
        let (s, _) = sin_cos(self);
        s
    }

    fn cos(self) -> Self {
        let (_, c) = sin_cos(self);
        c
    }
}

fn sin_cos(a: DoubleDouble) -> (DoubleDouble, DoubleDouble) {
    let k = (a.hi / TWO_PI.hi).round();
    let r = a - TWO_PI * DoubleDouble::from_f64(k);
    let r2 = r * r;
    let mut term = r;
    let mut sin = r;
    let mut i = 1.0;
    loop {
        term = -term * r2 / DoubleDouble::from_f64((i + 1.0) * (i + 2.0));
        sin = sin + term;
        i += 2.0;
        if term.hi.abs() < 1e-34 || i > 80.0 {
            break;
        }
    }
    let mut term = DoubleDouble::ONE;
    let mut cos = DoubleDouble::ONE;
    let mut i = 0.0;
    loop {
        term = -term * r2 / DoubleDouble::from_f64((i + 1.0) * (i + 2.0));
        cos = cos + term;
        i += 2.0;
        if term.hi.abs() < 1e-34 || i > 80.0 {
            break;
        }
    }
    (sin, cos)
}
