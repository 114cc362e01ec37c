use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::atom::Atom;
use super::eval::{eval_generic, rational_to_f64};
use super::expr::{Expr, OpaqueCall};
use super::normal::normalize;
use super::SymError;

/// Values at or below this fraction of the term scale count as zero.
///
/// Anything larger is reported nonzero, including the band up to `1e-6`
/// where a probe cannot tell rounding noise from a small residual.
pub const ZERO_TOLERANCE: f64 = 1e-9;

/// Atom name and sampled value.
pub type ProbePoint = Vec<(String, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub enum ZeroVerdict {
    ProvedZero,
    ProbablyZero { points: Vec<ProbePoint> },
    Nonzero { witness: ProbePoint, value: f64, scale: f64 },
}

impl ZeroVerdict {
    pub fn is_nonzero(&self) -> bool {
        matches!(self, ZeroVerdict::Nonzero { .. })
    }

    pub fn is_proved(&self) -> bool {
        matches!(self, ZeroVerdict::ProvedZero)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeConfig {
    pub seed: u64,
    pub points: usize,
    /// Resampling budget per point after domain errors.
    pub retries: usize,
}

impl ProbeConfig {
    pub const DEFAULT_SEED: u64 = 20_240_917;

    pub fn with_seed(seed: u64) -> Self {
        ProbeConfig { seed, ..Self::default() }
    }
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { seed: Self::DEFAULT_SEED, points: 8, retries: 64 }
    }
}

/// Decides whether `e` is identically zero.
///
/// A normalized zero is a proof. Otherwise `e` is evaluated at random points
/// that respect atom assumptions; opaque function values are pseudo-random but
/// consistent for equal arguments.
pub fn is_zero(e: &Expr, config: &ProbeConfig) -> Result<ZeroVerdict, SymError> {
    let e = normalize(e)?;
    if e.is_zero_tree() {
        return Ok(ZeroVerdict::ProvedZero);
    }
    let terms: Vec<Expr> = match &e {
        Expr::Add(ts) => ts.iter().cloned().collect(),
        other => vec![other.clone()],
    };
    let atoms: Vec<Atom> = e.atoms().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut points = Vec::new();
    for _ in 0..config.points.max(8) {
        let mut attempt = 0;
        loop {
            let values: Vec<f64> = atoms.iter().map(|a| sample(a, &mut rng)).collect();
            match probe(&terms, &atoms, &values, config.seed) {
                Ok((value, scale)) => {
                    let point: ProbePoint = atoms.iter().map(|a| a.name().to_string()).zip(values).collect();
                    if value.abs() > ZERO_TOLERANCE * scale {
                        return Ok(ZeroVerdict::Nonzero { witness: point, value, scale });
                    }
                    points.push(point);
                    break;
                }
                Err(SymError::Domain(_)) if attempt < config.retries => attempt += 1,
                Err(SymError::Domain(msg)) => {
                    return Err(SymError::ProbeFailure(format!(
                        "no admissible probe point after {} attempts ({msg})",
                        config.retries + 1
                    )))
                }
                Err(other) => return Err(other),
            }
        }
    }
    Ok(ZeroVerdict::ProbablyZero { points })
}

fn sample(atom: &Atom, rng: &mut ChaCha8Rng) -> f64 {
    let assumptions = atom.assumptions();
    loop {
        let k: u32 = rng.gen_range(17..192);
        let mut v = k as f64 / 64.0;
        if !assumptions.positive && rng.gen_bool(0.5) {
            v = -v;
        }
        let near_excluded = assumptions.excluded.iter().any(|q| (rational_to_f64(q) - v).abs() < 0.05);
        if !near_excluded {
            return v;
        }
    }
}

fn probe(terms: &[Expr], atoms: &[Atom], values: &[f64], seed: u64) -> Result<(f64, f64), SymError> {
    let lookup = |a: &Atom| atoms.iter().position(|b| b == a).map(|i| values[i]);
    let calls = |call: &OpaqueCall, args: &[f64]| -> Result<f64, SymError> { Ok(opaque_value(seed, call, args)) };
    let mut value = 0.0;
    let mut scale = 0.0;
    for t in terms {
        let v = eval_generic(t, &lookup, &calls)?;
        value += v;
        scale += v.abs();
    }
    Ok((value, scale))
}

/// Deterministic stand-in value for an opaque call.
fn opaque_value(seed: u64, call: &OpaqueCall, args: &[f64]) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(call.name.as_bytes());
    for d in &call.derivs {
        eat(&d.to_le_bytes());
    }
    for a in args {
        // Quantize so values differing by rounding noise hash alike.
        let q = (a * 1e9).round() as i64;
        eat(&q.to_le_bytes());
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    let unit = (z >> 11) as f64 / (1u64 << 53) as f64;
    0.5 + 2.0 * unit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_free;

    fn verdict(s: &str) -> ZeroVerdict {
        is_zero(&parse_free(s).unwrap(), &ProbeConfig::default()).unwrap()
    }

    #[test]
    fn proved_zero() {
        assert_eq!(verdict("x - x"), ZeroVerdict::ProvedZero);
        assert_eq!(verdict("(x+1)^2 - x^2 - 2*x - 1"), ZeroVerdict::ProvedZero);
    }

    #[test]
    fn nonzero_has_witness() {
        match verdict("x^2 - x") {
            ZeroVerdict::Nonzero { witness, value, .. } => {
                let x = witness[0].1;
                assert!((value - (x * x - x)).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transcendental_identity_is_probable_only() {
        match verdict("sin(x)^2 + cos(x)^2 - 1") {
            ZeroVerdict::ProbablyZero { points } => assert!(points.len() >= 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn opaque_calls_are_consistent() {
        assert!(verdict("T(t)*x - x*T(t)").is_proved());
        assert!(verdict("T(t) - T'(t)").is_nonzero());
    }

    #[test]
    fn deterministic_under_seed() {
        let e = parse_free("x^3 - y").unwrap();
        let a = is_zero(&e, &ProbeConfig::with_seed(7)).unwrap();
        let b = is_zero(&e, &ProbeConfig::with_seed(7)).unwrap();
        assert_eq!(a, b);
    }
}
