//! Candidate verdicts, Noether first integrals and weak-conservation
//! certificates.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::model::Model;
use crate::noether::{determining_system, determining_system_fixed_lapse, CandidateSymmetry, MonomialClass};
use crate::symcore::{collect, diff, is_zero, normalize, substitute, Atom, Expr, ProbeConfig, ZeroVerdict};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct VerifiedEntry {
    pub order: usize,
    pub class: MonomialClass,
    pub index: Vec<usize>,
    pub residual: Expr,
    pub verdict: ZeroVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    PassProbabilistic,
    Fail,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::PassProbabilistic => "pass-probabilistic",
            Status::Fail => "fail",
        }
    }

    pub fn passed(self) -> bool {
        self != Status::Fail
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub candidate: String,
    /// Orders that were examined, in sequence.
    pub orders: Vec<usize>,
    pub entries: Vec<VerifiedEntry>,
    pub status: Status,
    /// Set when a failing exact order stopped the run early.
    pub aborted_at: Option<usize>,
    pub fixed_lapse: Option<Expr>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &VerifiedEntry> {
        self.entries.iter().filter(|e| e.verdict.is_nonzero())
    }

    pub fn order_status(&self, g: usize) -> Option<Status> {
        if !self.orders.contains(&g) {
            return None;
        }
        Some(status_of(self.entries.iter().filter(|e| e.order == g)))
    }
}

fn status_of<'a>(entries: impl Iterator<Item = &'a VerifiedEntry>) -> Status {
    let mut status = Status::Pass;
    for e in entries {
        match e.verdict {
            ZeroVerdict::Nonzero { .. } => return Status::Fail,
            ZeroVerdict::ProbablyZero { .. } => status = Status::PassProbabilistic,
            ZeroVerdict::ProvedZero => {}
        }
    }
    status
}

fn run_orders(
    candidate: &CandidateSymmetry,
    max_order: usize,
    fixed_lapse: Option<Expr>,
    probe: &ProbeConfig,
    system: impl Fn(usize) -> Result<crate::noether::DeterminingSystem>,
) -> Result<VerificationReport> {
    let mut orders = Vec::new();
    let mut entries = Vec::new();
    let mut aborted_at = None;
    for g in 0..=max_order {
        orders.push(g);
        let sys = system(g)?;
        let mut failed = false;
        for e in sys.entries {
            let verdict = is_zero(&e.residual, probe)?;
            failed |= verdict.is_nonzero();
            entries.push(VerifiedEntry { order: g, class: e.class, index: e.index, residual: e.residual, verdict });
        }
        if failed && g == 0 && max_order > 0 {
            aborted_at = Some(0);
            break;
        }
    }
    let status = status_of(entries.iter());
    Ok(VerificationReport { candidate: candidate.name.clone(), orders, entries, status, aborted_at, fixed_lapse })
}

/// Adjudicates every determining equation of `c` against `m`, order by
/// order up to `min(m.order, c.order())`, stopping if the exact order fails.
pub fn verify(m: &Model, c: &CandidateSymmetry, probe: &ProbeConfig) -> Result<VerificationReport> {
    c.validate(&m.space)?;
    let max_order = m.order.min(c.order());
    run_orders(c, max_order, None, probe, |g| determining_system(m, g, Some(c)))
}

/// As [`verify`] with the lapse frozen to `n0`.
pub fn verify_fixed_lapse(m: &Model, c: &CandidateSymmetry, n0: &Expr, probe: &ProbeConfig) -> Result<VerificationReport> {
    c.validate(&m.space)?;
    if c.has_omega() {
        return Err(Error::Usage(format!("candidate `{}` has a lapse component; not allowed at fixed lapse", c.name)));
    }
    let n0 = normalize(n0)?;
    let max_order = m.order.min(c.order());
    run_orders(c, max_order, Some(n0.clone()), probe, |g| determining_system_fixed_lapse(m, g, c, &n0))
}

/// Momentum used when assembling first integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MomentumConvention {
    /// `dL/dxdot^i = (1/N) M_ij xdot^j`.
    #[default]
    Exact,
    /// `(1/(2N)) M_ij xdot^j`; kept to show it does not reproduce the case
    /// integrals.
    HalfFactor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstIntegral {
    pub order: usize,
    pub expr: Expr,
}

/// `I_g = xi_g H0 + xi_{g-1} H1 - p0 . eta_g - p1 . eta_{g-1} + f_g`.
pub fn first_integral(m: &Model, c: &CandidateSymmetry, g: usize, convention: MomentumConvention) -> Result<FirstIntegral> {
    if g > m.order {
        return Err(Error::Usage(format!("order {g} exceeds the model truncation order {}", m.order)));
    }
    c.validate(&m.space)?;
    let n = m.space.dim();
    let factor = match convention {
        MomentumConvention::Exact => Expr::one(),
        MomentumConvention::HalfFactor => Expr::rational(1, 2),
    };
    let mut parts = Vec::new();
    let mut add = |a: usize, terms: &crate::noether::GeneratorTerms| -> Result<()> {
        if !terms.xi.is_zero_tree() {
            parts.push(&terms.xi * m.hamiltonian(a)?);
        }
        for (i, eta) in terms.eta.iter().enumerate() {
            if !eta.is_zero_tree() {
                parts.push(Expr::product(vec![Expr::int(-1), factor.clone(), m.momentum(a, i)?, eta.clone()]));
            }
        }
        Ok(())
    };
    let current = c.at(g, n);
    add(0, &current)?;
    if g >= 1 {
        add(1, &c.at(g - 1, n))?;
    }
    parts.push(current.f);
    Ok(FirstIntegral { order: g, expr: normalize(&Expr::sum(parts))? })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakCertificate {
    /// Multiplier against the constraint: `D_t I = lambda * H + remainder`.
    pub lambda: Expr,
    /// The same multiplier against `dL0/dN = -H`.
    pub lambda_dl_dn: Expr,
    pub remainder: Expr,
    pub verdict: ZeroVerdict,
}

impl WeakCertificate {
    pub fn valid(&self) -> bool {
        !self.verdict.is_nonzero()
    }
}

/// On-shell `D_t I` with the exact accelerations substituted.
pub fn on_shell_derivative(m: &Model, integral: &Expr) -> Result<Expr> {
    let sys = m.accel_solve(false)?;
    m.total_derivative(integral, Some(&sys.accelerations))
}

/// Divides the on-shell derivative of `integral` by the constraint, as
/// polynomials in the coordinate velocities under graded-lex order.
///
/// A single divisor is a Groebner basis, so the remainder is unique; it is
/// zero exactly when `D_t I` is a multiple of the constraint.
pub fn weak_certificate(m: &Model, integral: &FirstIntegral, probe: &ProbeConfig) -> Result<WeakCertificate> {
    let dt = on_shell_derivative(m, &integral.expr)?;
    divide_by_constraint(m, &dt, probe)
}

/// Certificates for the truncated series `I_0 + eps I_1`.
///
/// Order 0 is [`weak_certificate`]. At order 1 the eps-coefficient of
/// `D_t (I_0 + eps I_1)` along the corrected flow is
/// `D_t I_1 + (dI_0/dxdot) . a_1`, which must equal `lambda_0 H_1 + lambda_1 H_0`;
/// the certificate carries `lambda_1` and the remainder of that division.
pub fn weak_certificate_series(
    m: &Model,
    integrals: &[FirstIntegral],
    probe: &ProbeConfig,
) -> Result<Vec<WeakCertificate>> {
    if integrals.len() > 2 || integrals.iter().enumerate().any(|(k, i)| i.order != k) {
        return Err(Error::Usage("certificate series needs integrals of orders 0 and optionally 1, in order".into()));
    }
    let mut out = Vec::new();
    let Some(i0) = integrals.first() else { return Ok(out) };
    let c0 = weak_certificate(m, i0, probe)?;
    if let Some(i1) = integrals.get(1) {
        let sys = m.accel_solve(true)?;
        let a1 = sys.correction.as_deref().unwrap_or_default();
        let mut parts = vec![m.total_derivative(&i1.expr, Some(&sys.accelerations))?];
        for (i, a) in a1.iter().enumerate() {
            parts.push(diff(&i0.expr, m.space.velocity(i))? * a);
        }
        let h1 = -diff(&m.lagrangian(1)?, m.space.lapse())?;
        parts.push(-(&c0.lambda * h1));
        let target = normalize(&Expr::sum(parts))?;
        out.push(c0);
        out.push(divide_by_constraint(m, &target, probe)?);
    } else {
        out.push(c0);
    }
    Ok(out)
}

fn divide_by_constraint(m: &Model, dt: &Expr, probe: &ProbeConfig) -> Result<WeakCertificate> {
    let vel: Vec<Atom> = m.space.velocities().to_vec();
    let mut p: BTreeMap<Vec<u32>, Expr> = collect(dt, &vel)?.terms;
    let divisor = collect(&m.constraint()?, &vel)?.terms;
    let (lead_key, lead_coef) = divisor
        .iter()
        .max_by(|a, b| grlex(a.0, b.0))
        .map(|(k, c)| (k.clone(), c.clone()))
        .ok_or_else(|| Error::Usage("constraint is identically zero".into()))?;
    let mut quotient: BTreeMap<Vec<u32>, Expr> = BTreeMap::new();
    let mut remainder: BTreeMap<Vec<u32>, Expr> = BTreeMap::new();
    while let Some(key) = p.keys().max_by(|a, b| grlex(a, b)).cloned() {
        let coef = p.remove(&key).unwrap();
        let Some(shift) = divides(&lead_key, &key) else {
            remainder.insert(key, coef);
            continue;
        };
        let q = normalize(&(&coef / &lead_coef))?;
        for (dk, dc) in &divisor {
            if *dk == lead_key {
                continue;
            }
            let k: Vec<u32> = dk.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let prev = p.remove(&k).unwrap_or_else(Expr::zero);
            let next = normalize(&(prev - &q * dc))?;
            if !next.is_zero_tree() {
                p.insert(k, next);
            }
        }
        let prev = quotient.remove(&shift).unwrap_or_else(Expr::zero);
        let next = normalize(&(prev + q))?;
        if !next.is_zero_tree() {
            quotient.insert(shift, next);
        }
    }
    let monomial = |k: &[u32]| -> Expr {
        Expr::product(
            vel.iter().zip(k).filter(|(_, &e)| e > 0).map(|(a, &e)| Expr::atom(a).powi(e as i64)).collect(),
        )
    };
    let lambda = normalize(&Expr::sum(quotient.iter().map(|(k, c)| monomial(k) * c).collect()))?;
    let remainder = normalize(&Expr::sum(remainder.iter().map(|(k, c)| monomial(k) * c).collect()))?;
    let verdict = is_zero(&remainder, probe)?;
    Ok(WeakCertificate { lambda_dl_dn: normalize(&(-&lambda))?, lambda, remainder, verdict })
}

/// Graded lexicographic comparison of exponent vectors.
fn grlex(a: &[u32], b: &[u32]) -> Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    da.cmp(&db).then_with(|| a.cmp(b))
}

/// `Some(m / d)` when monomial `d` divides `m`.
fn divides(d: &[u32], m: &[u32]) -> Option<Vec<u32>> {
    d.iter().zip(m).map(|(a, b)| b.checked_sub(*a)).collect()
}

/// Restricts a certificate to the frozen lapse `N = n0`, `Ndot = 0`.
///
/// The constraint is not imposed there, so the result has `lambda = 0` and
/// the whole of `lambda H + remainder` as its remainder: valid means
/// conserved outright.
pub fn restrict_to_fixed_lapse(
    m: &Model,
    cert: &WeakCertificate,
    n0: &Expr,
    probe: &ProbeConfig,
) -> Result<WeakCertificate> {
    let b = crate::noether::fixed_lapse_bindings(&m.space, n0);
    let whole = &cert.lambda * m.constraint()? + &cert.remainder;
    let remainder = substitute(&whole, &b)?;
    let verdict = is_zero(&remainder, probe)?;
    Ok(WeakCertificate { lambda: Expr::zero(), lambda_dl_dn: Expr::zero(), remainder, verdict })
}

/// Substitutes the given `Ndot` value into a certificate remainder; used to
/// confirm the verdict does not depend on the lapse velocity.
pub fn remainder_at_ndot(m: &Model, cert: &WeakCertificate, ndot: &Expr) -> Result<Expr> {
    let mut b = BTreeMap::new();
    b.insert(m.space.lapse_velocity().clone(), ndot.clone());
    Ok(substitute(&cert.remainder, &b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::MetricTable;
    use crate::noether::GeneratorTerms;
    use crate::symcore::{parse, Assumptions, VariableSpace};

    fn case_a() -> Model {
        let space =
            VariableSpace::build(&[("x".into(), Assumptions::positive())], &[("v1".into(), Assumptions::nonzero())])
                .unwrap();
        let p = |s: &str| parse(s, &space).unwrap();
        let x = space.coordinates().to_vec();
        Model::new(space.clone(), MetricTable::identity(&x), MetricTable::zero(&x), p("x^2/2"), p("v1*x^3/3"), 1)
            .unwrap()
    }

    fn e(m: &Model, s: &str) -> Expr {
        normalize(&parse(s, &m.space).unwrap()).unwrap()
    }

    #[test]
    fn hamiltonian_is_weakly_conserved_with_ndot_multiplier() {
        let m = case_a();
        let h0 = FirstIntegral { order: 0, expr: m.hamiltonian(0).unwrap() };
        let cert = weak_certificate(&m, &h0, &ProbeConfig::default()).unwrap();
        assert!(cert.verdict.is_proved());
        assert_eq!(cert.lambda, e(&m, "Ndot"));
    }

    #[test]
    fn case_a_momentum_part_multiplier() {
        let m = case_a();
        let i = FirstIntegral { order: 0, expr: e(&m, "-xdot/(N*x)") };
        let cert = weak_certificate(&m, &i, &ProbeConfig::default()).unwrap();
        assert!(cert.verdict.is_proved());
        assert_eq!(cert.lambda, e(&m, "2*N/x^2"));
        assert_eq!(cert.lambda_dl_dn, e(&m, "-2*N/x^2"));
    }

    #[test]
    fn constant_integral() {
        let m = case_a();
        let cert = weak_certificate(&m, &FirstIntegral { order: 0, expr: Expr::int(5) }, &ProbeConfig::default()).unwrap();
        assert!(cert.lambda.is_zero_tree() && cert.remainder.is_zero_tree());
    }

    #[test]
    fn non_conserved_quantity_leaves_remainder() {
        let m = case_a();
        let cert = weak_certificate(&m, &FirstIntegral { order: 0, expr: e(&m, "x") }, &ProbeConfig::default()).unwrap();
        assert!(!cert.valid());
        assert_eq!(cert.remainder, e(&m, "xdot"));
    }

    #[test]
    fn integral_of_exact_case_a_symmetry() {
        let m = case_a();
        let c = CandidateSymmetry::new(
            "Ai",
            vec![GeneratorTerms { xi: e(&m, "T(t)"), eta: vec![e(&m, "1/x")], omega: e(&m, "-N*(T'(t) + 2/x^2)"), f: Expr::zero() }],
        );
        let i = first_integral(&m, &c, 0, MomentumConvention::Exact).unwrap();
        assert_eq!(i.expr, normalize(&(e(&m, "T(t)") * m.hamiltonian(0).unwrap() - e(&m, "xdot/(N*x)"))).unwrap());
        let report = verify(&m, &c, &ProbeConfig::default()).unwrap();
        assert_eq!(report.status, Status::Pass);
        assert_eq!(report.orders, vec![0]);
    }

    #[test]
    fn fixed_lapse_rejects_omega() {
        let m = case_a();
        let c = CandidateSymmetry::new(
            "w",
            vec![GeneratorTerms { xi: Expr::zero(), eta: vec![Expr::zero()], omega: e(&m, "N"), f: Expr::zero() }],
        );
        assert!(matches!(verify_fixed_lapse(&m, &c, &Expr::one(), &ProbeConfig::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn grlex_order() {
        assert_eq!(grlex(&[2, 0], &[1, 1]), Ordering::Greater);
        assert_eq!(grlex(&[0, 1], &[2, 0]), Ordering::Less);
        assert_eq!(divides(&[1, 1], &[2, 1]), Some(vec![1, 0]));
        assert_eq!(divides(&[2, 0], &[1, 1]), None);
    }
}
