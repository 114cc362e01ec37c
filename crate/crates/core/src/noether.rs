//! Prolongation, the order-by-order Noether condition, and its separation
//! into determining equations.
//!
//! A generator is `X = X_0 + eps X_1 + ...` with
//! `X_g = xi_g d_t + eta_g^i d_i + omega_g d_N` and boundary terms `f_g`.
//! The coefficient of `eps^g` in `X^[1] L + L D_t xi - D_t f` is
//!
//! ```text
//! X_g^[1] L0 + X_{g-1}^[1] L1 + L0 D_t xi_g + L1 D_t xi_{g-1} - D_t f_g
//! ```
//!
//! and must vanish identically in the velocities `xdot^i`, `Ndot`.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{total_derivative, Model};
use crate::symcore::{collect, diff, normalize, substitute, Atom, Expr, VariableSpace};
use crate::{Error, Result};

/// Generator components at one perturbation order.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorTerms {
    pub xi: Expr,
    pub eta: Vec<Expr>,
    pub omega: Expr,
    pub f: Expr,
}

impl GeneratorTerms {
    pub fn zero(n: usize) -> Self {
        GeneratorTerms { xi: Expr::zero(), eta: vec![Expr::zero(); n], omega: Expr::zero(), f: Expr::zero() }
    }

    fn exprs(&self) -> impl Iterator<Item = &Expr> {
        std::iter::once(&self.xi).chain(self.eta.iter()).chain([&self.omega, &self.f])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSymmetry {
    pub name: String,
    /// Indexed by perturbation order.
    pub orders: Vec<GeneratorTerms>,
}

impl CandidateSymmetry {
    pub fn new(name: &str, orders: Vec<GeneratorTerms>) -> Self {
        CandidateSymmetry { name: name.to_string(), orders }
    }

    /// Highest declared order.
    pub fn order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    /// Terms at order `g`, zero beyond the declared orders.
    pub fn at(&self, g: usize, n: usize) -> GeneratorTerms {
        self.orders.get(g).cloned().unwrap_or_else(|| GeneratorTerms::zero(n))
    }

    pub fn has_omega(&self) -> bool {
        self.orders.iter().any(|o| !o.omega.is_zero_tree())
    }

    /// Checks arity and that no velocity or acceleration atom appears.
    pub fn validate(&self, space: &VariableSpace) -> Result<()> {
        let n = space.dim();
        let mut forbidden = space.all_velocities();
        forbidden.extend(space.accelerations().iter().cloned());
        for (g, terms) in self.orders.iter().enumerate() {
            if terms.eta.len() != n {
                return Err(Error::Dimension(format!(
                    "candidate `{}` order {g}: eta has {} components, expected {n}",
                    self.name,
                    terms.eta.len()
                )));
            }
            for e in terms.exprs() {
                if let Some(v) = forbidden.iter().find(|a| e.contains_atom(a)) {
                    return Err(Error::Sym(crate::SymError::Separation {
                        subtree: e.to_string(),
                        indeterminate: v.name().to_string(),
                    }));
                }
            }
        }
        Ok(())
    }

    /// Componentwise sum, used for linearity checks.
    pub fn add(&self, other: &CandidateSymmetry, n: usize) -> Result<CandidateSymmetry> {
        let len = self.orders.len().max(other.orders.len());
        let mut orders = Vec::with_capacity(len);
        for g in 0..len {
            let (a, b) = (self.at(g, n), other.at(g, n));
            orders.push(GeneratorTerms {
                xi: normalize(&(a.xi + b.xi))?,
                eta: a.eta.iter().zip(&b.eta).map(|(x, y)| normalize(&(x + y))).collect::<std::result::Result<_, _>>()?,
                omega: normalize(&(a.omega + b.omega))?,
                f: normalize(&(a.f + b.f))?,
            });
        }
        Ok(CandidateSymmetry { name: format!("{}+{}", self.name, other.name), orders })
    }
}

/// Generic candidate of opaque functions `xi{g}(t, x.., N)`, `eta{g}_{i}`,
/// `omega{g}`, `f{g}` for orders `0..=order`.
pub fn generic_candidate(space: &VariableSpace, order: usize) -> CandidateSymmetry {
    let mut args = vec![Expr::atom(space.time())];
    args.extend(space.coordinates().iter().map(Expr::atom));
    args.push(Expr::atom(space.lapse()));
    let orders = (0..=order)
        .map(|g| GeneratorTerms {
            xi: Expr::opaque(&format!("xi{g}"), args.clone()),
            eta: (1..=space.dim()).map(|i| Expr::opaque(&format!("eta{g}_{i}"), args.clone())).collect(),
            omega: Expr::opaque(&format!("omega{g}"), args.clone()),
            f: Expr::opaque(&format!("f{g}"), args.clone()),
        })
        .collect();
    CandidateSymmetry::new("generic", orders)
}

/// Coefficients of `d/dxdot^i` in the first prolongation:
/// `D_t eta^i - xdot^i D_t xi`. There is no `d/dNdot` part.
pub fn prolong(space: &VariableSpace, xi: &Expr, eta: &[Expr]) -> Result<Vec<Expr>> {
    let dxi = total_derivative(space, xi, None)?;
    let mut out = Vec::with_capacity(eta.len());
    for (i, e) in eta.iter().enumerate() {
        let de = total_derivative(space, e, None)?;
        out.push(normalize(&(de - Expr::atom(space.velocity(i)) * &dxi))?);
    }
    Ok(out)
}

/// `X^[1] L + L D_t xi` for a single generator and Lagrangian.
fn action_on(space: &VariableSpace, terms: &GeneratorTerms, l: &Expr) -> Result<Expr> {
    if l.is_zero_tree() {
        return Ok(Expr::zero());
    }
    let zeta = prolong(space, &terms.xi, &terms.eta)?;
    let mut parts = Vec::new();
    if !terms.xi.is_zero_tree() {
        parts.push(&terms.xi * diff(l, space.time())?);
        parts.push(l * total_derivative(space, &terms.xi, None)?);
    }
    for (i, e) in terms.eta.iter().enumerate() {
        if !e.is_zero_tree() {
            parts.push(e * diff(l, space.coordinate(i))?);
        }
    }
    if !terms.omega.is_zero_tree() {
        parts.push(&terms.omega * diff(l, space.lapse())?);
    }
    for (i, z) in zeta.iter().enumerate() {
        if !z.is_zero_tree() {
            parts.push(z * diff(l, space.velocity(i))?);
        }
    }
    Ok(normalize(&Expr::sum(parts))?)
}

/// Coefficient of `eps^g` in the Noether condition.
pub fn noether_residual(m: &Model, c: &CandidateSymmetry, g: usize) -> Result<Expr> {
    if g > m.order {
        return Err(Error::Usage(format!("order {g} exceeds the model truncation order {}", m.order)));
    }
    c.validate(&m.space)?;
    let n = m.space.dim();
    let current = c.at(g, n);
    let mut parts = vec![action_on(&m.space, &current, &m.lagrangian(0)?)?];
    if g >= 1 {
        parts.push(action_on(&m.space, &c.at(g - 1, n), &m.lagrangian(1)?)?);
    }
    parts.push(-total_derivative(&m.space, &current.f, None)?);
    Ok(normalize(&Expr::sum(parts))?)
}

/// Residual with the lapse frozen to `n0` (no `omega`, no `Ndot`).
pub fn noether_residual_fixed_lapse(m: &Model, c: &CandidateSymmetry, g: usize, n0: &Expr) -> Result<Expr> {
    if c.has_omega() {
        return Err(Error::Usage(format!("candidate `{}` has a lapse component; not allowed at fixed lapse", c.name)));
    }
    let r = noether_residual(m, c, g)?;
    Ok(substitute(&r, &fixed_lapse_bindings(&m.space, n0))?)
}

pub(crate) fn fixed_lapse_bindings(space: &VariableSpace, n0: &Expr) -> BTreeMap<Atom, Expr> {
    let mut b = BTreeMap::new();
    b.insert(space.lapse().clone(), n0.clone());
    b.insert(space.lapse_velocity().clone(), Expr::zero());
    b
}

/// The seven velocity classes of the determining system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MonomialClass {
    NdotXdotXdot,
    XdotXdotXdot,
    NdotXdot,
    XdotXdot,
    Xdot,
    Ndot,
    One,
}

impl MonomialClass {
    pub const ALL: [MonomialClass; 7] = [
        MonomialClass::NdotXdotXdot,
        MonomialClass::XdotXdotXdot,
        MonomialClass::NdotXdot,
        MonomialClass::XdotXdot,
        MonomialClass::Xdot,
        MonomialClass::Ndot,
        MonomialClass::One,
    ];

    pub const FIXED_LAPSE: [MonomialClass; 4] =
        [MonomialClass::XdotXdotXdot, MonomialClass::XdotXdot, MonomialClass::Xdot, MonomialClass::One];

    /// Degree in `xdot` and in `Ndot`.
    pub fn degrees(self) -> (u32, u32) {
        match self {
            MonomialClass::NdotXdotXdot => (2, 1),
            MonomialClass::XdotXdotXdot => (3, 0),
            MonomialClass::NdotXdot => (1, 1),
            MonomialClass::XdotXdot => (2, 0),
            MonomialClass::Xdot => (1, 0),
            MonomialClass::Ndot => (0, 1),
            MonomialClass::One => (0, 0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MonomialClass::NdotXdotXdot => "Ndot*xdot*xdot",
            MonomialClass::XdotXdotXdot => "xdot*xdot*xdot",
            MonomialClass::NdotXdot => "Ndot*xdot",
            MonomialClass::XdotXdot => "xdot*xdot",
            MonomialClass::Xdot => "xdot",
            MonomialClass::Ndot => "Ndot",
            MonomialClass::One => "1",
        }
    }

    fn from_degrees(d: u32, e: u32) -> Option<Self> {
        MonomialClass::ALL.into_iter().find(|c| c.degrees() == (d, e))
    }
}

impl fmt::Display for MonomialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeterminingEntry {
    pub order: usize,
    pub class: MonomialClass,
    /// Sorted velocity indices of the monomial (`[0, 0]` is `xdot^1 xdot^1`).
    pub index: Vec<usize>,
    /// Raw coefficient of the monomial in the residual.
    pub residual: Expr,
}

impl DeterminingEntry {
    /// The monomial itself, as an expression over `space`.
    pub fn monomial(&self, space: &VariableSpace) -> Expr {
        let (_, e) = self.class.degrees();
        let mut factors: Vec<Expr> = self.index.iter().map(|&i| Expr::atom(space.velocity(i))).collect();
        if e == 1 {
            factors.insert(0, Expr::atom(space.lapse_velocity()));
        }
        Expr::product(factors)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeterminingSystem {
    pub order: usize,
    pub fixed_lapse: bool,
    pub entries: Vec<DeterminingEntry>,
}

impl DeterminingSystem {
    pub fn class(&self, class: MonomialClass) -> impl Iterator<Item = &DeterminingEntry> {
        self.entries.iter().filter(move |e| e.class == class)
    }

    pub fn entry(&self, class: MonomialClass, index: &[usize]) -> Option<&DeterminingEntry> {
        self.entries.iter().find(|e| e.class == class && e.index == index)
    }

    /// `sum monomial * residual`, normalized.
    pub fn reconstruct(&self, space: &VariableSpace) -> Result<Expr> {
        let terms = self.entries.iter().map(|e| e.monomial(space) * &e.residual).collect();
        Ok(normalize(&Expr::sum(terms))?)
    }
}

/// Nondecreasing index tuples of length `k` over `0..n`.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in multisets(n, k - 1) {
        let start = rest.last().copied().unwrap_or(0);
        for i in start..n {
            let mut v = rest.clone();
            v.push(i);
            out.push(v);
        }
    }
    out
}

/// Separates a residual into the determining entries of every class,
/// including those whose coefficient is zero.
pub fn separate(space: &VariableSpace, residual: &Expr, order: usize, fixed_lapse: bool) -> Result<DeterminingSystem> {
    let n = space.dim();
    let indeterminates = space.all_velocities();
    let collected = collect(residual, &indeterminates)?;
    for key in collected.terms.keys() {
        let d: u32 = key[..n].iter().sum();
        let e = key[n];
        if MonomialClass::from_degrees(d, e).is_none() || (fixed_lapse && e > 0) {
            return Err(Error::Usage(format!(
                "residual has a monomial of degree {d} in xdot and {e} in Ndot outside the determining classes"
            )));
        }
    }
    let classes: &[MonomialClass] = if fixed_lapse { &MonomialClass::FIXED_LAPSE } else { &MonomialClass::ALL };
    let mut entries = Vec::new();
    for &class in classes {
        let (d, e) = class.degrees();
        for index in multisets(n, d as usize) {
            let mut key = vec![0u32; n + 1];
            for &i in &index {
                key[i] += 1;
            }
            key[n] = e;
            entries.push(DeterminingEntry { order, class, index, residual: collected.coefficient(&key) });
        }
    }
    Ok(DeterminingSystem { order, fixed_lapse, entries })
}

/// Determining system at order `g`, for a candidate or the generic one.
pub fn determining_system(m: &Model, g: usize, c: Option<&CandidateSymmetry>) -> Result<DeterminingSystem> {
    if m.v0.is_zero_tree() {
        return Err(Error::Usage("determining systems need a nonzero exact potential".into()));
    }
    let generic;
    let c = match c {
        Some(c) => c,
        None => {
            generic = generic_candidate(&m.space, g);
            &generic
        }
    };
    let r = noether_residual(m, c, g)?;
    separate(&m.space, &r, g, false)
}

/// Determining system with the lapse frozen to `n0`.
pub fn determining_system_fixed_lapse(
    m: &Model,
    g: usize,
    c: &CandidateSymmetry,
    n0: &Expr,
) -> Result<DeterminingSystem> {
    let r = noether_residual_fixed_lapse(m, c, g, n0)?;
    separate(&m.space, &r, g, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::MetricTable;
    use crate::symcore::{is_zero, parse, Assumptions, ProbeConfig};

    fn case_a() -> Model {
        let space =
            VariableSpace::build(&[("x".into(), Assumptions::positive())], &[("v1".into(), Assumptions::nonzero())])
                .unwrap();
        let p = |s: &str| parse(s, &space).unwrap();
        let x = space.coordinates().to_vec();
        Model::new(
            space.clone(),
            MetricTable::identity(&x),
            MetricTable::zero(&x),
            p("x^2/2"),
            p("v1*x^3/3"),
            1,
        )
        .unwrap()
    }

    fn terms(m: &Model, xi: &str, eta: &str, omega: &str, f: &str) -> GeneratorTerms {
        let p = |s: &str| parse(s, &m.space).unwrap();
        GeneratorTerms { xi: p(xi), eta: vec![p(eta)], omega: p(omega), f: p(f) }
    }

    fn e(m: &Model, s: &str) -> Expr {
        normalize(&parse(s, &m.space).unwrap()).unwrap()
    }

    #[test]
    fn prolongation_examples() {
        let m = case_a();
        let z = prolong(&m.space, &e(&m, "T(t)"), &[e(&m, "1/x")]).unwrap();
        assert_eq!(z[0], e(&m, "-xdot/x^2 - T'(t)*xdot"));
        assert!(prolong(&m.space, &e(&m, "3"), &[e(&m, "2")]).unwrap()[0].is_zero_tree());
        let z = prolong(&m.space, &Expr::zero(), &[e(&m, "N*x")]).unwrap();
        assert_eq!(z[0], e(&m, "Ndot*x + N*xdot"));
    }

    #[test]
    fn case_a_exact_symmetry_residual_vanishes() {
        let m = case_a();
        let c = CandidateSymmetry::new("Ai", vec![terms(&m, "T(t)", "1/x", "-N*(T'(t) + 2/x^2)", "0")]);
        assert!(noether_residual(&m, &c, 0).unwrap().is_zero_tree());
        let scaling = CandidateSymmetry::new("scale", vec![terms(&m, "0", "x", "0", "0")]);
        let r = noether_residual(&m, &scaling, 0).unwrap();
        assert!(!r.is_zero_tree());
        let zero = CandidateSymmetry::new("zero", vec![GeneratorTerms::zero(1), GeneratorTerms::zero(1)]);
        assert!(noether_residual(&m, &zero, 1).unwrap().is_zero_tree());
    }

    #[test]
    fn generic_system_has_seven_classes() {
        let m = case_a();
        let sys = determining_system(&m, 0, None).unwrap();
        assert_eq!(sys.entries.len(), 7);
        let s1 = &sys.entry(MonomialClass::NdotXdotXdot, &[0, 0]).unwrap().residual;
        let expected = e(&m, "-xi0[0,0,1](t, x, N)/(2*N)");
        assert!(is_zero(&(s1 - expected), &ProbeConfig::default()).unwrap().is_proved());
        let reconstructed = sys.reconstruct(&m.space).unwrap();
        let r = noether_residual(&m, &generic_candidate(&m.space, 0), 0).unwrap();
        assert!(normalize(&(reconstructed - r)).unwrap().is_zero_tree());
    }

    #[test]
    fn velocity_dependent_candidate_rejected() {
        let m = case_a();
        let c = CandidateSymmetry::new("bad", vec![terms(&m, "xdot", "0", "0", "0")]);
        assert!(matches!(noether_residual(&m, &c, 0), Err(Error::Sym(crate::SymError::Separation { .. }))));
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(multisets(2, 2), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(multisets(3, 3).len(), 10);
    }
}
