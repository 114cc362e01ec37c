//! The perturbed lapse Lagrangian `L = L0 + eps L1`,
//! `L_a = 1/(2N) M_ij xdot^i xdot^j - N V_a` with `M = g` for `a = 0` and
//! `M = h` for `a = 1`.

use crate::geom::{christoffel, inverse_metric, MetricTable};
use crate::symcore::{diff, normalize, substitute, Atom, Expr, VariableSpace};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Model {
    pub space: VariableSpace,
    pub g: MetricTable,
    pub h: MetricTable,
    pub v0: Expr,
    pub v1: Expr,
    /// Perturbation truncation order; `0` means the exact Lagrangian only.
    pub order: usize,
}

/// Solved Euler-Lagrange flow.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerLagrangeSystem {
    pub constraint: Expr,
    /// Exact accelerations `xddot^k` in terms of `t, x, xdot, N, Ndot`.
    pub accelerations: Vec<Expr>,
    /// First-order corrections, when requested: the full flow is
    /// `accelerations + eps * correction`.
    pub correction: Option<Vec<Expr>>,
}

impl Model {
    pub fn new(space: VariableSpace, g: MetricTable, h: MetricTable, v0: Expr, v1: Expr, order: usize) -> Result<Self> {
        let n = space.dim();
        if g.dim() != n || h.dim() != n {
            return Err(Error::Dimension(format!("metrics must be {n}x{n}")));
        }
        if g.coords() != space.coordinates() || h.coords() != space.coordinates() {
            return Err(Error::Dimension("metric coordinates differ from the variable space".into()));
        }
        inverse_metric(&g)?;
        Ok(Model { space, g, h, v0: normalize(&v0)?, v1: normalize(&v1)?, order })
    }

    fn parts(&self, a: usize) -> Result<(&MetricTable, &Expr)> {
        match a {
            0 => Ok((&self.g, &self.v0)),
            1 => Ok((&self.h, &self.v1)),
            _ => Err(Error::Usage(format!("Lagrangian index {a} is not 0 or 1"))),
        }
    }

    fn velocities(&self) -> Vec<Expr> {
        self.space.velocities().iter().map(Expr::atom).collect()
    }

    fn lapse(&self) -> Expr {
        Expr::atom(self.space.lapse())
    }

    /// `M_ij xdot^i xdot^j` for the metric of order `a`.
    pub fn kinetic(&self, a: usize) -> Result<Expr> {
        let (m, _) = self.parts(a)?;
        let v = self.velocities();
        m.contract(&v, &v)
    }

    pub fn lagrangian(&self, a: usize) -> Result<Expr> {
        let (_, v) = self.parts(a)?;
        let n = self.lapse();
        let kin = self.kinetic(a)?;
        Ok(normalize(&(kin / (Expr::int(2) * &n) - n * v))?)
    }

    pub fn hamiltonian(&self, a: usize) -> Result<Expr> {
        let (_, v) = self.parts(a)?;
        let n = self.lapse();
        let kin = self.kinetic(a)?;
        Ok(normalize(&(kin / (Expr::int(2) * &n) + n * v))?)
    }

    /// `1/(2N^2) g_ij xdot^i xdot^j + V0`, equal to `-dL0/dN`.
    pub fn constraint(&self) -> Result<Expr> {
        let n = self.lapse();
        let kin = self.kinetic(0)?;
        Ok(normalize(&(kin / (Expr::int(2) * n.powi(2)) + &self.v0))?)
    }

    /// Canonical momentum `dL_a/dxdot^i = (1/N) M_ij xdot^j`.
    pub fn momentum(&self, a: usize, i: usize) -> Result<Expr> {
        let (m, _) = self.parts(a)?;
        let terms = self.velocities().into_iter().enumerate().map(|(j, v)| m.entry(i, j) * v).collect();
        Ok(normalize(&(Expr::sum(terms) / self.lapse()))?)
    }

    /// `D_t e` along a path. Accelerations default to the `xddot` atoms.
    pub fn total_derivative(&self, e: &Expr, accelerations: Option<&[Expr]>) -> Result<Expr> {
        total_derivative(&self.space, e, accelerations)
    }

    /// Variational Euler-Lagrange expressions `D_t(dL_a/dxdot^k) - dL_a/dx^k`
    /// with the acceleration atoms left free.
    pub fn euler_lagrange(&self, a: usize) -> Result<Vec<Expr>> {
        let l = self.lagrangian(a)?;
        let mut out = Vec::with_capacity(self.space.dim());
        for k in 0..self.space.dim() {
            let p = diff(&l, self.space.velocity(k))?;
            let dp = self.total_derivative(&p, None)?;
            out.push(normalize(&(dp - diff(&l, self.space.coordinate(k))?))?);
        }
        Ok(out)
    }

    /// Accelerations from `xddot^k = -Gamma^k_ij xdot^i xdot^j + (Ndot/N) xdot^k - N^2 g^ki V0_,i`.
    pub fn accel_solve(&self, with_correction: bool) -> Result<EulerLagrangeSystem> {
        let n = self.space.dim();
        let gam = christoffel(&self.g)?;
        let inv = inverse_metric(&self.g)?;
        let lapse = self.lapse();
        let ndot = Expr::atom(self.space.lapse_velocity());
        let v = self.velocities();
        let mut grad = Vec::with_capacity(n);
        for x in self.space.coordinates() {
            grad.push(diff(&self.v0, x)?);
        }
        let mut accelerations = Vec::with_capacity(n);
        for k in 0..n {
            let mut terms = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let c = gam.get(k, i, j);
                    if !c.is_zero_tree() {
                        terms.push(Expr::product(vec![Expr::int(-1), c.clone(), v[i].clone(), v[j].clone()]));
                    }
                }
                let gi = inv.entry(k, i);
                if !gi.is_zero_tree() && !grad[i].is_zero_tree() {
                    terms.push(Expr::product(vec![Expr::int(-1), lapse.clone().powi(2), gi.clone(), grad[i].clone()]));
                }
            }
            terms.push(&ndot / &lapse * &v[k]);
            accelerations.push(normalize(&Expr::sum(terms))?);
        }
        let correction = if with_correction { Some(self.first_order_correction(&accelerations)?) } else { None };
        Ok(EulerLagrangeSystem { constraint: self.constraint()?, accelerations, correction })
    }

    /// `xddot_1 = -N g^-1 E1|_{xddot = xddot_0}`, from varying `L0 + eps L1`
    /// and keeping the `eps` term.
    fn first_order_correction(&self, exact: &[Expr]) -> Result<Vec<Expr>> {
        let n = self.space.dim();
        let e1 = self.euler_lagrange(1)?;
        let bindings = self.acceleration_bindings(exact);
        let e1: Vec<Expr> = e1.iter().map(|e| substitute(e, &bindings)).collect::<Result<_, _>>()?;
        let inv = inverse_metric(&self.g)?;
        let lapse = self.lapse();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let terms = (0..n).map(|i| inv.entry(k, i) * &e1[i]).collect();
            out.push(normalize(&(Expr::int(-1) * &lapse * Expr::sum(terms)))?);
        }
        Ok(out)
    }

    /// Map from acceleration atoms to the given expressions.
    pub fn acceleration_bindings(&self, accelerations: &[Expr]) -> std::collections::BTreeMap<Atom, Expr> {
        self.space.accelerations().iter().cloned().zip(accelerations.iter().cloned()).collect()
    }
}

/// `D_t = d_t + xdot^k d_k + Ndot d_N + xddot^k d_xdot^k`.
pub fn total_derivative(space: &VariableSpace, e: &Expr, accelerations: Option<&[Expr]>) -> Result<Expr> {
    let mut terms = vec![diff(e, space.time())?];
    for (x, v) in space.coordinates().iter().zip(space.velocities()) {
        let d = diff(e, x)?;
        if !d.is_zero_tree() {
            terms.push(Expr::atom(v) * d);
        }
    }
    let dn = diff(e, space.lapse())?;
    if !dn.is_zero_tree() {
        terms.push(Expr::atom(space.lapse_velocity()) * dn);
    }
    for (k, v) in space.velocities().iter().enumerate() {
        let d = diff(e, v)?;
        if d.is_zero_tree() {
            continue;
        }
        let acc = match accelerations {
            Some(a) => a[k].clone(),
            None => Expr::atom(&space.accelerations()[k]),
        };
        terms.push(acc * d);
    }
    Ok(normalize(&Expr::sum(terms))?)
}
