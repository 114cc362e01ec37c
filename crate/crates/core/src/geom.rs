//! Metric calculus over configuration space.

use crate::symcore::{diff, is_zero, normalize, Atom, Expr, ProbeConfig, ZeroVerdict};
use crate::{Error, Result};

/// Symmetric `n x n` table of expressions over the coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTable {
    coords: Vec<Atom>,
    entries: Vec<Vec<Expr>>,
}

impl MetricTable {
    /// Builds a table, normalizing entries and rejecting asymmetric input.
    pub fn new(coords: &[Atom], entries: Vec<Vec<Expr>>) -> Result<Self> {
        let n = coords.len();
        if entries.len() != n || entries.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("metric must be {n}x{n}")));
        }
        let mut norm = Vec::with_capacity(n);
        for row in &entries {
            norm.push(row.iter().map(normalize).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        for i in 0..n {
            for j in 0..i {
                if norm[i][j] != norm[j][i] && !normalize(&(&norm[i][j] - &norm[j][i]))?.is_zero_tree() {
                    return Err(Error::AsymmetricMetric(i, j));
                }
            }
        }
        Ok(MetricTable { coords: coords.to_vec(), entries: norm })
    }

    pub fn zero(coords: &[Atom]) -> Self {
        let n = coords.len();
        MetricTable { coords: coords.to_vec(), entries: vec![vec![Expr::zero(); n]; n] }
    }

    pub fn identity(coords: &[Atom]) -> Self {
        let n = coords.len();
        let entries = (0..n).map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect()).collect();
        MetricTable { coords: coords.to_vec(), entries }
    }

    pub fn diagonal(coords: &[Atom], diag: Vec<Expr>) -> Result<Self> {
        let n = coords.len();
        let mut entries = vec![vec![Expr::zero(); n]; n];
        for (i, d) in diag.into_iter().enumerate() {
            entries[i][i] = d;
        }
        MetricTable::new(coords, entries)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Atom] {
        &self.coords
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<Expr>] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(Expr::is_zero_tree)
    }

    /// Entrywise product with a scalar.
    pub fn scaled(&self, c: &Expr) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().map(|e| normalize(&(c * e))).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(MetricTable { coords: self.coords.clone(), entries })
    }

    /// Symbolic determinant by cofactor expansion.
    pub fn determinant(&self) -> Result<Expr> {
        Ok(normalize(&det(&self.entries))?)
    }

    /// `g_ij v^i w^j` for expression vectors `v`, `w`.
    pub fn contract(&self, v: &[Expr], w: &[Expr]) -> Result<Expr> {
        let mut terms = Vec::new();
        for (i, vi) in v.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                if !self.entries[i][j].is_zero_tree() {
                    terms.push(Expr::product(vec![self.entries[i][j].clone(), vi.clone(), wj.clone()]));
                }
            }
        }
        Ok(normalize(&Expr::sum(terms))?)
    }
}

fn det(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        n => {
            let mut terms = Vec::new();
            for j in 0..n {
                if m[0][j].is_zero_tree() {
                    continue;
                }
                let sign = if j % 2 == 0 { Expr::one() } else { Expr::int(-1) };
                terms.push(Expr::product(vec![sign, m[0][j].clone(), det(&minor(m, 0, j))]));
            }
            Expr::sum(terms)
        }
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// Inverse through the adjugate.
pub fn inverse_metric(g: &MetricTable) -> Result<MetricTable> {
    let d = g.determinant()?;
    let singular = match is_zero(&d, &ProbeConfig::default())? {
        ZeroVerdict::Nonzero { .. } => false,
        _ => true,
    };
    if singular {
        return Err(Error::SingularMetric(d.to_string()));
    }
    let n = g.dim();
    let inv_det = d.clone().recip();
    let mut entries = vec![vec![Expr::zero(); n]; n];
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            // inverse_ij = cofactor_ji / det
            let sign = if (i + j) % 2 == 0 { Expr::one() } else { Expr::int(-1) };
            let cof = if n == 1 { Expr::one() } else { det(&minor(&g.entries, j, i)) };
            *slot = normalize(&Expr::product(vec![sign, cof, inv_det.clone()]))?;
        }
    }
    Ok(MetricTable { coords: g.coords.clone(), entries })
}

/// `Gamma^k_ij` indexed as `[k][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelTable {
    pub symbols: Vec<Vec<Vec<Expr>>>,
}

impl ChristoffelTable {
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Expr {
        &self.symbols[k][i][j]
    }
}

/// `Gamma^k_ij = 1/2 g^kl (g_li,j + g_lj,i - g_ij,l)`.
pub fn christoffel(g: &MetricTable) -> Result<ChristoffelTable> {
    let inv = inverse_metric(g)?;
    let n = g.dim();
    // dg[l][i][j] = d g_ij / d x^l
    let mut dg = vec![vec![vec![Expr::zero(); n]; n]; n];
    for (l, x) in g.coords.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                dg[l][i][j] = diff(&g.entries[i][j], x)?;
            }
        }
    }
    let mut symbols = vec![vec![vec![Expr::zero(); n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut terms = Vec::new();
                for l in 0..n {
                    if inv.entries[k][l].is_zero_tree() {
                        continue;
                    }
                    let bracket = Expr::sum(vec![dg[j][l][i].clone(), dg[i][l][j].clone(), -&dg[l][i][j]]);
                    terms.push(Expr::product(vec![Expr::rational(1, 2), inv.entries[k][l].clone(), bracket]));
                }
                let s = normalize(&Expr::sum(terms))?;
                symbols[k][j][i] = s.clone();
                symbols[k][i][j] = s;
            }
        }
    }
    Ok(ChristoffelTable { symbols })
}

/// Configuration-space vector field `eta^i d/dx^i`; components may depend on
/// `t` and `N` as well.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialVectorField {
    pub components: Vec<Expr>,
}

impl SpatialVectorField {
    pub fn new(components: Vec<Expr>) -> Self {
        SpatialVectorField { components }
    }

    pub fn zero(n: usize) -> Self {
        SpatialVectorField { components: vec![Expr::zero(); n] }
    }

    /// `eta^k f_,k`.
    pub fn apply(&self, f: &Expr, coords: &[Atom]) -> Result<Expr> {
        let mut terms = Vec::new();
        for (c, x) in self.components.iter().zip(coords) {
            if !c.is_zero_tree() {
                terms.push(c * diff(f, x)?);
            }
        }
        Ok(normalize(&Expr::sum(terms))?)
    }
}

/// `(L_eta g)_ij = eta^k g_ij,k + g_kj eta^k_,i + g_ik eta^k_,j`.
pub fn lie_deriv_metric(eta: &SpatialVectorField, g: &MetricTable) -> Result<MetricTable> {
    let n = g.dim();
    if eta.components.len() != n {
        return Err(Error::Dimension(format!("vector field has {} components, metric is {n}x{n}", eta.components.len())));
    }
    // deta[k][i] = d eta^k / d x^i
    let mut deta = vec![vec![Expr::zero(); n]; n];
    for k in 0..n {
        for i in 0..n {
            deta[k][i] = diff(&eta.components[k], &g.coords[i])?;
        }
    }
    let mut entries = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut terms = vec![eta.apply(&g.entries[i][j], &g.coords)?];
            for k in 0..n {
                terms.push(&g.entries[k][j] * &deta[k][i]);
                terms.push(&g.entries[i][k] * &deta[k][j]);
            }
            let v = normalize(&Expr::sum(terms))?;
            entries[j][i] = v.clone();
            entries[i][j] = v;
        }
    }
    Ok(MetricTable { coords: g.coords.clone(), entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Confidence {
    Proved,
    Probable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformalFactor {
    pub psi: Expr,
    pub confidence: Confidence,
}

/// `psi` with `L_eta g = psi g`, if the Lie derivative is proportional to `g`.
pub fn conformal_factor(eta: &SpatialVectorField, g: &MetricTable) -> Result<Option<ConformalFactor>> {
    let lie = lie_deriv_metric(eta, g)?;
    let n = g.dim();
    let pivot = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| !g.entries[i][j].is_zero_tree());
    let Some((pi, pj)) = pivot else {
        return Ok(None);
    };
    let psi = normalize(&(&lie.entries[pi][pj] / &g.entries[pi][pj]))?;
    let mut confidence = Confidence::Proved;
    for i in 0..n {
        for j in i..n {
            let gap = &lie.entries[i][j] - &psi * &g.entries[i][j];
            match is_zero(&gap, &ProbeConfig::default())? {
                ZeroVerdict::ProvedZero => {}
                ZeroVerdict::ProbablyZero { .. } => confidence = Confidence::Probable,
                ZeroVerdict::Nonzero { .. } => return Ok(None),
            }
        }
    }
    Ok(Some(ConformalFactor { psi, confidence }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse_free;

    fn n(s: &str) -> Expr {
        normalize(&parse_free(s).unwrap()).unwrap()
    }

    fn coords(names: &[&str]) -> Vec<Atom> {
        names.iter().map(|s| Atom::free(s)).collect()
    }

    #[test]
    fn inverses() {
        let x = coords(&["x"]);
        let g = MetricTable::new(&x, vec![vec![n("6*x")]]).unwrap();
        assert_eq!(inverse_metric(&g).unwrap().entry(0, 0), &n("1/(6*x)"));
        let id = MetricTable::identity(&coords(&["a", "b", "c"]));
        assert_eq!(inverse_metric(&id).unwrap(), id);
        let c = coords(&["x1", "x2"]);
        let polar = MetricTable::diagonal(&c, vec![n("1"), n("x1^2")]).unwrap();
        let inv = inverse_metric(&polar).unwrap();
        assert_eq!(inv, MetricTable::diagonal(&c, vec![n("1"), n("x1^-2")]).unwrap());
    }

    #[test]
    fn singular_and_asymmetric() {
        let c = coords(&["x", "y"]);
        let g = MetricTable::new(&c, vec![vec![n("x"), n("x")], vec![n("x"), n("x")]]).unwrap();
        assert!(matches!(inverse_metric(&g), Err(Error::SingularMetric(_))));
        let bad = MetricTable::new(&c, vec![vec![n("1"), n("x")], vec![n("y"), n("1")]]);
        assert!(matches!(bad, Err(Error::AsymmetricMetric(1, 0))));
    }

    #[test]
    fn christoffel_examples() {
        let x = coords(&["x"]);
        let flat = MetricTable::identity(&x);
        assert!(christoffel(&flat).unwrap().get(0, 0, 0).is_zero_tree());
        let g = MetricTable::new(&x, vec![vec![n("6*x")]]).unwrap();
        assert_eq!(christoffel(&g).unwrap().get(0, 0, 0), &n("1/(2*x)"));
        let c = coords(&["x1", "x2"]);
        let polar = MetricTable::diagonal(&c, vec![n("1"), n("x1^2")]).unwrap();
        let gam = christoffel(&polar).unwrap();
        assert_eq!(gam.get(1, 0, 1), &n("1/x1"));
        assert_eq!(gam.get(1, 1, 0), &n("1/x1"));
        assert_eq!(gam.get(0, 1, 1), &n("-x1"));
        assert!(gam.get(0, 0, 0).is_zero_tree() && gam.get(0, 0, 1).is_zero_tree() && gam.get(1, 1, 1).is_zero_tree());
    }

    #[test]
    fn lie_derivatives() {
        let x = coords(&["x"]);
        let flat = MetricTable::identity(&x);
        assert!(lie_deriv_metric(&SpatialVectorField::zero(1), &flat).unwrap().is_zero());
        let eta = SpatialVectorField::new(vec![n("1/x")]);
        assert_eq!(lie_deriv_metric(&eta, &flat).unwrap().entry(0, 0), &n("-2/x^2"));
        let g = MetricTable::new(&x, vec![vec![n("6*x")]]).unwrap();
        let eta = SpatialVectorField::new(vec![n("1/x^2")]);
        assert_eq!(lie_deriv_metric(&eta, &g).unwrap().entry(0, 0), &n("-18/x^2"));
    }

    #[test]
    fn conformal_factors() {
        let x = coords(&["x"]);
        let flat = MetricTable::identity(&x);
        let psi = conformal_factor(&SpatialVectorField::new(vec![n("x")]), &flat).unwrap().unwrap();
        assert_eq!((psi.psi, psi.confidence), (Expr::int(2), Confidence::Proved));
        let psi = conformal_factor(&SpatialVectorField::new(vec![n("1/x")]), &flat).unwrap().unwrap();
        assert_eq!(psi.psi, n("-2/x^2"));
        let c = coords(&["x1", "x2"]);
        let flat2 = MetricTable::identity(&c);
        let eta = SpatialVectorField::new(vec![n("x1"), Expr::zero()]);
        assert_eq!(conformal_factor(&eta, &flat2).unwrap(), None);
    }
}
