//! Named atoms and the variable space of a lapse model.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_rational::BigRational;

use super::SymError;

/// Rank given to atoms created outside a [`VariableSpace`].
pub const FREE_RANK: u32 = 1 << 20;

/// Sign and value restrictions attached to an atom at declaration.
///
/// Probe sampling in [`super::is_zero`] honours these; they never
/// participate in atom identity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assumptions {
    pub positive: bool,
    pub nonzero: bool,
    /// Exact values the atom may not take (e.g. `n != 0, 3`).
    pub excluded: Vec<BigRational>,
}

impl Assumptions {
    pub fn positive() -> Self {
        Assumptions { positive: true, nonzero: true, excluded: Vec::new() }
    }

    pub fn nonzero() -> Self {
        Assumptions { positive: false, nonzero: true, excluded: Vec::new() }
    }

    pub fn excluding(mut self, values: impl IntoIterator<Item = BigRational>) -> Self {
        self.excluded.extend(values);
        self
    }
}

/// A named scalar symbol.
///
/// Atoms order by declaration rank first and name second, which fixes the
/// canonical ordering of every expression built over a [`VariableSpace`].
#[derive(Clone)]
pub struct Atom {
    rank: u32,
    name: Arc<str>,
    assumptions: Arc<Assumptions>,
}

impl Atom {
    /// An atom outside any variable space (ranked after all declared atoms).
    pub fn free(name: &str) -> Self {
        Atom::with_rank(FREE_RANK, name, Assumptions::default())
    }

    pub fn with_rank(rank: u32, name: &str, assumptions: Assumptions) -> Self {
        Atom { rank, name: Arc::from(name), assumptions: Arc::new(assumptions) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn assumptions(&self) -> &Assumptions {
        &self.assumptions
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.rank == other.rank && self.name == other.name
    }
}

impl Eq for Atom {}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank.cmp(&other.rank).then_with(|| self.name.cmp(&other.name))
    }
}

impl Hash for Atom {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank.hash(state);
        self.name.hash(state);
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Role of an atom inside a [`VariableSpace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomRole {
    Time,
    Coordinate(usize),
    Lapse,
    Velocity(usize),
    LapseVelocity,
    Acceleration(usize),
    Parameter,
}

/// Time, coordinates, lapse, their velocities, and model parameters.
///
/// Declaration order is `t, x^1..x^n, N, xdot^1..xdot^n, Ndot, xddot^1..xddot^n,
/// parameters...`; that order is the canonical atom order.
#[derive(Clone, Debug)]
pub struct VariableSpace {
    time: Atom,
    coordinates: Vec<Atom>,
    lapse: Atom,
    velocities: Vec<Atom>,
    lapse_velocity: Atom,
    accelerations: Vec<Atom>,
    parameters: Vec<Atom>,
}

/// Suffix appended to a coordinate name to form its velocity atom.
pub const VELOCITY_SUFFIX: &str = "dot";
/// Suffix appended to a coordinate name to form its acceleration atom.
pub const ACCELERATION_SUFFIX: &str = "ddot";

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl VariableSpace {
    /// Builds a space over the named coordinates with default assumptions.
    pub fn new(coordinates: &[&str]) -> Result<Self, SymError> {
        let coords: Vec<(String, Assumptions)> =
            coordinates.iter().map(|c| (c.to_string(), Assumptions::default())).collect();
        Self::build(&coords, &[])
    }

    /// Builds a space with explicit coordinate and parameter assumptions.
    pub fn build(
        coordinates: &[(String, Assumptions)],
        parameters: &[(String, Assumptions)],
    ) -> Result<Self, SymError> {
        let n = coordinates.len();
        if n == 0 {
            return Err(SymError::Usage("a variable space needs at least one coordinate".into()));
        }
        let mut names: Vec<String> = vec!["t".into(), "N".into(), format!("N{VELOCITY_SUFFIX}")];
        for (c, _) in coordinates {
            names.push(c.clone());
            names.push(format!("{c}{VELOCITY_SUFFIX}"));
            names.push(format!("{c}{ACCELERATION_SUFFIX}"));
        }
        names.extend(parameters.iter().map(|(p, _)| p.clone()));
        for (i, name) in names.iter().enumerate() {
            if !valid_identifier(name) {
                return Err(SymError::Usage(format!("invalid atom name `{name}`")));
            }
            if names[..i].contains(name) {
                return Err(SymError::Usage(format!("duplicate atom name `{name}`")));
            }
        }

        let n32 = n as u32;
        let time = Atom::with_rank(0, "t", Assumptions::default());
        let coordinates: Vec<Atom> = coordinates
            .iter()
            .enumerate()
            .map(|(i, (c, a))| Atom::with_rank(1 + i as u32, c, a.clone()))
            .collect();
        let lapse = Atom::with_rank(n32 + 1, "N", Assumptions::nonzero());
        let velocities = coordinates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Atom::with_rank(n32 + 2 + i as u32, &format!("{}{VELOCITY_SUFFIX}", c.name()), Assumptions::default())
            })
            .collect();
        let lapse_velocity =
            Atom::with_rank(2 * n32 + 2, &format!("N{VELOCITY_SUFFIX}"), Assumptions::default());
        let accelerations = coordinates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Atom::with_rank(
                    2 * n32 + 3 + i as u32,
                    &format!("{}{ACCELERATION_SUFFIX}", c.name()),
                    Assumptions::default(),
                )
            })
            .collect();
        let parameters = parameters
            .iter()
            .enumerate()
            .map(|(i, (p, a))| Atom::with_rank(3 * n32 + 3 + i as u32, p, a.clone()))
            .collect();
        Ok(VariableSpace { time, coordinates, lapse, velocities, lapse_velocity, accelerations, parameters })
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn time(&self) -> &Atom {
        &self.time
    }

    pub fn coordinates(&self) -> &[Atom] {
        &self.coordinates
    }

    pub fn coordinate(&self, i: usize) -> &Atom {
        &self.coordinates[i]
    }

    pub fn lapse(&self) -> &Atom {
        &self.lapse
    }

    pub fn velocities(&self) -> &[Atom] {
        &self.velocities
    }

    pub fn velocity(&self, i: usize) -> &Atom {
        &self.velocities[i]
    }

    pub fn lapse_velocity(&self) -> &Atom {
        &self.lapse_velocity
    }

    pub fn accelerations(&self) -> &[Atom] {
        &self.accelerations
    }

    pub fn parameters(&self) -> &[Atom] {
        &self.parameters
    }

    /// Velocities followed by the lapse velocity: the separation indeterminates.
    pub fn all_velocities(&self) -> Vec<Atom> {
        let mut v = self.velocities.clone();
        v.push(self.lapse_velocity.clone());
        v
    }

    /// Every declared atom in canonical order.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut all = vec![self.time.clone()];
        all.extend(self.coordinates.iter().cloned());
        all.push(self.lapse.clone());
        all.extend(self.velocities.iter().cloned());
        all.push(self.lapse_velocity.clone());
        all.extend(self.accelerations.iter().cloned());
        all.extend(self.parameters.iter().cloned());
        all
    }

    pub fn lookup(&self, name: &str) -> Option<Atom> {
        self.atoms().into_iter().find(|a| a.name() == name)
    }

    pub fn role(&self, atom: &Atom) -> Option<AtomRole> {
        if *atom == self.time {
            return Some(AtomRole::Time);
        }
        if *atom == self.lapse {
            return Some(AtomRole::Lapse);
        }
        if *atom == self.lapse_velocity {
            return Some(AtomRole::LapseVelocity);
        }
        if let Some(i) = self.coordinates.iter().position(|a| a == atom) {
            return Some(AtomRole::Coordinate(i));
        }
        if let Some(i) = self.velocities.iter().position(|a| a == atom) {
            return Some(AtomRole::Velocity(i));
        }
        if let Some(i) = self.accelerations.iter().position(|a| a == atom) {
            return Some(AtomRole::Acceleration(i));
        }
        self.parameters.iter().any(|a| a == atom).then_some(AtomRole::Parameter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declaration_order_is_canonical() {
        let space = VariableSpace::new(&["a", "b"]).unwrap();
        let atoms = space.atoms();
        let mut sorted = atoms.clone();
        sorted.sort();
        assert_eq!(atoms, sorted);
        assert_eq!(space.velocity(1).name(), "bdot");
        assert_eq!(space.role(space.lapse_velocity()), Some(AtomRole::LapseVelocity));
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(VariableSpace::new(&[]).is_err());
        assert!(VariableSpace::new(&["x", "x"]).is_err());
        assert!(VariableSpace::new(&["N"]).is_err());
        let p = vec![("x".to_string(), Assumptions::default())];
        assert!(VariableSpace::build(&[("x".into(), Assumptions::default())], &p).is_err());
    }
}
