//! Approximate Noether symmetries for singular Lagrangians with a lapse.
//!
//! The crate is layered: [`symcore`] is an exact expression kernel, [`geom`]
//! does metric calculus on top of it, [`model`] assembles the perturbed
//! Lagrangian, [`noether`] builds determining systems, [`certify`] decides
//! candidates and conservation laws, and [`dynamics`] integrates the flow.

pub mod certify;
pub mod dynamics;
pub mod geom;
pub mod model;
pub mod noether;
pub mod symcore;

use thiserror::Error;

pub use certify::{
    first_integral, verify, verify_fixed_lapse, restrict_to_fixed_lapse, weak_certificate, weak_certificate_series, FirstIntegral, MomentumConvention, Status,
    VerificationReport, WeakCertificate,
};
pub use geom::{MetricTable, SpatialVectorField};
pub use model::Model;
pub use noether::{CandidateSymmetry, DeterminingSystem, GeneratorTerms, MonomialClass};
pub use symcore::{Atom, Expr, ProbeConfig, SymError, VariableSpace, ZeroVerdict};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error("singular metric: determinant {0} vanishes identically")]
    SingularMetric(String),
    #[error("metric entry ({0},{1}) differs from entry ({1},{0})")]
    AsymmetricMetric(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("infeasible initial data: {0}")]
    Infeasible(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
