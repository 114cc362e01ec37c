//! Exact symbolic expression kernel.
//!
//! Everything symbolic in the crate is built from [`Expr`] values in the
//! canonical form produced by [`normalize`]. Coefficients are exact rationals.

mod atom;
mod collect;
mod diff;
mod display;
pub(crate) mod eval;
mod expr;
mod normal;
mod parse;
mod subst;
mod zero;

use thiserror::Error;

pub use atom::{
    Assumptions, Atom, AtomRole, VariableSpace, ACCELERATION_SUFFIX, FREE_RANK, VELOCITY_SUFFIX,
};
pub use collect::{collect, Collected};
pub use diff::diff;
pub use display::render;
pub use eval::{eval_generic, eval_num, FunctionBinding, FunctionTable, Real};
pub use expr::{Elementary, Expr, OpaqueCall, Rational};
pub use normal::normalize;
pub use parse::{parse, parse_free, AtomResolver, FreeAtoms};
pub use subst::{substitute, substitute_exprs, substitute_function};
pub use zero::{is_zero, ProbeConfig, ProbePoint, ZeroVerdict};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SymError {
    #[error("malformed expression: {0}")]
    Malformed(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("cannot separate `{subtree}`: depends non-polynomially on `{indeterminate}`")]
    Separation { subtree: String, indeterminate: String },
    #[error("unbound atom `{0}`")]
    UnboundAtom(String),
    #[error("unbound function `{0}`")]
    UnboundFunction(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("probe failure: {0}")]
    ProbeFailure(String),
    #[error("{line}:{column}: {message} at `{token}`")]
    Parse { line: usize, column: usize, token: String, message: String },
}

impl Expr {
    /// Shorthand for [`normalize`].
    pub fn normalize(&self) -> Result<Expr, SymError> {
        normalize(self)
    }
}
