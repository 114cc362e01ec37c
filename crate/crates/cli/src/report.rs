//! Machine-readable reports and their text rendering.

use std::collections::BTreeMap;
use std::fmt::Write;

use noether_core::{Status, ZeroVerdict};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub model: String,
    pub seed: u64,
    pub order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_lapse: Option<String>,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub systems: Vec<SystemReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub verifications: Vec<CandidateVerification>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub integrals: Vec<CandidateIntegrals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
    pub rejected: Vec<RejectedReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemReport {
    pub order: usize,
    pub fixed_lapse: bool,
    pub entries: Vec<SystemEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemEntry {
    pub class: String,
    pub monomial: String,
    pub residual: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VerdictReport {
    ProvedZero,
    ProbablyZero { points: usize },
    Nonzero { witness: BTreeMap<String, f64>, value: f64, scale: f64 },
}

impl From<&ZeroVerdict> for VerdictReport {
    fn from(v: &ZeroVerdict) -> Self {
        match v {
            ZeroVerdict::ProvedZero => VerdictReport::ProvedZero,
            ZeroVerdict::ProbablyZero { points } => VerdictReport::ProbablyZero { points: points.len() },
            ZeroVerdict::Nonzero { witness, value, scale } => VerdictReport::Nonzero {
                witness: witness.iter().cloned().collect(),
                value: *value,
                scale: *scale,
            },
        }
    }
}

impl VerdictReport {
    fn label(&self) -> &'static str {
        match self {
            VerdictReport::ProvedZero => "proved zero",
            VerdictReport::ProbablyZero { .. } => "probably zero",
            VerdictReport::Nonzero { .. } => "nonzero",
        }
    }

    pub fn is_nonzero(&self) -> bool {
        matches!(self, VerdictReport::Nonzero { .. })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifiedEntryReport {
    pub order: usize,
    pub class: String,
    pub monomial: String,
    pub residual: String,
    pub verdict: VerdictReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderStatus {
    pub order: usize,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateVerification {
    pub name: String,
    pub status: String,
    pub orders: Vec<OrderStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted_at: Option<usize>,
    pub entries: Vec<VerifiedEntryReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub lambda: String,
    pub lambda_dl_dn: String,
    pub remainder: String,
    pub verdict: VerdictReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegralReport {
    pub order: usize,
    pub integral: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_verdict: Option<VerdictReport>,
    pub certificate: CertificateReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateIntegrals {
    pub name: String,
    pub status: String,
    pub integrals: Vec<IntegralReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonitorReport {
    pub name: String,
    pub initial: f64,
    pub drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_residual: Option<f64>,
    pub within_tolerance: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub precision: String,
    pub step: f64,
    pub t_span: (f64, f64),
    pub on_constraint: bool,
    pub initial_x: Vec<f64>,
    pub initial_xdot: Vec<f64>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blow_up: Option<String>,
    pub constraint_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub monitors: Vec<MonitorReport>,
    pub trajectory_file: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RejectedReport {
    pub name: String,
    pub line: usize,
    pub column: usize,
    pub token: String,
    pub message: String,
}

pub fn status_label(s: Status) -> String {
    s.label().to_string()
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "noether {} {} (order {}, seed {}", self.command, self.model, self.order, self.seed);
        if let Some(n0) = &self.fixed_lapse {
            let _ = write!(out, ", lapse fixed to {n0}");
        }
        out.push_str(")\n");

        for sys in &self.systems {
            let _ = writeln!(out, "\norder {} determining system ({} entries)", sys.order, sys.entries.len());
            for e in &sys.entries {
                let _ = writeln!(out, "  [{}] {}: {} = 0", e.class, e.monomial, e.residual);
            }
        }

        for v in &self.verifications {
            let _ = writeln!(out, "\ncandidate {}: {}", v.name, v.status);
            for o in &v.orders {
                let n = v.entries.iter().filter(|e| e.order == o.order).count();
                let _ = writeln!(out, "  order {}: {} ({} entries)", o.order, o.status, n);
            }
            if let Some(g) = v.aborted_at {
                let _ = writeln!(out, "  stopped after order {g}: the exact part fails");
            }
            for e in v.entries.iter().filter(|e| !matches!(e.verdict, VerdictReport::ProvedZero)) {
                let _ = write!(out, "  order {} [{}] {}: {} is {}", e.order, e.class, e.monomial, e.residual, e.verdict.label());
                if let VerdictReport::Nonzero { witness, value, scale } = &e.verdict {
                    let at: Vec<String> = witness.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    let _ = write!(out, " at {} (value {value:e}, scale {scale:e})", at.join(", "));
                }
                out.push('\n');
            }
        }

        for c in &self.integrals {
            let _ = writeln!(out, "\ncandidate {}: {}", c.name, c.status);
            for i in &c.integrals {
                let _ = writeln!(out, "  I{} = {}", i.order, i.integral);
                if let (Some(exp), Some(v)) = (&i.expected, &i.expected_verdict) {
                    let word = if v.is_nonzero() { "differs from" } else { "matches" };
                    let _ = writeln!(out, "    {word} expected {exp}");
                }
                let cert = &i.certificate;
                let _ = writeln!(
                    out,
                    "    D_t I{} = ({})*H + remainder, remainder {} ({})",
                    i.order,
                    cert.lambda,
                    cert.remainder,
                    cert.verdict.label()
                );
            }
        }

        if let Some(s) = &self.simulation {
            let _ = writeln!(
                out,
                "\nsimulation: {} samples, step {}, t in [{}, {}], {} precision, {}",
                s.samples,
                s.step,
                s.t_span.0,
                s.t_span.1,
                s.precision,
                if s.on_constraint { "on the constraint" } else { "off the constraint" }
            );
            let _ = writeln!(out, "  x0 = {:?}, xdot0 = {:?}", s.initial_x, s.initial_xdot);
            if let Some(b) = &s.blow_up {
                let _ = writeln!(out, "  blow-up: {b}");
            }
            let _ = writeln!(out, "  max |H| = {:e}", s.constraint_max);
            for m in &s.monitors {
                let _ = write!(out, "  {}: I(0) = {}, max |I - I(0)| = {:e}", m.name, m.initial, m.drift);
                if let (Some(l), Some(w)) = (&m.lambda, m.weak_residual) {
                    let _ = write!(out, ", max |dI/dt - ({l})*H| = {w:e}");
                }
                match m.within_tolerance {
                    Some(true) => out.push_str(", within tolerance"),
                    Some(false) => out.push_str(", OUTSIDE tolerance"),
                    None => {}
                }
                out.push('\n');
            }
            let _ = writeln!(out, "  trajectory: {}", s.trajectory_file);
        }

        for r in &self.rejected {
            let _ = writeln!(out, "\nrejected {}: line {}, column {}: {} (at `{}`)", r.name, r.line, r.column, r.message, r.token);
        }
        let _ = writeln!(out, "\nstatus: {}", self.status);
        out
    }
}
