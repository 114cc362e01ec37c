//! Command dispatch.

use std::sync::Arc;

use noether_core::certify::{restrict_to_fixed_lapse, weak_certificate_series, WeakCertificate};
use noether_core::dynamics::{
    compile, drift, integrate, project_constraint, DoubleDouble, GaugeChoice, Setup, State,
};
use noether_core::noether::{determining_system, determining_system_fixed_lapse, generic_candidate};
use noether_core::symcore::{is_zero, normalize, parse, substitute, FunctionTable, Real};
use noether_core::{
    first_integral, verify, verify_fixed_lapse, Error, Expr, FirstIntegral, Model, MomentumConvention, ProbeConfig,
    Status,
};

use crate::document::{Built, BuiltCandidate, ModelDocument, Precision, Rejected, SimulationPlan};
use crate::report::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Derive,
    Verify,
    Integral,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Derive => "derive",
            Command::Verify => "verify",
            Command::Integral => "integral",
            Command::Simulate => "simulate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    /// Overrides the document's truncation order.
    pub order: Option<usize>,
    /// Overrides the document's `fixed_lapse`.
    pub fixed_lapse: Option<String>,
    pub seed: u64,
    /// Name written into the report for the trajectory file.
    pub trajectory_file: String,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            order: None,
            fixed_lapse: None,
            seed: ProbeConfig::DEFAULT_SEED,
            trajectory_file: "trajectory.csv".into(),
        }
    }
}

pub struct Outcome {
    pub report: Report,
    pub csv: Option<Vec<u8>>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }
}

/// A failure that stops the command before a report exists.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Document(#[from] crate::document::Diagnostic),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

struct Ctx {
    built: Built,
    probe: ProbeConfig,
    fixed_lapse: Option<Expr>,
}

pub fn run(command: Command, label: &str, doc: &ModelDocument, opts: &Options) -> Result<Outcome, RunError> {
    let mut built = doc.build()?;
    if let Some(k) = opts.order {
        built.model.order = k;
    }
    let fixed_lapse = match &opts.fixed_lapse {
        Some(text) => Some(
            parse(text, &built.model.space)
                .map_err(|e| RunError::Usage(format!("--fixed-lapse `{text}`: {e}")))?,
        ),
        None => built.fixed_lapse.clone(),
    };
    if let Some(n0) = &fixed_lapse {
        let free = n0.atoms().into_iter().any(|a| !built.model.space.parameters().contains(&a));
        if free {
            return Err(RunError::Usage(format!("fixed lapse `{n0}` must be a constant")));
        }
    }
    let ctx = Ctx { probe: ProbeConfig::with_seed(opts.seed), fixed_lapse, built };
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        command: command.name().into(),
        model: label.into(),
        seed: opts.seed,
        order: ctx.built.model.order,
        fixed_lapse: ctx.fixed_lapse.as_ref().map(|e| e.to_string()),
        status: String::new(),
        exit_code: 0,
        systems: Vec::new(),
        verifications: Vec::new(),
        integrals: Vec::new(),
        simulation: None,
        rejected: ctx.built.rejected.iter().map(rejected_report).collect(),
    };
    let mut csv = None;
    let failed = match command {
        Command::Derive => {
            report.systems = derive(&ctx)?;
            false
        }
        Command::Verify => {
            let (v, extra) = run_verify(&ctx);
            report.rejected.extend(extra);
            let failed = v.iter().any(|c| c.status == Status::Fail.label());
            report.verifications = v;
            failed || !report.rejected.is_empty()
        }
        Command::Integral => {
            let (v, extra) = run_integrals(&ctx);
            report.rejected.extend(extra);
            let failed = v.iter().any(|c| c.status != "pass");
            report.integrals = v;
            failed || !report.rejected.is_empty()
        }
        Command::Simulate => {
            let plan = ctx
                .built
                .simulate
                .as_ref()
                .ok_or_else(|| RunError::Usage("the document has no [simulate] section".into()))?;
            let (sim, bytes) = match plan.precision {
                Precision::Double => simulate::<f64>(&ctx, plan, opts)?,
                Precision::DoubleDouble => simulate::<DoubleDouble>(&ctx, plan, opts)?,
            };
            csv = Some(bytes);
            let failed = sim.blow_up.is_some() || sim.monitors.iter().any(|m| m.within_tolerance == Some(false));
            report.simulation = Some(sim);
            failed
        }
    };
    report.exit_code = i32::from(failed);
    report.status = if failed { "fail" } else { "pass" }.into();
    Ok(Outcome { report, csv })
}

fn rejected_report(r: &Rejected) -> RejectedReport {
    RejectedReport {
        name: r.name.clone(),
        line: r.diagnostic.line,
        column: r.diagnostic.column,
        token: r.diagnostic.token.clone(),
        message: r.diagnostic.message.clone(),
    }
}

fn core_rejection(c: &BuiltCandidate, e: Error) -> RejectedReport {
    RejectedReport { name: c.symmetry.name.clone(), line: c.line, column: 1, token: c.symmetry.name.clone(), message: e.to_string() }
}

fn derive(ctx: &Ctx) -> Result<Vec<SystemReport>, RunError> {
    let m = &ctx.built.model;
    let mut out = Vec::new();
    for g in 0..=m.order {
        let sys = match &ctx.fixed_lapse {
            None => determining_system(m, g, None)?,
            Some(n0) => {
                let mut c = generic_candidate(&m.space, g);
                for t in &mut c.orders {
                    t.omega = Expr::zero();
                }
                determining_system_fixed_lapse(m, g, &c, n0)?
            }
        };
        out.push(SystemReport {
            order: g,
            fixed_lapse: sys.fixed_lapse,
            entries: sys
                .entries
                .iter()
                .map(|e| SystemEntry {
                    class: e.class.label().into(),
                    monomial: e.monomial(&m.space).to_string(),
                    residual: e.residual.to_string(),
                })
                .collect(),
        });
    }
    Ok(out)
}

fn run_verify(ctx: &Ctx) -> (Vec<CandidateVerification>, Vec<RejectedReport>) {
    let m = &ctx.built.model;
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = ctx
            .built
            .candidates
            .iter()
            .map(|c| {
                s.spawn(move || match &ctx.fixed_lapse {
                    None => verify(m, &c.symmetry, &ctx.probe),
                    Some(n0) => verify_fixed_lapse(m, &c.symmetry, n0, &ctx.probe),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("verification thread")).collect()
    });
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for (c, r) in ctx.built.candidates.iter().zip(results) {
        match r {
            Err(e) => rejected.push(core_rejection(c, e)),
            Ok(r) => ok.push(CandidateVerification {
                name: r.candidate.clone(),
                status: status_label(r.status),
                orders: r
                    .orders
                    .iter()
                    .map(|&g| OrderStatus { order: g, status: status_label(r.order_status(g).unwrap_or(Status::Fail)) })
                    .collect(),
                aborted_at: r.aborted_at,
                entries: r
                    .entries
                    .iter()
                    .map(|e| VerifiedEntryReport {
                        order: e.order,
                        class: e.class.label().into(),
                        monomial: monomial(m, e.class, &e.index),
                        residual: e.residual.to_string(),
                        verdict: (&e.verdict).into(),
                    })
                    .collect(),
            }),
        }
    }
    (ok, rejected)
}

fn monomial(m: &Model, class: noether_core::MonomialClass, index: &[usize]) -> String {
    noether_core::noether::DeterminingEntry { order: 0, class, index: index.to_vec(), residual: Expr::zero() }
        .monomial(&m.space)
        .to_string()
}

fn certificate_report(c: &WeakCertificate) -> CertificateReport {
    CertificateReport {
        lambda: c.lambda.to_string(),
        lambda_dl_dn: c.lambda_dl_dn.to_string(),
        remainder: c.remainder.to_string(),
        verdict: (&c.verdict).into(),
    }
}

/// Integrals of orders `0..=min(model, candidate)` with their certificates,
/// restricted to the frozen lapse when there is one.
fn integrals_with_certificates(
    ctx: &Ctx,
    c: &BuiltCandidate,
) -> Result<(Vec<FirstIntegral>, Vec<WeakCertificate>), Error> {
    let m = &ctx.built.model;
    let top = m.order.min(c.symmetry.order()).min(1);
    let mut is = Vec::new();
    for g in 0..=top {
        is.push(first_integral(m, &c.symmetry, g, MomentumConvention::Exact)?);
    }
    let mut certs = weak_certificate_series(m, &is, &ctx.probe)?;
    if let Some(n0) = &ctx.fixed_lapse {
        let b = lapse_bindings(m, n0);
        for i in &mut is {
            i.expr = substitute(&i.expr, &b)?;
        }
        for cert in &mut certs {
            *cert = restrict_to_fixed_lapse(m, cert, n0, &ctx.probe)?;
        }
    }
    Ok((is, certs))
}

fn lapse_bindings(m: &Model, n0: &Expr) -> std::collections::BTreeMap<noether_core::Atom, Expr> {
    let mut b = std::collections::BTreeMap::new();
    b.insert(m.space.lapse().clone(), n0.clone());
    b.insert(m.space.lapse_velocity().clone(), Expr::zero());
    b
}

fn run_integrals(ctx: &Ctx) -> (Vec<CandidateIntegrals>, Vec<RejectedReport>) {
    let m = &ctx.built.model;
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for c in &ctx.built.candidates {
        let (is, certs) = match integrals_with_certificates(ctx, c) {
            Ok(v) => v,
            Err(e) => {
                rejected.push(core_rejection(c, e));
                continue;
            }
        };
        let mut pass = true;
        let mut reports = Vec::new();
        for (i, cert) in is.iter().zip(&certs) {
            let (expected, expected_verdict) = match c.integrals.get(&i.order) {
                None => (None, None),
                Some(e) => {
                    let e = match &ctx.fixed_lapse {
                        Some(n0) => substitute(e, &lapse_bindings(m, n0)),
                        None => normalize(e),
                    };
                    let verdict = e.and_then(|e| Ok((is_zero(&(&i.expr - &e), &ctx.probe)?, e)));
                    match verdict {
                        Ok((v, e)) => {
                            pass &= !v.is_nonzero();
                            (Some(e.to_string()), Some((&v).into()))
                        }
                        Err(err) => {
                            pass = false;
                            (Some(format!("error: {err}")), None)
                        }
                    }
                }
            };
            pass &= cert.valid();
            reports.push(IntegralReport {
                order: i.order,
                integral: i.expr.to_string(),
                expected,
                expected_verdict,
                certificate: certificate_report(cert),
            });
        }
        ok.push(CandidateIntegrals {
            name: c.symmetry.name.clone(),
            status: if pass { "pass" } else { "fail" }.into(),
            integrals: reports,
        });
    }
    (ok, rejected)
}

fn constant<R: Real>(m: &Model, setup: &Setup, e: &Expr, t: R) -> Result<R, RunError> {
    let e = setup.specialize(e)?;
    let p = Arc::new(compile(&e, std::slice::from_ref(m.space.time()), &FunctionTable::new()).map_err(Error::from)?);
    Ok(p.evaluator::<R>().eval(&[t]).map_err(Error::from)?)
}

fn simulate<R: Real>(ctx: &Ctx, plan: &SimulationPlan, opts: &Options) -> Result<(SimulationReport, Vec<u8>), RunError> {
    let m = &ctx.built.model;
    let setup = Setup { params: plan.params.clone(), functions: plan.functions.clone(), epsilon: plan.epsilon.clone() };
    let gauge = GaugeChoice::new(m, &plan.gauge)?;
    let t0 = R::from_f64(plan.t_span.0);
    let x: Vec<R> = plan.x0.iter().map(|e| constant(m, &setup, e, t0)).collect::<Result<_, _>>()?;
    let xdot: Vec<R> = plan.xdot0.iter().map(|e| constant(m, &setup, e, t0)).collect::<Result<_, _>>()?;
    let ic = match plan.pivot {
        Some((pivot, sign)) => {
            let lapse = constant(m, &setup, &gauge.lapse, t0)?;
            project_constraint(m, &setup, t0, &x, lapse, &xdot, pivot, sign)?
        }
        None => State { x, xdot },
    };

    let mut monitors: Vec<(String, Expr)> = Vec::new();
    let mut with_multiplier = Vec::new();
    for name in &plan.monitor {
        let c = ctx.built.candidates.iter().find(|c| &c.symmetry.name == name).expect("monitor checked at build");
        let (is, certs) = integrals_with_certificates(ctx, c)?;
        let mut integral = is[0].expr.clone();
        if let (Some(eps), Some(i1)) = (&plan.epsilon, is.get(1)) {
            integral = normalize(&(integral + Expr::Num(eps.clone()) * &i1.expr)).map_err(Error::from)?;
        }
        monitors.push((format!("I:{name}"), integral));
        let multiplier = certs.first().filter(|c| c.valid() && plan.epsilon.is_none()).map(|c| c.lambda.clone());
        if let Some(l) = &multiplier {
            monitors.push((format!("lambda:{name}"), l.clone()));
        }
        with_multiplier.push((name.clone(), multiplier));
    }

    let traj = integrate(m, &gauge, &ic, plan.t_span, plan.step, &monitors, &setup)?;
    let constraint_max = traj.constraint.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut reports = Vec::new();
    for (name, multiplier) in &with_multiplier {
        let key = format!("I:{name}");
        let lam_key = format!("lambda:{name}");
        let stats = drift(&traj, &key, multiplier.as_ref().map(|_| lam_key.as_str()))?;
        let initial = traj.monitor(&key).and_then(|mon| mon.values.first().copied()).unwrap_or(f64::NAN);
        let within = plan.tolerance.map(|tol| {
            if plan.pivot.is_some() {
                stats.integral <= tol * initial.abs().max(1.0) && stats.constraint <= tol
            } else {
                stats.weak.is_some_and(|w| w <= tol)
            }
        });
        reports.push(MonitorReport {
            name: name.clone(),
            initial: initial + 0.0,
            drift: stats.integral,
            lambda: multiplier.as_ref().map(|l| l.to_string()),
            weak_residual: stats.weak,
            within_tolerance: within,
        });
    }
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(|e| RunError::Usage(format!("writing trajectory: {e}")))?;
    let report = SimulationReport {
        precision: match plan.precision {
            Precision::Double => "double",
            Precision::DoubleDouble => "double-double",
        }
        .into(),
        step: plan.step,
        t_span: plan.t_span,
        on_constraint: plan.pivot.is_some(),
        initial_x: ic.x.iter().map(|v| v.to_f64()).collect(),
        initial_xdot: ic.xdot.iter().map(|v| v.to_f64()).collect(),
        samples: traj.len(),
        blow_up: traj.blow_up.clone(),
        constraint_max,
        tolerance: plan.tolerance,
        monitors: reports,
        trajectory_file: opts.trajectory_file.clone(),
    };
    Ok((report, csv))
}
