//! The worked models: candidate verdicts, integrals, certificates and flows.

use noether_core::dynamics::{drift, integrate, project_constraint, DoubleDouble, GaugeChoice, Setup};
use noether_core::symcore::{diff, is_zero, normalize, parse, substitute_function, Assumptions, Real};
use noether_core::*;

fn rat(n: i64) -> num_rational::BigRational {
    num_rational::BigRational::from_integer(n.into())
}

fn model(g: &str, v0: &str, v1: &str, params: &[(&str, symcore::Assumptions)]) -> Model {
    let params: Vec<(String, Assumptions)> = params.iter().map(|(p, a)| (p.to_string(), a.clone())).collect();
    let space = VariableSpace::build(&[("x".into(), Assumptions::positive())], &params).unwrap();
    let p = |s: &str| parse(s, &space).unwrap();
    let x = space.coordinates().to_vec();
    let g = MetricTable::new(&x, vec![vec![p(g)]]).unwrap();
    Model::new(space.clone(), g, MetricTable::zero(&x), p(v0), p(v1), 1).unwrap()
}

fn cand(m: &Model, name: &str, orders: &[[&str; 4]]) -> CandidateSymmetry {
    let p = |s: &str| parse(s, &m.space).unwrap();
    let terms = orders.iter().map(|o| GeneratorTerms { xi: p(o[0]), eta: vec![p(o[1])], omega: p(o[2]), f: p(o[3]) });
    CandidateSymmetry::new(name, terms.collect())
}

fn probe() -> ProbeConfig {
    ProbeConfig::default()
}

fn case_a() -> Model {
    model("1", "x^2/2", "v1*x^3/3", &[("v1", Assumptions::nonzero())])
}

fn case_b() -> Model {
    let nz = Assumptions::nonzero();
    model("6*x", "-2*Lambda*x^3", "-v1/x^2", &[("Lambda", nz.clone()), ("v1", nz)])
}

fn case_d() -> Model {
    let nz = Assumptions::nonzero();
    model("1", "-x^3/3", "-v1*x^n/n", &[("v1", nz.clone()), ("n", nz.excluding([rat(3)]))])
}

const AI: [&str; 4] = ["T(t)", "1/x", "-N*(T'(t) + 2/x^2)", "0"];
const BI: [&str; 4] = ["T(t)", "1/x^2", "-N*(T'(t) + 3/x^3)", "0"];
const DI: [&str; 4] = ["T(t)", "x^(-3/2)", "-N*(T'(t) + 3*x^(-5/2))", "0"];

fn same(m: &Model, a: &Expr, b: &str) -> ZeroVerdict {
    is_zero(&normalize(&(a - parse(b, &m.space).unwrap())).unwrap(), &probe()).unwrap()
}

#[test]
fn exact_candidates_pass_with_every_entry_proved() {
    for (m, c) in [(case_a(), AI), (case_b(), BI), (case_d(), DI)] {
        let r = verify(&m, &cand(&m, "exact", &[c]), &probe()).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!(r.entries.iter().all(|e| e.verdict.is_proved()));
    }
}

#[test]
fn a_generator_depending_on_the_lapse_is_rejected() {
    let m = case_a();
    let r = verify(&m, &cand(&m, "bad", &[["N", "1/x", "-N*2/x^2", "0"]]), &probe()).unwrap();
    assert_eq!(r.status, Status::Fail);
    assert!(r.failures().any(|e| e.class == MonomialClass::NdotXdotXdot));
}

#[test]
fn case_a_integral_uses_the_exact_momentum() {
    let m = case_a();
    let c = cand(&m, "Ai", &[AI]);
    let exact = first_integral(&m, &c, 0, MomentumConvention::Exact).unwrap();
    assert!(same(&m, &exact.expr, "T(t)*(xdot^2/(2*N) + N*x^2/2) - xdot/(x*N)").is_proved());
    let half = first_integral(&m, &c, 0, MomentumConvention::HalfFactor).unwrap();
    assert!(same(&m, &half.expr, "T(t)*(xdot^2/(2*N) + N*x^2/2) - xdot/(x*N)").is_nonzero());
}

#[test]
fn case_a_certificate_multiplier() {
    let m = case_a();
    let i = first_integral(&m, &cand(&m, "Ai", &[AI]), 0, MomentumConvention::Exact).unwrap();
    let cert = weak_certificate(&m, &i, &probe()).unwrap();
    assert!(cert.verdict.is_proved());
    let t_zero = substitute_function(&cert.lambda, "T", &[m.space.time().clone()], &Expr::zero()).unwrap();
    assert!(same(&m, &t_zero, "2*N/x^2").is_proved());
    // Arbitrary T never obstructs conservation.
    let t = m.space.time().clone();
    for body in ["0", "1", "t^2", "sin(t)"] {
        let r = substitute_function(&cert.remainder, "T", &[t.clone()], &parse(body, &m.space).unwrap()).unwrap();
        assert!(is_zero(&r, &probe()).unwrap().is_proved(), "T = {body}");
    }
}

#[test]
fn the_hamiltonian_is_weakly_conserved_with_the_lapse_rate() {
    let m = case_a();
    let h0 = FirstIntegral { order: 0, expr: m.hamiltonian(0).unwrap() };
    let cert = weak_certificate(&m, &h0, &probe()).unwrap();
    assert!(cert.verdict.is_proved());
    assert!(same(&m, &cert.lambda, "Ndot").is_proved());
}

#[test]
fn case_b_approximate_candidates() {
    let m = case_b();
    let zero = ["0", "0", "0", "0"];
    let verdicts: Vec<Status> = [
        cand(&m, "Bii", &[BI, ["0", "5*v1/(32*Lambda*x^7)", "65*N*v1/(32*Lambda*x^8)", "0"]]),
        cand(&m, "Biii", &[zero, ["t", "x*ln(x)", "-3*N*(ln(x) + 1/3)", "0"]]),
        cand(&m, "Biv", &[zero, ["1", "0", "0", "0"]]),
        cand(&m, "Bv", &[zero, ["0", "x", "-3*N", "0"]]),
    ]
    .iter()
    .map(|c| verify(&m, c, &probe()).unwrap().status)
    .collect();
    assert_eq!(verdicts, [Status::Fail, Status::Fail, Status::Pass, Status::Fail]);
}

#[test]
fn case_d_corrected_first_order_generator() {
    let m = case_d();
    let solved = cand(
        &m,
        "Dii",
        &[DI, ["T(t)", "-3*v1*x^(n - 9/2)/(2*n)", "-N*T'(t) - 3*N*v1*(n - 9/2)*x^(n - 11/2)/n", "0"]],
    );
    let r = verify(&m, &solved, &probe()).unwrap();
    assert!(r.status.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    let is: Vec<_> = (0..2).map(|g| first_integral(&m, &solved, g, MomentumConvention::Exact).unwrap()).collect();
    let certs = weak_certificate_series(&m, &is, &probe()).unwrap();
    assert!(certs.iter().all(WeakCertificate::valid));
}

#[test]
fn fixed_lapse_generators_of_case_a() {
    let m = case_a();
    let n0 = Expr::one();
    for orders in [
        vec![["1", "0", "0", "0"]],
        vec![["0", "sin(t)", "0", "x*cos(t)"]],
        vec![["0", "cos(t)", "0", "-x*sin(t)"]],
    ] {
        let r = verify_fixed_lapse(&m, &cand(&m, "Y", &orders), &n0, &probe()).unwrap();
        assert!(r.status.passed());
    }
}

#[test]
fn certificate_agrees_with_direct_differentiation() {
    // Independent oracle: differentiate I along the solved flow by hand.
    let m = case_d();
    let i = first_integral(&m, &cand(&m, "Di", &[DI]), 0, MomentumConvention::Exact).unwrap();
    let cert = weak_certificate(&m, &i, &probe()).unwrap();
    let sys = m.accel_solve(false).unwrap();
    let s = &m.space;
    let mut parts = vec![diff(&i.expr, s.time()).unwrap()];
    parts.push(Expr::atom(s.velocity(0)) * diff(&i.expr, s.coordinate(0)).unwrap());
    parts.push(&sys.accelerations[0] * diff(&i.expr, s.velocity(0)).unwrap());
    parts.push(Expr::atom(s.lapse_velocity()) * diff(&i.expr, s.lapse()).unwrap());
    let residual = Expr::sum(parts) - &cert.lambda * m.constraint().unwrap();
    assert!(!is_zero(&normalize(&residual).unwrap(), &probe()).unwrap().is_nonzero());
}

fn case_d_drift<R: Real>(gauge: &str, step: f64) -> (f64, f64, f64) {
    let m = case_d();
    let setup = Setup::default();
    let gauge = GaugeChoice::new(&m, &parse(gauge, &m.space).unwrap()).unwrap();
    let t_one = parse("1", &m.space).unwrap();
    let i = first_integral(&m, &cand(&m, "Di", &[DI]), 0, MomentumConvention::Exact).unwrap();
    let i = substitute_function(&i.expr, "T", &[m.space.time().clone()], &t_one).unwrap();
    let one = R::from_f64(1.0);
    let ic = project_constraint(&m, &setup, R::from_f64(0.0), &[one], one, &[R::from_f64(0.0)], 0, 1).unwrap();
    let traj = integrate(&m, &gauge, &ic, (0.0, 0.5), step, &[("I".into(), i)], &setup).unwrap();
    let stats = drift(&traj, "I", None).unwrap();
    (stats.integral, stats.constraint, traj.monitor("I").unwrap().values[0])
}

#[test]
fn case_d_drift_with_a_time_dependent_lapse() {
    let (di, dh, i0) = case_d_drift::<f64>("1 + t/2", 1e-4);
    assert!(di <= 1e-7 * i0.abs().max(1.0), "{di}");
    assert!(dh <= 1e-7, "{dh}");
}

#[test]
fn constraint_drift_converges_at_fourth_order() {
    let (_, coarse, _) = case_d_drift::<DoubleDouble>("1", 1e-3);
    let (_, fine, _) = case_d_drift::<DoubleDouble>("1", 5e-4);
    assert!(coarse / fine >= 2f64.powf(3.8), "{coarse} / {fine}");
}
