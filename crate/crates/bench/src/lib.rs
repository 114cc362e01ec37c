//! Workloads shared by the benchmarks.

use noether_core::dynamics::{project_constraint, GaugeChoice, Setup, State};
use noether_core::symcore::{parse, Assumptions, Rational};
use noether_core::{CandidateSymmetry, Expr, GeneratorTerms, MetricTable, Model, VariableSpace};

fn one_dim(g: &str, v0: &str, v1: &str, params: &[(&str, Assumptions)]) -> Model {
    let params: Vec<(String, Assumptions)> = params.iter().map(|(p, a)| (p.to_string(), a.clone())).collect();
    let space = VariableSpace::build(&[("x".into(), Assumptions::positive())], &params).unwrap();
    let p = |s: &str| parse(s, &space).unwrap();
    let x = space.coordinates().to_vec();
    Model::new(space.clone(), MetricTable::new(&x, vec![vec![p(g)]]).unwrap(), MetricTable::zero(&x), p(v0), p(v1), 1)
        .unwrap()
}

pub fn candidate(m: &Model, orders: &[[&str; 4]]) -> CandidateSymmetry {
    let p = |s: &str| parse(s, &m.space).unwrap();
    let terms = orders.iter().map(|o| GeneratorTerms { xi: p(o[0]), eta: vec![p(o[1])], omega: p(o[2]), f: p(o[3]) });
    CandidateSymmetry::new("bench", terms.collect())
}

/// Harmonic exact part with a cubic perturbation, and its approximate symmetry.
pub fn case_a() -> (Model, CandidateSymmetry) {
    let m = one_dim("1", "x^2/2", "v1*x^3/3", &[("v1", Assumptions::nonzero())]);
    let c = candidate(&m, &[["T(t)", "1/x", "-N*(T'(t) + 2/x^2)", "0"], ["T(t)", "-v1/3", "-N*T'(t)", "0"]]);
    (m, c)
}

/// Cubic potential at unit lapse with on-constraint initial data at `x = 1`.
pub fn case_d_flow() -> (Model, GaugeChoice, State) {
    let m = one_dim("1", "-x^3/3", "0", &[]);
    let gauge = GaugeChoice::constant(&m, Rational::from_integer(1.into())).unwrap();
    let ic = project_constraint(&m, &Setup::default(), 0.0, &[1.0], 1.0, &[0.0], 0, 1).unwrap();
    (m, gauge, ic)
}

/// A nested rational expression that normalization has to flatten.
pub fn normalization_input() -> Expr {
    noether_core::symcore::parse_free("((x + y)^3 - (x - y)^3)*(x^2 + 1/y)/(2*y) + sin(x)*(x + 1)^2 - x*(x + 2)*sin(x)")
        .unwrap()
}
