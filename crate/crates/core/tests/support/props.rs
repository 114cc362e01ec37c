//! Randomized checks shared by the property suite and the acceptance target.
//! Every runner is seeded, so a failure reproduces exactly.

#![allow(dead_code)]

use std::collections::BTreeMap;

use noether_core::dynamics::{integrate, GaugeChoice, Setup, State};
use noether_core::geom::christoffel;
use noether_core::noether::determining_system;
use noether_core::symcore::{
    diff, eval_num, is_zero, normalize, parse, substitute_function, Assumptions, FunctionTable, Rational,
};
use noether_core::{Atom, CandidateSymmetry, Expr, GeneratorTerms, MetricTable, Model, ProbeConfig, VariableSpace};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

pub const SEED: u64 = 20_240_917;

pub fn runner(cases: u32) -> TestRunner {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&SEED.to_le_bytes());
    let config = Config { cases, failure_persistence: None, max_shrink_iters: 64, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed))
}

pub fn report<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Two positive coordinates `x`, `y` and a nonzero parameter `a`.
pub fn plane() -> VariableSpace {
    VariableSpace::build(
        &[("x".into(), Assumptions::positive()), ("y".into(), Assumptions::positive())],
        &[("a".into(), Assumptions::nonzero())],
    )
    .unwrap()
}

pub fn line() -> VariableSpace {
    VariableSpace::build(&[("x".into(), Assumptions::positive())], &[]).unwrap()
}

fn small_rational() -> impl Strategy<Value = String> {
    (-5i32..=5, 1i32..=4).prop_map(|(p, q)| format!("({p}/{q})"))
}

/// Smooth expressions in `x`, `y` that are finite on the positive quadrant.
pub fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![Just("x".to_string()), Just("y".to_string()), small_rational()];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), 2i32..=3).prop_map(|(a, k)| format!("({a})^{k}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(1 + ({b})^2)")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("exp(({a})/4)")),
            inner.clone().prop_map(|a| format!("ln(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("sqrt(2 + ({a})^2)")),
            inner.prop_map(|a| format!("x^(3/2)*({a})")),
        ]
    })
}

fn coordinate() -> impl Strategy<Value = f64> {
    0.5f64..1.5
}

pub fn normalization_idempotence(cases: u32) -> Result<(), String> {
    let space = plane();
    report(runner(cases).run(&smooth_expr(), |text| {
        let e = parse(&text, &space).unwrap();
        let once = normalize(&e).unwrap();
        let twice = normalize(&once).unwrap();
        prop_assert_eq!(&twice, &once, "normalize not idempotent on {}", text);
        prop_assert_eq!(normalize(&e.clone()).unwrap(), once, "normalize not deterministic on {}", text);
        Ok(())
    }))
}

fn point(space: &VariableSpace, x: f64, y: f64) -> BTreeMap<Atom, f64> {
    [(space.coordinate(0).clone(), x), (space.coordinate(1).clone(), y)].into_iter().collect()
}

pub fn diff_matches_finite_differences(cases: u32) -> Result<(), String> {
    let space = plane();
    let funcs = FunctionTable::new();
    report(runner(cases).run(&(smooth_expr(), coordinate(), coordinate()), |(text, x, y)| {
        let e = parse(&text, &space).unwrap();
        let d = diff(&e, space.coordinate(0)).unwrap();
        let exact = eval_num(&d, &point(&space, x, y), &funcs).unwrap();
        let f = |x: f64| eval_num(&e, &point(&space, x, y), &funcs).unwrap();
        let h = 1e-3;
        let fd = (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
        prop_assert!(
            (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
            "d/dx of {} at ({}, {}): {} vs {}",
            text,
            x,
            y,
            exact,
            fd
        );
        Ok(())
    }))
}

/// Positive-definite 2x2 metrics with polynomial entries.
fn metric_entries() -> impl Strategy<Value = [String; 3]> {
    (1i32..=4, 0i32..=3, 1i32..=4, 0i32..=3, -1i32..=1).prop_map(|(a, b, c, d, e)| {
        [format!("{a} + {b}*x^2"), format!("({e}/4)*x*y"), format!("{c} + {d}*y^2 + x")]
    })
}

pub fn metric_compatibility(cases: u32) -> Result<(), String> {
    let space = plane();
    let probe = ProbeConfig::default();
    report(runner(cases).run(&metric_entries(), |[g11, g12, g22]| {
        let p = |s: &str| parse(s, &space).unwrap();
        let coords = space.coordinates().to_vec();
        let g = MetricTable::new(&coords, vec![vec![p(&g11), p(&g12)], vec![p(&g12), p(&g22)]]).unwrap();
        let gamma = christoffel(&g).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut terms = vec![diff(g.entry(i, j), &coords[k]).unwrap()];
                    for l in 0..2 {
                        terms.push(-(gamma.get(l, i, k) * g.entry(l, j)));
                        terms.push(-(gamma.get(l, j, k) * g.entry(i, l)));
                    }
                    let r = normalize(&Expr::sum(terms)).unwrap();
                    let v = is_zero(&r, &probe).unwrap();
                    prop_assert!(!v.is_nonzero(), "nabla_{} g_{}{} = {} for g = [{}, {}; {}]", k, i, j, r, g11, g12, g22);
                }
            }
        }
        Ok(())
    }))
}

fn poly(vars: &'static [&'static str]) -> impl Strategy<Value = String> {
    proptest::collection::vec((-3i32..=3, proptest::sample::select(vars), 0u32..=2), 1..=3).prop_map(|terms| {
        let parts: Vec<String> = terms.iter().map(|(c, v, k)| format!("({c})*{v}^{k}")).collect();
        parts.join(" + ")
    })
}

/// A one-dimensional model `g = 1 + b x^2`, `V0 = c x^2 + e` and a
/// candidate of polynomial components.
fn commutation_input() -> impl Strategy<Value = (i32, i32, i32, [String; 4])> {
    (
        0i32..=2,
        1i32..=3,
        1i32..=3,
        poly(&["t"]),
        poly(&["t", "x"]),
        poly(&["t", "x", "N"]),
        poly(&["t", "x"]),
    )
        .prop_map(|(b, c, e, xi, eta, omega, f)| (b, c, e, [xi, eta, omega, f]))
}

pub fn noether_commutation(cases: u32) -> Result<(), String> {
    let space = line();
    let probe = ProbeConfig::default();
    report(runner(cases).run(&commutation_input(), |(b, c, e, [xi, eta, omega, f])| {
        let p = |s: &str| parse(s, &space).unwrap();
        let x = space.coordinates().to_vec();
        let m = Model::new(
            space.clone(),
            MetricTable::new(&x, vec![vec![p(&format!("1 + {b}*x^2"))]]).unwrap(),
            MetricTable::zero(&x),
            p(&format!("{c}*x^2 + {e}")),
            Expr::zero(),
            0,
        )
        .unwrap();
        let bodies = [("xi0", p(&xi)), ("eta0_1", p(&eta)), ("omega0", p(&omega)), ("f0", p(&f))];
        let cand = CandidateSymmetry::new(
            "random",
            vec![GeneratorTerms { xi: bodies[0].1.clone(), eta: vec![bodies[1].1.clone()], omega: bodies[2].1.clone(), f: bodies[3].1.clone() }],
        );
        let direct = determining_system(&m, 0, Some(&cand)).unwrap();
        let generic = determining_system(&m, 0, None).unwrap();
        let params = [space.time().clone(), space.coordinate(0).clone(), space.lapse().clone()];
        let mut seen = Vec::new();
        for entry in &generic.entries {
            let mut r = entry.residual.clone();
            for (name, body) in &bodies {
                r = substitute_function(&r, name, &params, body).unwrap();
            }
            let want = direct.entry(entry.class, &entry.index).map(|d| d.residual.clone()).unwrap_or_else(Expr::zero);
            let v = is_zero(&normalize(&(r - want)).unwrap(), &probe).unwrap();
            prop_assert!(!v.is_nonzero(), "class {:?} differs", entry.class);
            seen.push((entry.class, entry.index.clone()));
        }
        for d in &direct.entries {
            if !seen.contains(&(d.class, d.index.clone())) {
                let v = is_zero(&d.residual, &probe).unwrap();
                prop_assert!(!v.is_nonzero(), "class {:?} only in the direct system", d.class);
            }
        }
        Ok(())
    }))
}

/// `V0 = x^2/2` at `N = 1`: `x(t) = x0 cos t + v0 sin t`.
pub fn harmonic_model() -> Model {
    let space = line();
    let x = space.coordinates().to_vec();
    let v0 = parse("x^2/2", &space).unwrap();
    Model::new(space, MetricTable::identity(&x), MetricTable::zero(&x), v0, Expr::zero(), 0).unwrap()
}

/// Max error against the closed form over `t in [0, 1]`.
pub fn harmonic_error(m: &Model, x0: f64, v0: f64, step: f64) -> f64 {
    let gauge = GaugeChoice::constant(m, Rational::from_integer(1.into())).unwrap();
    let ic = State { x: vec![x0], xdot: vec![v0] };
    let traj = integrate(m, &gauge, &ic, (0.0, 1.0), step, &[], &Setup::default()).unwrap();
    traj.times.iter().zip(&traj.x).map(|(t, x)| (x[0] - (x0 * t.cos() + v0 * t.sin())).abs()).fold(0.0, f64::max)
}

pub fn rk4_order(cases: u32) -> Result<(), String> {
    let m = harmonic_model();
    let steps = proptest::sample::select(vec![1.0 / 40.0, 1.0 / 50.0, 1.0 / 80.0]);
    report(runner(cases).run(&(1.0f64..2.0, -1.0f64..1.0, steps), |(x0, v0, h)| {
        let coarse = harmonic_error(&m, x0, v0, h);
        let fine = harmonic_error(&m, x0, v0, h / 2.0);
        let ratio = coarse / fine;
        prop_assert!(ratio >= 2f64.powf(3.8), "x0 = {}, v0 = {}, h = {}: error ratio {}", x0, v0, h, ratio);
        Ok(())
    }))
}
