//! Numeric integration of the Euler-Lagrange flow under a lapse gauge.

mod compile;
mod ddouble;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

pub use compile::{compile, Evaluator, Program};
pub use ddouble::DoubleDouble;

use crate::model::Model;
use crate::symcore::{
    diff, normalize, substitute, substitute_function, Atom, Expr, FunctionTable, Rational, Real, SymError,
};
use crate::{Error, Result};

/// Lapse as an explicit function of time, with its derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeChoice {
    pub lapse: Expr,
    pub lapse_rate: Expr,
}

impl GaugeChoice {
    pub fn new(model: &Model, lapse: &Expr) -> Result<Self> {
        let t = model.space.time();
        let mut allowed = vec![t.clone()];
        allowed.extend(model.space.parameters().iter().cloned());
        if let Some(a) = lapse.atoms().into_iter().find(|a| !allowed.contains(a)) {
            return Err(Error::Usage(format!("gauge lapse may depend on t only, found `{a}`")));
        }
        Ok(GaugeChoice { lapse: normalize(lapse)?, lapse_rate: diff(lapse, t)? })
    }

    pub fn constant(model: &Model, n0: Rational) -> Result<Self> {
        GaugeChoice::new(model, &Expr::Num(n0))
    }
}

/// Numeric values for parameters and opaque functions, plus run options.
#[derive(Clone, Debug, Default)]
pub struct Setup {
    /// Exact parameter values, substituted symbolically before compiling.
    pub params: BTreeMap<Atom, Rational>,
    /// Opaque function bodies `name(args) := body`.
    pub functions: Vec<(String, Vec<Atom>, Expr)>,
    /// When set, the flow includes the first-order correction scaled by eps.
    pub epsilon: Option<Rational>,
}

impl Setup {
    /// Applies parameter values and function bodies to `e`.
    pub fn specialize(&self, e: &Expr) -> Result<Expr> {
        let mut out = e.clone();
        for (name, params, body) in &self.functions {
            out = substitute_function(&out, name, params, body)?;
        }
        let bindings: BTreeMap<Atom, Expr> = self.params.iter().map(|(a, q)| (a.clone(), Expr::Num(q.clone()))).collect();
        Ok(substitute(&out, &bindings)?)
    }
}

/// Position and velocity of the coordinates at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct State<R = f64> {
    pub x: Vec<R>,
    pub xdot: Vec<R>,
}

/// Layout shared by every compiled expression: `t, x.., xdot.., N, Ndot`.
pub fn layout(model: &Model) -> Vec<Atom> {
    let s = &model.space;
    let mut l = vec![s.time().clone()];
    l.extend(s.coordinates().iter().cloned());
    l.extend(s.velocities().iter().cloned());
    l.push(s.lapse().clone());
    l.push(s.lapse_velocity().clone());
    l
}

fn compile_in(model: &Model, setup: &Setup, e: &Expr) -> Result<Arc<Program>> {
    let e = setup.specialize(e)?;
    Ok(Arc::new(compile(&e, &layout(model), &FunctionTable::new())?))
}

/// Solves the constraint for one velocity given the others.
///
/// `sign = +1` picks the larger root of the quadratic, `-1` the smaller.
pub fn project_constraint<R: Real>(
    model: &Model,
    setup: &Setup,
    t: R,
    x: &[R],
    lapse: R,
    partial: &[R],
    pivot: usize,
    sign: i8,
) -> Result<State<R>> {
    let n = model.space.dim();
    if x.len() != n || partial.len() != n || pivot >= n {
        return Err(Error::Dimension(format!("expected {n} coordinates and velocities, pivot < {n}")));
    }
    let zero = R::from_f64(0.0);
    let two = R::from_f64(2.0);
    let mut vals = vec![t];
    vals.extend_from_slice(x);
    vals.extend(std::iter::repeat(zero).take(n));
    vals.push(lapse);
    vals.push(zero);
    let num = |e: &Expr| -> Result<R> { Ok(compile_in(model, setup, e)?.evaluator::<R>().eval(&vals)?) };
    let n2 = lapse * lapse;
    let a = num(model.g.entry(pivot, pivot))? / (two * n2);
    let mut b = zero;
    let mut c = num(&model.v0)?;
    for i in 0..n {
        if i == pivot {
            continue;
        }
        b = b + num(model.g.entry(pivot, i))? * partial[i] / n2;
        for j in 0..n {
            if j != pivot {
                c = c + num(model.g.entry(i, j))? * partial[i] * partial[j] / (two * n2);
            }
        }
    }
    let root = if a == zero {
        if b == zero {
            return Err(Error::Infeasible(format!("constraint does not involve velocity {pivot}")));
        }
        -c / b
    } else {
        let disc = b * b - R::from_f64(4.0) * a * c;
        if disc < zero {
            return Err(Error::Infeasible(format!(
                "discriminant {:e} < 0 for the constraint quadratic {:e}*v^2 + {:e}*v + {:e}",
                disc.to_f64(),
                a.to_f64(),
                b.to_f64(),
                c.to_f64()
            )));
        }
        let r1 = (-b + disc.sqrt()) / (two * a);
        let r2 = (-b - disc.sqrt()) / (two * a);
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        if sign >= 0 {
            hi
        } else {
            lo
        }
    };
    let mut xdot = partial.to_vec();
    xdot[pivot] = root;
    Ok(State { x: x.to_vec(), xdot })
}

/// Samples of an expression tracked along a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Monitor {
    pub name: String,
    pub values: Vec<f64>,
    /// `value(t) - value(t0)`, formed before rounding to double.
    pub deviation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub coords: Vec<String>,
    pub step: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xdot: Vec<Vec<f64>>,
    pub lapse: Vec<f64>,
    pub lapse_rate: Vec<f64>,
    pub constraint: Vec<f64>,
    pub monitors: Vec<Monitor>,
    /// Why the run stopped early, if it did.
    pub blow_up: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn monitor(&self, name: &str) -> Option<&Monitor> {
        self.monitors.iter().find(|m| m.name == name)
    }

    /// Writes one row per sample: `t, x.., xdot.., N, H, monitors..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.coords.iter().cloned());
        header.extend(self.coords.iter().map(|c| format!("{c}dot")));
        header.push("N".into());
        header.push("H".into());
        header.extend(self.monitors.iter().map(|m| m.name.clone()));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![fmt_num(self.times[k])];
            row.extend(self.x[k].iter().map(|v| fmt_num(*v)));
            row.extend(self.xdot[k].iter().map(|v| fmt_num(*v)));
            row.push(fmt_num(self.lapse[k]));
            row.push(fmt_num(self.constraint[k]));
            row.extend(self.monitors.iter().map(|m| fmt_num(m.values[k])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.17e}")
}

/// Fixed-step classical RK4 on `(x, xdot)` over `t0 + i*step`, carried out
/// in the scalar type of the initial state.
///
/// `monitors` are expressions over `t, x, xdot, N, Ndot` (and parameters or
/// functions bound in `setup`). The run stops, flagging a blow-up, at the
/// first non-finite or undefined state.
pub fn integrate<R: Real>(
    model: &Model,
    gauge: &GaugeChoice,
    ic: &State<R>,
    t_span: (f64, f64),
    step: f64,
    monitors: &[(String, Expr)],
    setup: &Setup,
) -> Result<Trajectory> {
struct Flow<R> {
    n: usize,
    accel: Vec<Evaluator<R>>,
    lapse: Evaluator<R>,
    lapse_rate: Evaluator<R>,
}

impl<R: Real> Flow<R> {
    fn gauge(&self, t: R) -> std::result::Result<(R, R), SymError> {
        let mut v = vec![R::from_f64(0.0); 2 * self.n + 3];
        v[0] = t;
        Ok((self.lapse.eval(&v)?, self.lapse_rate.eval(&v)?))
    }

    fn full(&self, t: R, y: &[R]) -> std::result::Result<Vec<R>, SymError> {
        let (lapse, rate) = self.gauge(t)?;
        if lapse.to_f64() == 0.0 {
            return Err(SymError::Domain(format!("lapse vanishes at t = {:?}", t.to_f64())));
        }
        let mut v = Vec::with_capacity(2 * self.n + 3);
        v.push(t);
        v.extend_from_slice(y);
        v.push(lapse);
        v.push(rate);
        Ok(v)
    }

    fn rhs(&self, t: R, y: &[R]) -> std::result::Result<Vec<R>, SymError> {
        let v = self.full(t, y)?;
        let mut out = y[self.n..].to_vec();
        for a in &self.accel {
            out.push(a.eval(&v)?);
        }
        Ok(out)
    }
}

fn axpy<R: Real>(y: &[R], h: R, k: &[R]) -> Vec<R> {
    y.iter().zip(k).map(|(a, b)| *a + h * *b).collect()
}

    let n = model.space.dim();
    if !(step > 0.0) || !(t_span.1 > t_span.0) {
        return Err(Error::Usage("need step > 0 and t1 > t0".into()));
    }
    if ic.x.len() != n || ic.xdot.len() != n {
        return Err(Error::Dimension(format!("initial state must have {n} coordinates and velocities")));
    }
    let steps_f = (t_span.1 - t_span.0) / step;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-6 {
        return Err(Error::Usage(format!("span {:?} is not a whole number of steps {step}", t_span)));
    }

    let sys = model.accel_solve(setup.epsilon.is_some())?;
    let mut accel_exprs = sys.accelerations.clone();
    if let (Some(eps), Some(corr)) = (&setup.epsilon, &sys.correction) {
        for (a, c) in accel_exprs.iter_mut().zip(corr) {
            *a = normalize(&(&*a + Expr::Num(eps.clone()) * c))?;
        }
    }
    let flow = Flow::<R> {
        n,
        accel: accel_exprs.iter().map(|e| Ok(compile_in(model, setup, e)?.evaluator())).collect::<Result<_>>()?,
        lapse: compile_in(model, setup, &gauge.lapse)?.evaluator(),
        lapse_rate: compile_in(model, setup, &gauge.lapse_rate)?.evaluator(),
    };
    let constraint = compile_in(model, setup, &sys.constraint)?.evaluator::<R>();
    let monitor_evals: Vec<Evaluator<R>> =
        monitors.iter().map(|(_, e)| Ok(compile_in(model, setup, e)?.evaluator())).collect::<Result<_>>()?;

    let mut traj = Trajectory {
        coords: model.space.coordinates().iter().map(|a| a.name().to_string()).collect(),
        step,
        times: Vec::with_capacity(steps + 1),
        x: Vec::new(),
        xdot: Vec::new(),
        lapse: Vec::new(),
        lapse_rate: Vec::new(),
        constraint: Vec::new(),
        monitors: monitors
            .iter()
            .map(|(name, _)| Monitor { name: name.clone(), values: Vec::new(), deviation: Vec::new() })
            .collect(),
        blow_up: None,
    };
    let mut initial: Vec<R> = Vec::new();

    let t0 = R::from_f64(t_span.0);
    let h = R::from_f64(step);
    let half = R::from_f64(0.5);
    let sixth = R::from_f64(1.0) / R::from_f64(6.0);
    let two = R::from_f64(2.0);
    let mut y: Vec<R> = ic.x.iter().chain(&ic.xdot).copied().collect();

    for i in 0..=steps {
        let t = t0 + R::from_f64(i as f64) * h;
        let record = (|| -> std::result::Result<(Vec<R>, R, Vec<R>), SymError> {
            let v = flow.full(t, &y)?;
            let c = constraint.eval(&v)?;
            let m = monitor_evals.iter().map(|e| e.eval(&v)).collect::<std::result::Result<Vec<_>, _>>()?;
            Ok((v, c, m))
        })();
        let (v, c, m) = match record {
            Ok(r) if y.iter().all(|v| v.is_finite()) => r,
            Ok(_) => {
                traj.blow_up = Some(format!("non-finite state at t = {}", t.to_f64()));
                break;
            }
            Err(e) => {
                traj.blow_up = Some(format!("at t = {}: {e}", t.to_f64()));
                break;
            }
        };
        if i == 0 {
            initial = m.clone();
        }
        traj.times.push(t.to_f64());
        traj.x.push(y[..n].iter().map(|v| v.to_f64()).collect());
        traj.xdot.push(y[n..].iter().map(|v| v.to_f64()).collect());
        traj.lapse.push(v[2 * n + 1].to_f64());
        traj.lapse_rate.push(v[2 * n + 2].to_f64());
        traj.constraint.push(c.to_f64());
        for (k, mon) in traj.monitors.iter_mut().enumerate() {
            mon.values.push(m[k].to_f64());
            mon.deviation.push((m[k] - initial[k]).to_f64());
        }
        if i == steps {
            break;
        }
        let stepped = (|| -> std::result::Result<Vec<R>, SymError> {
            let k1 = flow.rhs(t, &y)?;
            let k2 = flow.rhs(t + half * h, &axpy(&y, half * h, &k1))?;
            let k3 = flow.rhs(t + half * h, &axpy(&y, half * h, &k2))?;
            let k4 = flow.rhs(t + h, &axpy(&y, h, &k3))?;
            Ok((0..y.len()).map(|j| y[j] + h * sixth * (k1[j] + two * k2[j] + two * k3[j] + k4[j])).collect())
        })();
        match stepped {
            Ok(next) => y = next,
            Err(e) => {
                traj.blow_up = Some(format!("at t = {}: {e}", t.to_f64()));
                break;
            }
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftStats {
    /// `max |I(t) - I(t0)|`.
    pub integral: f64,
    /// `max |H(t)|`.
    pub constraint: f64,
    /// `max |dI/dt - lambda H|` over interior samples, when a multiplier
    /// monitor is given.
    pub weak: Option<f64>,
}

/// Conservation statistics for the monitored integral `integral`.
///
/// `multiplier` names a monitor carrying the certificate multiplier; the
/// derivative of the integral is taken by central differences.
pub fn drift(traj: &Trajectory, integral: &str, multiplier: Option<&str>) -> Result<DriftStats> {
    let mon = traj.monitor(integral).ok_or_else(|| Error::Usage(format!("no monitor named `{integral}`")))?;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let weak = match multiplier {
        None => None,
        Some(name) => {
            let lam = traj.monitor(name).ok_or_else(|| Error::Usage(format!("no monitor named `{name}`")))?;
            let d = derivative(&mon.deviation, traj.step);
            let mut worst = 0.0f64;
            for k in 1..traj.len().saturating_sub(1) {
                worst = worst.max((d[k] - lam.values[k] * traj.constraint[k]).abs());
            }
            Some(worst)
        }
    };
    Ok(DriftStats { integral: max_abs(&mon.deviation), constraint: max_abs(&traj.constraint), weak })
}

/// Central-difference derivative at interior samples of a uniform grid:
/// the five-point stencil where it fits, the three-point one next to the ends.
fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    for k in 1..n.saturating_sub(1) {
        d[k] = if k >= 2 && k + 2 < n {
            (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h)
        } else {
            (f[k + 1] - f[k - 1]) / (2.0 * h)
        };
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::MetricTable;
    use crate::symcore::{parse, Assumptions, VariableSpace};

    fn one_dim(v0: &str) -> Model {
        let space = VariableSpace::build(&[("x".into(), Assumptions::positive())], &[]).unwrap();
        let x = space.coordinates().to_vec();
        let v0 = parse(v0, &space).unwrap();
        Model::new(space, MetricTable::identity(&x), MetricTable::zero(&x), v0, Expr::zero(), 0).unwrap()
    }

    #[test]
    fn free_particle_moves_in_a_line() {
        let m = one_dim("0");
        let g = GaugeChoice::constant(&m, Rational::from_integer(1.into())).unwrap();
        let ic = State { x: vec![0.5], xdot: vec![1.5] };
        let traj = integrate(&m, &g, &ic, (0.0, 2.0), 0.01, &[], &Setup::default()).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.x) {
            assert!((x[0] - (0.5 + 1.5 * t)).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_motion_off_constraint() {
        let m = one_dim("x^2/2");
        let g = GaugeChoice::constant(&m, Rational::from_integer(1.into())).unwrap();
        let ic = State { x: vec![1.0], xdot: vec![0.0] };
        let traj = integrate(&m, &g, &ic, (0.0, 3.0), 1e-3, &[], &Setup::default()).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.x) {
            assert!((x[0] - t.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn infeasible_projection() {
        let m = one_dim("x^2/2");
        let err = project_constraint(&m, &Setup::default(), 0.0, &[1.0], 1.0, &[0.0f64], 0, 1).unwrap_err();
        assert!(matches!(err, Error::Infeasible(ref s) if s.contains("discriminant")));
    }

    #[test]
    fn blow_up_is_flagged() {
        let m = one_dim("-x^3/3");
        let g = GaugeChoice::constant(&m, Rational::from_integer(1.into())).unwrap();
        let ic = State { x: vec![1.0], xdot: vec![(2.0f64 / 3.0).sqrt()] };
        let traj = integrate(&m, &g, &ic, (0.0, 20.0), 1e-2, &[], &Setup::default()).unwrap();
        assert!(traj.blow_up.is_some());
        assert!(traj.len() < 2001);
    }

    #[test]
    fn stencils_are_exact_on_low_degree() {
        let h = 0.1;
        let f: Vec<f64> = (0..8).map(|k| (k as f64 * h).powi(4) - 2.0 * (k as f64 * h)).collect();
        let d = derivative(&f, h);
        for k in 2..6 {
            let t = k as f64 * h;
            assert!((d[k] - (4.0 * t.powi(3) - 2.0)).abs() < 1e-12, "k = {k}");
        }
        let q: Vec<f64> = (0..8).map(|k| (k as f64 * h).powi(2)).collect();
        let d = derivative(&q, h);
        assert!((d[1] - 0.2).abs() < 1e-12 && (d[6] - 1.2).abs() < 1e-12);
    }
}
