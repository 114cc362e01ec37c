//! Flattening of expressions into a postfix program over a fixed atom layout.

use std::sync::Arc;

use crate::symcore::eval::{pow_rational, pow_real};
use crate::symcore::{Atom, Elementary, Expr, FunctionBinding, FunctionTable, Rational, Real, SymError};

#[derive(Clone, Debug)]
enum Op {
    Load(usize),
    Const(usize),
    Add(usize),
    Mul(usize),
    PowConst(Rational),
    Pow,
    Func(Elementary),
    Call { binding: usize, derivs: Vec<u32>, arity: usize },
}

/// Postfix evaluator of one expression.
#[derive(Clone, Debug)]
pub struct Program {
    layout: Vec<Atom>,
    consts: Vec<Rational>,
    bindings: Vec<(String, FunctionBinding)>,
    ops: Vec<Op>,
}

/// A program with its constants converted to a particular scalar type.
#[derive(Clone, Debug)]
pub struct Evaluator<R> {
    program: Arc<Program>,
    consts: Vec<R>,
}

/// Compiles `e` against `layout`; every atom must appear in the layout and
/// every opaque function in `functions`.
pub fn compile(e: &Expr, layout: &[Atom], functions: &FunctionTable) -> Result<Program, SymError> {
    let mut p = Program { layout: layout.to_vec(), consts: Vec::new(), bindings: Vec::new(), ops: Vec::new() };
    emit(e, &mut p, functions)?;
    Ok(p)
}

fn emit(e: &Expr, p: &mut Program, functions: &FunctionTable) -> Result<(), SymError> {
    match e {
        Expr::Num(q) => {
            p.consts.push(q.clone());
            p.ops.push(Op::Const(p.consts.len() - 1));
        }
        Expr::Atom(a) => {
            let slot = p.layout.iter().position(|b| b == a).ok_or_else(|| SymError::UnboundAtom(a.name().to_string()))?;
            p.ops.push(Op::Load(slot));
        }
        Expr::Add(ts) => {
            for t in ts.iter() {
                emit(t, p, functions)?;
            }
            p.ops.push(Op::Add(ts.len()));
        }
        Expr::Mul(fs) => {
            for f in fs.iter() {
                emit(f, p, functions)?;
            }
            p.ops.push(Op::Mul(fs.len()));
        }
        Expr::Pow(be) => {
            emit(&be.0, p, functions)?;
            match &be.1 {
                Expr::Num(q) => p.ops.push(Op::PowConst(q.clone())),
                other => {
                    emit(other, p, functions)?;
                    p.ops.push(Op::Pow);
                }
            }
        }
        Expr::Func(f, arg) => {
            emit(arg, p, functions)?;
            p.ops.push(Op::Func(*f));
        }
        Expr::Opaque(call) => {
            let binding = functions.get(&*call.name).ok_or_else(|| SymError::UnboundFunction(call.to_string()))?;
            for a in &call.args {
                emit(a, p, functions)?;
            }
            p.bindings.push((call.name.to_string(), binding.clone()));
            p.ops.push(Op::Call { binding: p.bindings.len() - 1, derivs: call.derivs.clone(), arity: call.args.len() });
        }
    }
    Ok(())
}

impl Program {
    pub fn layout(&self) -> &[Atom] {
        &self.layout
    }

    pub fn evaluator<R: Real>(self: &Arc<Self>) -> Evaluator<R> {
        Evaluator { program: Arc::clone(self), consts: self.consts.iter().map(R::from_rational).collect() }
    }

    /// Double-precision evaluation.
    pub fn eval(self: &Arc<Self>, values: &[f64]) -> Result<f64, SymError> {
        self.evaluator::<f64>().eval(values)
    }
}

impl<R: Real> Evaluator<R> {
    pub fn eval(&self, values: &[R]) -> Result<R, SymError> {
        let zero = R::from_f64(0.0);
        let mut stack: Vec<R> = Vec::with_capacity(16);
        for op in &self.program.ops {
            match op {
                Op::Load(i) => stack.push(values[*i]),
                Op::Const(i) => stack.push(self.consts[*i]),
                Op::Add(n) => {
                    let start = stack.len() - n;
                    let s = stack.drain(start..).fold(zero, |acc, v| acc + v);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let start = stack.len() - n;
                    let s = stack.drain(start..).fold(R::from_f64(1.0), |acc, v| acc * v);
                    stack.push(s);
                }
                Op::PowConst(q) => {
                    let b = stack.pop().unwrap();
                    stack.push(pow_rational(b, q)?);
                }
                Op::Pow => {
                    let y = stack.pop().unwrap();
                    let b = stack.pop().unwrap();
                    stack.push(pow_real(b, y)?);
                }
                Op::Func(f) => {
                    let a = stack.pop().unwrap();
                    let v = match f {
                        Elementary::Sin => a.sin(),
                        Elementary::Cos => a.cos(),
                        Elementary::Exp => a.exp(),
                        Elementary::Ln if a > zero => a.ln(),
                        Elementary::Sqrt if a >= zero => a.sqrt(),
                        _ => return Err(SymError::Domain(format!("{} of {:?}", f.name(), a.to_f64()))),
                    };
                    stack.push(v);
                }
                Op::Call { binding, derivs, arity } => {
                    let start = stack.len() - arity;
                    let args: Vec<f64> = stack.drain(start..).map(R::to_f64).collect();
                    let (name, b) = &self.program.bindings[*binding];
                    let v = match b {
                        FunctionBinding::Constant(c) => {
                            if derivs.iter().all(|&d| d == 0) {
                                *c
                            } else {
                                0.0
                            }
                        }
                        FunctionBinding::Callable(f) => f(&args, derivs)
                            .ok_or_else(|| SymError::Domain(format!("function `{name}` undefined at {args:?}")))?,
                    };
                    stack.push(R::from_f64(v));
                }
            }
            if let Some(top) = stack.last() {
                if !top.is_finite() {
                    return Err(SymError::Domain("non-finite intermediate value".into()));
                }
            }
        }
        Ok(stack.pop().unwrap_or(zero))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::{eval_num, normalize, parse_free};

    #[test]
    fn agrees_with_tree_evaluation() {
        let x = Atom::free("x");
        let y = Atom::free("y");
        let e = normalize(&parse_free("x^2*exp(y)/(1 + y^2) - sin(x)*y^(3/2) + x^y").unwrap()).unwrap();
        let p = Arc::new(compile(&e, &[x.clone(), y.clone()], &FunctionTable::new()).unwrap());
        let point = [(x, 1.3), (y, 0.7)].into_iter().collect();
        let want = eval_num(&e, &point, &FunctionTable::new()).unwrap();
        assert!((p.eval(&[1.3, 0.7]).unwrap() - want).abs() <= 4.0 * f64::EPSILON * want.abs());
    }

    #[test]
    fn unbound_atom_at_compile_time() {
        let e = parse_free("x + z").unwrap();
        assert!(matches!(compile(&e, &[Atom::free("x")], &FunctionTable::new()), Err(SymError::UnboundAtom(_))));
    }
}
