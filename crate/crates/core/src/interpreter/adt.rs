//! Call-by-value evaluation of datatype functions.

use super::eval::{boolean, eval, stuck, thrown, Budget, Env};
use super::EvalError;
use crate::runtime::{PermanentMemory, Value, VolatileMemory};
use crate::syntax::ast::{AdtBody, Pattern};
use crate::syntax::ResolvedProgram;

/// Applies `adt.func` to `args`, spending one unit of `fuel` per body step.
pub fn call_function(
    rp: &ResolvedProgram,
    adt: &str,
    func: &str,
    args: Vec<Value>,
    fuel: &mut Budget,
) -> Result<Value, EvalError> {
    let f = rp
        .adt(adt)
        .and_then(|a| a.function(func))
        .ok_or_else(|| stuck(format!("unknown function {adt}.{func}")))?;
    if f.params.len() != args.len() {
        return Err(stuck(format!(
            "{adt}.{func} expects {} arguments, got {}",
            f.params.len(),
            args.len()
        )));
    }
    let mut locals = VolatileMemory::new();
    for (p, v) in f.params.iter().zip(args) {
        locals.set(p.name.clone(), v);
    }
    if fuel.depth == 0 {
        return Err(thrown("datatype evaluation ran out of fuel"));
    }
    fuel.depth -= 1;
    // deep recursion over long lists would otherwise overflow the native stack
    let r = stacker::maybe_grow(64 * 1024, 1024 * 1024, || body(rp, &f.body, locals, fuel));
    fuel.depth += 1;
    r
}

/// Evaluates a datatype function with a fresh fuel budget.
pub fn eval_adt(rp: &ResolvedProgram, adt: &str, func: &str, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut fuel = Budget::default();
    call_function(rp, adt, func, args, &mut fuel)
}

fn body(rp: &ResolvedProgram, d: &AdtBody, mut locals: VolatileMemory, fuel: &mut Budget) -> Result<Value, EvalError> {
    let empty = PermanentMemory::new();
    let mut sink = Vec::new();
    let mut d = d;
    loop {
        if fuel.steps == 0 {
            return Err(thrown("datatype evaluation ran out of fuel"));
        }
        fuel.steps -= 1;
        let env = Env {
            rp,
            active: None,
            volatile: &locals,
            permanent: &empty,
        };
        match d {
            AdtBody::Return(e) => return eval(&env, e, &mut sink, fuel),
            AdtBody::Invoke { name, .. } => return Err(stuck(format!("unresolved invocation `{name}`"))),
            AdtBody::If { cond, then, els } => {
                d = if boolean(eval(&env, cond, &mut sink, fuel)?)? {
                    then
                } else {
                    els
                };
            }
            AdtBody::Let { name, value, body, .. } => {
                let v = eval(&env, value, &mut sink, fuel)?;
                locals.set(name.clone(), v);
                d = body;
            }
            AdtBody::Switch {
                scrutinee,
                cases,
                default,
            } => {
                let v = eval(&env, scrutinee, &mut sink, fuel)?;
                let mut next = None;
                for (pat, b) in cases {
                    if let Some(binds) = matches(pat, &v) {
                        for (x, bv) in binds {
                            locals.set(x, bv);
                        }
                        next = Some(b);
                        break;
                    }
                }
                d = match next.or(default.as_deref()) {
                    Some(b) => b,
                    None => return Err(thrown("non-exhaustive match")),
                };
            }
        }
    }
}

fn matches(p: &Pattern, v: &Value) -> Option<Vec<(String, Value)>> {
    match (p, v) {
        (Pattern::Ctor { name, binders }, Value::Adt { ctor, args, .. }) if name == ctor => {
            Some(binders.iter().cloned().zip(args.iter().cloned()).collect())
        }
        (Pattern::Int(n), Value::Int(m)) if n == m => Some(Vec::new()),
        (Pattern::Bool(b), Value::Bool(c)) if b == c => Some(Vec::new()),
        (Pattern::Str(s), Value::Str(t)) if s == t => Some(Vec::new()),
        _ => None,
    }
}

/// Constructor-argument projection `v.f`.
pub fn project(rp: &ResolvedProgram, v: &Value, f: &str) -> Result<Value, EvalError> {
    let Value::Adt { adt, ctor, args } = v else {
        return Err(stuck(format!("projection `.{f}` on {v}")));
    };
    let decl = rp
        .adt(adt)
        .and_then(|a| a.ctor(ctor))
        .ok_or_else(|| stuck(format!("unknown constructor {adt}.{ctor}")))?;
    match decl.params.iter().position(|p| p.name == f) {
        Some(i) => args
            .get(i)
            .cloned()
            .ok_or_else(|| stuck(format!("malformed {ctor} value"))),
        None => Err(thrown(&format!("{ctor} has no argument `{f}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, resolve};

    fn lists() -> ResolvedProgram {
        let src = include_str!("../../corpus/listing2.sml");
        resolve(&parse_program(src).unwrap()).unwrap()
    }

    fn list(xs: &[i64]) -> Value {
        xs.iter().rev().fold(Value::adt("ListInt", "nil", vec![]), |acc, x| {
            Value::adt("ListInt", "cons", vec![Value::int(*x), acc])
        })
    }

    #[test]
    fn index_of_nil_is_minus_one() {
        let rp = lists();
        let v = eval_adt(&rp, "ListInt", "indexOf", vec![list(&[]), Value::int(7)]).unwrap();
        assert_eq!(v, Value::int(-1));
    }

    #[test]
    fn index_of_singleton() {
        let rp = lists();
        let v = eval_adt(&rp, "ListInt", "indexOf", vec![list(&[5]), Value::int(5)]).unwrap();
        assert_eq!(v, Value::int(0));
    }

    #[test]
    fn add_conses() {
        let rp = lists();
        let v = eval_adt(&rp, "ListInt", "add", vec![list(&[]), Value::int(3)]).unwrap();
        assert_eq!(v, list(&[3]));
    }

    #[test]
    fn divergence_runs_out_of_fuel() {
        let src = "datatype D { constructor { z } int loop(int x) { loop(x); } }";
        let rp = resolve(&parse_program(src).unwrap()).unwrap();
        let err = eval_adt(&rp, "D", "loop", vec![Value::int(0)]).unwrap_err();
        assert_eq!(
            err,
            EvalError::Thrown(Value::Str("datatype evaluation ran out of fuel".into()))
        );
    }

    #[test]
    fn missing_case_without_default_throws() {
        let src = "datatype D { constructor { a | b } int f(D d) { switch (d) { case a: return 1; } } }";
        let rp = resolve(&parse_program(src).unwrap()).unwrap();
        let b = Value::adt("D", "b", vec![]);
        let err = eval_adt(&rp, "D", "f", vec![b]).unwrap_err();
        assert_eq!(err, EvalError::Thrown(Value::Str("non-exhaustive match".into())));
    }
}
