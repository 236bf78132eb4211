//! Side-effect-free expression evaluation.

use num_bigint::BigInt;
use num_traits::Zero;

use super::adt::{call_function, project};
use super::{EvalError, TraceEvent};
use crate::runtime::{InstanceId, PermanentMemory, Value, VolatileMemory, AMOUNT, SENDER};
use crate::syntax::ast::{ArithOp, CmpOp, Expr};
use crate::syntax::ResolvedProgram;

/// Upper bound on datatype-function steps for one expression.
pub const ADT_FUEL: u64 = 200_000;
/// Upper bound on nested datatype-function calls.
pub const ADT_DEPTH: u32 = 256;

/// Remaining datatype evaluation budget.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub steps: u64,
    pub depth: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            steps: ADT_FUEL,
            depth: ADT_DEPTH,
        }
    }
}

pub struct Env<'a> {
    pub rp: &'a ResolvedProgram,
    /// `None` inside datatype functions.
    pub active: Option<InstanceId>,
    pub volatile: &'a VolatileMemory,
    pub permanent: &'a PermanentMemory,
}

pub fn thrown(msg: &str) -> EvalError {
    EvalError::Thrown(Value::Str(msg.to_string()))
}

pub fn stuck(msg: impl Into<String>) -> EvalError {
    EvalError::Stuck(msg.into())
}

/// Evaluates `e`, recording field reads in `events`.
pub fn eval_expr(env: &Env, e: &Expr, events: &mut Vec<TraceEvent>) -> Result<Value, EvalError> {
    let mut fuel = Budget::default();
    eval(env, e, events, &mut fuel)
}

pub(super) fn eval(env: &Env, e: &Expr, events: &mut Vec<TraceEvent>, fuel: &mut Budget) -> Result<Value, EvalError> {
    match e {
        Expr::Var(x) => env
            .volatile
            .get(x)
            .cloned()
            .ok_or_else(|| stuck(format!("unbound variable `{x}`"))),
        Expr::Field(f) => {
            let id = env.active.ok_or_else(|| stuck("field access outside a contract"))?;
            let v = env.permanent.read(id, f).map_err(|e| stuck(e.to_string()))?.clone();
            events.push(TraceEvent::FieldRead { id, field: f.clone() });
            Ok(v)
        }
        Expr::Int(n) => Ok(Value::Int(n.clone())),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Str(s) => Ok(Value::Str(s.clone())),
        Expr::This => env
            .active
            .map(Value::Contract)
            .ok_or_else(|| stuck("`this` outside a contract")),
        Expr::Sender => Ok(env.volatile.get(SENDER).cloned().unwrap_or(Value::Unit)),
        Expr::Amount => Ok(env.volatile.get(AMOUNT).cloned().unwrap_or(Value::int(0))),
        Expr::Not(x) => match eval(env, x, events, fuel)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            v => Err(stuck(format!("`!` applied to {v}"))),
        },
        Expr::Arith(op, l, r) => {
            let a = int(eval(env, l, events, fuel)?)?;
            let b = int(eval(env, r, events, fuel)?)?;
            Ok(Value::Int(match op {
                ArithOp::Add => a + b,
                ArithOp::Sub => a - b,
                ArithOp::Mul => a * b,
                ArithOp::Div => {
                    if b.is_zero() {
                        return Err(thrown("division by zero"));
                    }
                    // BigInt division truncates toward zero
                    a / b
                }
            }))
        }
        Expr::Cmp(CmpOp::And, l, r) => {
            if !boolean(eval(env, l, events, fuel)?)? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(boolean(eval(env, r, events, fuel)?)?))
        }
        Expr::Cmp(CmpOp::Or, l, r) => {
            if boolean(eval(env, l, events, fuel)?)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(boolean(eval(env, r, events, fuel)?)?))
        }
        Expr::Cmp(op, l, r) => {
            let a = eval(env, l, events, fuel)?;
            let b = eval(env, r, events, fuel)?;
            Ok(Value::Bool(match op {
                CmpOp::Eq => a.same(&b),
                CmpOp::Ne => !a.same(&b),
                _ => {
                    let (a, b) = (int(a)?, int(b)?);
                    match op {
                        CmpOp::Le => a <= b,
                        CmpOp::Ge => a >= b,
                        CmpOp::Lt => a < b,
                        CmpOp::Gt => a > b,
                        _ => unreachable!(),
                    }
                }
            }))
        }
        Expr::AdtCall { adt, func, args } => {
            let vals = args
                .iter()
                .map(|a| eval(env, a, events, fuel))
                .collect::<Result<Vec<_>, _>>()?;
            call_function(env.rp, adt, func, vals, fuel)
        }
        Expr::Ctor { adt, ctor, args } => {
            let vals = args
                .iter()
                .map(|a| eval(env, a, events, fuel))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Value::adt(adt.clone(), ctor.clone(), vals))
        }
        Expr::Proj(base, f) => {
            let v = eval(env, base, events, fuel)?;
            project(env.rp, &v, f)
        }
        Expr::Apply { name, .. } | Expr::Invoke { name, .. } => Err(stuck(format!("unresolved application `{name}`"))),
    }
}

pub fn int(v: Value) -> Result<BigInt, EvalError> {
    match v {
        Value::Int(n) => Ok(n),
        other => Err(stuck(format!("expected an integer, got {other}"))),
    }
}

pub fn boolean(v: Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(stuck(format!("expected a boolean, got {other}"))),
    }
}
