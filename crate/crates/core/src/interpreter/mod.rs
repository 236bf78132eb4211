//! Small-step execution of SmartML configurations.

pub mod adt;
pub mod eval;
mod step;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use adt::eval_adt;
pub use eval::{eval_expr, Env};
pub use step::step;

use crate::runtime::{
    default_value, Configuration, Continuation, InstanceId, MethodRef, PermanentMemory, Value, VolatileMemory, AMOUNT,
    SENDER,
};
use crate::syntax::ast::Rhs;
use crate::syntax::ResolvedProgram;

/// Failure while evaluating an expression or running a constructor.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    /// A program-level error value, catchable by `try`.
    #[error("thrown {0}")]
    Thrown(Value),
    /// No rule applies.
    #[error("stuck: {0}")]
    Stuck(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    CallEnter {
        caller: InstanceId,
        callee: InstanceId,
        method: String,
        transactional: bool,
    },
    CallReturn {
        id: InstanceId,
        method: String,
        ok: bool,
    },
    FieldWrite {
        id: InstanceId,
        field: String,
    },
    FieldRead {
        id: InstanceId,
        field: String,
    },
    /// A transaction was rolled back; `depth` counts the snapshots that
    /// were open before the revert.
    Revert {
        depth: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next(Configuration, Vec<TraceEvent>),
    Terminated(Configuration, Option<Value>, Vec<TraceEvent>),
    Stuck(Configuration, String),
    Aborted(Configuration, Value, Vec<TraceEvent>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Terminated { value: Option<Value> },
    Aborted { error: Value },
    Stuck { reason: String },
    FuelExhausted,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub outcome: Outcome,
    pub config: Configuration,
    pub trace: Vec<TraceEvent>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("fuel must be positive")]
    ZeroFuel,
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("{what} expects {expected} argument(s), got {found}")]
    Arity {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("constructor of {contract} failed: {error}")]
    Constructor { contract: String, error: EvalError },
    #[error("{0}")]
    Runtime(#[from] crate::runtime::RuntimeError),
}

/// Runs `new contract(args)`: allocates an instance with default field
/// values, then runs the constructor chain, parents first.
pub fn exec_constructor(
    rp: &ResolvedProgram,
    pm: &mut PermanentMemory,
    contract: &str,
    args: Vec<Value>,
    sender: Option<InstanceId>,
) -> Result<InstanceId, InterpError> {
    if rp.contract(contract).is_none() {
        return Err(InterpError::UnknownContract(contract.to_string()));
    }
    let expected = rp.constructor_params(contract).len();
    if expected != args.len() {
        return Err(InterpError::Arity {
            what: format!("{contract}.constructor"),
            expected,
            found: args.len(),
        });
    }
    let fields: BTreeMap<String, Value> = rp
        .fields(contract)
        .iter()
        .map(|f| (f.name.clone(), default_value(rp, &f.ty)))
        .collect();
    let id = pm.alloc_in_place(rp, contract, fields)?;
    run_constructor(rp, pm, id, contract, args, sender).map_err(|error| InterpError::Constructor {
        contract: contract.to_string(),
        error,
    })?;
    Ok(id)
}

fn run_constructor(
    rp: &ResolvedProgram,
    pm: &mut PermanentMemory,
    id: InstanceId,
    contract: &str,
    args: Vec<Value>,
    sender: Option<InstanceId>,
) -> Result<(), EvalError> {
    let decl = rp.contract(contract).expect("resolved contract");
    let parent = decl.parent.as_deref();
    let Some(k) = &decl.constructor else {
        if let Some(p) = parent {
            if rp.constructor_params(p).is_empty() {
                run_constructor(rp, pm, id, p, Vec::new(), sender)?;
            }
        }
        return Ok(());
    };
    let mut locals = VolatileMemory::new();
    for (p, v) in k.params.iter().zip(args) {
        locals.set(p.name.clone(), v);
    }
    locals.set(SENDER, sender.map(Value::Address).unwrap_or(Value::Unit));
    locals.set(AMOUNT, Value::int(0));
    let mut sink = Vec::new();
    match (&k.super_args, parent) {
        (Some(sa), Some(p)) => {
            let env = Env {
                rp,
                active: Some(id),
                volatile: &locals,
                permanent: pm,
            };
            let vals = sa
                .iter()
                .map(|e| eval_expr(&env, e, &mut sink))
                .collect::<Result<Vec<_>, _>>()?;
            run_constructor(rp, pm, id, p, vals, sender)?;
        }
        (None, Some(p)) if rp.constructor_params(p).is_empty() => {
            run_constructor(rp, pm, id, p, Vec::new(), sender)?;
        }
        _ => {}
    }
    for (f, rhs) in &k.inits {
        let v = match rhs {
            Rhs::Expr(e) => {
                let env = Env {
                    rp,
                    active: Some(id),
                    volatile: &locals,
                    permanent: pm,
                };
                eval_expr(&env, e, &mut sink)?
            }
            Rhs::New { contract, args } => {
                let env = Env {
                    rp,
                    active: Some(id),
                    volatile: &locals,
                    permanent: pm,
                };
                let vals = args
                    .iter()
                    .map(|e| eval_expr(&env, e, &mut sink))
                    .collect::<Result<Vec<_>, _>>()?;
                let child = exec_constructor(rp, pm, contract, vals, Some(id)).map_err(|e| match e {
                    InterpError::Constructor { error, .. } => error,
                    other => EvalError::Stuck(other.to_string()),
                })?;
                Value::Contract(child)
            }
            Rhs::Invoke(_) => return Err(EvalError::Stuck("call in a constructor".into())),
        };
        pm.write_in_place(id, f, v)
            .map_err(|e| EvalError::Stuck(e.to_string()))?;
    }
    Ok(())
}

/// Initial configuration for calling `method` on `entry` from `sender`
/// with `amount` already credited to the entry instance.
pub fn initial_config(
    rp: &ResolvedProgram,
    mut pm: PermanentMemory,
    entry: InstanceId,
    method: &str,
    args: Vec<Value>,
    sender: InstanceId,
    amount: i64,
) -> Result<Configuration, InterpError> {
    let ty = pm
        .type_of(entry)
        .ok_or(crate::runtime::RuntimeError::UnknownInstance(entry))?
        .to_string();
    let rp_ty = ty.clone();
    let (_, decl) = rp
        .lookup_method(&rp_ty, method)
        .ok_or_else(|| InterpError::UnknownMethod(format!("{ty}.{method}")))?;
    if decl.params.len() != args.len() {
        return Err(InterpError::Arity {
            what: format!("{ty}.{method}"),
            expected: decl.params.len(),
            found: args.len(),
        });
    }
    let mut volatile = VolatileMemory::new();
    for (p, v) in decl.params.iter().zip(args) {
        volatile.set(p.name.clone(), v);
    }
    volatile.set(SENDER, Value::Address(sender));
    volatile.set(AMOUNT, Value::int(amount));
    if amount != 0 {
        if let Ok(Value::Int(b)) = pm.read(entry, crate::syntax::resolve::BALANCE).cloned() {
            pm.write_in_place(entry, crate::syntax::resolve::BALANCE, Value::Int(b + amount))?;
        }
    }
    Ok(Configuration {
        active: entry,
        stack: Vec::new(),
        volatile,
        rollback: vec![pm.clone()],
        permanent: pm,
        method: MethodRef {
            contract: ty,
            name: method.to_string(),
        },
        continuation: Continuation::of(decl.body.clone()),
    })
}

/// Steps `cfg` until it terminates, aborts, gets stuck, or `fuel` steps
/// have been taken. The trace is bracketed by the entry call's
/// `CallEnter`/`CallReturn`.
pub fn run(rp: &ResolvedProgram, cfg: Configuration, fuel: u64) -> Result<Run, InterpError> {
    run_inner(rp, cfg, fuel, None)
}

/// Like [`run`], calling `observe(before, result)` after every step.
pub fn run_observed(
    rp: &ResolvedProgram,
    cfg: Configuration,
    fuel: u64,
    mut observe: impl FnMut(&Configuration, &StepResult),
) -> Result<Run, InterpError> {
    run_inner(rp, cfg, fuel, Some(&mut observe))
}

type Observer<'a> = &'a mut dyn FnMut(&Configuration, &StepResult);

fn run_inner(
    rp: &ResolvedProgram,
    cfg: Configuration,
    fuel: u64,
    mut observe: Option<Observer>,
) -> Result<Run, InterpError> {
    if fuel == 0 {
        return Err(InterpError::ZeroFuel);
    }
    let entry = cfg.active;
    let method = cfg.method.name.clone();
    let mut trace = vec![TraceEvent::CallEnter {
        caller: cfg.volatile.sender().unwrap_or(entry),
        callee: entry,
        method: method.clone(),
        transactional: true,
    }];
    let mut cfg = cfg;
    let mut steps = 0;
    loop {
        if steps == fuel {
            return Ok(Run {
                outcome: Outcome::FuelExhausted,
                config: cfg,
                trace,
                steps,
            });
        }
        steps += 1;
        let r = match observe.as_mut() {
            Some(obs) => {
                let before = cfg.clone();
                let r = step(rp, cfg);
                obs(&before, &r);
                r
            }
            None => step(rp, cfg),
        };
        match r {
            StepResult::Next(c, ev) => {
                trace.extend(ev);
                cfg = c;
            }
            StepResult::Terminated(c, v, ev) => {
                trace.extend(ev);
                trace.push(TraceEvent::CallReturn {
                    id: entry,
                    method,
                    ok: true,
                });
                return Ok(Run {
                    outcome: Outcome::Terminated { value: v },
                    config: c,
                    trace,
                    steps,
                });
            }
            StepResult::Aborted(c, v, ev) => {
                trace.extend(ev);
                trace.push(TraceEvent::CallReturn {
                    id: entry,
                    method,
                    ok: false,
                });
                return Ok(Run {
                    outcome: Outcome::Aborted { error: v },
                    config: c,
                    trace,
                    steps,
                });
            }
            StepResult::Stuck(c, reason) => {
                return Ok(Run {
                    outcome: Outcome::Stuck { reason },
                    config: c,
                    trace,
                    steps,
                });
            }
        }
    }
}
