//! The one-step transition relation.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::eval::{boolean, eval_expr, Env};
use super::{exec_constructor, EvalError, InterpError, StepResult, TraceEvent};
use crate::runtime::{
    default_value, Configuration, Continuation, Frame, FrameKind, Handler, InstanceId, MethodRef, Value,
    VolatileMemory, AMOUNT, SENDER,
};
use crate::syntax::ast::{Expr, Invocation, LValue, Receiver, Rhs, Stmt};
use crate::syntax::resolve::BALANCE;
use crate::syntax::ResolvedProgram;

/// Applies the rule selected by the head of the continuation.
pub fn step(rp: &ResolvedProgram, cfg: Configuration) -> StepResult {
    let mut m = Machine {
        rp,
        cfg,
        events: Vec::new(),
    };
    match m.exec() {
        Ok(Flow::Continue) => StepResult::Next(m.cfg, m.events),
        Ok(Flow::Terminated(v)) => StepResult::Terminated(m.cfg, v, m.events),
        Ok(Flow::Aborted(v)) => StepResult::Aborted(m.cfg, v, m.events),
        Err(reason) => StepResult::Stuck(m.cfg, reason),
    }
}

enum Flow {
    Continue,
    Terminated(Option<Value>),
    Aborted(Value),
}

type Exec = Result<Flow, String>;

struct Machine<'a> {
    rp: &'a ResolvedProgram,
    cfg: Configuration,
    events: Vec<TraceEvent>,
}

impl<'a> Machine<'a> {
    fn eval(&mut self, e: &Expr) -> Result<Value, EvalError> {
        let env = Env {
            rp: self.rp,
            active: Some(self.cfg.active),
            volatile: &self.cfg.volatile,
            permanent: &self.cfg.permanent,
        };
        eval_expr(&env, e, &mut self.events)
    }

    /// Evaluates, turning thrown values into a raise.
    fn eval_or_raise(&mut self, e: &Expr) -> Result<Result<Value, Flow>, String> {
        match self.eval(e) {
            Ok(v) => Ok(Ok(v)),
            Err(EvalError::Thrown(v)) => Ok(Err(self.raise(v)?)),
            Err(EvalError::Stuck(s)) => Err(s),
        }
    }

    fn exec(&mut self) -> Exec {
        let Some(s) = self.cfg.continuation.pop() else {
            return self.do_return(Value::Unit);
        };
        macro_rules! value {
            ($e:expr) => {
                match self.eval_or_raise($e)? {
                    Ok(v) => v,
                    Err(flow) => return Ok(flow),
                }
            };
        }
        match s {
            Stmt::Skip => Ok(Flow::Continue),
            Stmt::Seq(a, b) => {
                self.cfg.continuation.push(*b);
                self.cfg.continuation.push(*a);
                Ok(Flow::Continue)
            }
            Stmt::Assign { target, rhs } => {
                let v = match rhs {
                    Rhs::Expr(e) => value!(&e),
                    Rhs::New { contract, args } => {
                        let mut vals = Vec::new();
                        for a in &args {
                            vals.push(value!(a));
                        }
                        match self.construct(&contract, vals)? {
                            Ok(v) => v,
                            Err(flow) => return Ok(flow),
                        }
                    }
                    Rhs::Invoke(call) => {
                        return self.call(call, Some(target), None);
                    }
                };
                self.assign(&target, v)?;
                Ok(Flow::Continue)
            }
            Stmt::Let { var, ty, rhs, body } => {
                let v = match rhs {
                    Rhs::Expr(e) => value!(&e),
                    Rhs::New { contract, args } => {
                        let mut vals = Vec::new();
                        for a in &args {
                            vals.push(value!(a));
                        }
                        match self.construct(&contract, vals)? {
                            Ok(v) => v,
                            Err(flow) => return Ok(flow),
                        }
                    }
                    Rhs::Invoke(call) => {
                        let d = ty.as_ref().map(|t| default_value(self.rp, t)).unwrap_or(Value::Unit);
                        self.cfg.volatile.set(var.clone(), d);
                        self.cfg.continuation.push(*body);
                        self.cfg.continuation.push(Stmt::CallAssign {
                            target: LValue::Var(var),
                            call,
                        });
                        return Ok(Flow::Continue);
                    }
                };
                self.cfg.volatile.set(var, v);
                self.cfg.continuation.push(*body);
                Ok(Flow::Continue)
            }
            Stmt::If { cond, then, els } => {
                let c = value!(&cond);
                if boolean(c).map_err(err_text)? {
                    self.cfg.continuation.push(*then);
                } else if let Some(e) = els {
                    self.cfg.continuation.push(*e);
                }
                Ok(Flow::Continue)
            }
            Stmt::While { cond, body } => {
                let c = value!(&cond);
                if boolean(c).map_err(err_text)? {
                    let again = Stmt::While {
                        cond,
                        body: body.clone(),
                    };
                    self.cfg.continuation.push(again);
                    self.cfg.continuation.push(*body);
                }
                Ok(Flow::Continue)
            }
            Stmt::Assert(e) => {
                let c = value!(&e);
                if boolean(c).map_err(err_text)? {
                    Ok(Flow::Continue)
                } else {
                    self.raise(Value::Str("assertion failed".into()))
                }
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => value!(&e),
                    None => Value::Unit,
                };
                self.do_return(v)
            }
            Stmt::Throw(e) => {
                let v = value!(&e);
                self.raise(v)
            }
            Stmt::Call(inv) => self.call(inv, None, None),
            Stmt::CallAssign { target, call } => self.call(call, Some(target), None),
            Stmt::Try {
                target,
                call,
                abort_var,
                abort,
                success,
            } => self.call(
                call,
                target,
                Some(Handler::Try {
                    abort_var,
                    abort,
                    success,
                }),
            ),
        }
    }

    fn construct(&mut self, contract: &str, args: Vec<Value>) -> Result<Result<Value, Flow>, String> {
        let mut pm = self.cfg.permanent.clone();
        match exec_constructor(self.rp, &mut pm, contract, args, Some(self.cfg.active)) {
            Ok(id) => {
                self.cfg.permanent = pm;
                Ok(Ok(Value::Contract(id)))
            }
            Err(InterpError::Constructor {
                error: EvalError::Thrown(v),
                ..
            }) => Ok(Err(self.raise(v)?)),
            Err(e) => Err(e.to_string()),
        }
    }

    fn assign(&mut self, target: &LValue, v: Value) -> Result<(), String> {
        match target {
            LValue::Var(x) => {
                self.cfg.volatile.set(x.clone(), v);
                Ok(())
            }
            LValue::Field(f) => self.write_field(self.cfg.active, f, v),
        }
    }

    fn write_field(&mut self, id: InstanceId, f: &str, v: Value) -> Result<(), String> {
        self.cfg.permanent.write_in_place(id, f, v).map_err(|e| e.to_string())?;
        self.events.push(TraceEvent::FieldWrite {
            id,
            field: f.to_string(),
        });
        Ok(())
    }

    fn call(&mut self, inv: Invocation, target: Option<LValue>, handler: Option<Handler>) -> Exec {
        let recv = match &inv.receiver {
            Receiver::This => Value::Contract(self.cfg.active),
            Receiver::Sender => self.cfg.volatile.get(SENDER).cloned().unwrap_or(Value::Unit),
            Receiver::Var(x) => match self.cfg.volatile.get(x) {
                Some(v) => v.clone(),
                None => return Err(format!("unbound variable `{x}`")),
            },
            Receiver::Field(f) => match self.eval_or_raise(&Expr::Field(f.clone()))? {
                Ok(v) => v,
                Err(flow) => return Ok(flow),
            },
        };
        let mut args = Vec::new();
        for a in &inv.args {
            match self.eval_or_raise(a)? {
                Ok(v) => args.push(v),
                Err(flow) => return Ok(flow),
            }
        }
        let value = match &inv.value {
            Some(e) => match self.eval_or_raise(e)? {
                Ok(Value::Int(n)) => Some(n),
                Ok(other) => return Err(format!("transferred value {other} is not an integer")),
                Err(flow) => return Ok(flow),
            },
            None => None,
        };
        let transactional = handler.is_some() || !inv.is_internal();
        let Some(callee) = recv.instance() else {
            return self.raise(Value::Str("call on a null reference".into()));
        };
        let Some(ty) = self.cfg.permanent.type_of(callee).map(str::to_string) else {
            return Err(format!("unknown instance {callee}"));
        };
        let Some((_, decl)) = self.rp.lookup_method(&ty, &inv.method) else {
            return self.raise(Value::Str(format!("{ty} has no method {}", inv.method)));
        };
        if decl.params.len() != args.len() {
            return self.raise(Value::Str(format!(
                "{ty}.{} expects {} arguments",
                inv.method,
                decl.params.len()
            )));
        }
        let body = decl.body.clone();
        let mut volatile = VolatileMemory::new();
        for (p, v) in decl.params.iter().zip(args) {
            volatile.set(p.name.clone(), v);
        }
        let caller = self.cfg.active;
        if transactional {
            volatile.set(SENDER, Value::Address(caller));
            volatile.set(AMOUNT, Value::Int(value.clone().unwrap_or_default()));
        } else {
            for k in [SENDER, AMOUNT] {
                if let Some(v) = self.cfg.volatile.get(k) {
                    volatile.set(k, v.clone());
                }
            }
        }
        let kind = if transactional {
            FrameKind::Transaction {
                target,
                handler: handler.unwrap_or(Handler::Rethrow),
            }
        } else {
            FrameKind::Internal { target }
        };
        let frame = Frame {
            contract: caller,
            saved_volatile: std::mem::replace(&mut self.cfg.volatile, volatile),
            method: self.cfg.method.clone(),
            continuation: std::mem::take(&mut self.cfg.continuation),
            kind,
        };
        self.cfg.stack.push(frame);
        self.cfg.active = callee;
        self.cfg.method = MethodRef {
            contract: ty,
            name: inv.method.clone(),
        };
        self.cfg.continuation = Continuation::of(body);
        if transactional {
            self.cfg.snapshot();
        }
        self.events.push(TraceEvent::CallEnter {
            caller,
            callee,
            method: inv.method,
            transactional,
        });
        if let Some(n) = value {
            if let Some(err) = self.transfer(caller, callee, n)? {
                return self.raise(err);
            }
        }
        Ok(Flow::Continue)
    }

    /// Moves `n` from `from`'s balance to `to`'s. Returns the error value
    /// to raise when the transfer is impossible.
    fn transfer(&mut self, from: InstanceId, to: InstanceId, n: BigInt) -> Result<Option<Value>, String> {
        if n.is_negative() {
            return Ok(Some(Value::Str("negative transfer".into())));
        }
        if n.is_zero() || from == to {
            return Ok(None);
        }
        let balance = |m: &Self, id| match m.cfg.permanent.read(id, BALANCE) {
            Ok(Value::Int(b)) => Some(b.clone()),
            _ => None,
        };
        let (Some(have), Some(theirs)) = (balance(self, from), balance(self, to)) else {
            return Ok(Some(Value::Str("no balance to transfer".into())));
        };
        if have < n {
            return Ok(Some(Value::Str("insufficient balance".into())));
        }
        self.write_field(from, BALANCE, Value::Int(have - &n))?;
        self.write_field(to, BALANCE, Value::Int(theirs + n))?;
        Ok(None)
    }

    fn restore(&mut self, f: Frame) {
        self.cfg.active = f.contract;
        self.cfg.volatile = f.saved_volatile;
        self.cfg.method = f.method;
        self.cfg.continuation = f.continuation;
    }

    fn do_return(&mut self, v: Value) -> Exec {
        let Some(f) = self.cfg.stack.pop() else {
            let v = if v == Value::Unit { None } else { Some(v) };
            return Ok(Flow::Terminated(v));
        };
        self.events.push(TraceEvent::CallReturn {
            id: self.cfg.active,
            method: self.cfg.method.name.clone(),
            ok: true,
        });
        let kind = f.kind.clone();
        if f.is_transaction() {
            // the callee's effects stay; its snapshot is dropped
            self.cfg.rollback.pop();
        }
        self.restore(f);
        match kind {
            FrameKind::Internal { target } => {
                if let Some(t) = target {
                    self.assign(&t, v)?;
                }
            }
            FrameKind::Transaction { target, handler } => {
                if let Some(t) = target {
                    self.assign(&t, v)?;
                }
                if let Handler::Try { success, .. } = handler {
                    self.cfg.continuation.push(*success);
                }
            }
        }
        Ok(Flow::Continue)
    }

    /// Unwinds to the nearest transaction frame, reverting each transaction
    /// passed on the way.
    fn raise(&mut self, err: Value) -> Exec {
        loop {
            let Some(f) = self.cfg.stack.pop() else {
                if let Some(first) = self.cfg.rollback.first().cloned() {
                    self.cfg.permanent = first;
                }
                self.cfg.continuation = Continuation::new();
                return Ok(Flow::Aborted(err));
            };
            self.events.push(TraceEvent::CallReturn {
                id: self.cfg.active,
                method: self.cfg.method.name.clone(),
                ok: false,
            });
            let kind = f.kind.clone();
            if f.is_transaction() {
                let depth = self.cfg.rollback.len();
                self.cfg.revert().map_err(|e| e.to_string())?;
                self.events.push(TraceEvent::Revert { depth });
            }
            self.restore(f);
            match kind {
                FrameKind::Internal { .. } => {}
                FrameKind::Transaction {
                    handler: Handler::Rethrow,
                    ..
                } => {}
                FrameKind::Transaction {
                    handler: Handler::Try { abort_var, abort, .. },
                    ..
                } => {
                    if let Some(x) = abort_var {
                        self.cfg.volatile.set(x, err);
                    }
                    self.cfg.continuation.push(*abort);
                    return Ok(Flow::Continue);
                }
            }
        }
    }
}

fn err_text(e: EvalError) -> String {
    match e {
        EvalError::Stuck(s) => s,
        EvalError::Thrown(v) => format!("thrown {v}"),
    }
}
