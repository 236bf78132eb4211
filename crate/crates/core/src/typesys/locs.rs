//! The `locs` accessor map: permanent locations touched by a statement.

use super::{AliasSet, Multiset};
use crate::syntax::ast::{Expr, Invocation, LValue, Receiver, Rhs, Stmt};
use crate::syntax::ResolvedProgram;

/// Accesses of `s` run by an instance of `contract` whose identities are
/// `this`, one occurrence per access site. Internal calls contribute the
/// callee body, cut where a method is already being expanded; any other
/// call may call back and so touches every field of `contract`.
pub fn locs_stmt(rp: &ResolvedProgram, this: &AliasSet, contract: &str, s: &Stmt) -> Multiset {
    let mut w = Walker::new(rp, this, contract);
    w.stmt(s);
    w.out
}

pub fn locs_expr(rp: &ResolvedProgram, this: &AliasSet, contract: &str, e: &Expr) -> Multiset {
    let mut w = Walker::new(rp, this, contract);
    w.expr(e);
    w.out
}

/// Accesses of a single invocation, including its receiver and arguments.
pub(super) fn locs_call(rp: &ResolvedProgram, this: &AliasSet, contract: &str, inv: &Invocation) -> Multiset {
    let mut w = Walker::new(rp, this, contract);
    w.call(inv);
    w.out
}

struct Walker<'a> {
    rp: &'a ResolvedProgram,
    this: &'a AliasSet,
    contract: &'a str,
    expanding: Vec<String>,
    out: Multiset,
}

impl<'a> Walker<'a> {
    fn new(rp: &'a ResolvedProgram, this: &'a AliasSet, contract: &'a str) -> Self {
        Walker {
            rp,
            this,
            contract,
            expanding: Vec::new(),
            out: Multiset::new(),
        }
    }

    fn field(&mut self, f: &str) {
        for a in self.this.atoms() {
            self.out.add((a.clone(), f.to_string()), 1);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Skip => {}
            Stmt::If { cond, then, els } => {
                self.expr(cond);
                self.stmt(then);
                if let Some(e) = els {
                    self.stmt(e);
                }
            }
            Stmt::While { cond, body } => {
                self.expr(cond);
                self.stmt(body);
            }
            Stmt::Let { rhs, body, .. } => {
                self.rhs(rhs);
                self.stmt(body);
            }
            Stmt::Assert(e) | Stmt::Throw(e) | Stmt::Return(Some(e)) => self.expr(e),
            Stmt::Return(None) => {}
            Stmt::Assign { target, rhs } => {
                self.lvalue(target);
                self.rhs(rhs);
            }
            Stmt::CallAssign { target, call } => {
                self.lvalue(target);
                self.call(call);
            }
            Stmt::Call(inv) => self.call(inv),
            Stmt::Try {
                target,
                call,
                abort,
                success,
                ..
            } => {
                if let Some(t) = target {
                    self.lvalue(t);
                }
                self.call(call);
                self.stmt(abort);
                self.stmt(success);
            }
            Stmt::Seq(a, b) => {
                self.stmt(a);
                self.stmt(b);
            }
        }
    }

    fn lvalue(&mut self, l: &LValue) {
        if let LValue::Field(f) = l {
            self.field(f);
        }
    }

    fn rhs(&mut self, r: &Rhs) {
        match r {
            Rhs::Expr(e) => self.expr(e),
            Rhs::New { args, .. } => args.iter().for_each(|a| self.expr(a)),
            Rhs::Invoke(inv) => self.call(inv),
        }
    }

    fn call(&mut self, inv: &Invocation) {
        if let Receiver::Field(f) = &inv.receiver {
            self.field(f);
        }
        if let Some(v) = &inv.value {
            self.expr(v);
        }
        inv.args.iter().for_each(|a| self.expr(a));
        if inv.receiver == Receiver::This {
            if self.expanding.contains(&inv.method) {
                return;
            }
            if let Some((_, decl)) = self.rp.lookup_method(self.contract, &inv.method) {
                self.expanding.push(inv.method.clone());
                self.stmt(&decl.body);
                self.expanding.pop();
            }
        } else {
            let names: Vec<String> = self.rp.fields(self.contract).iter().map(|f| f.name.clone()).collect();
            for f in names {
                self.field(&f);
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Field(f) => self.field(f),
            Expr::Var(_) | Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::This | Expr::Sender | Expr::Amount => {}
            Expr::Not(x) | Expr::Proj(x, _) => self.expr(x),
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) => {
                self.expr(l);
                self.expr(r);
            }
            Expr::Apply { args, .. } | Expr::AdtCall { args, .. } | Expr::Ctor { args, .. } => {
                args.iter().for_each(|a| self.expr(a))
            }
            Expr::Invoke { receiver, args, .. } => {
                self.expr(receiver);
                args.iter().for_each(|a| self.expr(a));
            }
        }
    }
}
