//! Statement, method and contract judgments.

// `Failure` only travels on rejection paths.
#![allow(clippy::result_large_err)]

use super::expr::{show, type_value};
use super::locs::{locs_call, locs_stmt};
use super::{
    AliasSet, Atom, CheckReport, Ctx, Delta, Derivation, Failure, Gamma, Lock, Multiset, ProgramReport, Theta, Verdict,
};
use crate::runtime::{Configuration, Value};
use crate::syntax::ast::{Expr, Invocation, LValue, MethodDecl, Receiver, Rhs, Stmt, Type};
use crate::syntax::pretty::{print_invocation, print_rhs};
use crate::syntax::{print_stmt, ResolvedProgram};

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    /// Record the rule tree in reports.
    pub derivation: bool,
}

/// Checks every contract of the program.
pub fn check_program(rp: &ResolvedProgram, opts: CheckOptions) -> ProgramReport {
    let mut ck = Checker::new(rp, opts);
    let contracts: Vec<CheckReport> = rp
        .contract_names()
        .collect::<Vec<_>>()
        .into_iter()
        .map(|c| ck.check_contract(c))
        .collect();
    let verdict = if contracts.iter().all(|r| r.verdict == Verdict::Ok) {
        Verdict::Ok
    } else {
        Verdict::Rejected
    };
    ProgramReport { verdict, contracts }
}

pub fn check_contract(rp: &ResolvedProgram, contract: &str, opts: CheckOptions) -> CheckReport {
    Checker::new(rp, opts).check_contract(contract)
}

/// Re-checks the active continuation of a running configuration. The
/// starting context types the method's parameters and locals (falling
/// back to the runtime values for untyped `let`s), maps contract-typed
/// variables that hold the active instance to the identity of `this`,
/// and starts from an empty lock set. Returns the starting and final
/// contexts.
pub fn check_configuration(rp: &ResolvedProgram, cfg: &Configuration) -> Result<(Ctx, Ctx), Failure> {
    let fail = |message: String| Failure {
        at: cfg.method.to_string(),
        rule: "Mth-Ok".into(),
        statement: String::new(),
        message,
        conflict: None,
        path: Vec::new(),
    };
    let contract = rp
        .contract(&cfg.method.contract)
        .map(|c| c.name.as_str())
        .ok_or_else(|| fail("unknown contract".into()))?;
    let (_, decl) = rp
        .lookup_method(contract, &cfg.method.name)
        .ok_or_else(|| fail("unknown method".into()))?;
    let mut ck = Checker::new(rp, CheckOptions::default());
    let this_atom = ck.fresh(contract);
    let this = AliasSet::one(this_atom.clone());
    let mut gamma = Gamma::new();
    for p in &decl.params {
        gamma.insert(p.name.clone(), p.ty.clone());
    }
    for (x, t) in rp.method_locals(decl) {
        gamma.insert(x, t);
    }
    for (x, v) in cfg.volatile.iter() {
        if gamma.contains_key(x) {
            continue;
        }
        let t = match v {
            Value::Int(_) => Type::Int,
            Value::Bool(_) => Type::Bool,
            Value::Str(_) => Type::String,
            Value::Address(_) => Type::Address,
            Value::Contract(id) => match cfg.permanent.type_of(*id) {
                Some(c) => Type::Contract(c.to_string()),
                None => continue,
            },
            Value::Adt { adt, .. } => Type::Adt(adt.clone()),
            Value::Unit => continue,
        };
        gamma.insert(x.clone(), t);
    }
    let mut theta = Theta::new();
    for (x, t) in &gamma {
        if let Type::Contract(c) = t {
            let same = cfg.volatile.get(x).and_then(Value::instance) == Some(cfg.active);
            theta.insert(x.clone(), if same { this.clone() } else { AliasSet::top(c) });
        }
    }
    let body = cfg.continuation.to_stmt();
    let start = Ctx {
        gamma,
        delta: Delta::new(),
        theta,
        sigma: locs_stmt(rp, &this, contract, &body),
    };
    let end = ck.check_stmt(contract, &decl.name, this, start.clone(), &body)?;
    Ok((start, end))
}

/// Whether every path through `s` ends in `return` or `throw`.
pub fn definitely_returns(s: &Stmt) -> bool {
    match s {
        Stmt::Return(_) | Stmt::Throw(_) => true,
        Stmt::Seq(a, b) => definitely_returns(a) || definitely_returns(b),
        Stmt::If {
            then, els: Some(els), ..
        } => definitely_returns(then) && definitely_returns(els),
        Stmt::Let { body, .. } => definitely_returns(body),
        Stmt::Try { abort, success, .. } => definitely_returns(abort) && definitely_returns(success),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Key {
    contract: String,
    method: String,
    this: AliasSet,
    delta: Delta,
}

impl Key {
    /// A proof of `self` also covers `other`: fewer locks never hurt.
    fn covers(&self, other: &Key) -> bool {
        self.contract == other.contract
            && self.method == other.method
            && self.this == other.this
            && other.delta.is_subset(&self.delta)
    }
}

/// The method whose body is being checked.
struct Mcx<'a> {
    contract: &'a str,
    decl: &'a MethodDecl,
    this: AliasSet,
    path: Vec<String>,
}

impl Mcx<'_> {
    fn name(&self) -> String {
        format!("{}.{}", self.contract, self.decl.name)
    }

    fn fail(&self, rule: &str, s: &str, message: impl Into<String>) -> Failure {
        Failure {
            at: self.name(),
            rule: rule.to_string(),
            statement: s.to_string(),
            message: message.into(),
            conflict: None,
            path: self.path.clone(),
        }
    }
}

type Judgment = Result<(Ctx, Derivation), Failure>;

pub struct Checker<'a> {
    rp: &'a ResolvedProgram,
    opts: CheckOptions,
    next_id: u32,
    in_progress: Vec<Key>,
    proven: Vec<Key>,
}

fn one_line(s: &str) -> String {
    let mut lines = s.lines();
    let first = lines.next().unwrap_or("").trim().to_string();
    if lines.next().is_some() {
        format!("{first} …")
    } else {
        first
    }
}

impl<'a> Checker<'a> {
    pub fn new(rp: &'a ResolvedProgram, opts: CheckOptions) -> Self {
        Checker {
            rp,
            opts,
            next_id: 0,
            in_progress: Vec::new(),
            proven: Vec::new(),
        }
    }

    pub fn fresh(&mut self, contract: &str) -> Atom {
        self.next_id += 1;
        Atom::Id {
            id: self.next_id,
            contract: contract.to_string(),
        }
    }

    fn node(&self, rule: &str, subject: impl FnOnce() -> String, premises: Vec<Derivation>) -> Derivation {
        if self.opts.derivation {
            Derivation {
                rule: rule.to_string(),
                subject: subject(),
                premises,
            }
        } else {
            Derivation::default()
        }
    }

    /// Cnt-Ok: a fresh identity for `this`, then every method under an
    /// empty lock set.
    pub fn check_contract(&mut self, contract: &str) -> CheckReport {
        self.in_progress.clear();
        self.proven.clear();
        let rp = self.rp;
        let mut failures = Vec::new();
        let mut premises = Vec::new();
        let Some(decl) = rp.contract(contract) else {
            return CheckReport {
                contract: contract.to_string(),
                verdict: Verdict::Rejected,
                failures: vec![Failure {
                    at: contract.to_string(),
                    rule: "Cnt-Ok".into(),
                    statement: String::new(),
                    message: format!("unknown contract {contract}"),
                    conflict: None,
                    path: Vec::new(),
                }],
                derivation: None,
            };
        };
        if let Err(f) = self.check_constructor(contract) {
            failures.push(f);
        }
        let this = AliasSet::one(self.fresh(contract));
        for m in rp.visible_methods(&decl.name) {
            match self.check_method(
                rp.contract(contract).map(|d| d.name.as_str()).unwrap(),
                m,
                this.clone(),
                Delta::new(),
                &[],
            ) {
                Ok(d) => premises.push(d),
                Err(f) => failures.push(f),
            }
        }
        let verdict = if failures.is_empty() {
            Verdict::Ok
        } else {
            Verdict::Rejected
        };
        let derivation = self.opts.derivation.then(|| {
            self.node(
                "Cnt-Ok",
                || format!("⊢ contract {contract} ok with this ↦ {this}"),
                premises,
            )
        });
        CheckReport {
            contract: contract.to_string(),
            verdict,
            failures,
            derivation,
        }
    }

    fn check_constructor(&self, contract: &str) -> Result<(), Failure> {
        let rp = self.rp;
        let decl = rp.contract(contract).expect("checked by caller");
        let Some(k) = &decl.constructor else {
            return Ok(());
        };
        let fail = |s: String, msg: String| Failure {
            at: format!("{contract}.constructor"),
            rule: "Cnt-Ok".into(),
            statement: s,
            message: msg,
            conflict: None,
            path: Vec::new(),
        };
        let gamma = k.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
        let ty = |e: &Expr| type_value(rp, contract, &gamma, e).map_err(|t| fail(crate::syntax::print_expr(e), t.0));
        if let (Some(args), Some(parent)) = (&k.super_args, &decl.parent) {
            let params = rp.constructor_params(parent);
            if params.len() != args.len() {
                return Err(fail(
                    "super(..)".into(),
                    format!("{parent} constructor expects {} arguments", params.len()),
                ));
            }
            for (p, a) in params.iter().zip(args) {
                let t = ty(a)?;
                if !rp.is_subtype(&t, &p.ty) {
                    return Err(fail(
                        crate::syntax::print_expr(a),
                        format!("expected {}, found {}", show(&p.ty), show(&t)),
                    ));
                }
            }
        }
        for (f, rhs) in &k.inits {
            let s = format!("this.{f} = {}", print_rhs(rhs));
            let fty = &rp
                .field(contract, f)
                .ok_or_else(|| fail(s.clone(), format!("no field {f}")))?
                .ty;
            let t = match rhs {
                Rhs::Expr(e) => ty(e)?,
                Rhs::New { contract: c, args } => self
                    .check_new(contract, &gamma, c, args)
                    .map_err(|m| fail(s.clone(), m))?,
                Rhs::Invoke(_) => return Err(fail(s, "constructors may not call methods".into())),
            };
            if !rp.is_subtype(&t, fty) {
                return Err(fail(s, format!("expected {}, found {}", show(fty), show(&t))));
            }
        }
        Ok(())
    }

    fn check_new(&self, contract: &str, gamma: &super::Gamma, c: &str, args: &[Expr]) -> Result<Type, String> {
        let params = self.rp.constructor_params(c);
        if params.len() != args.len() {
            return Err(format!("{c} constructor expects {} arguments", params.len()));
        }
        for (p, a) in params.iter().zip(args) {
            let t = type_value(self.rp, contract, gamma, a).map_err(|e| e.0)?;
            if !self.rp.is_subtype(&t, &p.ty) {
                return Err(format!("expected {}, found {}", show(&p.ty), show(&t)));
            }
        }
        Ok(Type::Contract(c.to_string()))
    }

    /// Mth-Ok for `decl` run by an instance of `contract` described by
    /// `this`. Re-entering a check in progress with no more locks than
    /// before succeeds coinductively.
    pub fn check_method(
        &mut self,
        contract: &'a str,
        decl: &'a MethodDecl,
        this: AliasSet,
        delta: Delta,
        path: &[String],
    ) -> Result<Derivation, Failure> {
        let key = Key {
            contract: contract.to_string(),
            method: decl.name.clone(),
            this: this.clone(),
            delta: delta.clone(),
        };
        let subject = || format!("{contract}.{}", decl.name);
        if self.in_progress.iter().any(|k| k.covers(&key)) {
            return Ok(self.node("Mth-Ok (coinductive)", subject, Vec::new()));
        }
        if self.proven.iter().any(|k| k.covers(&key)) {
            return Ok(self.node("Mth-Ok (proven)", subject, Vec::new()));
        }
        let mut p = path.to_vec();
        p.push(format!("{contract}.{}", decl.name));
        let m = Mcx {
            contract,
            decl,
            this,
            path: p,
        };
        let mut ctx = Ctx {
            delta,
            sigma: locs_stmt(self.rp, &m.this, contract, &decl.body),
            ..Ctx::default()
        };
        for prm in &decl.params {
            ctx.gamma.insert(prm.name.clone(), prm.ty.clone());
            if let Type::Contract(c) = &prm.ty {
                ctx.theta.insert(prm.name.clone(), AliasSet::top(c));
            }
        }
        self.in_progress.push(key.clone());
        let r = self.stmt(&m, ctx, &decl.body);
        self.in_progress.pop();
        let (_, body) = r?;
        if decl.ret != Type::Unit && !definitely_returns(&decl.body) {
            return Err(m.fail("Return", &m.name(), "method may finish without returning a value"));
        }
        self.proven.push(key);
        let lock_text = |d: &Derivation| d.clone();
        Ok(self.node(
            "Mth-Ok",
            || format!("{} with this ↦ {}", m.name(), m.this),
            vec![lock_text(&body)],
        ))
    }

    /// Checks a statement in the context of `method` on `contract`.
    pub fn check_stmt(
        &mut self,
        contract: &'a str,
        method: &str,
        this: AliasSet,
        ctx: Ctx,
        s: &Stmt,
    ) -> Result<Ctx, Failure> {
        let (_, decl) = self.rp.lookup_method(contract, method).ok_or_else(|| Failure {
            at: format!("{contract}.{method}"),
            rule: "Mth-Ok".into(),
            statement: String::new(),
            message: "unknown method".into(),
            conflict: None,
            path: Vec::new(),
        })?;
        let m = Mcx {
            contract,
            decl,
            this,
            path: vec![format!("{contract}.{method}")],
        };
        self.stmt(&m, ctx, s).map(|(c, _)| c)
    }

    fn ty(&self, m: &Mcx, ctx: &Ctx, rule: &str, s: &Stmt, e: &Expr) -> Result<Type, Failure> {
        type_value(self.rp, m.contract, &ctx.gamma, e).map_err(|t| m.fail(rule, &one_line(&print_stmt(s)), t.0))
    }

    fn expect(&self, m: &Mcx, ctx: &Ctx, rule: &str, s: &Stmt, e: &Expr, want: &Type) -> Result<(), Failure> {
        let t = self.ty(m, ctx, rule, s, e)?;
        if self.rp.is_subtype(&t, want) {
            Ok(())
        } else {
            Err(m.fail(
                rule,
                &one_line(&print_stmt(s)),
                format!(
                    "`{}` has type {}, expected {}",
                    crate::syntax::print_expr(e),
                    show(&t),
                    show(want)
                ),
            ))
        }
    }

    fn locs(&self, m: &Mcx, s: &Stmt) -> Multiset {
        locs_stmt(self.rp, &m.this, m.contract, s)
    }

    /// Alias set of a contract-typed expression.
    fn alias_of(&self, m: &Mcx, ctx: &Ctx, e: &Expr, ty: &Type) -> Option<AliasSet> {
        let Type::Contract(c) = ty else {
            return None;
        };
        Some(match e {
            Expr::Var(y) => ctx.theta.get(y).cloned().unwrap_or_else(|| AliasSet::top(c)),
            Expr::This => m.this.clone(),
            _ => AliasSet::top(c),
        })
    }

    fn lvalue_type(&self, m: &Mcx, ctx: &Ctx, s: &Stmt, l: &LValue) -> Result<Type, Failure> {
        let t = match l {
            LValue::Var(x) => ctx.gamma.get(x).cloned(),
            LValue::Field(f) => self.rp.field(m.contract, f).map(|d| d.ty.clone()),
        };
        t.ok_or_else(|| m.fail("Assign", &one_line(&print_stmt(s)), "unknown assignment target"))
    }

    fn stmt(&mut self, m: &Mcx, ctx: Ctx, s: &Stmt) -> Judgment {
        let rp = self.rp;
        let text = || one_line(&print_stmt(s));
        let sigma_out = ctx.sigma.minus(&self.locs(m, s));
        match s {
            Stmt::Skip => Ok((ctx, self.node("Skip", text, vec![]))),
            Stmt::Seq(a, b) => {
                let (c1, d1) = self.stmt(m, ctx, a)?;
                let (c2, d2) = self.stmt(m, c1, b)?;
                Ok((c2, self.node("Succ", text, vec![d1, d2])))
            }
            Stmt::Assert(e) => {
                self.expect(m, &ctx, "Assert", s, e, &Type::Bool)?;
                Ok((
                    Ctx {
                        sigma: sigma_out,
                        ..ctx
                    },
                    self.node("Assert", text, vec![]),
                ))
            }
            Stmt::Throw(e) => {
                self.expect(m, &ctx, "Throw", s, e, &Type::String)?;
                Ok((
                    Ctx {
                        sigma: sigma_out,
                        ..ctx
                    },
                    self.node("Throw", text, vec![]),
                ))
            }
            Stmt::Return(e) => {
                let ret = &m.decl.ret;
                match e {
                    None if *ret == Type::Unit => {}
                    None => return Err(m.fail("Return", &text(), format!("expected a value of type {}", show(ret)))),
                    Some(_) if *ret == Type::Unit => {
                        return Err(m.fail("Return", &text(), "a void method cannot return a value"))
                    }
                    Some(e) => self.expect(m, &ctx, "Return", s, e, ret)?,
                }
                Ok((
                    Ctx {
                        sigma: sigma_out,
                        ..ctx
                    },
                    self.node("Return", text, vec![]),
                ))
            }
            Stmt::If { cond, then, els } => {
                self.expect(m, &ctx, "If-Else", s, cond, &Type::Bool)?;
                let inner = Ctx {
                    sigma: ctx.sigma.minus(&locs_expr_of(self, m, cond)),
                    ..ctx.clone()
                };
                let (c1, d1) = self.stmt(m, inner.clone(), then)?;
                let (c2, d2) = match els {
                    Some(e) => self.stmt(m, inner, e)?,
                    None => (inner, self.node("Skip", String::new, vec![])),
                };
                let out = Ctx {
                    sigma: sigma_out,
                    ..c1.join(&c2)
                };
                Ok((out, self.node("If-Else", text, vec![d1, d2])))
            }
            Stmt::While { cond, body } => {
                self.expect(m, &ctx, "While", s, cond, &Type::Bool)?;
                // the body may be followed by further iterations
                let body_sigma = ctx.sigma.clone().plus(&self.locs(m, body));
                let mut cur = ctx.clone();
                let mut last;
                loop {
                    let input = Ctx {
                        sigma: body_sigma.clone(),
                        ..cur.clone()
                    };
                    let (out, d) = self.stmt(m, input, body)?;
                    last = d;
                    let next = cur.join(&out);
                    if next == cur {
                        break;
                    }
                    cur = next;
                }
                let out = Ctx {
                    sigma: sigma_out,
                    ..cur
                };
                Ok((out, self.node("While", text, vec![last])))
            }
            Stmt::Let { var, ty, rhs, body } => {
                let (mut inner, d0, declared) = match rhs {
                    Rhs::Invoke(call) => {
                        let declared = match ty {
                            Some(t) => t.clone(),
                            None => return Err(m.fail("Let", &text(), "missing type")),
                        };
                        let mut c = ctx.clone();
                        c.gamma.insert(var.clone(), declared.clone());
                        let (c, d) = self.call(m, c, s, call, Some(&LValue::Var(var.clone())))?;
                        (c, d, declared)
                    }
                    Rhs::Expr(e) => {
                        let t = self.ty(m, &ctx, "Let", s, e)?;
                        let declared = ty.clone().unwrap_or_else(|| t.clone());
                        if !rp.is_subtype(&t, &declared) {
                            return Err(m.fail(
                                "Let",
                                &text(),
                                format!("expected {}, found {}", show(&declared), show(&t)),
                            ));
                        }
                        let mut c = ctx.clone();
                        c.sigma = c.sigma.minus(&locs_expr_of(self, m, e));
                        if let Some(a) = self.alias_of(m, &ctx, e, &declared) {
                            c.theta.insert(var.clone(), a);
                        }
                        (c, Derivation::default(), declared)
                    }
                    Rhs::New { contract, args } => {
                        let t = self
                            .check_new(m.contract, &ctx.gamma, contract, args)
                            .map_err(|msg| m.fail("Let", &text(), msg))?;
                        let declared = ty.clone().unwrap_or_else(|| t.clone());
                        if !rp.is_subtype(&t, &declared) {
                            return Err(m.fail(
                                "Let",
                                &text(),
                                format!("expected {}, found {}", show(&declared), show(&t)),
                            ));
                        }
                        let mut c = ctx.clone();
                        for a in args {
                            c.sigma = c.sigma.minus(&locs_expr_of(self, m, a));
                        }
                        c.theta.insert(var.clone(), AliasSet::top(contract));
                        (c, Derivation::default(), declared)
                    }
                };
                inner.gamma.insert(var.clone(), declared);
                let (out, d1) = self.stmt(m, inner, body)?;
                let out = Ctx {
                    sigma: sigma_out,
                    ..out
                };
                let premises = if d0.rule.is_empty() { vec![d1] } else { vec![d0, d1] };
                Ok((out, self.node("Let", text, premises)))
            }
            Stmt::Assign { target, rhs } => {
                let tt = self.lvalue_type(m, &ctx, s, target)?;
                let cnt = matches!(tt, Type::Contract(_));
                let rule = if cnt { "Assign-Cnt" } else { "Assign" };
                let alias = match rhs {
                    Rhs::Invoke(call) => {
                        let (c, d) = self.call(m, ctx, s, call, Some(target))?;
                        return Ok((Ctx { sigma: sigma_out, ..c }, d));
                    }
                    Rhs::Expr(e) => {
                        let t = self.ty(m, &ctx, rule, s, e)?;
                        if !rp.is_subtype(&t, &tt) {
                            return Err(m.fail(rule, &text(), format!("expected {}, found {}", show(&tt), show(&t))));
                        }
                        self.alias_of(m, &ctx, e, &tt)
                    }
                    Rhs::New { contract, args } => {
                        let t = self
                            .check_new(m.contract, &ctx.gamma, contract, args)
                            .map_err(|msg| m.fail(rule, &text(), msg))?;
                        if !rp.is_subtype(&t, &tt) {
                            return Err(m.fail(rule, &text(), format!("expected {}, found {}", show(&tt), show(&t))));
                        }
                        Some(AliasSet::top(contract))
                    }
                };
                let mut out = Ctx {
                    sigma: sigma_out,
                    ..ctx
                };
                if let (LValue::Var(x), Some(a)) = (target, alias) {
                    out.theta.insert(x.clone(), a);
                }
                Ok((out, self.node(rule, text, vec![])))
            }
            Stmt::CallAssign { target, call } => {
                let (c, d) = self.call(m, ctx, s, call, Some(target))?;
                Ok((Ctx { sigma: sigma_out, ..c }, d))
            }
            Stmt::Call(inv) => {
                let (c, d) = self.call(m, ctx, s, inv, None)?;
                Ok((Ctx { sigma: sigma_out, ..c }, d))
            }
            Stmt::Try {
                target,
                call,
                abort_var,
                abort,
                success,
            } => {
                let (c0, d0) = self.call(m, ctx, s, call, target.as_ref())?;
                let mut ca = c0.clone();
                if let Some(x) = abort_var {
                    ca.gamma.insert(x.clone(), Type::String);
                }
                let (c1, d1) = self.stmt(m, ca, abort)?;
                let (c2, d2) = self.stmt(m, c0.clone(), success)?;
                let out = Ctx {
                    sigma: sigma_out,
                    ..c0.join(&c1).join(&c2)
                };
                Ok((out, self.node("Try-Abort", text, vec![d0, d1, d2])))
            }
        }
    }

    /// Contracts `(concrete type, method body, this)` an invocation may
    /// run, and the alias set of its receiver.
    #[allow(clippy::type_complexity)]
    fn targets(
        &self,
        m: &Mcx,
        ctx: &Ctx,
        s: &Stmt,
        inv: &Invocation,
    ) -> Result<(AliasSet, Vec<(&'a str, &'a MethodDecl, AliasSet)>), Failure> {
        let rp = self.rp;
        let text = || one_line(&print_invocation(inv));
        let declarers = || -> AliasSet {
            AliasSet(
                rp.declaring(&inv.method)
                    .into_iter()
                    .filter(|d| {
                        rp.lookup_method(d, &inv.method)
                            .is_some_and(|(_, md)| md.params.len() == inv.args.len())
                    })
                    .map(|d| Atom::Any(d.to_string()))
                    .collect(),
            )
        };
        let static_ty = match &inv.receiver {
            Receiver::This => Type::Contract(m.contract.to_string()),
            Receiver::Sender => Type::Address,
            Receiver::Var(x) => ctx
                .gamma
                .get(x)
                .cloned()
                .ok_or_else(|| m.fail("Call", &text(), format!("unbound receiver `{x}`")))?,
            Receiver::Field(f) => rp
                .field(m.contract, f)
                .map(|d| d.ty.clone())
                .ok_or_else(|| m.fail("Call", &text(), format!("unknown field `{f}`")))?,
        };
        let alias = match (&inv.receiver, &static_ty) {
            (Receiver::This, _) => m.this.clone(),
            (Receiver::Var(x), Type::Contract(c)) => ctx.theta.get(x).cloned().unwrap_or_else(|| AliasSet::top(c)),
            (_, Type::Contract(c)) => {
                let Some((_, md)) = rp.lookup_method(c, &inv.method) else {
                    return Err(m.fail("Call", &text(), format!("{c} has no method {}", inv.method)));
                };
                if md.params.len() != inv.args.len() {
                    return Err(m.fail(
                        "Call",
                        &text(),
                        format!("{c}.{} expects {} arguments", inv.method, md.params.len()),
                    ));
                }
                AliasSet::top(c)
            }
            (_, Type::Address) => declarers(),
            (_, t) => {
                return Err(m.fail(
                    "Call",
                    &text(),
                    format!("receiver has type {}, not a contract", show(t)),
                ))
            }
        };
        let _ = s;
        let mut out: Vec<(&'a str, &'a MethodDecl, AliasSet)> = Vec::new();
        for a in alias.atoms() {
            let concretes: Vec<&'a str> = match a {
                Atom::Id { contract, .. } => rp.contract(contract).map(|d| d.name.as_str()).into_iter().collect(),
                Atom::Any(c) => rp.subcontracts(c),
            };
            for d in concretes {
                let Some((_, md)) = rp.lookup_method(d, &inv.method) else {
                    continue;
                };
                if md.params.len() != inv.args.len() {
                    continue;
                }
                let this = match a {
                    Atom::Id { .. } => AliasSet::one(a.clone()),
                    Atom::Any(_) => AliasSet::top(d),
                };
                if !out.iter().any(|(c, _, t)| *c == d && *t == this) {
                    out.push((d, md, this));
                }
            }
        }
        if out.is_empty() {
            return Err(m.fail("Call", &text(), format!("no contract can run {}", inv.method)));
        }
        Ok((alias, out))
    }

    /// Call-Safe, falling back to Call.
    fn call(&mut self, m: &Mcx, ctx: Ctx, s: &Stmt, inv: &Invocation, target: Option<&LValue>) -> Judgment {
        let rp = self.rp;
        let text = || one_line(&print_stmt(s));
        for a in &inv.args {
            self.ty(m, &ctx, "Call", s, a)?;
        }
        if let Some(v) = &inv.value {
            self.expect(m, &ctx, "Call", s, v, &Type::Int)?;
        }
        let (alias, targets) = self.targets(m, &ctx, s, inv)?;
        let target_ty = match target {
            Some(t) => Some(self.lvalue_type(m, &ctx, s, t)?),
            None => None,
        };
        for (d, md, _) in &targets {
            for (p, a) in md.params.iter().zip(&inv.args) {
                self.expect(m, &ctx, "Call", s, a, &p.ty)?;
            }
            if let Some(tt) = &target_ty {
                if !rp.is_subtype(&md.ret, tt) {
                    return Err(m.fail(
                        "Call",
                        &text(),
                        format!("{d}.{} returns {}, expected {}", md.name, show(&md.ret), show(tt)),
                    ));
                }
            }
        }
        for a in alias.atoms() {
            if let Some(l) = ctx
                .delta
                .iter()
                .find(|l| l.method == inv.method && l.atom.may_alias(a, rp))
            {
                let mut f = m.fail(
                    "Call",
                    &text(),
                    format!("⟨{}, {}⟩ meets the locked pair {l}", alias, inv.method),
                );
                f.conflict = Some(l.clone());
                return Err(f);
            }
        }
        let mut used = locs_call(rp, &m.this, m.contract, inv);
        if let Some(LValue::Field(f)) = target {
            for a in m.this.atoms() {
                used.add((a.clone(), f.clone()), 1);
            }
        }
        let pending = ctx.sigma.minus(&used);
        let safe = pending.within_irrelevant(rp, m.contract)
            || (alias == m.this
                && targets
                    .iter()
                    .all(|(d, md, this)| locs_stmt(rp, this, d, &md.body).within_irrelevant(rp, d)));
        let mut callee_delta = ctx.delta.clone();
        if !safe {
            for a in m.this.atoms() {
                callee_delta.insert(Lock {
                    atom: a.clone(),
                    method: m.decl.name.clone(),
                });
            }
        }
        let mut premises = Vec::new();
        for (d, md, this) in targets {
            premises.push(self.check_method(d, md, this, callee_delta.clone(), &m.path)?);
        }
        let mut out = ctx;
        if !safe {
            for a in alias.atoms() {
                out.delta.insert(Lock {
                    atom: a.clone(),
                    method: inv.method.clone(),
                });
            }
        }
        if let (Some(LValue::Var(x)), Some(Type::Contract(c))) = (target, &target_ty) {
            out.theta.insert(x.clone(), AliasSet::top(c));
        }
        out.sigma = pending;
        let rule = if safe { "Call-Safe" } else { "Call" };
        Ok((out, self.node(rule, text, premises)))
    }
}

fn locs_expr_of(ck: &Checker, m: &Mcx, e: &Expr) -> Multiset {
    super::locs::locs_expr(ck.rp, &m.this, m.contract, e)
}
