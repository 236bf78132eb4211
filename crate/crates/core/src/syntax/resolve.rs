//! Name and arity resolution.
//!
//! Produces a [`ResolvedProgram`]: types are classified into ADT or contract
//! types, bare identifiers become locals or `this` fields, ADT applications
//! become [`Expr::AdtCall`] / [`Expr::Ctor`], method calls on ADT-typed
//! receivers are rewritten into functional updates, and locals that reuse a
//! name within one method are renamed to `name_k`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::*;

pub const BALANCE: &str = "balance";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NameError {
    #[error("unknown {kind} `{name}` in {context}")]
    Unknown {
        kind: &'static str,
        name: String,
        context: String,
    },
    #[error("duplicate {kind} `{name}` in {context}")]
    Duplicate {
        kind: &'static str,
        name: String,
        context: String,
    },
    #[error("cyclic inheritance involving `{0}`")]
    Cycle(String),
    #[error("`{name}` expects {expected} argument(s), found {found} in {context}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("{0}")]
    Invalid(String),
}

type RResult<T> = Result<T, NameError>;

/// A program whose names are bound, with inheritance-aware lookup tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedProgram {
    program: Program,
    fields: BTreeMap<String, Vec<FieldDecl>>,
}

impl ResolvedProgram {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn contract(&self, name: &str) -> Option<&ContractDecl> {
        self.program.contract(name)
    }

    pub fn adt(&self, name: &str) -> Option<&AdtDecl> {
        self.program.adt(name)
    }

    pub fn contract_names(&self) -> impl Iterator<Item = &str> {
        self.program.contracts.iter().map(|c| c.name.as_str())
    }

    pub fn parent(&self, c: &str) -> Option<&str> {
        self.contract(c)?.parent.as_deref()
    }

    /// `c` followed by its transitive parents.
    pub fn ancestors<'a>(&'a self, c: &'a str) -> Vec<&'a str> {
        let mut out = vec![c];
        let mut cur = c;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn is_subcontract(&self, sub: &str, sup: &str) -> bool {
        self.ancestors(sub).contains(&sup)
    }

    /// Every declared contract `d` with `d <: c`, including `c`.
    pub fn subcontracts(&self, c: &str) -> Vec<&str> {
        self.contract_names().filter(|d| self.is_subcontract(d, c)).collect()
    }

    /// Subtyping: reflexive everywhere, `extends` on contracts, and any
    /// contract type is usable as an `address`.
    pub fn is_subtype(&self, a: &Type, b: &Type) -> bool {
        match (a, b) {
            (Type::Contract(x), Type::Contract(y)) => self.is_subcontract(x, y),
            (Type::Contract(_), Type::Address) => true,
            _ => a == b,
        }
    }

    /// All fields of `c`, inherited ones first.
    pub fn fields(&self, c: &str) -> &[FieldDecl] {
        self.fields.get(c).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn field(&self, c: &str, f: &str) -> Option<&FieldDecl> {
        self.fields(c).iter().find(|d| d.name == f)
    }

    pub fn is_irrelevant(&self, c: &str, f: &str) -> bool {
        self.field(c, f).map(|d| d.irrelevant).unwrap_or(false)
    }

    /// Method lookup through the inheritance chain; returns the declaring
    /// contract and the declaration.
    pub fn lookup_method<'a>(&'a self, c: &'a str, m: &str) -> Option<(&'a str, &'a MethodDecl)> {
        for a in self.ancestors(c) {
            if let Some(d) = self.contract(a).and_then(|d| d.method(m)) {
                return Some((a, d));
            }
        }
        None
    }

    /// Methods callable on an instance of `c`: own declarations first,
    /// then inherited ones that are not overridden.
    pub fn visible_methods(&self, c: &str) -> Vec<&MethodDecl> {
        let Some(c) = self.contract(c).map(|d| d.name.as_str()) else {
            return Vec::new();
        };
        let mut names: Vec<&str> = Vec::new();
        for a in self.ancestors(c) {
            for m in &self.contract(a).expect("ancestor").methods {
                if !names.contains(&m.name.as_str()) {
                    names.push(&m.name);
                }
            }
        }
        names
            .into_iter()
            .filter_map(|n| self.lookup_method(c, n).map(|(_, d)| d))
            .collect()
    }

    pub fn mtype(&self, c: &str, m: &str) -> Option<(Vec<Type>, Type)> {
        let (_, d) = self.lookup_method(c, m)?;
        Some((d.params.iter().map(|p| p.ty.clone()).collect(), d.ret.clone()))
    }

    /// Bodies that may run for `r.m(..)` when `r` has static type `c`:
    /// the inherited one and every override in a subcontract.
    pub fn dispatch_targets<'a>(&'a self, c: &'a str, m: &str) -> Vec<(&'a str, &'a MethodDecl)> {
        let mut out: Vec<(&str, &MethodDecl)> = Vec::new();
        for d in self.subcontracts(c) {
            if let Some(t) = self.lookup_method(d, m) {
                if !out.iter().any(|(o, _)| *o == t.0) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Contracts on which `m` can be invoked.
    pub fn declaring(&self, m: &str) -> Vec<&str> {
        self.contract_names()
            .filter(|c| self.lookup_method(c, m).is_some())
            .collect()
    }

    pub fn constructor_params(&self, c: &str) -> Vec<Param> {
        self.contract(c)
            .and_then(|d| d.constructor.as_ref())
            .map(|k| k.params.clone())
            .unwrap_or_default()
    }

    /// Typed locals introduced by `let` and `abort` binders in a method body.
    pub fn method_locals(&self, m: &MethodDecl) -> Vec<(String, Type)> {
        fn go(s: &Stmt, out: &mut Vec<(String, Type)>) {
            match s {
                Stmt::Let { var, ty, body, .. } => {
                    if let Some(t) = ty {
                        out.push((var.clone(), t.clone()));
                    }
                    go(body, out);
                }
                Stmt::If { then, els, .. } => {
                    go(then, out);
                    if let Some(e) = els {
                        go(e, out);
                    }
                }
                Stmt::While { body, .. } => go(body, out),
                Stmt::Try {
                    abort_var,
                    abort,
                    success,
                    ..
                } => {
                    if let Some(v) = abort_var {
                        out.push((v.clone(), Type::String));
                    }
                    go(abort, out);
                    go(success, out);
                }
                Stmt::Seq(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        go(&m.body, &mut out);
        out
    }

    pub fn adt_of_ctor(&self, ctor: &str) -> Vec<&AdtDecl> {
        self.program.adts.iter().filter(|a| a.ctor(ctor).is_some()).collect()
    }
}

pub fn resolve(program: &Program) -> Result<ResolvedProgram, NameError> {
    let mut prog = program.clone();

    // names
    let mut seen = HashSet::new();
    for n in prog
        .adts
        .iter()
        .map(|a| &a.name)
        .chain(prog.contracts.iter().map(|c| &c.name))
    {
        if !seen.insert(n.clone()) {
            return Err(NameError::Duplicate {
                kind: "declaration",
                name: n.clone(),
                context: "program".into(),
            });
        }
    }
    let adt_names: HashSet<String> = prog.adts.iter().map(|a| a.name.clone()).collect();
    let cnt_names: HashSet<String> = prog.contracts.iter().map(|c| c.name.clone()).collect();
    let rty = |t: &Type, ctx: &str| -> RResult<Type> {
        match t {
            Type::Named(n) | Type::Adt(n) | Type::Contract(n) => {
                if adt_names.contains(n) {
                    Ok(Type::Adt(n.clone()))
                } else if cnt_names.contains(n) {
                    Ok(Type::Contract(n.clone()))
                } else {
                    Err(NameError::Unknown {
                        kind: "type",
                        name: n.clone(),
                        context: ctx.to_string(),
                    })
                }
            }
            other => Ok(other.clone()),
        }
    };
    let rparams = |ps: &mut Vec<Param>, ctx: &str| -> RResult<()> {
        let mut names = HashSet::new();
        for p in ps.iter_mut() {
            p.ty = rty(&p.ty, ctx)?;
            if !names.insert(p.name.clone()) {
                return Err(NameError::Duplicate {
                    kind: "parameter",
                    name: p.name.clone(),
                    context: ctx.to_string(),
                });
            }
        }
        Ok(())
    };

    // signatures
    for a in &mut prog.adts {
        let ctx = format!("datatype {}", a.name);
        if a.constructors.is_empty() {
            return Err(NameError::Invalid(format!("{ctx} has no constructors")));
        }
        let mut names = HashSet::new();
        for c in &mut a.constructors {
            if !names.insert(c.name.clone()) {
                return Err(NameError::Duplicate {
                    kind: "constructor",
                    name: c.name.clone(),
                    context: ctx.clone(),
                });
            }
            rparams(&mut c.params, &ctx)?;
        }
        let mut fnames = HashSet::new();
        for f in &mut a.functions {
            if !fnames.insert(f.name.clone()) || names.contains(&f.name) {
                return Err(NameError::Duplicate {
                    kind: "function",
                    name: f.name.clone(),
                    context: ctx.clone(),
                });
            }
            let fctx = format!("{}.{}", a.name, f.name);
            rparams(&mut f.params, &fctx)?;
            f.ret = rty(&f.ret, &fctx)?;
        }
    }
    for c in &mut prog.contracts {
        let ctx = format!("contract {}", c.name);
        if let Some(p) = &c.parent {
            if !cnt_names.contains(p) {
                return Err(NameError::Unknown {
                    kind: "contract",
                    name: p.clone(),
                    context: ctx,
                });
            }
        }
        for f in &mut c.fields {
            f.ty = rty(&f.ty, &ctx)?;
        }
        if let Some(k) = &mut c.constructor {
            rparams(&mut k.params, &format!("{}.constructor", c.name))?;
        }
        let mut mnames = HashSet::new();
        for m in &mut c.methods {
            let mctx = format!("{}.{}", c.name, m.name);
            if !mnames.insert(m.name.clone()) {
                return Err(NameError::Duplicate {
                    kind: "method",
                    name: m.name.clone(),
                    context: ctx.clone(),
                });
            }
            rparams(&mut m.params, &mctx)?;
            m.ret = rty(&m.ret, &mctx)?;
        }
    }

    // inheritance
    for c in &prog.contracts {
        let mut cur = c.name.as_str();
        let mut visited = HashSet::new();
        while let Some(p) = prog.contract(cur).and_then(|d| d.parent.as_deref()) {
            if !visited.insert(p) || p == c.name {
                return Err(NameError::Cycle(c.name.clone()));
            }
            cur = p;
        }
    }

    // implicit balance on roots whose hierarchy never declares it
    let declares_balance: Vec<String> = prog
        .contracts
        .iter()
        .filter(|c| c.fields.iter().any(|f| f.name == BALANCE))
        .map(|c| c.name.clone())
        .collect();
    for c in &prog.contracts {
        for f in &c.fields {
            if f.name == BALANCE && f.ty != Type::Int {
                return Err(NameError::Invalid(format!(
                    "field `{BALANCE}` of {} must have type int",
                    c.name
                )));
            }
        }
    }
    let tmp = ResolvedProgram {
        program: prog.clone(),
        fields: BTreeMap::new(),
    };
    let roots_needing: Vec<String> = prog
        .contracts
        .iter()
        .filter(|c| c.parent.is_none())
        .filter(|c| !declares_balance.iter().any(|d| tmp.is_subcontract(d, &c.name)))
        .map(|c| c.name.clone())
        .collect();
    for c in &mut prog.contracts {
        if roots_needing.contains(&c.name) {
            c.fields.push(FieldDecl {
                name: BALANCE.into(),
                ty: Type::Int,
                irrelevant: false,
            });
        }
    }

    // flattened field tables
    let mut rp = ResolvedProgram {
        program: prog,
        fields: BTreeMap::new(),
    };
    let mut fields = BTreeMap::new();
    for c in rp.contract_names() {
        let mut all: Vec<FieldDecl> = Vec::new();
        for a in rp.ancestors(c).into_iter().rev() {
            for f in &rp.contract(a).unwrap().fields {
                if all.iter().any(|g| g.name == f.name) {
                    return Err(NameError::Duplicate {
                        kind: "field",
                        name: f.name.clone(),
                        context: format!("contract {c}"),
                    });
                }
                all.push(f.clone());
            }
        }
        fields.insert(c.to_string(), all);
    }
    rp.fields = fields;

    // overrides keep the signature
    for c in &rp.program.contracts {
        if let Some(p) = &c.parent {
            for m in &c.methods {
                if let Some((_, pm)) = rp.lookup_method(p, &m.name) {
                    let same = pm.ret == m.ret
                        && pm.params.len() == m.params.len()
                        && pm.params.iter().zip(&m.params).all(|(a, b)| a.ty == b.ty);
                    if !same {
                        return Err(NameError::Invalid(format!(
                            "{}.{} overrides {}.{} with a different signature",
                            c.name, m.name, p, m.name
                        )));
                    }
                }
            }
        }
    }

    // bodies
    let mut new_adts = Vec::new();
    for a in &rp.program.adts {
        let mut a2 = a.clone();
        for f in &mut a2.functions {
            let mut cx = Cx::new(&rp, None, Some(&a.name), format!("{}.{}", a.name, f.name));
            for p in &f.params {
                cx.bind_plain(&p.name, p.ty.clone());
            }
            f.body = cx.adt_body(&f.body)?;
        }
        new_adts.push(a2);
    }
    let mut new_contracts = Vec::new();
    for c in &rp.program.contracts {
        let mut c2 = c.clone();
        if let Some(k) = &mut c2.constructor {
            let ctx = format!("{}.constructor", c.name);
            let mut cx = Cx::new(&rp, Some(&c.name), None, ctx.clone());
            for p in &k.params {
                cx.bind_plain(&p.name, p.ty.clone());
            }
            match (&k.super_args, &c.parent) {
                (Some(args), Some(p)) => {
                    let expected = rp.constructor_params(p).len();
                    if args.len() != expected {
                        return Err(NameError::Arity {
                            name: format!("{p}.constructor"),
                            expected,
                            found: args.len(),
                            context: ctx,
                        });
                    }
                    k.super_args = Some(cx.exprs(args)?);
                }
                (Some(_), None) => {
                    return Err(NameError::Invalid(format!(
                        "{ctx} calls super but {} has no parent",
                        c.name
                    )))
                }
                (None, _) => {}
            }
            let mut inits = Vec::new();
            let mut set = HashSet::new();
            for (f, rhs) in &k.inits {
                if rp.field(&c.name, f).is_none() {
                    return Err(NameError::Unknown {
                        kind: "field",
                        name: f.clone(),
                        context: ctx.clone(),
                    });
                }
                if !set.insert(f.clone()) {
                    return Err(NameError::Duplicate {
                        kind: "field initializer",
                        name: f.clone(),
                        context: ctx.clone(),
                    });
                }
                inits.push((f.clone(), cx.rhs(rhs)?));
            }
            k.inits = inits;
        }
        for m in &mut c2.methods {
            let mut cx = Cx::new(&rp, Some(&c.name), None, format!("{}.{}", c.name, m.name));
            cx.reserved = binder_names(&m.body);
            for p in &m.params {
                cx.reserved.insert(p.name.clone());
                cx.bind_plain(&p.name, p.ty.clone());
            }
            m.body = cx.stmt(&m.body)?;
        }
        new_contracts.push(c2);
    }
    rp.program.adts = new_adts;
    rp.program.contracts = new_contracts;
    Ok(rp)
}

fn binder_names(s: &Stmt) -> HashSet<String> {
    fn go(s: &Stmt, out: &mut HashSet<String>) {
        match s {
            Stmt::Let { var, body, .. } => {
                out.insert(var.clone());
                go(body, out);
            }
            Stmt::If { then, els, .. } => {
                go(then, out);
                if let Some(e) = els {
                    go(e, out);
                }
            }
            Stmt::While { body, .. } => go(body, out),
            Stmt::Try {
                abort_var,
                abort,
                success,
                ..
            } => {
                if let Some(v) = abort_var {
                    out.insert(v.clone());
                }
                go(abort, out);
                go(success, out);
            }
            Stmt::Seq(a, b) => {
                go(a, out);
                go(b, out);
            }
            _ => {}
        }
    }
    let mut out = HashSet::new();
    go(s, &mut out);
    out
}

/// Per-body resolution context.
struct Cx<'a> {
    rp: &'a ResolvedProgram,
    contract: Option<&'a str>,
    adt: Option<&'a str>,
    ctx: String,
    /// (source name, internal name, type), innermost last
    scope: Vec<(String, String, Type)>,
    declared: HashSet<String>,
    reserved: HashSet<String>,
}

enum RecvKind {
    Contract(Receiver, String),
    /// `sender` or an address-typed location: dispatch is dynamic
    Address(Receiver),
    Adt(LValue, String),
}

impl<'a> Cx<'a> {
    fn new(rp: &'a ResolvedProgram, contract: Option<&'a str>, adt: Option<&'a str>, ctx: String) -> Self {
        Cx {
            rp,
            contract,
            adt,
            ctx,
            scope: Vec::new(),
            declared: HashSet::new(),
            reserved: HashSet::new(),
        }
    }

    fn unknown(&self, kind: &'static str, name: &str) -> NameError {
        NameError::Unknown {
            kind,
            name: name.to_string(),
            context: self.ctx.clone(),
        }
    }

    fn invalid(&self, msg: String) -> NameError {
        NameError::Invalid(format!("{msg} in {}", self.ctx))
    }

    fn arity(&self, name: &str, expected: usize, found: usize) -> RResult<()> {
        if expected == found {
            Ok(())
        } else {
            Err(NameError::Arity {
                name: name.to_string(),
                expected,
                found,
                context: self.ctx.clone(),
            })
        }
    }

    fn bind_plain(&mut self, name: &str, ty: Type) {
        self.declared.insert(name.to_string());
        self.scope.push((name.to_string(), name.to_string(), ty));
    }

    /// Binds a method local, renaming it if the name was already used.
    fn bind_local(&mut self, name: &str, ty: Type) -> String {
        let internal = if self.declared.contains(name) {
            let mut k = 1;
            loop {
                let cand = format!("{name}_{k}");
                if !self.declared.contains(&cand) && !self.reserved.contains(&cand) {
                    break cand;
                }
                k += 1;
            }
        } else {
            name.to_string()
        };
        self.declared.insert(internal.clone());
        self.scope.push((name.to_string(), internal.clone(), ty));
        internal
    }

    fn local(&self, name: &str) -> Option<(&str, &Type)> {
        self.scope
            .iter()
            .rev()
            .find(|(s, _, _)| s == name)
            .map(|(_, i, t)| (i.as_str(), t))
    }

    fn field_ty(&self, f: &str) -> Option<Type> {
        self.contract.and_then(|c| self.rp.field(c, f)).map(|d| d.ty.clone())
    }

    fn resolve_ty(&self, t: &Type) -> RResult<Type> {
        match t {
            Type::Named(n) => {
                if self.rp.adt(n).is_some() {
                    Ok(Type::Adt(n.clone()))
                } else if self.rp.contract(n).is_some() {
                    Ok(Type::Contract(n.clone()))
                } else {
                    Err(self.unknown("type", n))
                }
            }
            other => Ok(other.clone()),
        }
    }

    // ---- expressions ----

    fn exprs(&mut self, es: &[Expr]) -> RResult<Vec<Expr>> {
        es.iter().map(|e| self.expr(e)).collect()
    }

    /// Resolves a constructor or function application by bare name: the
    /// enclosing datatype first, then a unique match among all datatypes.
    fn apply(&mut self, name: &str, args: &[Expr]) -> RResult<Expr> {
        let args = self.exprs(args)?;
        if let Some(own) = self.adt.and_then(|a| self.rp.adt(a)) {
            if let Some(f) = own.function(name) {
                self.arity(name, f.params.len(), args.len())?;
                return Ok(Expr::AdtCall {
                    adt: own.name.clone(),
                    func: name.to_string(),
                    args,
                });
            }
            if let Some(c) = own.ctor(name) {
                self.arity(name, c.params.len(), args.len())?;
                return Ok(Expr::Ctor {
                    adt: own.name.clone(),
                    ctor: name.to_string(),
                    args,
                });
            }
        }
        let ctors = self.rp.adt_of_ctor(name);
        let funcs: Vec<&AdtDecl> = self
            .rp
            .program
            .adts
            .iter()
            .filter(|a| a.function(name).is_some())
            .collect();
        match (ctors.as_slice(), funcs.as_slice()) {
            ([a], []) => {
                self.arity(name, a.ctor(name).unwrap().params.len(), args.len())?;
                Ok(Expr::Ctor {
                    adt: a.name.clone(),
                    ctor: name.to_string(),
                    args,
                })
            }
            ([], [a]) => {
                self.arity(name, a.function(name).unwrap().params.len(), args.len())?;
                Ok(Expr::AdtCall {
                    adt: a.name.clone(),
                    func: name.to_string(),
                    args,
                })
            }
            ([], []) => Err(self.unknown("function", name)),
            _ => Err(self.invalid(format!("ambiguous name `{name}`; qualify it with its datatype"))),
        }
    }

    fn qualified(&mut self, adt: &str, name: &str, args: &[Expr]) -> RResult<Expr> {
        let a = self.rp.adt(adt).ok_or_else(|| self.unknown("datatype", adt))?;
        let args = self.exprs(args)?;
        if let Some(f) = a.function(name) {
            self.arity(name, f.params.len(), args.len())?;
            Ok(Expr::AdtCall {
                adt: adt.to_string(),
                func: name.to_string(),
                args,
            })
        } else if let Some(c) = a.ctor(name) {
            self.arity(name, c.params.len(), args.len())?;
            Ok(Expr::Ctor {
                adt: adt.to_string(),
                ctor: name.to_string(),
                args,
            })
        } else {
            Err(self.unknown("function", name))
        }
    }

    /// `r.f(args)` on an ADT value: `f(r, args)` when `f` takes the receiver
    /// as its first argument, otherwise `f(args)`.
    fn adt_receiver_call(&mut self, adt: &str, recv: Expr, name: &str, args: &[Expr]) -> RResult<Expr> {
        let a = self.rp.adt(adt).ok_or_else(|| self.unknown("datatype", adt))?;
        let f = a.function(name).ok_or_else(|| self.unknown("function", name))?;
        let mut args = self.exprs(args)?;
        if f.params.len() == args.len() + 1 {
            args.insert(0, recv);
        } else {
            self.arity(name, f.params.len(), args.len())?;
        }
        Ok(Expr::AdtCall {
            adt: adt.to_string(),
            func: name.to_string(),
            args,
        })
    }

    fn expr(&mut self, e: &Expr) -> RResult<Expr> {
        Ok(match e {
            Expr::Var(x) => {
                if let Some((i, _)) = self.local(x) {
                    Expr::Var(i.to_string())
                } else if self.field_ty(x).is_some() {
                    Expr::Field(x.clone())
                } else if self.contract.is_none() && self.adt.is_none() {
                    return Err(self.unknown("variable", x));
                } else {
                    match self.apply(x, &[]) {
                        Ok(c @ Expr::Ctor { .. }) => c,
                        _ => return Err(self.unknown("variable", x)),
                    }
                }
            }
            Expr::Field(f) => {
                if self.field_ty(f).is_none() {
                    return Err(self.unknown("field", f));
                }
                Expr::Field(f.clone())
            }
            Expr::This => {
                if self.contract.is_none() {
                    return Err(self.invalid("`this` outside a contract".into()));
                }
                Expr::This
            }
            Expr::Sender | Expr::Amount => {
                if self.contract.is_none() {
                    return Err(self.invalid("`sender`/amount outside a contract".into()));
                }
                e.clone()
            }
            Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) => e.clone(),
            Expr::Not(x) => Expr::Not(Box::new(self.expr(x)?)),
            Expr::Arith(op, l, r) => Expr::Arith(*op, Box::new(self.expr(l)?), Box::new(self.expr(r)?)),
            Expr::Cmp(op, l, r) => Expr::Cmp(*op, Box::new(self.expr(l)?), Box::new(self.expr(r)?)),
            Expr::Apply { name, args } => self.apply(name, args)?,
            Expr::Invoke { receiver, name, args } => {
                if let Expr::Var(q) = &**receiver {
                    if self.local(q).is_none() && self.field_ty(q).is_none() && self.rp.adt(q).is_some() {
                        return self.qualified(q, name, args);
                    }
                }
                let recv = self.expr(receiver)?;
                match self.infer(&recv)? {
                    Type::Adt(a) => self.adt_receiver_call(&a, recv, name, args)?,
                    _ => {
                        return Err(self.invalid(format!(
                            "method call `.{name}(..)` inside an expression; contract calls are statements"
                        )))
                    }
                }
            }
            Expr::Proj(base, f) => {
                let b = self.expr(base)?;
                match self.infer(&b)? {
                    Type::Adt(a) => {
                        let adt = self.rp.adt(&a).unwrap();
                        if !adt.constructors.iter().any(|c| c.params.iter().any(|p| &p.name == f)) {
                            return Err(self.unknown("constructor argument", f));
                        }
                        Expr::Proj(Box::new(b), f.clone())
                    }
                    _ => return Err(self.invalid(format!("projection `.{f}` on a non-datatype value"))),
                }
            }
            Expr::AdtCall { .. } | Expr::Ctor { .. } => e.clone(),
        })
    }

    /// Static type of a resolved expression, as far as names determine it.
    fn infer(&self, e: &Expr) -> RResult<Type> {
        Ok(match e {
            Expr::Var(x) => self
                .scope
                .iter()
                .rev()
                .find(|(_, i, _)| i == x)
                .map(|(_, _, t)| t.clone())
                .ok_or_else(|| self.unknown("variable", x))?,
            Expr::Field(f) => self.field_ty(f).ok_or_else(|| self.unknown("field", f))?,
            Expr::Int(_) | Expr::Amount | Expr::Arith(..) => Type::Int,
            Expr::Bool(_) | Expr::Not(_) | Expr::Cmp(..) => Type::Bool,
            Expr::Str(_) => Type::String,
            Expr::This => Type::Contract(self.contract.unwrap_or_default().to_string()),
            Expr::Sender => Type::Address,
            Expr::AdtCall { adt, func, .. } => self
                .rp
                .adt(adt)
                .and_then(|a| a.function(func))
                .map(|f| f.ret.clone())
                .ok_or_else(|| self.unknown("function", func))?,
            Expr::Ctor { adt, .. } => Type::Adt(adt.clone()),
            Expr::Proj(b, f) => {
                let Type::Adt(a) = self.infer(b)? else {
                    return Err(self.invalid(format!("projection `.{f}` on a non-datatype value")));
                };
                self.rp
                    .adt(&a)
                    .and_then(|d| {
                        d.constructors
                            .iter()
                            .flat_map(|c| c.params.iter())
                            .find(|p| &p.name == f)
                    })
                    .map(|p| p.ty.clone())
                    .ok_or_else(|| self.unknown("constructor argument", f))?
            }
            Expr::Apply { name, .. } | Expr::Invoke { name, .. } => return Err(self.unknown("function", name)),
        })
    }

    // ---- statements ----

    fn lvalue(&self, lv: &LValue) -> RResult<(LValue, Type)> {
        match lv {
            LValue::Var(x) => {
                if let Some((i, t)) = self.local(x) {
                    Ok((LValue::Var(i.to_string()), t.clone()))
                } else if let Some(t) = self.field_ty(x) {
                    Ok((LValue::Field(x.clone()), t))
                } else {
                    Err(self.unknown("variable", x))
                }
            }
            LValue::Field(f) => self
                .field_ty(f)
                .map(|t| (LValue::Field(f.clone()), t))
                .ok_or_else(|| self.unknown("field", f)),
        }
    }

    fn receiver(&self, r: &Receiver) -> RResult<RecvKind> {
        let here = self.contract.unwrap_or_default();
        let (recv, lv, ty) = match r {
            Receiver::This => return Ok(RecvKind::Contract(Receiver::This, here.to_string())),
            Receiver::Sender => return Ok(RecvKind::Address(Receiver::Sender)),
            Receiver::Var(x) => {
                if let Some((i, t)) = self.local(x) {
                    (Receiver::Var(i.to_string()), LValue::Var(i.to_string()), t.clone())
                } else if let Some(t) = self.field_ty(x) {
                    (Receiver::Field(x.clone()), LValue::Field(x.clone()), t)
                } else {
                    return Err(self.unknown("variable", x));
                }
            }
            Receiver::Field(f) => {
                let t = self.field_ty(f).ok_or_else(|| self.unknown("field", f))?;
                (Receiver::Field(f.clone()), LValue::Field(f.clone()), t)
            }
        };
        match ty {
            Type::Contract(c) => Ok(RecvKind::Contract(recv, c)),
            Type::Address => Ok(RecvKind::Address(recv)),
            Type::Adt(a) => Ok(RecvKind::Adt(lv, a)),
            other => Err(self.invalid(format!("call on a value of type {other:?}"))),
        }
    }

    /// Resolves a contract invocation; returns it with the callee return type.
    fn invocation(&mut self, inv: &Invocation) -> RResult<(Invocation, Type)> {
        let kind = self.receiver(&inv.receiver)?;
        let args = self.exprs(&inv.args)?;
        let value = inv.value.as_ref().map(|v| self.expr(v)).transpose()?;
        let (receiver, ret) = match kind {
            RecvKind::Contract(r, c) => {
                let (ps, ret) = self
                    .rp
                    .mtype(&c, &inv.method)
                    .ok_or_else(|| self.unknown("method", &format!("{c}.{}", inv.method)))?;
                self.arity(&inv.method, ps.len(), args.len())?;
                (r, ret)
            }
            RecvKind::Address(r) => {
                let cands: Vec<(Vec<Type>, Type)> = self
                    .rp
                    .declaring(&inv.method)
                    .into_iter()
                    .filter_map(|c| self.rp.mtype(c, &inv.method))
                    .filter(|(ps, _)| ps.len() == args.len())
                    .collect();
                let Some((_, ret)) = cands.first().cloned() else {
                    return Err(self.unknown("method", &inv.method));
                };
                (r, ret)
            }
            RecvKind::Adt(..) => {
                return Err(self.invalid(format!("`{}` on a datatype value cannot be used here", inv.method)))
            }
        };
        Ok((
            Invocation {
                receiver,
                value,
                method: inv.method.clone(),
                args,
            },
            ret,
        ))
    }

    /// If `inv` targets an ADT-typed location, the functional update it
    /// stands for, as (location, new value expression).
    fn adt_invocation(&mut self, inv: &Invocation) -> RResult<Option<(LValue, Expr)>> {
        if matches!(inv.receiver, Receiver::This | Receiver::Sender) {
            return Ok(None);
        }
        if let RecvKind::Adt(lv, a) = self.receiver(&inv.receiver)? {
            if inv.value.is_some() {
                return Err(self.invalid("value transfer to a datatype value".into()));
            }
            let recv = match &lv {
                LValue::Var(v) => Expr::Var(v.clone()),
                LValue::Field(f) => Expr::Field(f.clone()),
            };
            let e = self.adt_receiver_call(&a, recv, &inv.method, &inv.args)?;
            return Ok(Some((lv, e)));
        }
        Ok(None)
    }

    fn rhs(&mut self, r: &Rhs) -> RResult<Rhs> {
        Ok(match r {
            Rhs::Expr(e) => Rhs::Expr(self.expr(e)?),
            Rhs::New { contract, args } => {
                if self.rp.contract(contract).is_none() {
                    return Err(self.unknown("contract", contract));
                }
                let args = self.exprs(args)?;
                self.arity(
                    &format!("{contract}.constructor"),
                    self.rp.constructor_params(contract).len(),
                    args.len(),
                )?;
                Rhs::New {
                    contract: contract.clone(),
                    args,
                }
            }
            Rhs::Invoke(inv) => {
                if let Some((_, e)) = self.adt_invocation(inv)? {
                    Rhs::Expr(e)
                } else {
                    Rhs::Invoke(self.invocation(inv)?.0)
                }
            }
        })
    }

    fn rhs_type(&self, r: &Rhs) -> RResult<Type> {
        match r {
            Rhs::Expr(e) => self.infer(e),
            Rhs::New { contract, .. } => Ok(Type::Contract(contract.clone())),
            Rhs::Invoke(inv) => {
                let c = match &inv.receiver {
                    Receiver::This => self.contract.unwrap_or_default().to_string(),
                    Receiver::Var(x) => match self.scope.iter().rev().find(|(_, i, _)| i == x) {
                        Some((_, _, Type::Contract(c))) => c.clone(),
                        _ => return self.address_ret(&inv.method, inv.args.len()),
                    },
                    Receiver::Field(f) => match self.field_ty(f) {
                        Some(Type::Contract(c)) => c,
                        _ => return self.address_ret(&inv.method, inv.args.len()),
                    },
                    Receiver::Sender => return self.address_ret(&inv.method, inv.args.len()),
                };
                self.rp
                    .mtype(&c, &inv.method)
                    .map(|(_, r)| r)
                    .ok_or_else(|| self.unknown("method", &inv.method))
            }
        }
    }

    fn address_ret(&self, m: &str, n: usize) -> RResult<Type> {
        self.rp
            .declaring(m)
            .into_iter()
            .filter_map(|c| self.rp.mtype(c, m))
            .find(|(ps, _)| ps.len() == n)
            .map(|(_, r)| r)
            .ok_or_else(|| self.unknown("method", m))
    }

    fn stmt(&mut self, s: &Stmt) -> RResult<Stmt> {
        Ok(match s {
            Stmt::Skip => Stmt::Skip,
            Stmt::Seq(a, b) => Stmt::Seq(Box::new(self.stmt(a)?), Box::new(self.stmt(b)?)),
            Stmt::If { cond, then, els } => Stmt::If {
                cond: self.expr(cond)?,
                then: Box::new(self.stmt(then)?),
                els: match els {
                    Some(e) => Some(Box::new(self.stmt(e)?)),
                    None => None,
                },
            },
            Stmt::While { cond, body } => Stmt::While {
                cond: self.expr(cond)?,
                body: Box::new(self.stmt(body)?),
            },
            Stmt::Let { var, ty, rhs, body } => {
                let rhs = self.rhs(rhs)?;
                let ty = match ty {
                    Some(t) => self.resolve_ty(t)?,
                    None => self.rhs_type(&rhs)?,
                };
                let internal = self.bind_local(var, ty.clone());
                let body = self.stmt(body);
                self.scope.pop();
                Stmt::Let {
                    var: internal,
                    ty: Some(ty),
                    rhs,
                    body: Box::new(body?),
                }
            }
            Stmt::Assert(e) => Stmt::Assert(self.expr(e)?),
            Stmt::Assign {
                target,
                rhs: Rhs::Invoke(inv),
            } => self.stmt(&Stmt::CallAssign {
                target: target.clone(),
                call: inv.clone(),
            })?,
            Stmt::Assign { target, rhs } => Stmt::Assign {
                target: self.lvalue(target)?.0,
                rhs: self.rhs(rhs)?,
            },
            Stmt::CallAssign { target, call } => {
                let (target, _) = self.lvalue(target)?;
                if let Some((_, e)) = self.adt_invocation(call)? {
                    Stmt::Assign {
                        target,
                        rhs: Rhs::Expr(e),
                    }
                } else {
                    Stmt::CallAssign {
                        target,
                        call: self.invocation(call)?.0,
                    }
                }
            }
            Stmt::Call(inv) => {
                if let Some((lv, e)) = self.adt_invocation(inv)? {
                    Stmt::Assign {
                        target: lv,
                        rhs: Rhs::Expr(e),
                    }
                } else {
                    Stmt::Call(self.invocation(inv)?.0)
                }
            }
            Stmt::Return(e) => Stmt::Return(e.as_ref().map(|e| self.expr(e)).transpose()?),
            Stmt::Throw(e) => Stmt::Throw(self.expr(e)?),
            Stmt::Try {
                target,
                call,
                abort_var,
                abort,
                success,
            } => {
                let target = target.as_ref().map(|t| self.lvalue(t)).transpose()?.map(|p| p.0);
                if self.adt_invocation(call)?.is_some() {
                    return Err(self.invalid("`try` around a datatype function".into()));
                }
                let call = self.invocation(call)?.0;
                let (abort_var, abort) = match abort_var {
                    Some(v) => {
                        let i = self.bind_local(v, Type::String);
                        let a = self.stmt(abort);
                        self.scope.pop();
                        (Some(i), a?)
                    }
                    None => (None, self.stmt(abort)?),
                };
                Stmt::Try {
                    target,
                    call,
                    abort_var,
                    abort: Box::new(abort),
                    success: Box::new(self.stmt(success)?),
                }
            }
        })
    }

    // ---- datatype bodies ----

    fn adt_body(&mut self, d: &AdtBody) -> RResult<AdtBody> {
        Ok(match d {
            AdtBody::If { cond, then, els } => AdtBody::If {
                cond: self.expr(cond)?,
                then: Box::new(self.adt_body(then)?),
                els: Box::new(self.adt_body(els)?),
            },
            AdtBody::Return(e) => AdtBody::Return(self.expr(e)?),
            AdtBody::Invoke { name, args } => match self.apply(name, args)? {
                Expr::AdtCall { adt, func, args } => AdtBody::Return(Expr::AdtCall { adt, func, args }),
                Expr::Ctor { adt, ctor, args } => AdtBody::Return(Expr::Ctor { adt, ctor, args }),
                _ => unreachable!("apply yields calls or constructors"),
            },
            AdtBody::Let { ty, name, value, body } => {
                let ty = self.resolve_ty(ty)?;
                let value = self.expr(value)?;
                self.bind_plain(name, ty.clone());
                let body = self.adt_body(body);
                self.scope.pop();
                AdtBody::Let {
                    ty,
                    name: name.clone(),
                    value,
                    body: Box::new(body?),
                }
            }
            AdtBody::Switch {
                scrutinee,
                cases,
                default,
            } => {
                let scrutinee = self.expr(scrutinee)?;
                let sty = self.infer(&scrutinee).ok();
                let mut out = Vec::new();
                let mut seen = BTreeSet::new();
                for (pat, body) in cases {
                    let mut bound = 0;
                    match (pat, &sty) {
                        (Pattern::Ctor { name, binders }, Some(Type::Adt(a))) => {
                            let adt = self.rp.adt(a).unwrap();
                            let ctor = adt.ctor(name).ok_or_else(|| self.unknown("constructor", name))?;
                            self.arity(name, ctor.params.len(), binders.len())?;
                            if !seen.insert(name.clone()) {
                                return Err(self.invalid(format!("duplicate case `{name}`")));
                            }
                            for (b, p) in binders.iter().zip(&ctor.params) {
                                self.bind_plain(b, p.ty.clone());
                                bound += 1;
                            }
                        }
                        (Pattern::Ctor { name, .. }, _) => {
                            return Err(self.invalid(format!("constructor pattern `{name}` on a non-datatype value")))
                        }
                        (Pattern::Int(_), Some(t)) if *t != Type::Int => {
                            return Err(self.invalid("integer pattern on a non-int value".into()))
                        }
                        (Pattern::Bool(_), Some(t)) if *t != Type::Bool => {
                            return Err(self.invalid("boolean pattern on a non-bool value".into()))
                        }
                        (Pattern::Str(_), Some(t)) if *t != Type::String => {
                            return Err(self.invalid("string pattern on a non-string value".into()))
                        }
                        _ => {}
                    }
                    let b = self.adt_body(body);
                    for _ in 0..bound {
                        self.scope.pop();
                    }
                    out.push((pat.clone(), b?));
                }
                AdtBody::Switch {
                    scrutinee,
                    cases: out,
                    default: match default {
                        Some(d) => Some(Box::new(self.adt_body(d)?)),
                        None => None,
                    },
                }
            }
        })
    }
}
