//! Canonical source rendering. `parse_program(&pretty_print(p)) == p` for
//! every parser output `p`.

use std::fmt::Write;

use num_traits::Signed;

use super::ast::*;

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for (i, adt) in p.adts.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_adt(&mut out, adt);
    }
    for (i, c) in p.contracts.iter().enumerate() {
        if i > 0 || !p.adts.is_empty() {
            out.push('\n');
        }
        print_contract(&mut out, c);
    }
    out
}

pub fn print_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    stmt_seq(&mut out, s, 0);
    out.trim_end().to_string()
}

pub fn print_expr(e: &Expr) -> String {
    expr(e, 0)
}

pub fn print_type(t: &Type) -> String {
    match t {
        Type::Int => "int".into(),
        Type::Bool => "bool".into(),
        Type::String => "string".into(),
        Type::Address => "address".into(),
        Type::Unit => "void".into(),
        Type::Stm => "stm".into(),
        Type::Named(n) | Type::Adt(n) | Type::Contract(n) => n.clone(),
    }
}

/// `recv[$value].method(args)`
pub fn print_invocation(inv: &Invocation) -> String {
    let mut s = match &inv.receiver {
        Receiver::This => "this".to_string(),
        Receiver::Sender => "sender".to_string(),
        Receiver::Var(v) => v.clone(),
        Receiver::Field(f) => format!("this.{f}"),
    };
    if let Some(v) = &inv.value {
        s.push('$');
        s.push_str(&value_atom(v));
    }
    let _ = write!(s, ".{}({})", inv.method, args(&inv.args));
    s
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| format!("{} {}", print_type(&p.ty), p.name))
        .collect::<Vec<_>>()
        .join(", ")
}

fn args(es: &[Expr]) -> String {
    es.iter().map(|e| expr(e, 0)).collect::<Vec<_>>().join(", ")
}

fn print_adt(out: &mut String, adt: &AdtDecl) {
    let _ = writeln!(out, "datatype {} {{", adt.name);
    let ctors: Vec<String> = adt
        .constructors
        .iter()
        .map(|c| {
            if c.params.is_empty() {
                c.name.clone()
            } else {
                format!("{}({})", c.name, params(&c.params))
            }
        })
        .collect();
    let _ = writeln!(out, "    constructor {{ {} }}", ctors.join(" | "));
    for f in &adt.functions {
        let _ = writeln!(out, "    {} {}({}) {{", print_type(&f.ret), f.name, params(&f.params));
        adt_body(out, &f.body, 2);
        out.push_str("    }\n");
    }
    out.push_str("}\n");
}

fn adt_body(out: &mut String, d: &AdtBody, level: usize) {
    indent(out, level);
    match d {
        AdtBody::If { cond, then, els } => {
            let _ = writeln!(out, "if ({}) {{", expr(cond, 0));
            adt_body(out, then, level + 1);
            indent(out, level);
            out.push_str("} else {\n");
            adt_body(out, els, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        AdtBody::Return(e) => {
            let _ = writeln!(out, "return {};", expr(e, 0));
        }
        AdtBody::Invoke { name, args: a } => {
            let _ = writeln!(out, "{}({});", name, args(a));
        }
        AdtBody::Switch {
            scrutinee,
            cases,
            default,
        } => {
            let _ = writeln!(out, "switch ({}) {{", expr(scrutinee, 0));
            for (pat, body) in cases {
                indent(out, level + 1);
                let _ = writeln!(out, "case {}:", pattern(pat));
                adt_body(out, body, level + 2);
            }
            if let Some(d) = default {
                indent(out, level + 1);
                out.push_str("default:\n");
                adt_body(out, d, level + 2);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        AdtBody::Let { ty, name, value, body } => {
            let _ = writeln!(out, "{} {} = {};", print_type(ty), name, expr(value, 0));
            adt_body(out, body, level);
        }
    }
}

fn pattern(p: &Pattern) -> String {
    match p {
        Pattern::Ctor { name, binders } if binders.is_empty() => name.clone(),
        Pattern::Ctor { name, binders } => format!("{}({})", name, binders.join(", ")),
        Pattern::Int(n) => n.to_string(),
        Pattern::Bool(b) => b.to_string(),
        Pattern::Str(s) => string_lit(s),
    }
}

fn print_contract(out: &mut String, c: &ContractDecl) {
    let _ = write!(out, "contract {}", c.name);
    if let Some(p) = &c.parent {
        let _ = write!(out, " extends {p}");
    }
    out.push_str(" {\n");
    for f in &c.fields {
        let irr = if f.irrelevant { "irrelevant " } else { "" };
        let _ = writeln!(out, "    {}{} {};", irr, print_type(&f.ty), f.name);
    }
    if let Some(k) = &c.constructor {
        let _ = writeln!(out, "    constructor({}) {{", params(&k.params));
        if let Some(sa) = &k.super_args {
            let _ = writeln!(out, "        super({});", args(sa));
        }
        for (f, rhs) in &k.inits {
            let _ = writeln!(out, "        this.{} = {};", f, print_rhs(rhs));
        }
        out.push_str("    }\n");
    }
    for m in &c.methods {
        let head = if m.ret == Type::Unit {
            "function".to_string()
        } else {
            print_type(&m.ret)
        };
        let _ = writeln!(out, "    {} {}({}) {{", head, m.name, params(&m.params));
        stmt_seq(out, &m.body, 2);
        out.push_str("    }\n");
    }
    out.push_str("}\n");
}

pub fn print_rhs(r: &Rhs) -> String {
    match r {
        Rhs::Expr(e) => expr(e, 0),
        Rhs::New { contract, args: a } => format!("new {}({})", contract, args(a)),
        Rhs::Invoke(inv) => print_invocation(inv),
    }
}

fn lvalue(l: &LValue) -> String {
    match l {
        LValue::Var(v) => v.clone(),
        LValue::Field(f) => format!("this.{f}"),
    }
}

/// Prints a statement sequence, one statement per line. A left operand that
/// is itself a sequence is wrapped in a block so nesting survives reparsing.
fn stmt_seq(out: &mut String, s: &Stmt, level: usize) {
    match s {
        Stmt::Seq(a, b) => {
            if matches!(**a, Stmt::Seq(..)) {
                indent(out, level);
                out.push_str("{\n");
                stmt_seq(out, a, level + 1);
                indent(out, level);
                out.push_str("}\n");
            } else {
                stmt_one(out, a, level);
            }
            stmt_seq(out, b, level);
        }
        Stmt::Skip => {}
        other => stmt_one(out, other, level),
    }
}

fn block(out: &mut String, s: &Stmt, level: usize) {
    out.push_str("{\n");
    stmt_seq(out, s, level + 1);
    indent(out, level);
    out.push('}');
}

fn stmt_one(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    stmt_inline(out, s, level);
    out.push('\n');
}

fn stmt_inline(out: &mut String, s: &Stmt, level: usize) {
    match s {
        Stmt::Skip => out.push_str("skip;"),
        Stmt::Seq(..) => block(out, s, level),
        Stmt::If { cond, then, els } => {
            let _ = write!(out, "if ({}) ", expr(cond, 0));
            block(out, then, level);
            match els.as_deref() {
                None => {}
                Some(e @ Stmt::If { .. }) => {
                    out.push_str(" else ");
                    stmt_inline(out, e, level);
                }
                Some(e) => {
                    out.push_str(" else ");
                    block(out, e, level);
                }
            }
        }
        Stmt::While { cond, body } => {
            let _ = write!(out, "while ({}) ", expr(cond, 0));
            block(out, body, level);
        }
        Stmt::Let { var, ty, rhs, body } => {
            out.push_str("let ");
            if let Some(t) = ty {
                out.push_str(&print_type(t));
                out.push(' ');
            }
            let _ = write!(out, "{} := {} in ", var, print_rhs(rhs));
            block(out, body, level);
        }
        Stmt::Assert(e) => {
            let _ = write!(out, "assert({});", expr(e, 0));
        }
        Stmt::Assign { target, rhs } => {
            let _ = write!(out, "{} = {};", lvalue(target), print_rhs(rhs));
        }
        Stmt::CallAssign { target, call } => {
            let _ = write!(out, "{} = {};", lvalue(target), print_invocation(call));
        }
        Stmt::Call(inv) => {
            let _ = write!(out, "{};", print_invocation(inv));
        }
        Stmt::Return(None) => out.push_str("return;"),
        Stmt::Return(Some(e)) => {
            let _ = write!(out, "return {};", expr(e, 0));
        }
        Stmt::Throw(e) => {
            let _ = write!(out, "throw {};", expr(e, 0));
        }
        Stmt::Try {
            target,
            call,
            abort_var,
            abort,
            success,
        } => {
            out.push_str("try ");
            if let Some(t) = target {
                let _ = write!(out, "{} = ", lvalue(t));
            }
            out.push_str(&print_invocation(call));
            out.push_str(" abort ");
            if let Some(v) = abort_var {
                let _ = write!(out, "({v}) ");
            }
            block(out, abort, level);
            out.push_str(" success ");
            block(out, success, level);
        }
    }
}

fn string_lit(s: &str) -> String {
    let mut out = String::from('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn value_atom(e: &Expr) -> String {
    match e {
        Expr::Int(n) if !n.is_negative() => n.to_string(),
        Expr::Amount => "@amount".into(),
        Expr::Var(v) => v.clone(),
        Expr::Field(f) => format!("this.{f}"),
        Expr::Sender => "sender".into(),
        other => format!("({})", expr(other, 0)),
    }
}

const OR: u8 = 1;
const AND: u8 = 2;
const CMP: u8 = 3;
const ADD: u8 = 4;
const MUL: u8 = 5;
const UNARY: u8 = 6;
const POSTFIX: u8 = 7;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Cmp(CmpOp::Or, ..) => OR,
        Expr::Cmp(CmpOp::And, ..) => AND,
        Expr::Cmp(..) => CMP,
        Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => ADD,
        Expr::Arith(..) => MUL,
        Expr::Not(_) => UNARY,
        Expr::Int(n) if n.is_negative() => UNARY,
        _ => POSTFIX,
    }
}

/// Renders `e`, parenthesizing when its precedence is below `min`.
fn expr(e: &Expr, min: u8) -> String {
    let p = precedence(e);
    let s = match e {
        Expr::Var(v) => v.clone(),
        Expr::Field(f) => format!("this.{f}"),
        Expr::Int(n) => n.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Str(s) => string_lit(s),
        Expr::This => "this".into(),
        Expr::Sender => "sender".into(),
        Expr::Amount => "@amount".into(),
        Expr::Not(inner) => format!("!{}", expr(inner, UNARY)),
        Expr::Arith(op, l, r) => {
            let sym = match op {
                ArithOp::Add => "+",
                ArithOp::Sub => "-",
                ArithOp::Mul => "*",
                ArithOp::Div => "/",
            };
            format!("{} {} {}", expr(l, p), sym, expr(r, p + 1))
        }
        Expr::Cmp(op, l, r) => {
            let sym = match op {
                CmpOp::Le => "<=",
                CmpOp::Ge => ">=",
                CmpOp::Lt => "<",
                CmpOp::Gt => ">",
                CmpOp::Eq => "==",
                CmpOp::Ne => "!=",
                CmpOp::And => "&&",
                CmpOp::Or => "||",
            };
            // comparisons do not chain, so both sides bind tighter
            let left_min = if p == CMP { p + 1 } else { p };
            format!("{} {} {}", expr(l, left_min), sym, expr(r, p + 1))
        }
        Expr::Apply { name, args: a } => format!("{}({})", name, args(a)),
        Expr::Invoke {
            receiver,
            name,
            args: a,
        } => format!("{}.{}({})", postfix_base(receiver), name, args(a)),
        Expr::Proj(base, f) => format!("{}.{}", postfix_base(base), f),
        Expr::AdtCall { adt, func, args: a } => format!("{}.{}({})", adt, func, args(a)),
        Expr::Ctor { adt, ctor, args: a } => format!("{}.{}({})", adt, ctor, args(a)),
    };
    if p < min {
        format!("({s})")
    } else {
        s
    }
}

fn postfix_base(e: &Expr) -> String {
    match e {
        // `this.f.g` would re-read `this.f` as the field; keep `this` bare
        Expr::This => "this".into(),
        _ => expr(e, POSTFIX),
    }
}
