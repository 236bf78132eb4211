//! Value typing `Γ ⊢ e : τ`.

use serde::Serialize;

use super::Gamma;
use crate::syntax::ast::{CmpOp, Expr, Type};
use crate::syntax::{print_expr, ResolvedProgram};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{0}")]
pub struct TypeError(pub String);

fn mismatch(e: &Expr, want: &str, got: &Type) -> TypeError {
    TypeError(format!("`{}` has type {}, expected {want}", print_expr(e), show(got)))
}

pub(super) fn show(t: &Type) -> String {
    crate::syntax::pretty::print_type(t)
}

/// Types `e` inside a method of `contract`.
pub fn type_value(rp: &ResolvedProgram, contract: &str, gamma: &Gamma, e: &Expr) -> Result<Type, TypeError> {
    let ty = |x: &Expr| type_value(rp, contract, gamma, x);
    let expect = |x: &Expr, want: Type| -> Result<(), TypeError> {
        let got = ty(x)?;
        if rp.is_subtype(&got, &want) {
            Ok(())
        } else {
            Err(mismatch(x, &show(&want), &got))
        }
    };
    match e {
        Expr::Var(x) => gamma
            .get(x)
            .cloned()
            .ok_or_else(|| TypeError(format!("unbound variable `{x}`"))),
        Expr::Field(f) => rp
            .field(contract, f)
            .map(|d| d.ty.clone())
            .ok_or_else(|| TypeError(format!("{contract} has no field `{f}`"))),
        Expr::Int(_) | Expr::Amount => Ok(Type::Int),
        Expr::Bool(_) => Ok(Type::Bool),
        Expr::Str(_) => Ok(Type::String),
        Expr::This => Ok(Type::Contract(contract.to_string())),
        Expr::Sender => Ok(Type::Address),
        Expr::Not(x) => {
            expect(x, Type::Bool)?;
            Ok(Type::Bool)
        }
        Expr::Arith(_, l, r) => {
            expect(l, Type::Int)?;
            expect(r, Type::Int)?;
            Ok(Type::Int)
        }
        Expr::Cmp(op, l, r) => {
            match op {
                CmpOp::And | CmpOp::Or => {
                    expect(l, Type::Bool)?;
                    expect(r, Type::Bool)?;
                }
                CmpOp::Le | CmpOp::Ge | CmpOp::Lt | CmpOp::Gt => {
                    expect(l, Type::Int)?;
                    expect(r, Type::Int)?;
                }
                CmpOp::Eq | CmpOp::Ne => {
                    let (a, b) = (ty(l)?, ty(r)?);
                    if !rp.is_subtype(&a, &b) && !rp.is_subtype(&b, &a) {
                        return Err(TypeError(format!("cannot compare {} with {}", show(&a), show(&b))));
                    }
                }
            }
            Ok(Type::Bool)
        }
        Expr::AdtCall { adt, func, args } => {
            let f = rp
                .adt(adt)
                .and_then(|a| a.function(func))
                .ok_or_else(|| TypeError(format!("unknown function {adt}.{func}")))?;
            if f.params.len() != args.len() {
                return Err(TypeError(format!("{adt}.{func} expects {} arguments", f.params.len())));
            }
            for (p, a) in f.params.iter().zip(args) {
                expect(a, p.ty.clone())?;
            }
            Ok(f.ret.clone())
        }
        Expr::Ctor { adt, ctor, args } => {
            let c = rp
                .adt(adt)
                .and_then(|a| a.ctor(ctor))
                .ok_or_else(|| TypeError(format!("unknown constructor {adt}.{ctor}")))?;
            if c.params.len() != args.len() {
                return Err(TypeError(format!("{ctor} expects {} arguments", c.params.len())));
            }
            for (p, a) in c.params.iter().zip(args) {
                expect(a, p.ty.clone())?;
            }
            Ok(Type::Adt(adt.clone()))
        }
        Expr::Proj(base, f) => {
            let bt = ty(base)?;
            let Type::Adt(a) = &bt else {
                return Err(mismatch(base, "a datatype", &bt));
            };
            rp.adt(a)
                .into_iter()
                .flat_map(|d| d.constructors.iter())
                .flat_map(|c| c.params.iter())
                .find(|p| &p.name == f)
                .map(|p| p.ty.clone())
                .ok_or_else(|| TypeError(format!("no constructor of {a} has argument `{f}`")))
        }
        Expr::Apply { name, .. } | Expr::Invoke { name, .. } => {
            Err(TypeError(format!("unresolved application `{name}`")))
        }
    }
}
