//! Abstract syntax of SmartML programs.
//!
//! The parser produces these nodes directly. Name resolution rewrites a few
//! of them into their resolved forms (`Expr::Field`, `Expr::AdtCall`,
//! `Expr::Ctor`, `Type::Adt`, `Type::Contract`), so one tree type serves
//! both stages.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Program {
    pub adts: Vec<AdtDecl>,
    pub contracts: Vec<ContractDecl>,
}

impl Program {
    pub fn contract(&self, name: &str) -> Option<&ContractDecl> {
        self.contracts.iter().find(|c| c.name == name)
    }

    pub fn adt(&self, name: &str) -> Option<&AdtDecl> {
        self.adts.iter().find(|a| a.name == name)
    }

    /// Concatenates two programs into one namespace.
    pub fn merge(mut self, other: Program) -> Program {
        self.adts.extend(other.adts);
        self.contracts.extend(other.contracts);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    String,
    Address,
    /// Return type of `function` methods that produce no value.
    Unit,
    Stm,
    /// A type name the parser could not classify yet.
    Named(String),
    Adt(String),
    Contract(String),
}

impl Type {
    pub fn name(&self) -> Option<&str> {
        match self {
            Type::Named(n) | Type::Adt(n) | Type::Contract(n) => Some(n),
            _ => None,
        }
    }

    pub fn contract_name(&self) -> Option<&str> {
        match self {
            Type::Contract(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: Type) -> Self {
        Param { name: name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdtDecl {
    pub name: String,
    pub constructors: Vec<AdtCtor>,
    pub functions: Vec<AdtFunction>,
}

impl AdtDecl {
    pub fn ctor(&self, name: &str) -> Option<&AdtCtor> {
        self.constructors.iter().find(|c| c.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&AdtFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdtCtor {
    pub name: String,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdtFunction {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: AdtBody,
}

/// ADT expressions: the functional body language of datatype functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdtBody {
    If {
        cond: Expr,
        then: Box<AdtBody>,
        els: Box<AdtBody>,
    },
    Return(Expr),
    /// Bare function invocation `n(w);`, whose result is the result of the body.
    Invoke {
        name: String,
        args: Vec<Expr>,
    },
    Switch {
        scrutinee: Expr,
        cases: Vec<(Pattern, AdtBody)>,
        default: Option<Box<AdtBody>>,
    },
    /// `τ x = e; d`
    Let {
        ty: Type,
        name: String,
        value: Expr,
        body: Box<AdtBody>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Ctor { name: String, binders: Vec<String> },
    Int(#[serde(with = "decimal")] BigInt),
    Bool(bool),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractDecl {
    pub name: String,
    pub parent: Option<String>,
    pub fields: Vec<FieldDecl>,
    pub constructor: Option<ConstructorDecl>,
    pub methods: Vec<MethodDecl>,
}

impl ContractDecl {
    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Type,
    pub irrelevant: bool,
}

/// `constructor(params) { [super(args);] this.f = rhs; ... }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructorDecl {
    pub params: Vec<Param>,
    pub super_args: Option<Vec<Expr>>,
    pub inits: Vec<(String, Rhs)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Field(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Receiver {
    This,
    Sender,
    /// A bare identifier before resolution, a local variable after.
    Var(String),
    Field(String),
}

/// `receiver[$value].method(args)`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub receiver: Receiver,
    pub value: Option<Expr>,
    pub method: String,
    pub args: Vec<Expr>,
}

impl Invocation {
    pub fn is_internal(&self) -> bool {
        matches!(self.receiver, Receiver::This) && self.value.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rhs {
    Expr(Expr),
    New {
        contract: String,
        args: Vec<Expr>,
    },
    /// A contract call as the initializer of a `let`. Resolution turns calls
    /// on datatype values into `Expr`; contract calls stay.
    Invoke(Invocation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stmt {
    Skip,
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    Let {
        var: String,
        ty: Option<Type>,
        rhs: Rhs,
        body: Box<Stmt>,
    },
    Assert(Expr),
    Assign {
        target: LValue,
        rhs: Rhs,
    },
    CallAssign {
        target: LValue,
        call: Invocation,
    },
    Call(Invocation),
    Return(Option<Expr>),
    Throw(Expr),
    Try {
        target: Option<LValue>,
        call: Invocation,
        abort_var: Option<String>,
        abort: Box<Stmt>,
        success: Box<Stmt>,
    },
    Seq(Box<Stmt>, Box<Stmt>),
}

impl Stmt {
    /// Right-nested sequence of `stmts`; `Skip` when empty.
    pub fn seq(stmts: Vec<Stmt>) -> Stmt {
        let mut iter = stmts.into_iter().rev();
        match iter.next() {
            None => Stmt::Skip,
            Some(last) => iter.fold(last, |acc, s| Stmt::Seq(Box::new(s), Box::new(acc))),
        }
    }

    /// Flattens nested sequences into program order.
    pub fn flatten(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        fn go<'a>(s: &'a Stmt, out: &mut Vec<&'a Stmt>) {
            match s {
                Stmt::Seq(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Le,
    Ge,
    Lt,
    Gt,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Var(String),
    /// `this.f`
    Field(String),
    Int(#[serde(with = "decimal")] BigInt),
    Bool(bool),
    Str(String),
    This,
    Sender,
    Amount,
    Not(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    /// `f(args)`: an ADT function or constructor, unresolved.
    Apply {
        name: String,
        args: Vec<Expr>,
    },
    /// `r.f(args)` in expression position, unresolved.
    Invoke {
        receiver: Box<Expr>,
        name: String,
        args: Vec<Expr>,
    },
    /// Constructor-argument projection `e.f` on ADT values.
    Proj(Box<Expr>, String),
    AdtCall {
        adt: String,
        func: String,
        args: Vec<Expr>,
    },
    Ctor {
        adt: String,
        ctor: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Int(BigInt::from(n))
    }
}

/// Serializes arbitrary-precision integers as decimal strings.
pub mod decimal {
    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}
