//! Semantic values, memories, call frames and configurations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::syntax::ast::{decimal, LValue, Stmt, Type};
use crate::syntax::ResolvedProgram;

pub const SENDER: &str = "$sender";
pub const AMOUNT: &str = "$amount";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("instance of {contract} is missing field `{field}`")]
    MissingField { contract: String, field: String },
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error("instance {id} has no field `{field}`")]
    UnknownField { id: InstanceId, field: String },
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("revert with an empty rollback list")]
    EmptyRollback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceId(pub u64);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl Serialize for InstanceId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for InstanceId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.strip_prefix('c')
            .and_then(|n| n.parse().ok())
            .map(InstanceId)
            .ok_or_else(|| serde::de::Error::custom(format!("bad instance id {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(#[serde(with = "decimal")] BigInt),
    Bool(bool),
    Str(String),
    Address(InstanceId),
    Contract(InstanceId),
    Adt {
        adt: String,
        ctor: String,
        /// Shared, so that recursive functions over lists don't copy them.
        args: Arc<[Value]>,
    },
    Unit,
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }

    pub fn adt(adt: impl Into<String>, ctor: impl Into<String>, args: Vec<Value>) -> Value {
        Value::Adt {
            adt: adt.into(),
            ctor: ctor.into(),
            args: args.into(),
        }
    }

    /// Instance referenced by an address or contract value.
    pub fn instance(&self) -> Option<InstanceId> {
        match self {
            Value::Address(i) | Value::Contract(i) => Some(*i),
            _ => None,
        }
    }

    /// Equality as seen by programs: references compare by instance.
    pub fn same(&self, other: &Value) -> bool {
        match (self.instance(), other.instance()) {
            (Some(a), Some(b)) => a == b,
            _ => match (self, other) {
                (
                    Value::Adt { ctor, args, adt },
                    Value::Adt {
                        ctor: c2,
                        args: a2,
                        adt: d2,
                    },
                ) => {
                    adt == d2
                        && ctor == c2
                        && args.len() == a2.len()
                        && args.iter().zip(a2.iter()).all(|(x, y)| x.same(y))
                }
                _ => self == other,
            },
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Address(i) | Value::Contract(i) => write!(f, "{i}"),
            Value::Adt { ctor, args, .. } if args.is_empty() => write!(f, "{ctor}"),
            Value::Adt { ctor, args, .. } => {
                write!(f, "{ctor}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Value::Unit => write!(f, "()"),
        }
    }
}

/// Default value of a type: zero, false, empty string, the first nullary
/// constructor of a datatype, and `()` for references.
pub fn default_value(rp: &ResolvedProgram, ty: &Type) -> Value {
    match ty {
        Type::Int => Value::int(0),
        Type::Bool => Value::Bool(false),
        Type::String => Value::Str(String::new()),
        Type::Adt(a) | Type::Named(a) => rp
            .adt(a)
            .and_then(|d| d.constructors.iter().find(|c| c.params.is_empty()))
            .map(|c| Value::adt(a.clone(), c.name.clone(), Vec::new()))
            .unwrap_or(Value::Unit),
        _ => Value::Unit,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub contract: String,
    pub fields: BTreeMap<String, Value>,
}

/// Field storage of all contract instances. Cloning is cheap and never
/// shares mutations: updates copy the touched instance only.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PermanentMemory {
    next: u64,
    instances: BTreeMap<InstanceId, Arc<Instance>>,
}

impl PermanentMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = (InstanceId, &Instance)> {
        self.instances.iter().map(|(k, v)| (*k, v.as_ref()))
    }

    pub fn instance(&self, id: InstanceId) -> Result<&Instance, RuntimeError> {
        self.instances
            .get(&id)
            .map(|i| i.as_ref())
            .ok_or(RuntimeError::UnknownInstance(id))
    }

    pub fn type_of(&self, id: InstanceId) -> Option<&str> {
        self.instances.get(&id).map(|i| i.contract.as_str())
    }

    /// Allocates an instance whose field map must cover exactly the fields
    /// of `contract`, inherited ones included.
    pub fn alloc(
        &self,
        rp: &ResolvedProgram,
        contract: &str,
        fields: BTreeMap<String, Value>,
    ) -> Result<(PermanentMemory, InstanceId), RuntimeError> {
        let mut pm = self.clone();
        let id = pm.alloc_in_place(rp, contract, fields)?;
        Ok((pm, id))
    }

    pub fn alloc_in_place(
        &mut self,
        rp: &ResolvedProgram,
        contract: &str,
        fields: BTreeMap<String, Value>,
    ) -> Result<InstanceId, RuntimeError> {
        if rp.contract(contract).is_none() {
            return Err(RuntimeError::UnknownContract(contract.to_string()));
        }
        let declared = rp.fields(contract);
        for d in declared {
            if !fields.contains_key(&d.name) {
                return Err(RuntimeError::MissingField {
                    contract: contract.to_string(),
                    field: d.name.clone(),
                });
            }
        }
        let id = InstanceId(self.next + 1);
        if let Some(extra) = fields.keys().find(|k| !declared.iter().any(|d| &d.name == *k)) {
            return Err(RuntimeError::UnknownField {
                id,
                field: extra.clone(),
            });
        }
        self.next += 1;
        self.instances.insert(
            id,
            Arc::new(Instance {
                contract: contract.to_string(),
                fields,
            }),
        );
        Ok(id)
    }

    pub fn read(&self, id: InstanceId, field: &str) -> Result<&Value, RuntimeError> {
        self.instance(id)?
            .fields
            .get(field)
            .ok_or_else(|| RuntimeError::UnknownField {
                id,
                field: field.to_string(),
            })
    }

    /// Returns a new memory differing from `self` only at `(id, field)`.
    pub fn write(&self, id: InstanceId, field: &str, v: Value) -> Result<PermanentMemory, RuntimeError> {
        let mut pm = self.clone();
        pm.write_in_place(id, field, v)?;
        Ok(pm)
    }

    pub fn write_in_place(&mut self, id: InstanceId, field: &str, v: Value) -> Result<(), RuntimeError> {
        let inst = self.instances.get_mut(&id).ok_or(RuntimeError::UnknownInstance(id))?;
        let slot = Arc::make_mut(inst)
            .fields
            .get_mut(field)
            .ok_or_else(|| RuntimeError::UnknownField {
                id,
                field: field.to_string(),
            })?;
        *slot = v;
        Ok(())
    }

    /// Canonical JSON text; equal memories give identical strings.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("memory serializes")
    }
}

/// Local variables of one method activation, plus the reserved `$sender`
/// and `$amount` bindings.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VolatileMemory(BTreeMap<String, Value>);

impl VolatileMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &str) -> Option<&Value> {
        self.0.get(x)
    }

    pub fn set(&mut self, x: impl Into<String>, v: Value) {
        self.0.insert(x.into(), v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn sender(&self) -> Option<InstanceId> {
        self.get(SENDER).and_then(Value::instance)
    }

    pub fn amount(&self) -> BigInt {
        match self.get(AMOUNT) {
            Some(Value::Int(n)) => n.clone(),
            _ => BigInt::from(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRef {
    pub contract: String,
    pub name: String,
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.contract, self.name)
    }
}

/// Pending statements, next one last. Sequences are flattened and `skip`
/// dropped on push.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Continuation(Vec<Stmt>);

impl Continuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(s: Stmt) -> Self {
        let mut k = Self::new();
        k.push(s);
        k
    }

    /// Makes `s` the next statement to run.
    pub fn push(&mut self, s: Stmt) {
        match s {
            Stmt::Skip => {}
            Stmt::Seq(a, b) => {
                self.push(*b);
                self.push(*a);
            }
            other => self.0.push(other),
        }
    }

    pub fn pop(&mut self) -> Option<Stmt> {
        self.0.pop()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Statements in execution order.
    pub fn statements(&self) -> impl Iterator<Item = &Stmt> {
        self.0.iter().rev()
    }

    pub fn to_stmt(&self) -> Stmt {
        Stmt::seq(self.statements().cloned().collect())
    }
}

impl Serialize for Continuation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let stmts: Vec<String> = self.statements().map(crate::syntax::print_stmt).collect();
        stmts.serialize(s)
    }
}

/// How a suspended frame resumes once its callee finishes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Handler {
    /// `try ... abort (x) {abort} success {success}`
    Try {
        abort_var: Option<String>,
        #[serde(serialize_with = "ser_stmt")]
        abort: Box<Stmt>,
        #[serde(serialize_with = "ser_stmt")]
        success: Box<Stmt>,
    },
    /// External call outside `try`: success continues, failure propagates.
    Rethrow,
}

fn ser_stmt<S: Serializer>(st: &Stmt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&crate::syntax::print_stmt(st))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// `this.m(..)` without a transaction.
    Internal {
        target: Option<LValue>,
    },
    Transaction {
        target: Option<LValue>,
        handler: Handler,
    },
}

/// A suspended caller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub contract: InstanceId,
    pub saved_volatile: VolatileMemory,
    pub method: MethodRef,
    pub continuation: Continuation,
    pub kind: FrameKind,
}

impl Frame {
    pub fn is_transaction(&self) -> bool {
        matches!(self.kind, FrameKind::Transaction { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub active: InstanceId,
    /// Suspended callers, most recent last.
    pub stack: Vec<Frame>,
    pub volatile: VolatileMemory,
    pub permanent: PermanentMemory,
    /// Snapshots of permanent memory, most recent last.
    pub rollback: Vec<PermanentMemory>,
    pub method: MethodRef,
    pub continuation: Continuation,
}

impl Configuration {
    /// Pushes the current permanent memory onto the rollback list.
    pub fn snapshot(&mut self) {
        self.rollback.push(self.permanent.clone());
    }

    /// Pops the most recent snapshot and installs it.
    pub fn revert(&mut self) -> Result<(), RuntimeError> {
        let pm = self.rollback.pop().ok_or(RuntimeError::EmptyRollback)?;
        self.permanent = pm;
        Ok(())
    }

    /// `(instance, method)` of every activation, the active one first.
    pub fn call_chain(&self) -> Vec<(InstanceId, MethodRef)> {
        let mut out = vec![(self.active, self.method.clone())];
        for f in self.stack.iter().rev() {
            out.push((f.contract, f.method.clone()));
        }
        out
    }

    pub fn open_transactions(&self) -> usize {
        self.stack.iter().filter(|f| f.is_transaction()).count()
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            active: InstanceId,
            method: &'a MethodRef,
            continuation: &'a Continuation,
            volatile: &'a VolatileMemory,
            permanent: &'a PermanentMemory,
            stack: Vec<&'a Frame>,
            rollback: Vec<&'a PermanentMemory>,
        }
        View {
            active: self.active,
            method: &self.method,
            continuation: &self.continuation,
            volatile: &self.volatile,
            permanent: &self.permanent,
            stack: self.stack.iter().rev().collect(),
            rollback: self.rollback.iter().rev().collect(),
        }
        .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, resolve};

    fn program() -> ResolvedProgram {
        resolve(&parse_program("contract A { int x; int y; } contract B extends A { bool z; }").unwrap()).unwrap()
    }

    fn a_fields(x: i64) -> BTreeMap<String, Value> {
        [
            ("x".to_string(), Value::int(x)),
            ("y".to_string(), Value::int(0)),
            ("balance".to_string(), Value::int(0)),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn alloc_gives_fresh_ids() {
        let rp = program();
        let pm = PermanentMemory::new();
        let (pm1, a) = pm.alloc(&rp, "A", a_fields(1)).unwrap();
        let (pm2, b) = pm1.alloc(&rp, "A", a_fields(2)).unwrap();
        assert_ne!(a, b);
        assert_eq!(pm.len(), 0);
        assert_eq!(pm1.len(), 1);
        assert_eq!(pm2.len(), 2);
    }

    #[test]
    fn alloc_requires_inherited_fields() {
        let rp = program();
        let mut f = BTreeMap::new();
        f.insert("z".to_string(), Value::Bool(true));
        let err = PermanentMemory::new().alloc(&rp, "B", f).unwrap_err();
        assert!(matches!(err, RuntimeError::MissingField { .. }));
    }

    #[test]
    fn store_and_frame_axioms() {
        let rp = program();
        let (pm, a) = PermanentMemory::new().alloc(&rp, "A", a_fields(1)).unwrap();
        let pm2 = pm.write(a, "x", Value::int(9)).unwrap();
        assert_eq!(pm2.read(a, "x").unwrap(), &Value::int(9));
        assert_eq!(pm2.read(a, "y").unwrap(), &Value::int(0));
        assert_eq!(pm.read(a, "x").unwrap(), &Value::int(1));
    }

    #[test]
    fn unknown_instance_and_field() {
        let rp = program();
        let (pm, a) = PermanentMemory::new().alloc(&rp, "A", a_fields(1)).unwrap();
        assert!(matches!(
            pm.read(InstanceId(99), "x"),
            Err(RuntimeError::UnknownInstance(_))
        ));
        assert!(matches!(pm.read(a, "q"), Err(RuntimeError::UnknownField { .. })));
        assert!(matches!(
            pm.write(a, "q", Value::Unit),
            Err(RuntimeError::UnknownField { .. })
        ));
    }

    fn config(pm: PermanentMemory, id: InstanceId) -> Configuration {
        Configuration {
            active: id,
            stack: Vec::new(),
            volatile: VolatileMemory::new(),
            permanent: pm,
            rollback: Vec::new(),
            method: MethodRef {
                contract: "A".into(),
                name: "m".into(),
            },
            continuation: Continuation::new(),
        }
    }

    #[test]
    fn snapshot_write_revert_restores() {
        let rp = program();
        let (pm, a) = PermanentMemory::new().alloc(&rp, "A", a_fields(1)).unwrap();
        let mut cfg = config(pm.clone(), a);
        cfg.snapshot();
        cfg.permanent.write_in_place(a, "x", Value::int(5)).unwrap();
        cfg.revert().unwrap();
        assert_eq!(cfg.permanent, pm);
        assert!(matches!(cfg.revert(), Err(RuntimeError::EmptyRollback)));
    }

    #[test]
    fn nested_snapshots_revert_one_level() {
        let rp = program();
        let (pm, a) = PermanentMemory::new().alloc(&rp, "A", a_fields(1)).unwrap();
        let mut cfg = config(pm, a);
        cfg.snapshot();
        cfg.permanent.write_in_place(a, "x", Value::int(2)).unwrap();
        let inner = cfg.permanent.clone();
        cfg.snapshot();
        cfg.permanent.write_in_place(a, "x", Value::int(3)).unwrap();
        cfg.revert().unwrap();
        assert_eq!(cfg.permanent, inner);
        assert_eq!(cfg.rollback.len(), 1);
    }

    #[test]
    fn continuation_flattens_sequences() {
        let s = Stmt::seq(vec![
            Stmt::Skip,
            Stmt::seq(vec![Stmt::Return(None), Stmt::Skip]),
            Stmt::Assert(crate::syntax::Expr::Bool(true)),
        ]);
        let mut k = Continuation::of(s);
        assert_eq!(k.len(), 2);
        assert_eq!(k.pop(), Some(Stmt::Return(None)));
    }

    #[test]
    fn instance_ids_serialize_as_strings() {
        assert_eq!(serde_json::to_string(&InstanceId(3)).unwrap(), "\"c3\"");
        let v: Value = serde_json::from_str(r#"{"address":"c3"}"#).unwrap();
        assert_eq!(v, Value::Address(InstanceId(3)));
        assert_eq!(serde_json::to_string(&Value::int(-4)).unwrap(), r#"{"int":"-4"}"#);
    }
}
