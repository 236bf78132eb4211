//! Lock-and-alias type system for modifying-reentrance safety.
//!
//! A judgment threads a context `(Γ; Δ; Θ; Σ)` through a method body:
//! `Γ` types locals, `Δ` holds locked `⟨identity, method⟩` pairs, `Θ`
//! over-approximates which contract identities a contract-typed local
//! may hold, and `Σ` is the multiset of field accesses still pending in
//! the body.

mod check;
mod expr;
mod locs;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

pub use check::{check_configuration, check_contract, check_program, definitely_returns, CheckOptions, Checker};
pub use expr::{type_value, TypeError};
pub use locs::{locs_expr, locs_stmt};

use crate::syntax::ast::Type;
use crate::syntax::ResolvedProgram;

/// A symbolic contract identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// One fresh identity standing for the instance under check.
    Id { id: u32, contract: String },
    /// Every identity of the named contract type and its subtypes.
    Any(String),
}

impl Atom {
    pub fn contract(&self) -> &str {
        match self {
            Atom::Id { contract, .. } | Atom::Any(contract) => contract,
        }
    }

    /// Whether a runtime instance can be described by both atoms.
    pub fn may_alias(&self, other: &Atom, rp: &ResolvedProgram) -> bool {
        match (self, other) {
            (Atom::Id { id: a, .. }, Atom::Id { id: b, .. }) => a == b,
            (Atom::Id { contract: c, .. }, Atom::Any(d)) | (Atom::Any(d), Atom::Id { contract: c, .. }) => {
                rp.is_subcontract(c, d)
            }
            // single inheritance: a common subtype exists iff one extends the other
            (Atom::Any(c), Atom::Any(d)) => rp.is_subcontract(c, d) || rp.is_subcontract(d, c),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Id { id, contract } => write!(f, "ι{id}:{contract}"),
            Atom::Any(c) => write!(f, "Top({c})"),
        }
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A set of identities a location may hold.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct AliasSet(pub BTreeSet<Atom>);

impl AliasSet {
    pub fn one(a: Atom) -> Self {
        AliasSet(BTreeSet::from([a]))
    }

    pub fn top(contract: &str) -> Self {
        AliasSet::one(Atom::Any(contract.to_string()))
    }

    pub fn union(&self, other: &AliasSet) -> AliasSet {
        AliasSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }
}

impl fmt::Display for AliasSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// A locked method on one identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Lock {
    pub atom: Atom,
    pub method: String,
}

impl fmt::Display for Lock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}, {}⟩", self.atom, self.method)
    }
}

/// A permanent-memory location `(identity, field)`.
pub type Loc = (Atom, String);

/// Multiset of locations with positive multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Multiset(BTreeMap<Loc, usize>);

impl Multiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, loc: Loc, n: usize) {
        if n > 0 {
            *self.0.entry(loc).or_default() += n;
        }
    }

    pub fn extend(&mut self, other: &Multiset) {
        for (l, n) in &other.0 {
            self.add(l.clone(), *n);
        }
    }

    pub fn plus(mut self, other: &Multiset) -> Multiset {
        self.extend(other);
        self
    }

    /// Multiset difference, flooring at zero.
    pub fn minus(&self, other: &Multiset) -> Multiset {
        let mut out = self.clone();
        for (l, n) in &other.0 {
            if let Some(m) = out.0.get_mut(l) {
                if *m <= *n {
                    out.0.remove(l);
                } else {
                    *m -= n;
                }
            }
        }
        out
    }

    pub fn count(&self, loc: &Loc) -> usize {
        self.0.get(loc).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Loc, usize)> {
        self.0.iter().map(|(l, n)| (l, *n))
    }

    pub fn support(&self) -> BTreeSet<Loc> {
        self.0.keys().cloned().collect()
    }

    /// Every location is an irrelevant field of `contract`.
    pub fn within_irrelevant(&self, rp: &ResolvedProgram, contract: &str) -> bool {
        self.0.keys().all(|(_, f)| rp.is_irrelevant(contract, f))
    }
}

impl Serialize for Multiset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|((a, f), n)| (format!("({a}, {f})"), n)))
    }
}

pub type Gamma = BTreeMap<String, Type>;
pub type Delta = BTreeSet<Lock>;
pub type Theta = BTreeMap<String, AliasSet>;

/// Typing context `(Γ; Δ; Θ; Σ)`. `Θ` covers contract-typed locals;
/// fields always map to the top set of their type.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Ctx {
    pub gamma: Gamma,
    pub delta: Delta,
    pub theta: Theta,
    pub sigma: Multiset,
}

impl Ctx {
    /// Pointwise join of `Γ`, `Δ` and `Θ`; `Σ` is taken from `self`.
    pub fn join(&self, other: &Ctx) -> Ctx {
        let mut gamma = self.gamma.clone();
        for (k, v) in &other.gamma {
            gamma.entry(k.clone()).or_insert_with(|| v.clone());
        }
        let mut theta = self.theta.clone();
        for (k, v) in &other.theta {
            let e = theta.entry(k.clone()).or_default();
            *e = e.union(v);
        }
        Ctx {
            gamma,
            delta: self.delta.union(&other.delta).cloned().collect(),
            theta,
            sigma: self.sigma.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    Rejected,
}

/// Why a judgment could not be derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    /// Method whose body contains the failing statement, as `C.m`.
    pub at: String,
    pub rule: String,
    pub statement: String,
    pub message: String,
    /// Locked pair hit by a call, if that was the cause.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conflict: Option<Lock>,
    /// Method checks entered on the way, outermost first.
    pub path: Vec<String>,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: [{}] {}: {}", self.at, self.rule, self.statement, self.message)?;
        if self.path.len() > 1 {
            write!(f, " (via {})", self.path.join(" → "))?;
        }
        Ok(())
    }
}

/// One rule application in a derivation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Derivation {
    pub rule: String,
    pub subject: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub premises: Vec<Derivation>,
}

impl Derivation {
    /// Indented rule tree, conclusion first.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(0, &mut out);
        out
    }

    fn render_into(&self, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push('[');
        out.push_str(&self.rule);
        out.push_str("] ");
        out.push_str(&self.subject);
        out.push('\n');
        for p in &self.premises {
            p.render_into(depth + 1, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub contract: String,
    pub verdict: Verdict,
    pub failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivation: Option<Derivation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgramReport {
    pub verdict: Verdict,
    pub contracts: Vec<CheckReport>,
}

impl ProgramReport {
    pub fn is_ok(&self) -> bool {
        self.verdict == Verdict::Ok
    }
}
