//! Reentrance detection on configurations and traces, and the safety
//! level of a trace.

mod fuzz;

use std::fmt::{self, Write as _};

use serde::Serialize;

pub use fuzz::{fuzz_observed, fuzz_reachable, FuzzCase, FuzzOptions, FuzzReport};

use crate::interpreter::{Run, TraceEvent};
use crate::runtime::{Configuration, InstanceId};
use crate::syntax::ResolvedProgram;

/// Positions in the call chain, `0` being the active activation: `i` and
/// `j` run the same method on the same instance, and `k`, strictly
/// between them, runs on another instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Triple {
    pub i: usize,
    pub k: usize,
    pub j: usize,
}

/// Every reentrance triple of `cfg`.
pub fn detect_reentrance(cfg: &Configuration) -> Vec<Triple> {
    let chain = cfg.call_chain();
    let mut out = Vec::new();
    for j in 0..chain.len() {
        for i in 0..j {
            if chain[i] != chain[j] {
                continue;
            }
            for k in i + 1..j {
                if chain[k].0 != chain[j].0 {
                    out.push(Triple { i, k, j });
                }
            }
        }
    }
    out
}

pub fn is_reentrant(cfg: &Configuration) -> bool {
    !detect_reentrance(cfg).is_empty()
}

/// Ordered from safest to least safe; each level implies the ones after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyLevel {
    /// No reentrance at all.
    StrictSafe,
    /// Reentered activations write nothing once the reentering call is over.
    NonModifyingSafe,
    /// Such writes touch only irrelevant fields.
    ModifyingSafe,
    Unsafe,
}

impl SafetyLevel {
    /// Whether a trace at this level also has level `other`.
    pub fn satisfies(self, other: SafetyLevel) -> bool {
        other != SafetyLevel::Unsafe && self <= other
    }
}

impl fmt::Display for SafetyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SafetyLevel::StrictSafe => "strict-safe",
            SafetyLevel::NonModifyingSafe => "non-modifying-safe",
            SafetyLevel::ModifyingSafe => "modifying-safe",
            SafetyLevel::Unsafe => "unsafe",
        })
    }
}

/// A call that re-entered an activation still on the stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Trace index of the reentering `CallEnter`.
    pub at: usize,
    pub instance: InstanceId,
    pub method: String,
    /// Positions in the open-call chain, `0` being the new activation:
    /// `j` is the nearest re-entered activation, `k` the lowest one above
    /// it on another instance.
    pub i: usize,
    pub k: usize,
    pub j: usize,
    pub via: InstanceId,
    /// `instance.method` of positions `0..=j`.
    pub frames: Vec<String>,
}

/// A write to a re-entered instance after the call leading to the
/// reentrance has returned, before the re-entered activation returns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowWrite {
    pub at: usize,
    pub instance: InstanceId,
    pub field: String,
    /// Method of the re-entered activation.
    pub method: String,
    pub relevant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyVerdict {
    pub level: SafetyLevel,
    pub witnesses: Vec<Witness>,
    pub writes: Vec<WindowWrite>,
}

impl SafetyVerdict {
    /// Human-readable account of the verdict.
    pub fn explain(&self) -> String {
        let mut out = format!("{}\n", self.level);
        if self.witnesses.is_empty() {
            out.push_str("  no activation was re-entered\n");
        }
        for w in &self.witnesses {
            let _ = writeln!(out, "  event {}: {}.{} re-entered", w.at, w.instance, w.method);
            for (n, f) in w.frames.iter().enumerate() {
                let mark = match n {
                    _ if n == w.i => "  <- i",
                    _ if n == w.k => "  <- k",
                    _ if n == w.j => "  <- j",
                    _ => "",
                };
                let _ = writeln!(out, "    {n:>3}  {f}{mark}");
            }
        }
        for w in &self.writes {
            let _ = writeln!(
                out,
                "  event {}: {} field {}.{} written while {} was re-entered",
                w.at,
                if w.relevant { "relevant" } else { "irrelevant" },
                w.instance,
                w.field,
                w.method
            );
        }
        out
    }
}

struct Act {
    instance: InstanceId,
    method: String,
    /// Re-entered through the child directly above it.
    watching: bool,
    /// That child has returned.
    open: bool,
}

/// Classifies a well-bracketed trace. `irrelevant(id, field)` tells
/// which writes are allowed after a reentrance.
pub fn classify_trace(trace: &[TraceEvent], irrelevant: impl Fn(InstanceId, &str) -> bool) -> SafetyVerdict {
    let mut stack: Vec<Act> = Vec::new();
    let mut witnesses = Vec::new();
    let mut writes = Vec::new();
    for (at, ev) in trace.iter().enumerate() {
        match ev {
            TraceEvent::CallEnter { callee, method, .. } => {
                let top = stack.len();
                // scanning down: `via` is the lowest activation seen so far
                // on another instance
                let mut via = None;
                let mut reported = false;
                for j in (0..top).rev() {
                    let a = &mut stack[j];
                    if a.instance != *callee {
                        via = Some((j, a.instance));
                        continue;
                    }
                    let Some((kpos, k)) = via else { continue };
                    if a.method != *method {
                        continue;
                    }
                    a.watching = true;
                    if !reported {
                        reported = true;
                        let mut frames = vec![format!("{callee}.{method}")];
                        frames.extend(stack[j..].iter().rev().map(|a| format!("{}.{}", a.instance, a.method)));
                        witnesses.push(Witness {
                            at,
                            instance: *callee,
                            method: method.clone(),
                            i: 0,
                            k: top - kpos,
                            j: top - j,
                            via: k,
                            frames,
                        });
                    }
                }
                stack.push(Act {
                    instance: *callee,
                    method: method.clone(),
                    watching: false,
                    open: false,
                });
            }
            TraceEvent::CallReturn { .. } => {
                stack.pop();
                if let Some(parent) = stack.last_mut() {
                    if parent.watching {
                        parent.open = true;
                    }
                }
            }
            TraceEvent::FieldWrite { id, field } => {
                if let Some(a) = stack.iter().rev().find(|a| a.open && a.instance == *id) {
                    writes.push(WindowWrite {
                        at,
                        instance: *id,
                        field: field.clone(),
                        method: a.method.clone(),
                        relevant: !irrelevant(*id, field),
                    });
                }
            }
            TraceEvent::FieldRead { .. } | TraceEvent::Revert { .. } => {}
        }
    }
    let level = if witnesses.is_empty() {
        SafetyLevel::StrictSafe
    } else if writes.is_empty() {
        SafetyLevel::NonModifyingSafe
    } else if writes.iter().all(|w| !w.relevant) {
        SafetyLevel::ModifyingSafe
    } else {
        SafetyLevel::Unsafe
    };
    SafetyVerdict {
        level,
        witnesses,
        writes,
    }
}

/// Classifies a run, reading field relevance from the instance types.
pub fn classify_run(rp: &ResolvedProgram, run: &Run) -> SafetyVerdict {
    let pm = &run.config.permanent;
    let first = run.config.rollback.first();
    classify_trace(&run.trace, |id, f| {
        let ty = pm.type_of(id).or_else(|| first.and_then(|m| m.type_of(id)));
        ty.is_some_and(|c| rp.is_irrelevant(c, f))
    })
}
