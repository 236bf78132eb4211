//! Random exploration of reachable states: deploy every contract, then
//! call random methods with random arguments, senders and amounts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{classify_run, SafetyLevel, SafetyVerdict};
use crate::interpreter::{exec_constructor, initial_config, run, run_observed, Outcome, StepResult};
use crate::runtime::{Configuration, InstanceId, PermanentMemory, Value};
use crate::syntax::ast::Type;
use crate::syntax::ResolvedProgram;

#[derive(Debug, Clone, Copy)]
pub struct FuzzOptions {
    pub seed: u64,
    /// Number of traces to run.
    pub budget: usize,
    /// Step limit per trace.
    pub fuel: u64,
}

impl Default for FuzzOptions {
    fn default() -> Self {
        FuzzOptions {
            seed: 0,
            budget: 100,
            fuel: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzCase {
    pub entry: InstanceId,
    pub contract: String,
    pub method: String,
    pub args: Vec<Value>,
    pub sender: InstanceId,
    pub amount: i64,
    pub outcome: Outcome,
    pub steps: u64,
    pub verdict: SafetyVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzReport {
    pub seed: u64,
    pub deployed: Vec<(InstanceId, String)>,
    pub cases: Vec<FuzzCase>,
    /// Least safe level seen; strict-safe when nothing ran.
    pub worst: SafetyLevel,
}

impl FuzzReport {
    pub fn first_at(&self, level: SafetyLevel) -> Option<&FuzzCase> {
        self.cases.iter().find(|c| c.verdict.level == level)
    }
}

struct Gen<'a> {
    rp: &'a ResolvedProgram,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn instances(&self, pm: &PermanentMemory, of: Option<&str>) -> Vec<InstanceId> {
        pm.instances()
            .filter(|(_, inst)| of.is_none_or(|c| self.rp.is_subcontract(&inst.contract, c)))
            .map(|(id, _)| id)
            .collect()
    }

    fn value(&mut self, pm: &PermanentMemory, ty: &Type, depth: usize) -> Value {
        match ty {
            Type::Int => Value::int(self.rng.gen_range(-2..=5)),
            Type::Bool => Value::Bool(self.rng.gen()),
            Type::String => Value::Str(["", "a", "b"].choose(&mut self.rng).unwrap().to_string()),
            Type::Unit | Type::Stm | Type::Named(_) => Value::Unit,
            Type::Address => match self.instances(pm, None).choose(&mut self.rng) {
                Some(id) => Value::Address(*id),
                None => Value::Unit,
            },
            Type::Contract(c) => match self.instances(pm, Some(c)).choose(&mut self.rng) {
                Some(id) => Value::Contract(*id),
                None => Value::Unit,
            },
            Type::Adt(a) => {
                let Some(decl) = self.rp.adt(a) else {
                    return Value::Unit;
                };
                let leaves: Vec<_> = decl.constructors.iter().filter(|c| c.params.is_empty()).collect();
                let ctor = if depth == 0 && !leaves.is_empty() {
                    *leaves.choose(&mut self.rng).unwrap()
                } else {
                    decl.constructors
                        .choose(&mut self.rng)
                        .expect("datatype without constructors")
                };
                let args: Vec<Value> = ctor
                    .params
                    .iter()
                    .map(|p| self.value(pm, &p.ty, depth.saturating_sub(1)))
                    .collect();
                Value::adt(a.clone(), ctor.name.clone(), args)
            }
        }
    }
}

/// Runs exactly `opts.budget` random calls, each starting from the state
/// the previous one left behind.
pub fn fuzz_reachable(rp: &ResolvedProgram, opts: FuzzOptions) -> FuzzReport {
    fuzz_inner(rp, opts, None)
}

/// Like [`fuzz_reachable`], calling `observe(before, result)` after every
/// step of every trace.
pub fn fuzz_observed(
    rp: &ResolvedProgram,
    opts: FuzzOptions,
    mut observe: impl FnMut(&Configuration, &StepResult),
) -> FuzzReport {
    fuzz_inner(rp, opts, Some(&mut observe))
}

type Observer<'a> = &'a mut dyn FnMut(&Configuration, &StepResult);

fn fuzz_inner(rp: &ResolvedProgram, opts: FuzzOptions, mut observe: Option<Observer>) -> FuzzReport {
    let mut g = Gen {
        rp,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
    };
    let mut pm = PermanentMemory::new();
    for c in rp.contract_names().collect::<Vec<_>>() {
        let args = rp
            .constructor_params(c)
            .iter()
            .map(|p| g.value(&pm, &p.ty, 2))
            .collect();
        let mut next = pm.clone();
        if exec_constructor(rp, &mut next, c, args, None).is_ok() {
            pm = next;
        }
    }
    let deployed = pm.instances().map(|(id, i)| (id, i.contract.clone())).collect();
    let mut cases = Vec::with_capacity(opts.budget);
    let mut worst = SafetyLevel::StrictSafe;
    let entries: Vec<InstanceId> = g
        .instances(&pm, None)
        .into_iter()
        .filter(|id| !rp.visible_methods(pm.type_of(*id).unwrap()).is_empty())
        .collect();
    if entries.is_empty() {
        return FuzzReport {
            seed: opts.seed,
            deployed,
            cases,
            worst,
        };
    }
    while cases.len() < opts.budget {
        let entry = *entries.choose(&mut g.rng).unwrap();
        let contract = pm.type_of(entry).unwrap().to_string();
        let methods = rp.visible_methods(&contract);
        let decl = *methods.choose(&mut g.rng).unwrap();
        let args: Vec<Value> = decl.params.iter().map(|p| g.value(&pm, &p.ty, 3)).collect();
        let all = g.instances(&pm, None);
        let sender = *all.choose(&mut g.rng).unwrap();
        let amount = if g.rng.gen_bool(0.7) { 0 } else { g.rng.gen_range(1..=3) };
        let cfg = initial_config(rp, pm.clone(), entry, &decl.name, args.clone(), sender, amount)
            .expect("entry method exists with matching arity");
        let r = match observe.as_mut() {
            Some(obs) => run_observed(rp, cfg, opts.fuel, |c, s| obs(c, s)),
            None => run(rp, cfg, opts.fuel),
        }
        .expect("fuel is positive");
        let verdict = classify_run(rp, &r);
        worst = worst.max(verdict.level);
        pm = match r.outcome {
            Outcome::Terminated { .. } | Outcome::Aborted { .. } => r.config.permanent.clone(),
            Outcome::Stuck { .. } | Outcome::FuelExhausted => pm,
        };
        cases.push(FuzzCase {
            entry,
            contract,
            method: decl.name.clone(),
            args,
            sender,
            amount,
            outcome: r.outcome,
            steps: r.steps,
            verdict,
        });
    }
    FuzzReport {
        seed: opts.seed,
        deployed,
        cases,
        worst,
    }
}
