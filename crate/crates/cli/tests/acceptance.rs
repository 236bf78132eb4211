//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value as Json;

use smartml::interpreter::{eval_adt, Outcome, StepResult, TraceEvent};
use smartml::monitor::{fuzz_observed, fuzz_reachable, FuzzOptions, SafetyLevel};
use smartml::progen::{generate, ProgenOptions};
use smartml::runtime::{Configuration, Value};
use smartml::syntax::{parse_program, pretty_print, resolve, ResolvedProgram};
use smartml::typesys::{check_configuration, check_program, locs_stmt, AliasSet, Atom, CheckOptions};

const CORPUS_SEEDS: u64 = 240;

fn corpus_dir() -> String {
    format!("{}/../core/corpus", env!("CARGO_MANIFEST_DIR"))
}

fn corpus(name: &str) -> String {
    format!("{}/{name}", corpus_dir())
}

fn smartml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smartml"))
        .args(args)
        .env("SMARTML_COLOR", "0")
        .output()
        .unwrap()
}

fn json(o: &Output) -> Json {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn load(src: &str) -> ResolvedProgram {
    resolve(&parse_program(src).unwrap()).unwrap()
}

/// The generated corpus, split into (seed, program, accepted).
fn generated() -> Vec<(u64, ResolvedProgram, bool)> {
    (0..CORPUS_SEEDS)
        .map(|seed| {
            let rp = load(&generate(seed, &ProgenOptions::default()));
            let ok = check_program(&rp, CheckOptions::default()).is_ok();
            (seed, rp, ok)
        })
        .collect()
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    if t < limit {
        Ok(())
    } else {
        Err(format!("took {t:?}, limit {limit:?}"))
    }
}

/// Criterion 1: the Store/Attacker program is rejected at the call in
/// `Attacker.receive`, on a locked `transfer` of a Store identity.
fn case_study_rejection() -> Result<String, String> {
    let start = Instant::now();
    let o = smartml(&["check", &corpus("store_attacker.sml"), "--format", "json"]);
    within(start, Duration::from_secs(1))?;
    if o.status.code() != Some(1) {
        return Err(format!("exit {:?}", o.status.code()));
    }
    let report = json(&o);
    let hit = report["contracts"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| c["failures"].as_array().unwrap())
        .find(|f| {
            f["at"] == "Attacker.receive"
                && f["rule"] == "Call"
                && f["conflict"]["method"] == "transfer"
                && f["conflict"]["atom"].to_string().contains("Store")
        });
    match hit {
        Some(f) => Ok(format!("rejected at {} on {}", f["at"], f["conflict"])),
        None => Err(format!("no lock conflict at Attacker.receive: {report}")),
    }
}

fn rules(d: &Json, out: &mut Vec<String>) {
    if let Some(r) = d["rule"].as_str() {
        out.push(r.to_string());
    }
    for p in d["premises"].as_array().into_iter().flatten() {
        rules(p, out);
    }
}

/// Criterion 2: the checks-effects-interactions repair passes via Call-Safe.
fn safe_variant_acceptance() -> Result<String, String> {
    let start = Instant::now();
    let o = smartml(&["check", &corpus("store_cei.sml"), "--format", "json", "--explain"]);
    within(start, Duration::from_secs(1))?;
    if o.status.code() != Some(0) {
        return Err(format!(
            "exit {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stdout)
        ));
    }
    let report = json(&o);
    let store = report["contracts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["contract"] == "Store")
        .ok_or("no Store report")?;
    let mut used = Vec::new();
    rules(&store["derivation"], &mut used);
    if used.iter().any(|r| r == "Call-Safe") {
        Ok("accepted; Store derivation uses Call-Safe".into())
    } else {
        Err(format!("no Call-Safe in {used:?}"))
    }
}

struct Rollback {
    reverts: usize,
    commits: usize,
    errors: Vec<String>,
}

/// Checks rollback around one step. A step ending in reverts leaves the
/// snapshot of the outermost reverted transaction, or the state before
/// the entry call when the whole run aborts. A successful return from a
/// transaction keeps the callee's writes and drops its snapshot.
fn rollback_step(before: &Configuration, r: &StepResult, seed: u64, f: &mut Rollback) {
    let (StepResult::Next(after, evs) | StepResult::Aborted(after, _, evs) | StepResult::Terminated(after, _, evs)) = r
    else {
        return;
    };
    let revert = evs.iter().rev().find_map(|e| match e {
        TraceEvent::Revert { depth } => Some(*depth),
        _ => None,
    });
    let aborted = matches!(r, StepResult::Aborted(..));
    if aborted || revert.is_some() {
        f.reverts += 1;
        let snap = match revert {
            _ if aborted => &before.rollback[0],
            // the snapshot may have been taken by this very step, when a
            // value transfer fails on entry
            Some(d) => before.rollback.get(d - 1).unwrap_or(&before.permanent),
            None => unreachable!(),
        };
        if after.permanent.canonical_json() != snap.canonical_json() {
            f.errors
                .push(format!("seed {seed}: memory after a revert differs from its snapshot"));
        }
    } else if before.stack.last().is_some_and(|fr| fr.is_transaction())
        && evs.iter().any(|e| matches!(e, TraceEvent::CallReturn { ok: true, .. }))
    {
        f.commits += 1;
        if after.permanent != before.permanent {
            f.errors
                .push(format!("seed {seed}: a successful return changed memory"));
        }
        if after.rollback.len() + 1 != before.rollback.len() {
            f.errors
                .push(format!("seed {seed}: a successful return kept its snapshot"));
        }
    }
}

/// Criterion 6, on every trace of a second fuzzing pass.
fn rollback_exactness(accepted: &[&(u64, ResolvedProgram, bool)]) -> Result<String, String> {
    let mut f = Rollback {
        reverts: 0,
        commits: 0,
        errors: Vec::new(),
    };
    for (seed, rp, _) in accepted {
        let opts = FuzzOptions {
            seed: *seed,
            budget: 30,
            fuel: 500,
        };
        fuzz_observed(rp, opts, |before, r| rollback_step(before, r, *seed, &mut f));
    }
    if let Some(e) = f.errors.first() {
        return Err(format!("{} failures, first: {e}", f.errors.len()));
    }
    if f.reverts == 0 || f.commits == 0 {
        return Err(format!("{} reverts, {} commits observed", f.reverts, f.commits));
    }
    Ok(format!(
        "{} reverts restore their snapshot, {} commits keep their writes",
        f.reverts, f.commits
    ))
}

/// Criterion 4: residual continuations of accepted programs re-check with
/// larger variable and lock environments.
fn preservation(accepted: &[&(u64, ResolvedProgram, bool)]) -> Result<String, String> {
    let results: Vec<_> = accepted
        .iter()
        .map(|(seed, rp, _)| {
            let mut steps = 0usize;
            let mut errors = Vec::new();
            let opts = FuzzOptions {
                seed: *seed,
                budget: 5,
                fuel: 200,
            };
            fuzz_observed(rp, opts, |_, r| {
                let StepResult::Next(c, _) = r else { return };
                steps += 1;
                match check_configuration(rp, c) {
                    Ok((start, end)) => {
                        if !start.gamma.keys().all(|x| end.gamma.contains_key(x)) || !start.delta.is_subset(&end.delta)
                        {
                            errors.push(format!("seed {seed}: environment shrank in {}", c.method));
                        }
                    }
                    Err(f) => errors.push(format!("seed {seed}: {f}")),
                }
            });
            (steps, errors)
        })
        .collect();
    let steps: usize = results.iter().map(|r| r.0).sum();
    let errors: Vec<&String> = results.iter().flat_map(|r| &r.1).collect();
    if !errors.is_empty() {
        return Err(format!("{} failures, first: {}", errors.len(), errors[0]));
    }
    if steps < 1000 {
        return Err(format!("only {steps} steps"));
    }
    Ok(format!("{steps} steps over {} programs re-checked", accepted.len()))
}

/// Accesses of `body` (a method body as JSON) run by `contract`, found by
/// walking every node: `{"Field": f}` is an access, and an object with a
/// `method` key is a call, expanded when made on `this` and otherwise
/// touching every field of the contract.
struct LocsOracle<'a> {
    contracts: BTreeMap<String, &'a Json>,
}

impl LocsOracle<'_> {
    fn chain(&self, c: &str) -> Vec<&Json> {
        let mut out = Vec::new();
        let mut cur = self.contracts.get(c).copied();
        while let Some(j) = cur {
            out.push(j);
            cur = j["parent"].as_str().and_then(|p| self.contracts.get(p).copied());
        }
        out
    }

    fn fields(&self, c: &str) -> Vec<String> {
        self.chain(c)
            .iter()
            .flat_map(|j| j["fields"].as_array().unwrap())
            .map(|f| f["name"].as_str().unwrap().to_string())
            .collect()
    }

    fn body(&self, c: &str, m: &str) -> Option<&Json> {
        self.chain(c)
            .into_iter()
            .flat_map(|j| j["methods"].as_array().unwrap())
            .find(|d| d["name"] == m)
            .map(|d| &d["body"])
    }

    fn walk(&self, c: &str, node: &Json, open: &mut Vec<String>, out: &mut BTreeMap<String, usize>) {
        match node {
            Json::Array(xs) => xs.iter().for_each(|x| self.walk(c, x, open, out)),
            Json::Object(o) if o.len() == 1 && o.get("Field").is_some_and(Json::is_string) => {
                *out.entry(o["Field"].as_str().unwrap().to_string()).or_default() += 1;
            }
            Json::Object(o) if o.contains_key("method") && o.contains_key("receiver") => {
                for k in ["receiver", "value", "args"] {
                    self.walk(c, &o[k], open, out);
                }
                let m = o["method"].as_str().unwrap().to_string();
                if o["receiver"] == "This" {
                    if !open.contains(&m) {
                        if let Some(b) = self.body(c, &m) {
                            open.push(m);
                            self.walk(c, b, open, out);
                            open.pop();
                        }
                    }
                } else {
                    for f in self.fields(c) {
                        *out.entry(f).or_default() += 1;
                    }
                }
            }
            Json::Object(o) => o.values().for_each(|v| self.walk(c, v, open, out)),
            _ => {}
        }
    }
}

/// Criterion 7.
fn locs_equivalence(programs: &[(u64, ResolvedProgram, bool)]) -> Result<String, String> {
    let mut compared = 0;
    for (seed, rp, _) in programs {
        if rp.program().contracts.len() > 3 || rp.program().contracts.iter().any(|c| c.methods.len() > 3) {
            continue;
        }
        let ast = serde_json::to_value(rp.program()).unwrap();
        let oracle = LocsOracle {
            contracts: ast["contracts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| (c["name"].as_str().unwrap().to_string(), c))
                .collect(),
        };
        for c in &rp.program().contracts {
            let this = AliasSet::one(Atom::Id {
                id: 1,
                contract: c.name.clone(),
            });
            for m in rp.visible_methods(&c.name) {
                let mut got = BTreeMap::new();
                for ((atom, f), n) in locs_stmt(rp, &this, &c.name, &m.body).iter() {
                    assert_eq!(atom, this.atoms().next().unwrap());
                    got.insert(f.clone(), n);
                }
                let mut want = BTreeMap::new();
                let body = serde_json::to_value(&m.body).unwrap();
                oracle.walk(&c.name, &body, &mut Vec::new(), &mut want);
                if got != want {
                    return Err(format!(
                        "seed {seed} {}.{}: locs {got:?}, oracle {want:?}",
                        c.name, m.name
                    ));
                }
                compared += 1;
            }
        }
    }
    if compared == 0 {
        return Err("nothing compared".into());
    }
    Ok(format!("{compared} method bodies agree"))
}

fn list(xs: &[i64]) -> Value {
    xs.iter().rev().fold(Value::adt("ListInt", "nil", vec![]), |tail, x| {
        Value::adt("ListInt", "cons", vec![Value::int(*x), tail])
    })
}

/// Criterion 8: `indexOf` and `add` from the list datatype against direct
/// computation, on every list of length at most 5 over -2..=2.
fn adt_conformance() -> Result<String, String> {
    let rp = load(&std::fs::read_to_string(corpus("listing2.sml")).unwrap());
    let mut lists: Vec<Vec<i64>> = vec![vec![]];
    let mut frontier = lists.clone();
    for _ in 0..5 {
        frontier = frontier
            .iter()
            .flat_map(|l| (-2..=2).map(move |x| [l.as_slice(), &[x]].concat()))
            .collect();
        lists.extend(frontier.iter().cloned());
    }
    let mut checks = 0;
    for xs in &lists {
        for n in -10..=10i64 {
            let want = xs.iter().position(|x| *x == n).map_or(-1, |i| i as i64);
            let got =
                eval_adt(&rp, "ListInt", "indexOf", vec![list(xs), Value::int(n)]).map_err(|e| format!("{e:?}"))?;
            if got != Value::int(want) {
                return Err(format!("indexOf({xs:?}, {n}) = {got}, expected {want}"));
            }
            let got = eval_adt(&rp, "ListInt", "add", vec![list(xs), Value::int(n)]).map_err(|e| format!("{e:?}"))?;
            let want = list(&[&[n], xs.as_slice()].concat());
            if got != want {
                return Err(format!("add({xs:?}, {n}) = {got}, expected {want}"));
            }
            checks += 2;
        }
    }
    Ok(format!("{checks} evaluations over {} lists", lists.len()))
}

/// Criterion 9.
fn round_trip_and_determinism() -> Result<String, String> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "sml"))
        .collect();
    files.sort();
    for f in &files {
        let src = std::fs::read_to_string(f).unwrap();
        let p = parse_program(&src).map_err(|e| format!("{}: {e}", f.display()))?;
        let printed = pretty_print(&p);
        let q = parse_program(&printed).map_err(|e| format!("{} reprinted: {e}", f.display()))?;
        if p != q || pretty_print(&q) != printed {
            return Err(format!("{} does not round-trip", f.display()));
        }
    }
    for file in [
        "store_attacker.sml",
        "store_cei.sml",
        "store_wallet.sml",
        "listing1.sml",
    ] {
        let args = [
            "monitor",
            &corpus(file),
            "--fuzz",
            "--unsafe",
            "--seed",
            "5",
            "--budget",
            "50",
            "--format",
            "json",
        ];
        let a = smartml(&args);
        let b = smartml(&args);
        if a.stdout != b.stdout || a.stdout.is_empty() {
            return Err(format!("{file}: fixed-seed monitor output differs between runs"));
        }
    }
    Ok(format!(
        "{} corpus files round-trip; fixed-seed monitor output byte-identical",
        files.len()
    ))
}

fn main() {
    let mut lines = Vec::new();
    let mut record = |n: usize, name: &str, r: std::thread::Result<Result<String, String>>| {
        let (ok, detail) = match r {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(p) => (
                false,
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into()),
            ),
        };
        let line = format!("criterion {n} {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        lines.push(ok);
    };
    let run = |f: &dyn Fn() -> Result<String, String>| catch_unwind(AssertUnwindSafe(f));

    record(1, "case-study rejection", run(&case_study_rejection));
    record(2, "safe-variant acceptance", run(&safe_variant_acceptance));

    let programs = generated();
    let accepted: Vec<_> = programs.iter().filter(|p| p.2).collect();
    let start = Instant::now();
    let reports: Vec<_> = accepted
        .iter()
        .map(|(seed, rp, _)| {
            let opts = FuzzOptions {
                seed: *seed,
                budget: 100,
                fuel: 1_000,
            };
            (*seed, fuzz_reachable(rp, opts))
        })
        .collect();
    let elapsed = start.elapsed();

    record(
        3,
        "type-accepted programs are never unsafe",
        run(&|| {
            if accepted.len() < 50 {
                return Err(format!(
                    "only {} of {} programs accepted",
                    accepted.len(),
                    programs.len()
                ));
            }
            for (seed, r) in &reports {
                if r.cases.len() < 100 {
                    return Err(format!("seed {seed}: only {} traces", r.cases.len()));
                }
                if let Some(c) = r.first_at(SafetyLevel::Unsafe) {
                    return Err(format!(
                        "seed {seed}: {}.{} is unsafe\n{}",
                        c.contract,
                        c.method,
                        c.verdict.explain()
                    ));
                }
            }
            within(start, Duration::from_secs(300))?;
            Ok(format!(
                "{} programs, {} accepted, {} traces, 0 unsafe, {elapsed:.1?}",
                programs.len(),
                accepted.len(),
                reports.iter().map(|r| r.1.cases.len()).sum::<usize>()
            ))
        }),
    );
    record(4, "preservation", run(&|| preservation(&accepted)));
    record(
        5,
        "progress",
        run(&|| {
            let mut steps = 0;
            for (seed, r) in &reports {
                for c in &r.cases {
                    steps += c.steps;
                    if let Outcome::Stuck { reason } = &c.outcome {
                        return Err(format!("seed {seed}: {}.{}: {reason}", c.contract, c.method));
                    }
                }
            }
            Ok(format!("{steps} steps, none stuck"))
        }),
    );
    record(6, "rollback exactness", run(&|| rollback_exactness(&accepted)));
    record(
        7,
        "locs equals the AST-walk oracle",
        run(&|| locs_equivalence(&programs)),
    );
    record(8, "datatype evaluator conformance", run(&adt_conformance));
    record(9, "round trip and determinism", run(&round_trip_and_determinism));

    let failed = lines.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria pass", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
