use proptest::prelude::*;

use smartml::interpreter::{exec_constructor, initial_config, run, Outcome, TraceEvent};
use smartml::monitor::{classify_trace, SafetyLevel};
use smartml::progen::{generate, ProgenOptions};
use smartml::runtime::{InstanceId, PermanentMemory, Value};
use smartml::syntax::{parse_program, pretty_print, resolve};

#[derive(Debug, Clone)]
enum Op {
    Enter(u64, &'static str),
    Return,
    Write(u64, &'static str),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (1u64..4, prop::sample::select(vec!["f", "g"])).prop_map(|(i, m)| Op::Enter(i, m)),
        2 => Just(Op::Return),
        2 => (1u64..4, prop::sample::select(vec!["x", "log"])).prop_map(|(i, f)| Op::Write(i, f)),
    ]
}

/// Drops returns on an empty stack and closes what is left open.
fn bracketed(ops: &[Op]) -> Vec<TraceEvent> {
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let ret = |(i, m): (u64, &str)| TraceEvent::CallReturn {
        id: InstanceId(i),
        method: m.into(),
        ok: true,
    };
    for o in ops {
        match *o {
            Op::Enter(i, m) => {
                stack.push((i, m));
                out.push(TraceEvent::CallEnter {
                    caller: InstanceId(0),
                    callee: InstanceId(i),
                    method: m.into(),
                    transactional: true,
                });
            }
            Op::Return => {
                if let Some(top) = stack.pop() {
                    out.push(ret(top));
                }
            }
            Op::Write(i, f) => out.push(TraceEvent::FieldWrite {
                id: InstanceId(i),
                field: f.into(),
            }),
        }
    }
    while let Some(top) = stack.pop() {
        out.push(ret(top));
    }
    out
}

/// Open activations before event `at`, innermost first.
fn open_calls(trace: &[TraceEvent], at: usize) -> Vec<(InstanceId, String)> {
    let mut stack = Vec::new();
    for e in &trace[..at] {
        match e {
            TraceEvent::CallEnter { callee, method, .. } => stack.push((*callee, method.clone())),
            TraceEvent::CallReturn { .. } => {
                stack.pop();
            }
            _ => {}
        }
    }
    stack.reverse();
    stack
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_programs_round_trip(seed in any::<u64>()) {
        let src = generate(seed, &ProgenOptions::default());
        let p = parse_program(&src).unwrap();
        let q = parse_program(&pretty_print(&p)).unwrap();
        prop_assert_eq!(&p, &q);
        prop_assert_eq!(pretty_print(&p), pretty_print(&q));
        prop_assert!(resolve(&p).is_ok());
    }

    #[test]
    fn verdict_levels_follow_the_evidence(ops in prop::collection::vec(op(), 0..40)) {
        let trace = bracketed(&ops);
        let v = classify_trace(&trace, |_, f| f == "log");
        prop_assert_eq!(v.level == SafetyLevel::StrictSafe, v.witnesses.is_empty());
        if v.level.satisfies(SafetyLevel::NonModifyingSafe) {
            prop_assert!(v.level.satisfies(SafetyLevel::ModifyingSafe));
            prop_assert!(v.writes.is_empty());
        }
        if v.level == SafetyLevel::ModifyingSafe {
            prop_assert!(v.writes.iter().all(|w| !w.relevant));
        }
        // more irrelevant fields never make a trace less safe
        let all = classify_trace(&trace, |_, _| true);
        let none = classify_trace(&trace, |_, _| false);
        prop_assert!(all.level <= v.level && v.level <= none.level);
        prop_assert!(all.level.satisfies(SafetyLevel::ModifyingSafe));
    }

    #[test]
    fn witnesses_are_the_nearest_reentered_activation(ops in prop::collection::vec(op(), 0..40)) {
        let trace = bracketed(&ops);
        let v = classify_trace(&trace, |_, _| false);
        let mut expected = Vec::new();
        for (at, e) in trace.iter().enumerate() {
            let TraceEvent::CallEnter { callee, method, .. } = e else { continue };
            let mut chain = vec![(*callee, method.clone())];
            chain.extend(open_calls(&trace, at));
            let j = (1..chain.len()).find(|&j| chain[j] == chain[0] && (1..j).any(|k| chain[k].0 != chain[0].0));
            if let Some(j) = j {
                let k = (1..j).rev().find(|&k| chain[k].0 != chain[0].0).unwrap();
                expected.push((at, k, j, chain[k].0));
            }
        }
        let got: Vec<_> = v.witnesses.iter().map(|w| (w.at, w.k, w.j, w.via)).collect();
        prop_assert_eq!(got, expected);
        for w in &v.witnesses {
            prop_assert_eq!(w.i, 0);
            prop_assert_eq!(w.frames.len(), w.j + 1);
            prop_assert_eq!(&w.frames[0], &w.frames[w.j]);
        }
    }

    #[test]
    fn more_fuel_extends_the_same_run(fuel in 1u64..120, extra in 1u64..200) {
        let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/store_attacker.sml")).unwrap();
        let rp = resolve(&parse_program(&src).unwrap()).unwrap();
        let mut pm = PermanentMemory::new();
        let a = exec_constructor(&rp, &mut pm, "Attacker", vec![], None).unwrap();
        let cfg = initial_config(&rp, pm, a, "attack", vec![], a, 0).unwrap();
        let short = run(&rp, cfg.clone(), fuel).unwrap();
        let long = run(&rp, cfg, fuel + extra).unwrap();
        if short.outcome == Outcome::FuelExhausted {
            prop_assert_eq!(short.steps, fuel);
            prop_assert!(long.trace.starts_with(&short.trace));
        } else {
            prop_assert_eq!(&short.outcome, &long.outcome);
            prop_assert_eq!(&short.trace, &long.trace);
            prop_assert_eq!(short.steps, long.steps);
        }
    }

    #[test]
    fn writes_leave_earlier_memories_alone(values in prop::collection::vec(-50i64..50, 1..10)) {
        let src = "contract A { int x; constructor() { x = 0; } }";
        let rp = resolve(&parse_program(src).unwrap()).unwrap();
        let mut pm = PermanentMemory::new();
        let a = exec_constructor(&rp, &mut pm, "A", vec![], None).unwrap();
        let mut history = vec![(pm.clone(), pm.canonical_json())];
        for n in values {
            let next = history.last().unwrap().0.write(a, "x", Value::int(n)).unwrap();
            prop_assert_eq!(next.read(a, "x").unwrap(), &Value::int(n));
            let json = next.canonical_json();
            history.push((next, json));
        }
        for (pm, json) in &history {
            prop_assert_eq!(&pm.canonical_json(), json);
        }
    }
}
