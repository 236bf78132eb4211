use smartml::interpreter::*;
use smartml::runtime::{InstanceId, PermanentMemory, Value};
use smartml::syntax::{parse_program, resolve, ResolvedProgram};

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn load(src: &str) -> ResolvedProgram {
    resolve(&parse_program(src).unwrap()).unwrap()
}

fn deploy(rp: &ResolvedProgram, contract: &str, args: Vec<Value>) -> (PermanentMemory, InstanceId) {
    let mut pm = PermanentMemory::new();
    let id = exec_constructor(rp, &mut pm, contract, args, None).unwrap();
    (pm, id)
}

fn call(rp: &ResolvedProgram, pm: PermanentMemory, id: InstanceId, m: &str, args: Vec<Value>) -> Run {
    let cfg = initial_config(rp, pm, id, m, args, id, 0).unwrap();
    run(rp, cfg, 100_000).unwrap()
}

fn entered(trace: &[TraceEvent]) -> Vec<&str> {
    trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::CallEnter { method, .. } => Some(method.as_str()),
            _ => None,
        })
        .collect()
}

fn int_list(xs: &[i64]) -> Value {
    xs.iter().rev().fold(Value::adt("ListInt", "nil", vec![]), |tail, x| {
        Value::adt("ListInt", "cons", vec![Value::int(*x), tail])
    })
}

#[test]
fn listing1_adds_field_and_argument() {
    let rp = load(&corpus("listing1.sml"));
    let (pm, c) = deploy(&rp, "C", vec![Value::int(4)]);
    let r = call(&rp, pm, c, "m", vec![Value::int(3)]);
    assert_eq!(
        r.outcome,
        Outcome::Terminated {
            value: Some(Value::int(7))
        }
    );
}

#[test]
fn store_constructor_uses_defaults() {
    let rp = load(&corpus("store_attacker.sml"));
    let (pm, s) = deploy(&rp, "Store", vec![]);
    assert_eq!(pm.read(s, "balance").unwrap(), &Value::int(0));
    assert_eq!(pm.read(s, "balances").unwrap(), &int_list(&[]));
    let addr = pm.read(s, "addr").unwrap();
    assert!(matches!(addr, Value::Adt { ctor, .. } if ctor == "nil"));
}

#[test]
fn attack_reenters_transfer() {
    let rp = load(&corpus("store_attacker.sml"));
    let (pm, a) = deploy(&rp, "Attacker", vec![]);
    let s = pm.read(a, "s").unwrap().instance().unwrap();
    let r = call(&rp, pm, a, "attack", vec![]);
    assert_eq!(r.outcome, Outcome::Terminated { value: None });
    assert_eq!(
        entered(&r.trace),
        ["attack", "deposit", "withdraw", "transfer", "receive", "transfer", "receive"]
    );
    // the innermost receive fails for lack of funds and is rolled back
    assert!(r.trace.iter().any(|e| matches!(e, TraceEvent::Revert { .. })));
    let pm = &r.config.permanent;
    // 1 deposited and sent back, then booked a second time by receive
    assert_eq!(pm.read(a, "balance").unwrap(), &Value::int(2));
    assert_eq!(pm.read(s, "balance").unwrap(), &Value::int(0));
    assert_eq!(pm.read(s, "balances").unwrap(), &int_list(&[0]));
    assert!(r.config.stack.is_empty());
    assert_eq!(r.config.rollback.len(), 1);
}

const ROLLBACK: &str = r#"
contract B {
    int x;
    function poke() { x = 1; throw "no"; }
    function set() { x = 5; }
}
contract A {
    int y;
    string why;
    B b;
    constructor() { this.b = new B(); }
    function guarded() {
        try b.poke() abort (e) { why = e; y = 2; } success { y = 3; }
    }
    function fine() {
        try b.set() abort { y = 2; } success { y = 3; }
    }
    function fail() { y = 9; b.set(); b.poke(); }
}
"#;

#[test]
fn abort_handler_sees_reverted_memory() {
    let rp = load(ROLLBACK);
    let (pm, a) = deploy(&rp, "A", vec![]);
    let b = pm.read(a, "b").unwrap().instance().unwrap();
    let r = call(&rp, pm, a, "guarded", vec![]);
    assert_eq!(r.outcome, Outcome::Terminated { value: None });
    let pm = &r.config.permanent;
    assert_eq!(pm.read(b, "x").unwrap(), &Value::int(0));
    assert_eq!(pm.read(a, "y").unwrap(), &Value::int(2));
    assert_eq!(pm.read(a, "why").unwrap(), &Value::Str("no".into()));
}

#[test]
fn success_handler_keeps_effects() {
    let rp = load(ROLLBACK);
    let (pm, a) = deploy(&rp, "A", vec![]);
    let b = pm.read(a, "b").unwrap().instance().unwrap();
    let r = call(&rp, pm, a, "fine", vec![]);
    let pm = &r.config.permanent;
    assert_eq!(pm.read(b, "x").unwrap(), &Value::int(5));
    assert_eq!(pm.read(a, "y").unwrap(), &Value::int(3));
}

#[test]
fn uncaught_throw_restores_initial_memory() {
    let rp = load(ROLLBACK);
    let (pm, a) = deploy(&rp, "A", vec![]);
    let before = pm.clone();
    let r = call(&rp, pm, a, "fail", vec![]);
    assert_eq!(
        r.outcome,
        Outcome::Aborted {
            error: Value::Str("no".into())
        }
    );
    assert_eq!(r.config.permanent, before);
    let last = r.trace.last().unwrap();
    assert!(matches!(last, TraceEvent::CallReturn { ok: false, .. }));
}

#[test]
fn loops_exhaust_fuel() {
    let rp = load("contract L { function spin() { while (true) { skip; } } }");
    let (pm, l) = deploy(&rp, "L", vec![]);
    let cfg = initial_config(&rp, pm, l, "spin", vec![], l, 0).unwrap();
    let r = run(&rp, cfg, 50).unwrap();
    assert_eq!(r.outcome, Outcome::FuelExhausted);
    assert_eq!(r.steps, 50);
}

#[test]
fn zero_fuel_is_rejected() {
    let rp = load(&corpus("listing1.sml"));
    let (pm, c) = deploy(&rp, "C", vec![Value::int(1)]);
    let cfg = initial_config(&rp, pm, c, "m", vec![Value::int(1)], c, 0).unwrap();
    assert_eq!(run(&rp, cfg, 1).map(|_| ()), Ok(()));
    let (pm, c) = deploy(&rp, "C", vec![Value::int(1)]);
    let cfg = initial_config(&rp, pm, c, "m", vec![Value::int(1)], c, 0).unwrap();
    assert!(matches!(run(&rp, cfg, 0), Err(InterpError::ZeroFuel)));
}

#[test]
fn division_by_zero_aborts() {
    let rp = load("contract D { int f(int a) { return 10 / a; } }");
    let (pm, d) = deploy(&rp, "D", vec![]);
    let r = call(&rp, pm, d, "f", vec![Value::int(0)]);
    assert_eq!(
        r.outcome,
        Outcome::Aborted {
            error: Value::Str("division by zero".into())
        }
    );
    let (pm, d) = deploy(&rp, "D", vec![]);
    let r = call(&rp, pm, d, "f", vec![Value::int(-3)]);
    assert_eq!(
        r.outcome,
        Outcome::Terminated {
            value: Some(Value::int(-3))
        }
    );
}

#[test]
fn arity_mismatch_at_entry() {
    let rp = load(&corpus("listing1.sml"));
    let (pm, c) = deploy(&rp, "C", vec![Value::int(1)]);
    let err = initial_config(&rp, pm, c, "m", vec![], c, 0).unwrap_err();
    assert!(matches!(
        err,
        InterpError::Arity {
            expected: 1,
            found: 0,
            ..
        }
    ));
}
