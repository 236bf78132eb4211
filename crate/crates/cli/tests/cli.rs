use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    format!("{}/../core/corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn smartml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smartml"))
        .args(args)
        .env("SMARTML_COLOR", "0")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn parse_exit_codes() {
    assert_eq!(smartml(&["parse", &corpus("listing1.sml")]).status.code(), Some(0));
    assert_eq!(smartml(&["parse", "no/such/file.sml"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sml");
    std::fs::write(&bad, "contract C {\n  int x\n}\n").unwrap();
    let o = smartml(&["parse", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.sml:3:1"));
}

#[test]
fn parse_json_is_the_ast() {
    let o = smartml(&["parse", &corpus("listing1.sml"), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["contracts"][0]["name"], "C");
}

#[test]
fn check_verdicts() {
    let o = smartml(&["check", &corpus("store_attacker.sml")]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("Attacker.receive [Call]"), "{text}");
    assert!(text.contains("transfer"));
    assert_eq!(smartml(&["check", &corpus("listing1.sml")]).status.code(), Some(0));
    let o = smartml(&["check", &corpus("store_cei.sml"), "--explain"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[Call-Safe]"));
}

#[test]
fn files_are_concatenated() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.sml");
    let b = dir.path().join("b.sml");
    std::fs::write(&a, "contract A { B peer; constructor() { } }").unwrap();
    std::fs::write(&b, "contract B { constructor() { } }").unwrap();
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    assert_eq!(smartml(&["check", a, b]).status.code(), Some(0));
    assert_eq!(smartml(&["check", a]).status.code(), Some(1));
}

#[test]
fn run_listing1() {
    let o = smartml(&[
        "run",
        &corpus("listing1.sml"),
        "--entry",
        "C.m",
        "--arg",
        "4",
        "--arg",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "7\n");
    let o = smartml(&[
        "run",
        &corpus("listing1.sml"),
        "--entry",
        "C.m",
        "--arg",
        "-4",
        "--arg",
        "3",
    ]);
    assert_eq!(stdout(&o), "-1\n");
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("p.sml");
    std::fs::write(
        &f,
        "contract L { constructor() { } function spin() { while (true) { } } function fail() { throw \"no\"; } }",
    )
    .unwrap();
    let f = f.to_str().unwrap();
    assert_eq!(
        smartml(&["run", f, "--entry", "L.spin", "--fuel", "1"]).status.code(),
        Some(5)
    );
    assert_eq!(smartml(&["run", f, "--entry", "L.fail"]).status.code(), Some(3));
    assert_eq!(smartml(&["run", f, "--entry", "L.nope"]).status.code(), Some(1));
    assert_eq!(smartml(&["run", f, "--entry", "M.spin"]).status.code(), Some(1));
    assert_ne!(
        smartml(&["run", f, "--entry", "L.spin", "--fuel", "0"]).status.code(),
        Some(0)
    );
}

#[test]
fn run_refuses_rejected_programs() {
    let f = corpus("store_attacker.sml");
    assert_eq!(
        smartml(&["run", &f, "--entry", "Attacker.attack"]).status.code(),
        Some(1)
    );
    let o = smartml(&["run", &f, "--entry", "Attacker.attack", "--unsafe", "--format", "json"]);
    assert!(matches!(o.status.code(), Some(0 | 3)));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["event"], "call_enter");
    assert!(lines.last().unwrap()["outcome"]["status"].is_string());
}

#[test]
fn monitor_verdicts() {
    let f = corpus("store_attacker.sml");
    let o = smartml(&["monitor", &f, "--entry", "Attacker.attack", "--unsafe"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "unsafe\n");
    let o = smartml(&["monitor", &f, "--entry", "Attacker.attack", "--unsafe", "--explain"]);
    let text = stdout(&o);
    assert!(text.contains("<- k") && text.contains("relevant field"), "{text}");
    let o = smartml(&[
        "monitor",
        &corpus("listing1.sml"),
        "--fuzz",
        "--seed",
        "7",
        "--budget",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("worst strict-safe"));
    let o = smartml(&["monitor", &corpus("store_cei.sml"), "--entry", "Attacker.attack"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "non-modifying-safe\n");
}

#[test]
fn fixed_seed_monitor_output_is_byte_identical() {
    let args = [
        "monitor",
        &corpus("store_wallet.sml"),
        "--fuzz",
        "--seed",
        "11",
        "--budget",
        "30",
        "--format",
        "json",
    ];
    let a = smartml(&args);
    let b = smartml(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["cases"].as_array().unwrap().len(), 30);
}
