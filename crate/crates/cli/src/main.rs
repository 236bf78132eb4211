use std::io::{IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use smartml::interpreter::{exec_constructor, initial_config, run, Outcome};
use smartml::monitor::{classify_run, fuzz_reachable, FuzzOptions, SafetyLevel};
use smartml::runtime::{PermanentMemory, Value};
use smartml::syntax::ast::Type;
use smartml::syntax::{parse_program, pretty_print, resolve, Program, ResolvedProgram};
use smartml::typesys::{check_program, CheckOptions, ProgramReport, Verdict};

#[derive(Parser)]
#[command(name = "smartml", version, about = "Parse, check, run and monitor SmartML contracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and resolve, then print the program back.
    Parse(Common),
    /// Run the reentrancy type checker.
    Check(Common),
    /// Deploy the entry contract and call one method.
    Run(Exec),
    /// Classify one run, or many random ones, by reentrance safety.
    Monitor(Exec),
}

#[derive(Args)]
struct Common {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Show derivations (check) or call-stack diagrams (monitor).
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct Exec {
    #[command(flatten)]
    common: Common,
    /// `Contract.method`.
    #[arg(long)]
    entry: Option<String>,
    /// Literal argument; constructor parameters are filled first, then the
    /// method's.
    #[arg(long = "arg", allow_hyphen_values = true)]
    args: Vec<String>,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random traces for `--fuzz`.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    /// Explore random calls on every deployed contract instead of `--entry`.
    #[arg(long)]
    fuzz: bool,
    /// Execute programs the checker rejects.
    #[arg(long = "unsafe")]
    allow_unsafe: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Errors mapped to an exit code.
struct Failed(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failed {
    fn from(e: E) -> Self {
        Failed(1, e.into())
    }
}

fn color() -> bool {
    std::env::var("SMARTML_COLOR").map_or(true, |v| v != "0") && std::io::stdout().is_terminal()
}

fn paint(text: &str, code: &str) -> String {
    if color() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn load(files: &[PathBuf]) -> Result<ResolvedProgram, Failed> {
    let mut program = Program::default();
    for f in files {
        let src = std::fs::read_to_string(f)
            .with_context(|| format!("cannot read {}", f.display()))
            .map_err(|e| Failed(2, e))?;
        let p = parse_program(&src).map_err(|e| anyhow!("{}:{e}", f.display()))?;
        program = program.merge(p);
    }
    Ok(resolve(&program)?)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_parse(c: &Common) -> Result<u8, Failed> {
    let rp = load(&c.files)?;
    match c.format {
        Format::Text => print!("{}", pretty_print(rp.program())),
        Format::Json => print_json(rp.program())?,
    }
    Ok(0)
}

fn print_report(report: &ProgramReport, explain: bool) {
    for c in &report.contracts {
        let verdict = match c.verdict {
            Verdict::Ok => paint("ok", "32"),
            Verdict::Rejected => paint("rejected", "31"),
        };
        println!("{}: {verdict}", c.contract);
        for f in &c.failures {
            println!("  {} [{}] {}", f.at, f.rule, f.message);
            if !f.statement.is_empty() {
                println!("    at: {}", f.statement);
            }
            if let Some(lock) = &f.conflict {
                println!("    locked: {lock}");
            }
            if f.path.len() > 1 {
                println!("    via: {}", f.path.join(" -> "));
            }
        }
        if explain {
            if let Some(d) = &c.derivation {
                for line in d.render().lines() {
                    println!("  {line}");
                }
            }
        }
    }
}

fn cmd_check(c: &Common) -> Result<u8, Failed> {
    let rp = load(&c.files)?;
    let report = check_program(&rp, CheckOptions { derivation: c.explain });
    match c.format {
        Format::Text => print_report(&report, c.explain),
        Format::Json => print_json(&report)?,
    }
    Ok(if report.is_ok() { 0 } else { 1 })
}

/// Loads the program and refuses it if it does not check, unless allowed.
fn load_checked(e: &Exec) -> Result<ResolvedProgram, Failed> {
    let rp = load(&e.common.files)?;
    if !e.allow_unsafe {
        let report = check_program(&rp, CheckOptions::default());
        if !report.is_ok() {
            if e.common.format == Format::Text {
                print_report(&report, false);
            }
            return Err(anyhow!("the program does not type-check; pass --unsafe to execute it anyway").into());
        }
    }
    Ok(rp)
}

fn literal(text: &str, ty: &Type) -> Result<Value> {
    Ok(match ty {
        Type::Int => Value::Int(text.parse().with_context(|| format!("`{text}` is not an integer"))?),
        Type::Bool => Value::Bool(text.parse().with_context(|| format!("`{text}` is not a boolean"))?),
        Type::String => Value::Str(
            text.strip_prefix('"')
                .and_then(|t| t.strip_suffix('"'))
                .unwrap_or(text)
                .to_string(),
        ),
        other => bail!("arguments of type {other:?} cannot be given on the command line"),
    })
}

/// Deploys the entry contract and builds the initial configuration of a
/// call to the entry method, made by the new instance itself.
fn prepare(rp: &ResolvedProgram, e: &Exec) -> Result<smartml::runtime::Configuration> {
    let entry = e
        .entry
        .as_deref()
        .ok_or_else(|| anyhow!("--entry Contract.method is required"))?;
    let (contract, method) = entry
        .split_once('.')
        .ok_or_else(|| anyhow!("--entry must have the form Contract.method"))?;
    if rp.contract(contract).is_none() {
        bail!("unknown contract `{contract}`");
    }
    let (_, decl) = rp
        .lookup_method(contract, method)
        .ok_or_else(|| anyhow!("{contract} has no method `{method}`"))?;
    let ctor = rp.constructor_params(contract);
    let want = ctor.len() + decl.params.len();
    if e.args.len() != want {
        bail!(
            "{entry} needs {want} --arg value(s): {} for the constructor, {} for the method",
            ctor.len(),
            decl.params.len()
        );
    }
    let params = ctor.iter().chain(&decl.params);
    let mut values = e
        .args
        .iter()
        .zip(params)
        .map(|(a, p)| literal(a, &p.ty))
        .collect::<Result<Vec<_>>>()?;
    let method_args = values.split_off(ctor.len());
    let mut pm = PermanentMemory::new();
    let id = exec_constructor(rp, &mut pm, contract, values, None)?;
    Ok(initial_config(rp, pm, id, method, method_args, id, 0)?)
}

fn cmd_run(e: &Exec) -> Result<u8, Failed> {
    let rp = load_checked(e)?;
    let cfg = prepare(&rp, e)?;
    let r = run(&rp, cfg, e.fuel)?;
    match e.common.format {
        Format::Json => {
            for ev in &r.trace {
                print_json(ev)?;
            }
            print_json(&serde_json::json!({ "outcome": r.outcome, "steps": r.steps }))?;
        }
        Format::Text => match &r.outcome {
            Outcome::Terminated { value } => println!("{}", value.as_ref().unwrap_or(&Value::Unit)),
            Outcome::Aborted { error } => println!("{} {error}", paint("aborted:", "31")),
            Outcome::Stuck { reason } => println!("{} {reason}", paint("stuck:", "31")),
            Outcome::FuelExhausted => println!("{} after {} steps", paint("out of fuel", "33"), r.steps),
        },
    }
    Ok(match r.outcome {
        Outcome::Terminated { .. } => 0,
        Outcome::Aborted { .. } => 3,
        Outcome::Stuck { .. } => 4,
        Outcome::FuelExhausted => 5,
    })
}

fn level(l: SafetyLevel) -> String {
    let code = match l {
        SafetyLevel::StrictSafe | SafetyLevel::NonModifyingSafe => "32",
        SafetyLevel::ModifyingSafe => "33",
        SafetyLevel::Unsafe => "31",
    };
    paint(&l.to_string(), code)
}

fn cmd_monitor(e: &Exec) -> Result<u8, Failed> {
    let rp = load_checked(e)?;
    if e.fuzz {
        let opts = FuzzOptions {
            seed: e.seed,
            budget: e.budget,
            fuel: e.fuel,
        };
        let report = fuzz_reachable(&rp, opts);
        match e.common.format {
            Format::Json => print_json(&report)?,
            Format::Text => {
                println!(
                    "seed {}: {} traces, worst {}",
                    report.seed,
                    report.cases.len(),
                    level(report.worst)
                );
                for l in [
                    SafetyLevel::StrictSafe,
                    SafetyLevel::NonModifyingSafe,
                    SafetyLevel::ModifyingSafe,
                    SafetyLevel::Unsafe,
                ] {
                    let n = report.cases.iter().filter(|c| c.verdict.level == l).count();
                    if n > 0 {
                        println!("  {l}: {n}");
                    }
                }
                if let Some(c) = report.first_at(report.worst).filter(|_| !report.cases.is_empty()) {
                    let args: Vec<String> = c.args.iter().map(Value::to_string).collect();
                    println!(
                        "first {} trace: {}.{}({}) on {} from {} with {}",
                        report.worst,
                        c.contract,
                        c.method,
                        args.join(", "),
                        c.entry,
                        c.sender,
                        c.amount
                    );
                    if e.common.explain {
                        print!("{}", c.verdict.explain());
                    }
                }
            }
        }
        return Ok(if report.worst == SafetyLevel::Unsafe { 1 } else { 0 });
    }
    let cfg = prepare(&rp, e)?;
    let r = run(&rp, cfg, e.fuel)?;
    let verdict = classify_run(&rp, &r);
    match e.common.format {
        Format::Json => print_json(&serde_json::json!({ "outcome": r.outcome, "steps": r.steps, "verdict": verdict }))?,
        Format::Text if e.common.explain => print!("{}", verdict.explain()),
        Format::Text => println!("{}", level(verdict.level)),
    }
    Ok(if verdict.level == SafetyLevel::Unsafe { 1 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse(c) => cmd_parse(c),
        Command::Check(c) => cmd_check(c),
        Command::Run(e) => cmd_run(e),
        Command::Monitor(e) => cmd_monitor(e),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failed(code, err)) => {
            eprintln!("{} {err:#}", paint("error:", "31"));
            ExitCode::from(code)
        }
    }
}
