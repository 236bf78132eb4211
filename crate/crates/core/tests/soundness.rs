//! Preservation, progress and rollback on generated, type-accepted programs.

use smartml::interpreter::{StepResult, TraceEvent};
use smartml::monitor::{fuzz_observed, FuzzOptions};
use smartml::progen::{generate, ProgenOptions};
use smartml::runtime::Configuration;
use smartml::syntax::{parse_program, resolve, ResolvedProgram};
use smartml::typesys::{check_configuration, check_program, CheckOptions};

fn accepted(seeds: std::ops::Range<u64>) -> Vec<(u64, ResolvedProgram)> {
    seeds
        .filter_map(|seed| {
            let src = generate(seed, &ProgenOptions::default());
            let rp = resolve(&parse_program(&src).unwrap()).unwrap();
            check_program(&rp, CheckOptions::default())
                .is_ok()
                .then_some((seed, rp))
        })
        .collect()
}

#[test]
fn residual_continuations_keep_checking() {
    let mut checked = 0;
    for (seed, rp) in accepted(0..40) {
        let opts = FuzzOptions {
            seed,
            budget: 10,
            fuel: 300,
        };
        fuzz_observed(&rp, opts, |_, r| {
            if let StepResult::Next(c, _) = r {
                let (start, end) = check_configuration(&rp, c).unwrap_or_else(|f| {
                    panic!(
                        "seed {seed}: {} at {}: {}\n{:?}",
                        f.rule, f.at, f.message, c.continuation
                    )
                });
                assert!(start.gamma.keys().all(|x| end.gamma.contains_key(x)), "seed {seed}");
                assert!(start.delta.is_subset(&end.delta), "seed {seed}");
                checked += 1;
            }
        });
    }
    assert!(checked >= 1000, "only {checked} steps");
}

#[test]
fn accepted_programs_never_get_stuck() {
    for (seed, rp) in accepted(0..40) {
        let opts = FuzzOptions {
            seed,
            budget: 20,
            fuel: 500,
        };
        fuzz_observed(&rp, opts, |_, r| {
            if let StepResult::Stuck(_, reason) = r {
                panic!("seed {seed}: {reason}");
            }
        });
    }
}

/// After a step ending in `Revert`s, permanent memory equals the snapshot
/// taken when the outermost reverted transaction was entered.
#[test]
fn reverts_restore_the_entry_snapshot() {
    let mut reverts = 0;
    for (seed, rp) in accepted(0..40) {
        let opts = FuzzOptions {
            seed,
            budget: 20,
            fuel: 500,
        };
        fuzz_observed(&rp, opts, |before: &Configuration, r| {
            let (StepResult::Next(after, evs) | StepResult::Aborted(after, _, evs)) = r else {
                return;
            };
            let depth = evs.iter().rev().find_map(|e| match e {
                TraceEvent::Revert { depth } => Some(*depth),
                _ => None,
            });
            if let Some(d) = depth {
                reverts += 1;
                // the snapshot may have been taken by this very step, when a
                // value transfer fails on entry
                let snap = before.rollback.get(d - 1).unwrap_or(&before.permanent);
                let want = snap.canonical_json();
                assert_eq!(after.permanent.canonical_json(), want, "seed {seed}");
            }
        });
    }
    assert!(reverts > 0);
}

#[test]
fn residual_check_rejects_the_attack_mid_run() {
    use smartml::interpreter::{exec_constructor, initial_config, run_observed};
    use smartml::runtime::PermanentMemory;
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/store_attacker.sml")).unwrap();
    let rp = resolve(&parse_program(&src).unwrap()).unwrap();
    let mut pm = PermanentMemory::new();
    let a = exec_constructor(&rp, &mut pm, "Attacker", vec![], None).unwrap();
    let cfg = initial_config(&rp, pm, a, "attack", vec![], a, 0).unwrap();
    let mut failures = Vec::new();
    run_observed(&rp, cfg, 10_000, |_, r| {
        if let StepResult::Next(c, _) = r {
            if let Err(f) = check_configuration(&rp, c) {
                failures.push(f.at);
            }
        }
    })
    .unwrap();
    assert!(failures.iter().any(|at| at == "Attacker.receive"), "{failures:?}");
}
