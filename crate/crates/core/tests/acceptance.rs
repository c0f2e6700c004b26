//! Prints one line per acceptance criterion and fails if any does.

mod common;

use std::process::ExitCode;

use common::Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("corpus type-checks", common::corpus_checks),
        ("negative suite", common::negatives_fail),
        ("reconstruction", common::reconstruction_rechecks),
        ("arithmetic", common::arith_criterion),
        ("subtyping", common::subtype_criterion),
        ("interpreter", common::interpreter_criterion),
        ("conservation", common::conservation_criterion),
        ("temporal", common::temporal_criterion),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {}: pass  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
