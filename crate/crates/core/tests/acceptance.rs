//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines are never captured; exits 1 if any criterion fails.

mod common;

use std::process::ExitCode;

use common::*;

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("scope-oracle", check_scope_oracle),
        ("cyclomatic-cross-check", check_cyclomatic),
        ("testability-filter", check_testability),
        ("suite-determinism", check_suite_determinism),
        ("coverage-gate", check_coverage_gate),
        ("merge-json-examples", check_merge_examples),
        ("self-evaluation", check_self_evaluation),
        ("mutation-rigor", check_mutation_rigor),
        ("outcome-taxonomy", check_taxonomy),
        ("deep-compare-properties", || check_deep_compare_properties(1000)),
    ];
    let total = checks.len();
    let mut failed = Vec::new();
    for (name, check) in checks {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                println!("FAIL {name}: {reason}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: {total} criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
