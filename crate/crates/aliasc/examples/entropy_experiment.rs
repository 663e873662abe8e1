//! Measuring what the obfuscation actually randomizes.
//!
//! Compile one program under many seeds, run each, and line the traces up:
//! the (pc, opcode) skeleton must be identical, while the data written at
//! each site should be near-uniform across seeds. The entropy report
//! estimates per-site randomness and flags sites that fall short; the
//! trailer audit proves the reconciliation code adds no fresh randomness of
//! its own (its constants replay exactly from earlier draws).
//!
//!     cargo run --example entropy_experiment

use aliasc::analysis::{audit_trailers, entropy_report, experiment};
use aliasc::codegen::{compile, ArrayStrategy, CompileOptions, Mode};
use aliasc::frontend::check_source;

fn main() {
    let source = include_str!("../programs/ack.mc");
    let prog = check_source(source).expect("source parses and checks");

    let seeds: Vec<u64> = (0..64).collect();
    let exp = experiment(&prog, &[2, 2], Mode::Obfuscated, ArrayStrategy::Auto, &seeds, 10_000_000)
        .expect("all seeds compile, run, and agree structurally");
    println!(
        "{} seeds, decoded outcome {} every time, {} trace events each",
        exp.summary.seeds, exp.outcome, exp.summary.events
    );

    let report = entropy_report(&exp.profiles, seeds.len());
    print!("{}", report.table());
    assert!(report.all_pass(), "entropy report found a defect");

    // The same experiment in plain-safe mode: nothing varies at all.
    let plain = experiment(&prog, &[2, 2], Mode::PlainSafe, ArrayStrategy::Auto, &seeds[..8], 10_000_000)
        .expect("plain mode runs");
    println!(
        "plain-safe baseline: {} sites, {} varying",
        plain.summary.sites, plain.summary.varying
    );
    assert_eq!(plain.summary.varying, 0);

    // Zero-entropy audit of the reconciliation sites for one compilation.
    let compiled = compile(
        &prog,
        &CompileOptions { mode: Mode::Obfuscated, seed: 1, arrays: ArrayStrategy::Auto },
    )
    .expect("lowers");
    let audit = audit_trailers(&compiled);
    println!(
        "reconciliation constants: {} sites, {} fresh draws, {} replay mismatches",
        audit.sites, audit.fresh, audit.mismatched
    );
    assert!(audit.pass());
}
