//! What an observer of the data stream sees: two compilations of the same
//! program execute the identical instruction skeleton, but the values
//! flowing through registers and memory share almost nothing.
//!
//!     cargo run --example obfuscated_traces

use aliasc::codegen::{compile, run_compiled, CompileOptions, Mode};
use aliasc::frontend::check_source;
use aliasc::machine::MemoryMode;

fn main() {
    let source = include_str!("../programs/corpus/alternating_sum.mc");
    let prog = check_source(source).expect("source parses and checks");

    let mut traces = Vec::new();
    for seed in [11, 12] {
        let compiled =
            compile(&prog, &CompileOptions::new(Mode::Obfuscated, seed)).expect("lowers");
        let fin = run_compiled(&compiled, &[6], 1_000_000, MemoryMode::Fault).expect("runs");
        println!("seed {seed}: f(6) = {}", fin.outcome);
        traces.push((compiled, fin));
    }
    let (ca, fa) = &traces[0];
    let (_cb, fb) = &traces[1];

    // Same length, same (pc, opcode) at every step: control flow is
    // seed-invariant by construction.
    assert_eq!(fa.trace.len(), fb.trace.len());
    assert!(fa
        .trace
        .iter()
        .zip(&fb.trace)
        .all(|(a, b)| (a.pc, a.opcode) == (b.pc, b.opcode)));
    println!("skeletons identical: {} events\n", fa.trace.len());

    // But the written values disagree almost everywhere.
    let differing = fa
        .trace
        .iter()
        .zip(&fb.trace)
        .filter(|(a, b)| {
            let (wa, wb) = (a.writes.first(), b.writes.first());
            matches!((wa, wb), (Some((_, x)), Some((_, y))) if x.value != y.value)
        })
        .count();
    println!("register writes that differ between the two seeds: {differing}");

    // A few trace lines from the first run, in the JSON-lines format the
    // command-line `run --trace` emits. The `w` and `m` columns carry
    // `value|0xtag` pairs: the visible word and its hidden derivation tag.
    println!("\nfirst events of seed 11:");
    for ev in &fa.trace[..6] {
        println!("{}", ev.to_json_line(&ca.program[ev.pc as usize].to_string()));
    }
}
