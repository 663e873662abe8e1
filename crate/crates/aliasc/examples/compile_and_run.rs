//! Front to back: parse a source file, compile it for the tagged machine,
//! execute it, and decode the result.
//!
//!     cargo run --example compile_and_run

use aliasc::codegen::{compile, run_compiled, CompileOptions, Mode};
use aliasc::frontend::check_source;
use aliasc::machine::MemoryMode;

fn main() {
    let source = include_str!("../programs/ack.mc");
    let prog = check_source(source).expect("source parses and checks");

    // Compile the same program twice with different seeds. Both binaries
    // compute Ackermann; they agree on almost none of their constants.
    for seed in [7, 8] {
        let opts = CompileOptions::new(Mode::Obfuscated, seed);
        let compiled = compile(&prog, &opts).expect("lowers");

        let fin = run_compiled(&compiled, &[2, 3], 10_000_000, MemoryMode::Fault)
            .expect("runs to completion");
        println!(
            "seed {seed}: {} instructions, A(2,3) = {} in {} steps",
            compiled.program.len(),
            fin.outcome,
            fin.steps
        );

        // The first few instructions: same shape every seed, different
        // constants. The comment column names what each one is doing.
        for pc in 0..5 {
            println!(
                "    {:<34} # {}",
                compiled.program[pc].to_string(),
                compiled.comments[pc]
            );
        }
    }

    // The plain-safe mode is the same lowering with every drawn constant at
    // zero — useful as a readable baseline.
    let opts = CompileOptions::new(Mode::PlainSafe, 0);
    let compiled = compile(&prog, &opts).expect("lowers");
    let fin =
        run_compiled(&compiled, &[2, 3], 10_000_000, MemoryMode::Fault).expect("runs");
    println!("plain: A(2,3) = {} in {} steps", fin.outcome, fin.steps);
}
