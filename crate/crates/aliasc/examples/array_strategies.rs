//! The two dispatch shapes behind `t[i]`.
//!
//! Array elements live in separately keyed cells, so an access must *select*
//! a key rather than compute an address. The compiler offers two shapes: a
//! linear candidate chain (compare the index against every element slot in
//! turn) and a balanced tree over the index bits. The chain costs O(N)
//! executed instructions per access, the tree O(log N).
//!
//!     cargo run --example array_strategies

use aliasc::codegen::{compile, run_compiled, ArrayStrategy, CompileOptions, Mode};
use aliasc::frontend::check_source;
use aliasc::machine::MemoryMode;
use aliasc::oracle::{Outcome, Trap};

fn main() {
    // One guarded read of a 16-element table, index from the caller.
    let source = r#"
        int get(int i) {
            int t[16] = {[0 ... 15] = 5};
            return t[i] + i;
        }
    "#;
    let prog = check_source(source).expect("source parses and checks");

    for strategy in [ArrayStrategy::Linear, ArrayStrategy::Tree] {
        let opts = CompileOptions {
            mode: Mode::PlainSafe,
            seed: 0,
            arrays: strategy,
        };
        let compiled = compile(&prog, &opts).expect("lowers");
        println!("{strategy:?}: {} instructions total", compiled.program.len());

        // Executed steps per lookup. The fixed part (startup, frame, fill)
        // is identical, so the per-index growth isolates the dispatch cost:
        // the chain climbs with the index, the tree stays flat.
        let steps: Vec<u64> = (0..16)
            .map(|i| {
                run_compiled(&compiled, &[i], 1_000_000, MemoryMode::Fault)
                    .expect("runs")
                    .steps
            })
            .collect();
        println!("  steps for get(0)..get(15): {steps:?}");
        println!(
            "  spread between cheapest and dearest lookup: {}",
            steps.iter().max().unwrap() - steps.iter().min().unwrap()
        );

        // Out-of-range indices trap identically under both shapes.
        let oob = run_compiled(&compiled, &[16], 1_000_000, MemoryMode::Fault)
            .expect("traps cleanly");
        assert_eq!(oob.outcome, Outcome::Trap(Trap::OutOfBounds));
        println!("  get(16) -> {}\n", oob.outcome);
    }
}
