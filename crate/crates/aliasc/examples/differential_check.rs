//! The compiler's main correctness harness, in miniature: run every corpus
//! program under every safe mode and several seeds, and demand agreement
//! with the reference evaluator — not just on the final value, but on every
//! scalar assignment along the way.
//!
//!     cargo run --example differential_check

use aliasc::codegen::{
    compile, run_compiled, shadow_assignments, ArrayStrategy, CompileOptions, Mode,
};
use aliasc::frontend::check_source;
use aliasc::machine::MemoryMode;
use aliasc::oracle::eval_program;

/// Corpus programs and an input that drives each through several loop
/// iterations and both arms of its branches.
const CORPUS: &[(&str, &str, &[i32])] = &[
    ("alternating_sum", include_str!("../programs/corpus/alternating_sum.mc"), &[6]),
    ("gcd_sub", include_str!("../programs/corpus/gcd_sub.mc"), &[21, 6]),
    ("collatz_steps", include_str!("../programs/corpus/collatz_steps.mc"), &[6]),
    ("fib_wrap", include_str!("../programs/corpus/fib_wrap.mc"), &[10]),
    ("digit_sum", include_str!("../programs/corpus/digit_sum.mc"), &[987654]),
    ("count_bits", include_str!("../programs/corpus/count_bits.mc"), &[45]),
    ("triangle_skip", include_str!("../programs/corpus/triangle_skip.mc"), &[7]),
    ("early_exit_scan", include_str!("../programs/corpus/early_exit_scan.mc"), &[200, 5]),
    ("nested_caps", include_str!("../programs/corpus/nested_caps.mc"), &[4]),
    ("bounded_double", include_str!("../programs/corpus/bounded_double.mc"), &[100]),
    ("helper_call_loop", include_str!("../programs/corpus/helper_call_loop.mc"), &[6]),
    ("rolling_array", include_str!("../programs/corpus/rolling_array.mc"), &[8]),
];

const FUEL: u64 = 5_000_000;

fn main() {
    for &(name, source, inputs) in CORPUS {
        let prog = check_source(source).expect("corpus sources check");
        let reference = eval_program(&prog, inputs, FUEL).expect("reference evaluation");

        let mut runs = 0;
        for mode in [Mode::PlainSafe, Mode::Obfuscated] {
            for seed in 0..5 {
                let opts = CompileOptions { mode, seed, arrays: ArrayStrategy::Auto };
                let compiled = compile(&prog, &opts).expect("lowers");
                let fin = run_compiled(&compiled, inputs, FUEL, MemoryMode::Fault)
                    .expect("compiled run completes");

                // The decoded outcome and the decoded store-by-store shadow
                // must both match the reference log exactly.
                assert_eq!(fin.outcome, reference.outcome, "{name} {mode} seed {seed}");
                let shadow = shadow_assignments(&compiled, &fin.trace);
                assert_eq!(shadow, reference.assignments, "{name} {mode} seed {seed}");
                runs += 1;
            }
        }
        println!(
            "{name:<18} {inputs:?} -> {} ({} assignments, {runs} compilations agree)",
            reference.outcome,
            reference.assignments.len()
        );
    }
    println!("\nevery corpus program agrees with the reference in both safe modes");
}
