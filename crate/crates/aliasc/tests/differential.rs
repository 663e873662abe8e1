//! Differential testing: every compiled configuration must agree with the
//! reference evaluator on the decoded outcome and on the decoded value of
//! every scalar store along the way.

use aliasc::codegen::{
    compile, run_compiled, shadow_assignments, ArrayStrategy, CompileOptions, Mode,
};
use aliasc::frontend::check_source;
use aliasc::machine::MemoryMode;
use aliasc::oracle::{eval_program, Outcome, Trap};

const FUEL: u64 = 20_000_000;

/// Corpus programs, each with inputs driving several loop iterations and
/// both arms of every branch.
const CORPUS: &[(&str, &str, &[&[i32]])] = &[
    (
        "alternating_sum",
        include_str!("../programs/corpus/alternating_sum.mc"),
        &[&[6], &[1], &[9]],
    ),
    ("gcd_sub", include_str!("../programs/corpus/gcd_sub.mc"), &[&[21, 6], &[12, 30], &[7, 7]]),
    ("collatz_steps", include_str!("../programs/corpus/collatz_steps.mc"), &[&[6], &[7], &[1]]),
    ("fib_wrap", include_str!("../programs/corpus/fib_wrap.mc"), &[&[10], &[3], &[16]]),
    ("digit_sum", include_str!("../programs/corpus/digit_sum.mc"), &[&[987654], &[5], &[999]]),
    ("count_bits", include_str!("../programs/corpus/count_bits.mc"), &[&[45], &[0], &[1023]]),
    ("triangle_skip", include_str!("../programs/corpus/triangle_skip.mc"), &[&[7], &[3], &[12]]),
    (
        "early_exit_scan",
        include_str!("../programs/corpus/early_exit_scan.mc"),
        &[&[200, 5], &[10, 1], &[1000000000, 3]],
    ),
    ("nested_caps", include_str!("../programs/corpus/nested_caps.mc"), &[&[4], &[1], &[6]]),
    ("bounded_double", include_str!("../programs/corpus/bounded_double.mc"), &[&[100], &[2], &[0]]),
    (
        "helper_call_loop",
        include_str!("../programs/corpus/helper_call_loop.mc"),
        &[&[6], &[3], &[10]],
    ),
    ("rolling_array", include_str!("../programs/corpus/rolling_array.mc"), &[&[8], &[3], &[15]]),
];

/// Featured demonstration programs.
const FEATURED: &[(&str, &str, &[&[i32]])] = &[
    ("ack", include_str!("../programs/ack.mc"), &[&[0, 0], &[1, 1], &[2, 2], &[2, 3], &[3, 1]]),
    ("sieve", include_str!("../programs/sieve.mc"), &[&[2], &[4], &[10], &[29], &[30], &[31]]),
    ("unsafe_demo", include_str!("../programs/unsafe_demo.mc"), &[&[5], &[0], &[-3]]),
    (
        "table_lookup",
        include_str!("../programs/table_lookup.mc"),
        &[&[0], &[3], &[7], &[8], &[-1]],
    ),
    ("dyn_fill", include_str!("../programs/dyn_fill.mc"), &[&[0], &[1], &[5], &[64]]),
    ("ptr_walk", include_str!("../programs/ptr_walk.mc"), &[&[0], &[4], &[6]]),
];

/// One configuration against the reference: outcome plus full store shadow.
fn agree(name: &str, source: &str, inputs: &[i32], mode: Mode, seed: u64, arrays: ArrayStrategy) {
    let prog = check_source(source).unwrap_or_else(|e| panic!("{name}: {e}"));
    let reference = eval_program(&prog, inputs, FUEL)
        .unwrap_or_else(|e| panic!("{name}{inputs:?}: reference: {e}"));
    let opts = CompileOptions { mode, seed, arrays };
    let compiled = compile(&prog, &opts).unwrap_or_else(|e| panic!("{name}: {e}"));
    let fin = run_compiled(&compiled, inputs, FUEL, MemoryMode::Fault)
        .unwrap_or_else(|e| panic!("{name}{inputs:?} {mode} seed {seed}: {e}"));
    assert_eq!(
        fin.outcome, reference.outcome,
        "{name}{inputs:?} {mode} seed {seed}: outcome mismatch"
    );
    let shadow = shadow_assignments(&compiled, &fin.trace);
    assert_eq!(
        shadow, reference.assignments,
        "{name}{inputs:?} {mode} seed {seed}: store shadow diverged"
    );
}

#[test]
fn corpus_agrees_in_every_safe_mode_and_seed() {
    for &(name, source, input_sets) in CORPUS {
        for &inputs in input_sets {
            for mode in [Mode::PlainSafe, Mode::Obfuscated] {
                for seed in [0, 1, 7, 42, 0xC0FFEE] {
                    agree(name, source, inputs, mode, seed, ArrayStrategy::Auto);
                }
            }
        }
    }
}

#[test]
fn featured_programs_agree_in_every_safe_mode_and_seed() {
    for &(name, source, input_sets) in FEATURED {
        for &inputs in input_sets {
            for mode in [Mode::PlainSafe, Mode::Obfuscated] {
                for seed in [0, 3, 11] {
                    agree(name, source, inputs, mode, seed, ArrayStrategy::Auto);
                }
            }
        }
    }
}

#[test]
fn array_heavy_programs_agree_under_forced_strategies() {
    for &(name, source, input_sets) in &[
        FEATURED[3], // table_lookup
        CORPUS[11],  // rolling_array
    ] {
        for &inputs in input_sets {
            for arrays in [ArrayStrategy::Linear, ArrayStrategy::Tree] {
                for seed in [0, 5] {
                    agree(name, source, inputs, Mode::Obfuscated, seed, arrays);
                    agree(name, source, inputs, Mode::PlainSafe, seed, arrays);
                }
            }
        }
    }
}

#[test]
fn traps_are_reproduced_exactly() {
    // Division by zero, out-of-bounds reads, and out-of-bounds writes all
    // decode to the same trap the reference evaluator reports.
    let cases: &[(&str, &[i32], Trap)] = &[
        ("int f(int a, int b) { return a / b; }", &[7, 0], Trap::DivideByZero),
        ("int f(int a, int b) { return a % b; }", &[7, 0], Trap::DivideByZero),
        (
            "int f(int i) { int t[4] = {1, 2, 3, 4}; return t[i]; }",
            &[4],
            Trap::OutOfBounds,
        ),
        (
            "int f(int i) { int t[4] = {1, 2, 3, 4}; t[i] = 9; return t[0]; }",
            &[-1],
            Trap::OutOfBounds,
        ),
        (
            "int f(int n) { int a[n]; a[n] = 1; return 0; }",
            &[5],
            Trap::OutOfBounds,
        ),
    ];
    for &(source, inputs, want) in cases {
        let prog = check_source(source).expect("trap sources check");
        let reference = eval_program(&prog, inputs, FUEL).expect("reference runs");
        assert_eq!(reference.outcome, Outcome::Trap(want));
        for mode in [Mode::PlainSafe, Mode::Obfuscated] {
            for seed in [0, 9] {
                let opts = CompileOptions { mode, seed, arrays: ArrayStrategy::Auto };
                let compiled = compile(&prog, &opts).expect("lowers");
                let fin =
                    run_compiled(&compiled, inputs, FUEL, MemoryMode::Fault).expect("completes");
                assert_eq!(fin.outcome, Outcome::Trap(want), "{source} {mode} seed {seed}");
            }
        }
    }
}

#[test]
fn unsafe_mode_agrees_until_a_user_call_returns() {
    // Unsafe lowering is only wrong across *user* function calls (the
    // arithmetic helpers keep their state in static cells, not frames), so
    // every corpus entry without one must agree in unsafe mode too.
    for &(name, source, input_sets) in CORPUS {
        if name == "helper_call_loop" {
            continue;
        }
        for &inputs in input_sets {
            agree(name, source, inputs, Mode::Unsafe, 0, ArrayStrategy::Auto);
        }
    }
}
