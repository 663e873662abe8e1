use super::meta::SiteRole;
use super::{
    compile, run_compiled, shadow_assignments, ArrayStrategy, CodegenError, CompileOptions,
    Compiled, Mode,
};
use crate::frontend::check_source;
use crate::machine::{ExecFault, Instruction, MachineError, MemoryMode, Opcode, Reg};
use crate::oracle::{eval_program, Outcome};

const FUEL: u64 = 50_000_000;
const ORACLE_FUEL: u64 = 2_000_000;
const SEEDS: [u64; 3] = [1, 42, 0xC0FFEE];

const ACK: &str = include_str!("../../programs/ack.mc");
const SIEVE: &str = include_str!("../../programs/sieve.mc");

/// Two functions, correct source: the callee's frame teardown re-derives the
/// stack word arithmetically in unsafe mode, so the caller's next stack read
/// misses its own cells.
const CALL_AND_READ: &str = "
    int F() {
        int x = 7;
        int y = G();
        return x + y;
    }
    int G() { return 0; }
";

fn checked(src: &str) -> crate::frontend::TProgram {
    check_source(src).expect("test source checks")
}

fn build(src: &str, mode: Mode, seed: u64, arrays: ArrayStrategy) -> Compiled {
    compile(&checked(src), &CompileOptions { mode, seed, arrays }).expect("test source compiles")
}

fn run(c: &Compiled, inputs: &[i32]) -> Outcome {
    run_compiled(c, inputs, FUEL, MemoryMode::Fault).expect("run completes").outcome
}

/// Compare compiled behavior against the reference evaluator for every
/// listed input, across modes and seeds. Every case must have a defined
/// reference outcome (value or trap).
fn differential_modes(src: &str, cases: &[&[i32]], modes: &[Mode], arrays: ArrayStrategy) {
    let prog = checked(src);
    for &inputs in cases {
        let want = eval_program(&prog, inputs, ORACLE_FUEL)
            .unwrap_or_else(|e| panic!("reference must be defined for {inputs:?}: {e}"))
            .outcome;
        for &mode in modes {
            for seed in SEEDS {
                let c = compile(&prog, &CompileOptions { mode, seed, arrays })
                    .expect("test source compiles");
                let got = run_compiled(&c, inputs, FUEL, MemoryMode::Fault)
                    .unwrap_or_else(|e| panic!("{mode} seed {seed} inputs {inputs:?}: {e}"))
                    .outcome;
                assert_eq!(got, want, "{mode} seed {seed} inputs {inputs:?}");
            }
        }
    }
}

/// Safe modes only (programs whose callers touch their stack after a call).
fn differential(src: &str, cases: &[&[i32]]) {
    differential_modes(src, cases, &[Mode::PlainSafe, Mode::Obfuscated], ArrayStrategy::Auto);
}

/// All three modes (single-function programs, or tail-only calls).
fn differential_all(src: &str, cases: &[&[i32]]) {
    differential_modes(
        src,
        cases,
        &[Mode::Unsafe, Mode::PlainSafe, Mode::Obfuscated],
        ArrayStrategy::Auto,
    );
}

// ===================== behavior: scalars and control flow =====================

#[test]
fn arithmetic_and_division_guards() {
    let src = "
        int f(int a, int b) {
            return (a + b) * (a - b) + a / b + a % b;
        }
    ";
    differential_all(
        src,
        &[&[9, 4], &[-9, 4], &[9, -4], &[-9, -4], &[0, 3], &[7, 1], &[5, 0]],
    );
}

#[test]
fn literal_folding_and_negation() {
    let src = "
        int f(int x) {
            int a = x + 3;
            int b = 10 - x;
            int c = x - 4;
            return -a + b * c + !x;
        }
    ";
    differential_all(src, &[&[0], &[1], &[-7], &[100]]);
}

#[test]
fn comparison_operators() {
    let src = "
        int f(int a, int b) {
            int r = 0;
            if (a < b) r = r + 1;
            if (a <= b) r = r + 10;
            if (a > b) r = r + 100;
            if (a >= b) r = r + 1000;
            if (a == b) r = r + 10000;
            if (a != b) r = r + 100000;
            return r;
        }
    ";
    differential_all(src, &[&[1, 2], &[2, 1], &[3, 3], &[-5, 5], &[-5, -5]]);
}

#[test]
fn short_circuit_skips_poisoned_operands() {
    // The right operands trap if evaluated with a == 0; the reference
    // semantics require them to be skipped.
    let src = "
        int f(int a, int b) {
            int r = 0;
            if (a != 0 && b / a > 1) r = 1;
            if (a == 0 || b / a > 1) r = r + 2;
            return r;
        }
    ";
    differential_all(src, &[&[0, 8], &[2, 8], &[2, 2], &[-2, 8]]);
}

#[test]
fn assignment_inside_short_circuit_arm() {
    // The right arm rewrites `b`; the short-circuit path must leave `b`
    // readable afterwards in every mode.
    let src = "
        int f(int a, int b) {
            int t = a > 0 && (b = b + 1) > 0;
            return b * 10 + t;
        }
    ";
    differential_all(src, &[&[1, 5], &[0, 5], &[1, -5], &[-3, 2]]);
}

#[test]
fn nested_if_else_chains() {
    let src = "
        int f(int x) {
            int r = 0;
            if (x < 0) {
                if (x < -10) r = 1; else r = 2;
            } else {
                if (x > 10) { r = 3; } else if (x > 5) { r = 4; } else r = 5;
            }
            return r;
        }
    ";
    differential_all(src, &[&[-20], &[-3], &[0], &[7], &[11]]);
}

#[test]
fn while_with_break_and_continue() {
    let src = "
        int f(int n) {
            int s = 0;
            int i = 0;
            while (1) {
                i = i + 1;
                if (i > n) break;
                if (i % 3 == 0) continue;
                s = s + i;
            }
            return s;
        }
    ";
    differential(src, &[&[0], &[1], &[7], &[10]]);
}

#[test]
fn for_loops_nested_with_inner_break() {
    let src = "
        int f(int n) {
            int hits = 0;
            for (int i = 2; i < n; ++i) {
                for (int j = 2; j < i; ++j) {
                    if (i % j == 0) { hits = hits + 1; break; }
                }
            }
            return hits;
        }
    ";
    differential(src, &[&[2], &[6], &[12]]);
}

#[test]
fn condition_with_side_effects_reenters_cleanly() {
    // The loop condition itself assigns; the back edge must restore the
    // state the condition's code expects.
    let src = "
        int f(int n) {
            int i = 0;
            int s = 0;
            while ((i = i + 1) < n) s = s + i;
            return s * 10 + i;
        }
    ";
    differential_all(src, &[&[0], &[1], &[5]]);
}

#[test]
fn calls_with_multiple_arguments_and_nesting() {
    let src = "
        int f(int a, int b) {
            return g(a + 1, h(b), a - b, 2) + h(g(a, b, 1, h(a)));
        }
        int g(int w, int x, int y, int z) { return w * 1000 + x * 100 + y * 10 + z; }
        int h(int x) { return x + 1; }
    ";
    differential(src, &[&[1, 2], &[0, 0], &[-4, 9]]);
}

#[test]
fn recursion_matches_reference() {
    let src = "
        int fib(int n) {
            if (n < 2) return n;
            return fib(n - 1) + fib(n - 2);
        }
    ";
    differential(src, &[&[0], &[1], &[7], &[10]]);
}

#[test]
fn partially_initialized_local_never_faults() {
    // When `a` is zero the reference evaluator rejects the read as
    // uninitialized, but the compiled program must still run: every slot
    // gets a cell at frame construction, so the join's bookkeeping reads
    // find one. The compiled program reads the fill value, zero.
    let src = "
        int f(int a) {
            int x;
            if (a) x = 1;
            return x;
        }
    ";
    differential_all(src, &[&[1], &[5]]);
    for mode in [Mode::Unsafe, Mode::PlainSafe, Mode::Obfuscated] {
        let c = build(src, mode, 11, ArrayStrategy::Auto);
        assert_eq!(run(&c, &[0]), Outcome::Value(0), "{mode}");
    }
}

// ===================== behavior: arrays and pointers =====================

#[test]
fn small_array_read_write() {
    let src = "
        int f(int i, int v) {
            int a[4] = {10, 20, 30, 40};
            a[i] = v;
            int s = 0;
            for (int k = 0; k < 4; ++k) s = s + a[k];
            return s;
        }
    ";
    differential(src, &[&[0, 5], &[3, -1], &[2, 0], &[4, 1], &[-1, 1]]);
}

#[test]
fn array_forms_agree_across_strategies() {
    let src = "
        int f(int i, int v) {
            int a[12] = {[0 ... 11] = 3,};
            a[i % 12] = v;
            int s = 0;
            for (int k = 0; k < 12; ++k) s = s + a[k] * (k + 1);
            return s;
        }
    ";
    let cases: &[&[i32]] = &[&[0, 9], &[11, -2], &[7, 7], &[25, 4]];
    for arrays in [ArrayStrategy::Auto, ArrayStrategy::Linear, ArrayStrategy::Tree] {
        differential_modes(src, cases, &[Mode::PlainSafe, Mode::Obfuscated], arrays);
    }
}

#[test]
fn tree_dispatch_traps_outside_the_range() {
    let src = "
        int f(int i) {
            int a[5] = {1, 2, 3, 4, 5};
            return a[i];
        }
    ";
    let cases: &[&[i32]] = &[&[0], &[4], &[5], &[6], &[7], &[-1], &[-9], &[16]];
    differential_modes(src, cases, &[Mode::PlainSafe, Mode::Obfuscated], ArrayStrategy::Tree);
}

#[test]
fn tree_strategy_rejects_large_arrays() {
    let err = compile(
        &checked(SIEVE),
        &CompileOptions { mode: Mode::PlainSafe, seed: 1, arrays: ArrayStrategy::Tree },
    )
    .unwrap_err();
    assert_eq!(err, CodegenError::TreeTooLarge { len: 30 });
}

#[test]
fn dynamic_arrays_search_by_runtime_size() {
    let src = "
        int f(int n, int i) {
            int a[n];
            for (int k = 0; k < n; ++k) a[k] = k * k;
            return a[i];
        }
    ";
    differential(src, &[&[5, 3], &[5, 0], &[5, 5], &[5, -1], &[1, 0], &[64, 63], &[5, 64]]);
}

#[test]
fn stack_pointer_walk() {
    let src = "
        int f(int i) {
            int a[4] = {1, 2, 3, 4};
            int *p restrict a = a + 1;
            *p = 9;
            p = p + i;
            *(p + 1) = *(p + 1) + 5;
            int *q restrict a = p - 1;
            return *q * 100 + a[3];
        }
    ";
    differential(src, &[&[0], &[1], &[-1], &[2], &[3]]);
}

#[test]
fn heap_pointer_walk() {
    let src = "
        int g[5] = {2, 4, 6, 8, 10};
        int f(int i) {
            int *p restrict g = g + 2;
            *(p - 1) = 7;
            p = p + i;
            return *p + g[1];
        }
    ";
    differential(src, &[&[0], &[-2], &[2], &[3], &[-3]]);
}

#[test]
fn pointer_into_dynamic_array() {
    let src = "
        int f(int n, int i) {
            int a[n];
            int j = 0;
            while (j < n) { a[j] = j + 100; j = j + 1; }
            int *p restrict a = a;
            p = p + i;
            return *p;
        }
    ";
    differential(src, &[&[4, 0], &[4, 3], &[4, 4], &[4, -1], &[64, 63]]);
}

#[test]
fn globals_persist_across_calls() {
    let src = "
        int counter = 0;
        int step = 3;
        int f(int n) {
            int last = 0;
            for (int i = 0; i < n; ++i) last = bump();
            return last * 10 + counter;
        }
        int bump() { counter = counter + step; return counter; }
    ";
    differential(src, &[&[0], &[1], &[4]]);
}

// ===================== behavior: the frozen reference points =====================

#[test]
fn ackermann_fixed_points() {
    let prog = checked(ACK);
    let cases: [(&[i32], i32); 5] =
        [(&[0, 0], 1), (&[1, 1], 3), (&[2, 2], 7), (&[2, 3], 9), (&[3, 1], 13)];
    for (inputs, want) in cases {
        assert_eq!(
            eval_program(&prog, inputs, ORACLE_FUEL).unwrap().outcome,
            Outcome::Value(want)
        );
        for mode in [Mode::PlainSafe, Mode::Obfuscated] {
            let c = compile(&prog, &CompileOptions { mode, seed: 9, arrays: ArrayStrategy::Auto })
                .unwrap();
            assert_eq!(run(&c, inputs), Outcome::Value(want), "{mode} {inputs:?}");
        }
    }
}

#[test]
fn sieve_fixed_points() {
    let prog = checked(SIEVE);
    let cases: [(i32, i32); 7] = [(2, 0), (3, 0), (4, 3), (10, 7), (29, 23), (30, 29), (31, 0)];
    for (n, want) in cases {
        assert_eq!(
            eval_program(&prog, &[n], ORACLE_FUEL).unwrap().outcome,
            Outcome::Value(want),
            "reference S({n})"
        );
    }
    differential_all(SIEVE, &[&[10], &[30], &[31]]);
}

#[test]
fn unsafe_mode_rejects_recursion() {
    let err = compile(
        &checked(ACK),
        &CompileOptions { mode: Mode::Unsafe, seed: 1, arrays: ArrayStrategy::Auto },
    )
    .unwrap_err();
    assert_eq!(err, CodegenError::Recursion { name: "A".into() });

    let mutual = "
        int f(int n) { if (n < 1) return 0; return g(n - 1); }
        int g(int n) { return f(n); }
    ";
    assert!(matches!(
        compile(
            &checked(mutual),
            &CompileOptions { mode: Mode::Unsafe, seed: 1, arrays: ArrayStrategy::Auto }
        ),
        Err(CodegenError::Recursion { .. })
    ));
}

// ===================== the aliasing break =====================

#[test]
fn unsafe_call_faults_on_callers_first_stack_read() {
    let c = build(CALL_AND_READ, Mode::Unsafe, 5, ArrayStrategy::Auto);
    let err = run_compiled(&c, &[], FUEL, MemoryMode::Fault).unwrap_err();
    let super::ExecError::Machine(MachineError::Fault { pc, fault, .. }) = err else {
        panic!("expected a machine fault, got {err:?}");
    };
    assert!(matches!(fault, ExecFault::AliasFault { .. }), "fault kind: {fault}");

    // The faulting instruction is a load, and it sits after the call to G
    // in F's body: the victim is the caller, reading its own frame.
    assert!(matches!(c.program[pc as usize], Instruction::Lw { .. }));
    let g_entry = c.meta.function("G").expect("G compiled").entry_pc;
    let jal_pc = c
        .program
        .iter()
        .position(|i| matches!(i, Instruction::Jal { target } if *target == g_entry))
        .expect("call to G exists") as u32;
    assert!(pc > jal_pc, "fault at pc {pc} should follow the call at pc {jal_pc}");

    // The repaired conventions return the right answer.
    for mode in [Mode::PlainSafe, Mode::Obfuscated] {
        let c = build(CALL_AND_READ, mode, 5, ArrayStrategy::Auto);
        assert_eq!(run(&c, &[]), Outcome::Value(7), "{mode}");
    }
}

#[test]
fn unsafe_call_on_silent_hardware_computes_garbage() {
    let c = build(CALL_AND_READ, Mode::Unsafe, 5, ArrayStrategy::Auto);
    let mut wrong = 0;
    for seed in 0..20u64 {
        let fin = run_compiled(&c, &[], FUEL, MemoryMode::Garbage { seed })
            .expect("silent hardware never faults");
        if fin.outcome != Outcome::Value(7) {
            wrong += 1;
        }
    }
    assert!(wrong >= 19, "junk reads almost never reproduce the right answer, got {wrong}/20");
}

// ===================== structure =====================

#[test]
fn plain_safe_uses_canonical_two_step_slot_access() {
    let c = build("int f(int x) { int y = x; return y; }", Mode::PlainSafe, 3, ArrayStrategy::Auto);
    let found = c.program.windows(2).any(|w| {
        matches!(
            (&w[0], &w[1]),
            (
                Instruction::Addi { rd, rs: Reg::Sp, .. },
                Instruction::Lw { rd: rd2, disp: 0, base },
            ) if rd == rd2 && rd == base
        )
    });
    assert!(found, "expected `addi r sp k; lw r 0(r)` somewhere in the body");
}

#[test]
fn plain_modes_emit_no_trailers_or_recodes() {
    let src = "int f(int a) { int x = 0; if (a) x = 1; return x; }";
    for mode in [Mode::Unsafe, Mode::PlainSafe] {
        let c = build(src, mode, 3, ArrayStrategy::Auto);
        assert!(
            c.meta.constant_sites.iter().all(|s| s.role != SiteRole::Trailer),
            "{mode} must not emit trailers"
        );
    }
    let obf = build(src, Mode::Obfuscated, 3, ArrayStrategy::Auto);
    let trailer_pcs: Vec<u32> = obf
        .meta
        .constant_sites
        .iter()
        .filter(|s| s.role == SiteRole::Trailer)
        .map(|s| s.pc)
        .collect();
    assert!(!trailer_pcs.is_empty(), "a write inside one branch arm forces a trailer");

    // A trailer is exactly: form address, load, recode, form new address,
    // store.
    let mut pcs: Vec<u32> = trailer_pcs;
    pcs.sort_unstable();
    pcs.dedup();
    assert_eq!(pcs.len() % 5, 0, "five constant-bearing instructions per trailer");
    for run in pcs.chunks(5) {
        let base = run[0];
        assert_eq!(run, [base, base + 1, base + 2, base + 3, base + 4]);
        let ops: Vec<Opcode> =
            (0..5).map(|i| c_opcode(&obf.program[(base + i) as usize])).collect();
        assert_eq!(
            ops,
            [Opcode::Addi, Opcode::Lw, Opcode::Addi, Opcode::Addi, Opcode::Sw],
            "trailer shape at pc {base}"
        );
    }
}

fn c_opcode(i: &Instruction) -> Opcode {
    i.opcode()
}

#[test]
fn every_frame_slot_is_written_before_the_body_runs() {
    // Frame construction must leave a cell for each scalar slot: params,
    // named locals, and the expression scratch area.
    let src = "
        int f(int a) {
            int x;
            int y = a * 2;
            if (a) x = y;
            return x + y;
        }
    ";
    let c = build(src, Mode::Obfuscated, 7, ArrayStrategy::Auto);
    let prog = checked(src);
    let frame = &prog.functions[0].frame;
    let entry = c.meta.function("f").unwrap().entry_pc as usize;
    let body_stores = c.program[entry..]
        .iter()
        .take_while(|i| !matches!(i, Instruction::Jr { .. }))
        .filter(|i| matches!(i, Instruction::Sw { .. }))
        .count();
    // ra + params + every non-param scalar slot, at minimum.
    assert!(
        body_stores >= frame.ra_slot as usize + 1,
        "expected at least {} stores in f, found {body_stores}",
        frame.ra_slot + 1
    );
}

#[test]
fn seeds_share_a_fingerprint_but_not_constants() {
    let progs: Vec<Compiled> =
        SEEDS.iter().map(|&s| build(SIEVE, Mode::Obfuscated, s, ArrayStrategy::Auto)).collect();
    let fingerprint: Vec<Opcode> = progs[0].program.iter().map(Instruction::opcode).collect();
    for c in &progs[1..] {
        let fp: Vec<Opcode> = c.program.iter().map(Instruction::opcode).collect();
        assert_eq!(fp, fingerprint, "same opcode stream for every seed");
    }
    assert_ne!(
        progs[0].program, progs[1].program,
        "different seeds must disagree on constants somewhere"
    );
}

#[test]
fn every_emitted_constant_replays_from_the_draw_log() {
    for mode in [Mode::Unsafe, Mode::PlainSafe, Mode::Obfuscated] {
        let c = build(SIEVE, mode, 0xFEED, ArrayStrategy::Auto);
        let draws = &c.meta.draws;
        let mut covered = std::collections::HashSet::new();
        for site in &c.meta.constant_sites {
            let emitted = constant_at(&c.program[site.pc as usize], site.operand)
                .unwrap_or_else(|| panic!("site at pc {} names no constant", site.pc));
            let replayed = site
                .affine
                .eval(draws)
                .unwrap_or_else(|| panic!("draw index out of range at pc {}", site.pc));
            assert_eq!(replayed, emitted, "{mode} pc {} operand {}", site.pc, site.operand);
            covered.insert((site.pc, site.operand));
        }
        // Coverage: every constant-bearing operand has a site.
        for (pc, instr) in c.program.iter().enumerate() {
            let operands: u8 = match instr {
                Instruction::Addi { .. } | Instruction::Lw { .. } | Instruction::Sw { .. } => 1,
                Instruction::Xor { .. } => 3,
                _ => 0,
            };
            for op in 0..operands {
                assert!(
                    covered.contains(&(pc as u32, op)),
                    "{mode}: no site covers pc {pc} operand {op}"
                );
            }
        }
    }
}

fn constant_at(i: &Instruction, operand: u8) -> Option<i32> {
    match (i, operand) {
        (Instruction::Addi { k, .. }, 0) => Some(*k),
        (Instruction::Lw { disp, .. }, 0) => Some(*disp),
        (Instruction::Sw { disp, .. }, 0) => Some(*disp),
        (Instruction::Xor { k1, .. }, 0) => Some(*k1),
        (Instruction::Xor { k2, .. }, 1) => Some(*k2),
        (Instruction::Xor { k0, .. }, 2) => Some(*k0),
        _ => None,
    }
}

#[test]
fn compilation_is_deterministic() {
    for mode in [Mode::Unsafe, Mode::PlainSafe, Mode::Obfuscated] {
        let a = build(SIEVE, mode, 77, ArrayStrategy::Auto);
        let b = build(SIEVE, mode, 77, ArrayStrategy::Auto);
        assert_eq!(a.program, b.program);
        assert_eq!(
            serde_json::to_string(&a.meta).unwrap(),
            serde_json::to_string(&b.meta).unwrap()
        );
    }
}

#[test]
fn safe_modes_share_one_draw_stream() {
    // The plain-safe compilation consumes exactly the same draw sequence as
    // the obfuscated one (values zeroed), so per-seed structure lines up.
    let plain = build(CALL_AND_READ, Mode::PlainSafe, 4, ArrayStrategy::Auto);
    let obf = build(CALL_AND_READ, Mode::Obfuscated, 4, ArrayStrategy::Auto);
    assert_eq!(plain.meta.draws.len(), obf.meta.draws.len());
    assert!(plain.meta.draws.iter().all(|&v| v == 0));

    // The frameless mode skips the three frame-link draws per function.
    let unsf = build(CALL_AND_READ, Mode::Unsafe, 4, ArrayStrategy::Auto);
    assert_eq!(unsf.meta.draws.len() + 3 * 2, obf.meta.draws.len());
}

#[test]
fn assignment_stores_shadow_the_reference_log() {
    let src = "
        int f(int n) {
            int s = 0;
            int i = 1;
            while (i < n + 1) {
                if (i % 2 == 0) s = s + i; else s = s - i;
                i = i + 1;
            }
            return s;
        }
    ";
    let prog = checked(src);
    let want = eval_program(&prog, &[6], ORACLE_FUEL).unwrap();
    for mode in [Mode::PlainSafe, Mode::Obfuscated] {
        for seed in SEEDS {
            let c = compile(&prog, &CompileOptions { mode, seed, arrays: ArrayStrategy::Auto })
                .unwrap();
            let fin = run_compiled(&c, &[6], FUEL, MemoryMode::Fault).unwrap();
            assert_eq!(fin.outcome, want.outcome);
            let shadow = shadow_assignments(&c, &fin.trace);
            assert_eq!(shadow, want.assignments, "{mode} seed {seed}");
        }
    }
}
