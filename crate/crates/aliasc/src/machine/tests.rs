//! Machine-level invariants:
//!
//! - tag transitions are deterministic and avalanche (adding zero still
//!   moves the tag; nearby constants give unrelated tags)
//! - value arithmetic is plain two's-complement wrapping
//! - copies preserve words bit-exactly; store-then-load round-trips
//! - identical calculation sequences reproduce identical keys; folding a
//!   displacement into the base register does not
//! - branches compare values only (tags never influence control flow)

use super::*;

/// Deterministic sample stream for tests.
fn sample_words(n: usize, mut seed: u64) -> Vec<TaggedWord> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let hi = (seed >> 32) as u32;
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let lo = (seed >> 32) as u32;
        out.push(TaggedWord::new(hi as i32, lo));
    }
    out
}

fn exec_one(st: &mut MachineState, instr: Instruction) -> TraceEvent {
    st.exec_instruction(&instr).expect("instruction faulted")
}

#[test]
fn tag_step_is_deterministic() {
    for w in sample_words(100, 1) {
        let a = tag_step(TagOp::Addi, &[w], &[42]);
        let b = tag_step(TagOp::Addi, &[w], &[42]);
        assert_eq!(a, b);
    }
}

#[test]
fn adding_zero_still_moves_the_tag() {
    let mut collisions = 0;
    for w in sample_words(1000, 2) {
        if tag_step(TagOp::Addi, &[w], &[0]) == w.tag {
            collisions += 1;
        }
    }
    assert!(collisions <= 1, "{collisions} fixed points for addi 0");
}

#[test]
fn nearby_constants_give_distinct_tags() {
    for w in sample_words(1000, 3) {
        assert_ne!(
            tag_step(TagOp::Addi, &[w], &[5]),
            tag_step(TagOp::Addi, &[w], &[6]),
            "k=5 and k=6 collided on {w}"
        );
    }
}

#[test]
fn address_formation_is_domain_separated_from_addi() {
    // `addi r base k` followed by a zero-displacement access must key
    // differently from a direct k-displacement access off the same base.
    for w in sample_words(1000, 4) {
        let folded = {
            let stepped = TaggedWord::new(
                w.value.wrapping_add(7),
                tag_step(TagOp::Addi, &[w], &[7]),
            );
            tag_step(TagOp::MemAddr, &[stepped], &[0])
        };
        let direct = tag_step(TagOp::MemAddr, &[w], &[7]);
        assert_ne!(folded, direct, "folded and direct addressing collided");
    }
}

#[test]
fn addi_and_xor_values_match_plain_wrapping_arithmetic() {
    let ws = sample_words(20_000, 5);
    for pair in ws.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        let k = b.value;
        let mut st = MachineState::new(MemoryMode::Fault);
        st.set_reg(Reg::T0, a);
        st.set_reg(Reg::T1, b);
        exec_one(
            &mut st,
            Instruction::Addi {
                rd: Reg::T2,
                rs: Reg::T0,
                k,
            },
        );
        assert_eq!(st.reg(Reg::T2).value, a.value.wrapping_add(k));
        st.pc = 0;
        exec_one(
            &mut st,
            Instruction::Xor {
                rd: Reg::T3,
                r1: Reg::T0,
                r2: Reg::T1,
                k1: 11,
                k2: -13,
                k0: k,
            },
        );
        let want = (a.value.wrapping_add(11) ^ b.value.wrapping_add(-13)).wrapping_sub(k);
        assert_eq!(st.reg(Reg::T3).value, want);
    }
}

#[test]
fn move_and_memory_copies_are_bit_exact() {
    for w in sample_words(200, 6) {
        let mut st = MachineState::new(MemoryMode::Fault);
        st.set_reg(Reg::T0, w);
        exec_one(&mut st, Instruction::Move { rd: Reg::T1, rs: Reg::T0 });
        assert_eq!(st.reg(Reg::T1), w, "move changed bits");

        // Store through one address calculation, load through an identical
        // one: the word must come back unchanged.
        exec_one(&mut st, Instruction::Addi { rd: Reg::T2, rs: Reg::Zer, k: -6 });
        exec_one(&mut st, Instruction::Sw { disp: 3, base: Reg::T2, rs: Reg::T0 });
        exec_one(&mut st, Instruction::Addi { rd: Reg::T3, rs: Reg::Zer, k: -6 });
        exec_one(&mut st, Instruction::Lw { rd: Reg::T4, disp: 3, base: Reg::T3 });
        assert_eq!(st.reg(Reg::T4), w, "store/load round-trip changed bits");
    }
}

#[test]
fn replayed_calculation_reproduces_the_key() {
    // Two separate executions of the same instruction sequence produce
    // identical traces, bit for bit.
    let prog = vec![
        Instruction::Addi { rd: Reg::T0, rs: Reg::Zer, k: 1234 },
        Instruction::Addi { rd: Reg::T0, rs: Reg::T0, k: -99 },
        Instruction::Sw { disp: 5, base: Reg::T0, rs: Reg::T0 },
        Instruction::Addi { rd: Reg::T1, rs: Reg::Zer, k: 1234 },
        Instruction::Addi { rd: Reg::T1, rs: Reg::T1, k: -99 },
        Instruction::Lw { rd: Reg::T2, disp: 5, base: Reg::T1 },
        Instruction::Stop,
    ];
    let a = run(&prog, &[], &[], 100, MemoryMode::Fault).unwrap();
    let b = run(&prog, &[], &[], 100, MemoryMode::Fault).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.state.reg(Reg::T2), a.state.reg(Reg::T0));
}

#[test]
fn detour_through_an_equal_value_is_a_different_cell() {
    // Writing via sp+k and reading via (sp+k−1)+1 lands on the same value
    // with a different tag — the load must fault.
    let sp0 = TaggedWord::reset(0);
    let direct = {
        let base = TaggedWord::new(
            sp0.value.wrapping_add(8),
            tag_step(TagOp::Addi, &[sp0], &[8]),
        );
        TaggedWord::new(base.value, tag_step(TagOp::MemAddr, &[base], &[0]))
    };
    let detour = {
        let step1 = TaggedWord::new(
            sp0.value.wrapping_add(7),
            tag_step(TagOp::Addi, &[sp0], &[7]),
        );
        let step2 = TaggedWord::new(
            step1.value.wrapping_add(1),
            tag_step(TagOp::Addi, &[step1], &[1]),
        );
        TaggedWord::new(step2.value, tag_step(TagOp::MemAddr, &[step2], &[0]))
    };
    assert_eq!(direct.value, detour.value);
    assert_ne!(direct.key(), detour.key());

    let prog = vec![
        Instruction::Addi { rd: Reg::T0, rs: Reg::Sp, k: 8 },
        Instruction::Sw { disp: 0, base: Reg::T0, rs: Reg::T0 },
        Instruction::Addi { rd: Reg::T1, rs: Reg::Sp, k: 7 },
        Instruction::Addi { rd: Reg::T1, rs: Reg::T1, k: 1 },
        Instruction::Lw { rd: Reg::T2, disp: 0, base: Reg::T1 },
        Instruction::Stop,
    ];
    let err = run(&prog, &[], &[], 100, MemoryMode::Fault).unwrap_err();
    match err {
        MachineError::Fault {
            step,
            pc,
            fault: ExecFault::AliasFault { addr },
        } => {
            assert_eq!(step, 4);
            assert_eq!(pc, 4);
            assert_eq!(addr, detour);
        }
        other => panic!("expected alias fault, got {other:?}"),
    }
}

#[test]
fn branches_ignore_tags() {
    for w in sample_words(100, 7) {
        let mut st = MachineState::new(MemoryMode::Fault);
        st.set_reg(Reg::T0, w);
        st.set_reg(Reg::T1, TaggedWord::new(w.value, w.tag.wrapping_add(1)));
        exec_one(
            &mut st,
            Instruction::Beq { r1: Reg::T0, r2: Reg::T1, i: 5 },
        );
        assert_eq!(st.pc, 6, "beq must take equal values despite tags");

        let mut st = MachineState::new(MemoryMode::Fault);
        st.set_reg(Reg::T0, TaggedWord::new(0, w.tag));
        exec_one(&mut st, Instruction::Beqz { r1: Reg::T0, i: 3 });
        assert_eq!(st.pc, 4, "beqz must fire on value zero despite tag");
    }
}

#[test]
fn jal_stamps_ra_with_the_reset_tag() {
    let mut st = MachineState::new(MemoryMode::Fault);
    st.pc = 10;
    exec_one(&mut st, Instruction::Jal { target: 3 });
    assert_eq!(st.reg(Reg::Ra), TaggedWord::new(11, RESET_TAG));
    assert_eq!(st.pc, 3);
    exec_one(&mut st, Instruction::Jr { rs: Reg::Ra });
    assert_eq!(st.pc, 11);
}

#[test]
fn writes_to_zer_are_discarded() {
    let mut st = MachineState::new(MemoryMode::Fault);
    exec_one(&mut st, Instruction::Addi { rd: Reg::Zer, rs: Reg::Zer, k: 7 });
    assert_eq!(st.reg(Reg::Zer), TaggedWord::reset(0));
}

#[test]
fn garbage_mode_returns_stable_junk_per_seed() {
    let prog = vec![
        Instruction::Addi { rd: Reg::T0, rs: Reg::Zer, k: -40 },
        Instruction::Lw { rd: Reg::T1, disp: 0, base: Reg::T0 },
        Instruction::Addi { rd: Reg::T2, rs: Reg::Zer, k: -40 },
        Instruction::Lw { rd: Reg::T3, disp: 0, base: Reg::T2 },
        Instruction::Stop,
    ];
    let a = run(&prog, &[], &[], 100, MemoryMode::Garbage { seed: 1 }).unwrap();
    // Repeated reads of the same absent key agree within a run...
    assert_eq!(a.state.reg(Reg::T1), a.state.reg(Reg::T3));
    // ...and across runs with the same seed.
    let b = run(&prog, &[], &[], 100, MemoryMode::Garbage { seed: 1 }).unwrap();
    assert_eq!(a.state.reg(Reg::T1), b.state.reg(Reg::T1));
    // A different seed yields different junk.
    let c = run(&prog, &[], &[], 100, MemoryMode::Garbage { seed: 2 }).unwrap();
    assert_ne!(a.state.reg(Reg::T1), c.state.reg(Reg::T1));
}

#[test]
fn fuel_exhaustion_is_reported() {
    let prog = vec![Instruction::B { i: -1 }];
    match run(&prog, &[], &[], 50, MemoryMode::Fault) {
        Err(MachineError::FuelExhausted { fuel: 50 }) => {}
        other => panic!("expected fuel exhaustion, got {other:?}"),
    }
}

#[test]
fn falling_off_the_program_is_an_invalid_pc() {
    let prog = vec![Instruction::B { i: 3 }];
    match run(&prog, &[], &[], 50, MemoryMode::Fault) {
        Err(MachineError::Fault {
            fault: ExecFault::InvalidPc { .. },
            ..
        }) => {}
        other => panic!("expected invalid pc, got {other:?}"),
    }
}

#[test]
fn branch_increment_skips_that_many_instructions() {
    // b 1 at pc 39 must continue at 41.
    let mut st = MachineState::new(MemoryMode::Fault);
    st.pc = 39;
    exec_one(&mut st, Instruction::B { i: 1 });
    assert_eq!(st.pc, 41);
    // A not-taken beq falls through to the next instruction.
    let mut st = MachineState::new(MemoryMode::Fault);
    st.pc = 37;
    st.set_reg(Reg::T0, TaggedWord::reset(3));
    st.set_reg(Reg::T1, TaggedWord::reset(0));
    exec_one(&mut st, Instruction::Beq { r1: Reg::T0, r2: Reg::T1, i: 2 });
    assert_eq!(st.pc, 38);
}

mod asm_round_trip {
    use super::super::asm::{parse_program, print_program};
    use super::*;

    #[test]
    fn printed_programs_reparse_identically() {
        let prog = vec![
            Instruction::Addi { rd: Reg::T0, rs: Reg::A0, k: -86921031 },
            Instruction::Lw { rd: Reg::T0, disp: 866593746, base: Reg::T1 },
            Instruction::Sw { disp: 866593746, base: Reg::T1, rs: Reg::T0 },
            Instruction::Xor {
                rd: Reg::T0,
                r1: Reg::T0,
                r2: Reg::T1,
                k1: -1734761313,
                k2: 1242455113,
                k0: 1902505258,
            },
            Instruction::Beq { r1: Reg::T0, r2: Reg::T1, i: 2 },
            Instruction::Beqz { r1: Reg::T0, i: 9 },
            Instruction::Bne { r1: Reg::T0, r2: Reg::T1, i: -4 },
            Instruction::B { i: 540 },
            Instruction::Move { rd: Reg::Fp, rs: Reg::Sp },
            Instruction::Jal { target: 12 },
            Instruction::Jr { rs: Reg::Ra },
            Instruction::Stop,
        ];
        let text = print_program(&prog, |pc| (pc == 0).then(|| "entry".to_string()));
        let reparsed = parse_program(&text).unwrap();
        assert_eq!(prog, reparsed);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\n\n  stop   # trailing\n";
        assert_eq!(parse_program(text).unwrap(), vec![Instruction::Stop]);
    }

    #[test]
    fn unknown_opcodes_are_rejected_with_line_numbers() {
        let e = parse_program("stop\nfrobnicate t0\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.msg.contains("frobnicate"));
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_word() -> impl Strategy<Value = TaggedWord> {
        (any::<i32>(), any::<u32>()).prop_map(|(v, t)| TaggedWord::new(v, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// Copies never change bits, no matter the word.
        #[test]
        fn copies_are_faithful(w in arb_word(), disp in any::<i32>()) {
            let mut st = MachineState::new(MemoryMode::Fault);
            st.set_reg(Reg::T0, w);
            st.exec_instruction(&Instruction::Move { rd: Reg::T1, rs: Reg::T0 }).unwrap();
            prop_assert_eq!(st.reg(Reg::T1), w);
            st.exec_instruction(&Instruction::Sw { disp, base: Reg::T1, rs: Reg::T0 }).unwrap();
            st.exec_instruction(&Instruction::Lw { rd: Reg::T2, disp, base: Reg::T1 }).unwrap();
            prop_assert_eq!(st.reg(Reg::T2), w);
        }

        /// The same calculation always yields the same bits.
        #[test]
        fn calculations_are_repeatable(w in arb_word(), k in any::<i32>()) {
            let step = |w: TaggedWord| TaggedWord::new(
                w.value.wrapping_add(k),
                tag_step(TagOp::Addi, &[w], &[k]),
            );
            prop_assert_eq!(step(w), step(w));
        }

        /// Different values never share a physical pattern.
        #[test]
        fn distinct_values_never_collide(a in arb_word(), b in arb_word()) {
            prop_assume!(a.value != b.value);
            prop_assert_ne!(a.key(), b.key());
        }

        /// Value arithmetic is ordinary wrapping arithmetic.
        #[test]
        fn addi_is_wrapping_add(w in arb_word(), k in any::<i32>()) {
            let mut st = MachineState::new(MemoryMode::Fault);
            st.set_reg(Reg::T0, w);
            st.exec_instruction(&Instruction::Addi { rd: Reg::T1, rs: Reg::T0, k }).unwrap();
            prop_assert_eq!(st.reg(Reg::T1).value, w.value.wrapping_add(k));
        }
    }
}
