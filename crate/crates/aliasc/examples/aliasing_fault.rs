//! Why the machine needs a repaired calling convention at all.
//!
//! Memory cells are keyed by how their address was *derived*, not just by
//! its value. A naive compiler that rebuilds the stack pointer with
//! arithmetic after a call produces reads whose keys no longer match the
//! cells its own stores created: the first post-call stack read faults. On
//! hardware that aliases silently instead of faulting, the program reads
//! garbage and keeps going.
//!
//!     cargo run --example aliasing_fault

use aliasc::codegen::{compile, run_compiled, CompileOptions, ExecError, Mode};
use aliasc::frontend::check_source;
use aliasc::machine::{MachineError, MemoryMode};

fn main() {
    let source = include_str!("../programs/unsafe_demo.mc");
    let prog = check_source(source).expect("source parses and checks");
    const FUEL: u64 = 1_000_000;

    // Safe mode: the frame pointer round-trips the stack register
    // bit-exactly, so the caller's local is found again after the call.
    let safe = compile(&prog, &CompileOptions::new(Mode::PlainSafe, 0)).expect("lowers");
    let fin = run_compiled(&safe, &[5], FUEL, MemoryMode::Fault).expect("runs");
    println!("safe mode:    F(5) = {}", fin.outcome);

    // Unsafe mode: same program, classic push/pop arithmetic. The store of
    // `x` and its post-call reload derive the same numeric address along
    // different histories, so the reload's key misses.
    let naive = compile(&prog, &CompileOptions::new(Mode::Unsafe, 0)).expect("lowers");
    match run_compiled(&naive, &[5], FUEL, MemoryMode::Fault) {
        Err(ExecError::Machine(MachineError::Fault { step, pc, fault })) => {
            println!("unsafe mode:  fault at step {step}, pc {pc}: {fault}");
        }
        other => panic!("expected an alias fault, got {other:?}"),
    }

    // Silent-aliasing hardware: the same missed key returns deterministic
    // garbage instead of faulting, and the program completes with a wrong
    // answer. Different garbage seeds give different wrong answers.
    for garbage_seed in [1, 2, 3] {
        let fin = run_compiled(&naive, &[5], FUEL, MemoryMode::Garbage { seed: garbage_seed })
            .expect("completes on silent hardware");
        println!("garbage seed {garbage_seed}: F(5) = {}   (correct answer is 22)", fin.outcome);
    }
}
