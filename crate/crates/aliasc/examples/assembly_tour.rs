//! A guided walk through one compiled binary: the startup stub, a frame
//! prologue, a reconciliation block, and the metadata that accounts for
//! every constant in the file.
//!
//!     cargo run --example assembly_tour

use aliasc::codegen::meta::SiteRole;
use aliasc::codegen::{compile, ArrayStrategy, CompileOptions, Mode};
use aliasc::frontend::check_source;

fn show(c: &aliasc::codegen::Compiled, range: std::ops::Range<usize>) {
    for pc in range {
        println!("  {pc:04}  {:<34} # {}", c.program[pc].to_string(), c.comments[pc]);
    }
}

fn main() {
    let source = include_str!("../programs/corpus/alternating_sum.mc");
    let prog = check_source(source).expect("source parses and checks");
    let opts = CompileOptions { mode: Mode::Obfuscated, seed: 42, arrays: ArrayStrategy::Auto };
    let c = compile(&prog, &opts).expect("lowers");

    println!("{} instructions; functions:", c.program.len());
    for f in &c.meta.functions {
        println!(
            "  {} @ pc {}, frame {} words, slots {:?}",
            f.name, f.entry_pc, f.frame_size, f.slot_names
        );
    }

    // The three-instruction startup stub hides the stack origin behind a
    // drawn offset, then enters the program.
    println!("\nstartup:");
    show(&c, 0..3);

    // The entry function's prologue: save the frame pointer through the
    // *old* stack register (bit-exact round trip is the whole trick), open
    // the frame, recode the return address, and zero-fill the scalar slots
    // under their initial codings.
    let entry = c.meta.entry().entry_pc as usize;
    println!("\nprologue of `{}`:", c.meta.entry().name);
    show(&c, entry..entry + 8);

    // A reconciliation block: five instructions that move one slot from the
    // coding one branch arm left it in to the coding the join expects.
    // Every constant in it is an affine combination of *earlier* draws —
    // the metadata records which, and the audit in `entropy_experiment`
    // replays them.
    let trailer = c
        .meta
        .constant_sites
        .iter()
        .find(|s| s.role == SiteRole::Trailer)
        .expect("branchy code has reconciliation sites");
    let at = trailer.pc as usize;
    println!("\none reconciliation block:");
    show(&c, at..at + 5);

    // Where every constant in the binary comes from.
    let mut by_role = std::collections::BTreeMap::new();
    for s in &c.meta.constant_sites {
        *by_role.entry(format!("{:?}", s.role)).or_insert(0usize) += 1;
    }
    println!("\nconstant sites by role: {by_role:?}");
    println!(
        "draw log: {} values; every recorded site is an affine combination of them",
        c.meta.draws.len()
    );

    // Check that claim for the whole file right here.
    let verified = c
        .meta
        .constant_sites
        .iter()
        .filter(|s| s.affine.eval(&c.meta.draws) == s.read(&c.program))
        .count();
    println!("verified {verified}/{} sites replay from the log", c.meta.constant_sites.len());
    assert_eq!(verified, c.meta.constant_sites.len());
}
