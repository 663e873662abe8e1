use super::*;
use clap::Parser;

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(args).expect("arguments parse")
}

#[test]
fn seed_ranges_parse_and_reject_nonsense() {
    let r = parse_seed_range("3..7").unwrap();
    assert_eq!(r.list(), vec![3, 4, 5, 6]);
    assert!(parse_seed_range("7..3").is_err());
    assert!(parse_seed_range("5").is_err());
    assert!(parse_seed_range("a..b").is_err());
    assert!(parse_seed_range("0..200000").is_err());
}

#[test]
fn seed_flag_and_range_flag_are_exclusive() {
    let err = Cli::try_parse_from([
        "aliasc", "check", "p.mc", "--seed", "1", "--seeds", "0..4",
    ]);
    assert!(err.is_err());
}

#[test]
fn run_flags_parse_with_defaults() {
    let cli = parse(&["aliasc", "run", "p.mc", "--mode", "safe", "--input", "3,-1"]);
    let Command::Run(cmd) = cli.command else { panic!("expected run") };
    assert_eq!(cmd.mode, Mode::PlainSafe);
    assert_eq!(cmd.seed, 0);
    assert_eq!(cmd.input, vec![3, -1]);
    assert!(!cmd.trace);
    assert_eq!(cmd.garbage_mem, None);

    let cli = parse(&["aliasc", "run", "p.mc", "--garbage-mem"]);
    let Command::Run(cmd) = cli.command else { panic!("expected run") };
    assert_eq!(cmd.garbage_mem, Some(0));

    let cli = parse(&["aliasc", "run", "p.mc", "--garbage-mem", "9"]);
    let Command::Run(cmd) = cli.command else { panic!("expected run") };
    assert_eq!(cmd.garbage_mem, Some(9));
}

#[test]
fn corrupting_a_trailer_changes_exactly_one_operand() {
    let prog = check_source(
        "int f(int x) { int y = 0; if (x) { y = x + 2; } else { y = 5; } return y * 3; }",
    )
    .unwrap();
    let opts = CompileOptions { mode: Mode::Obfuscated, seed: 5, arrays: ArrayStrategy::Auto };
    let clean = compile(&prog, &opts).unwrap();
    let mut dirty = clean.clone();
    corrupt_trailer(&mut dirty, 0).unwrap();
    let changed: Vec<usize> = clean
        .program
        .iter()
        .zip(&dirty.program)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect();
    let first_trailer = clean
        .meta
        .constant_sites
        .iter()
        .find(|s| s.role == crate::codegen::meta::SiteRole::Trailer)
        .expect("a diamond join emits trailers");
    assert_eq!(changed, vec![first_trailer.pc as usize]);

    assert!(corrupt_trailer(&mut dirty, 100_000).is_err());
}

#[test]
fn listings_name_every_function_and_are_deterministic() {
    let prog =
        check_source("int f(int x) { return g(x) + 1; }\nint g(int x) { return x * x; }").unwrap();
    let opts = CompileOptions { mode: Mode::Obfuscated, seed: 3, arrays: ArrayStrategy::Auto };
    let compiled = compile(&prog, &opts).unwrap();
    let a = listing(&compiled, "p", &opts);
    let b = listing(&compiled, "p", &opts);
    assert_eq!(a, b);
    assert!(a.contains("# ===== f ====="));
    assert!(a.contains("# ===== g ====="));
    assert!(a.lines().count() > compiled.program.len());
    let parsed = crate::machine::asm::parse_program(&a).expect("listing parses back");
    assert_eq!(parsed, compiled.program);
}
