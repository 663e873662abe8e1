//! The command-line surface: four subcommands over the library pipeline.
//!
//! - `compile` — write an assembly listing and a JSON metadata sidecar.
//! - `run` — compile in memory, execute, print the decoded result.
//! - `check` — differential test of compiled output against the reference
//!   evaluator across modes and seeds.
//! - `experiment` — multi-seed trace comparison with an entropy report.
//!
//! Every subcommand is deterministic: the same invocation produces
//! byte-identical files and byte-identical stdout. Exit codes: 0 success,
//! 1 compilation (or configuration) failure, 2 runtime fault, 3 divergence
//! from the reference evaluation, 4 trace-structure mismatch between seeds.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, AnalysisError};
use crate::codegen::{
    compile, run_compiled, shadow_assignments, ArrayStrategy, Compiled, CompileOptions, ExecError,
    Mode,
};
use crate::frontend::{check_source, TProgram};
use crate::machine::{Instruction, MemoryMode};
use crate::oracle::{eval_program, OracleError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPILE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_FINGERPRINT: i32 = 4;

const DEFAULT_FUEL: u64 = 50_000_000;

#[derive(Parser, Debug)]
#[command(
    name = "aliasc",
    version,
    about = "Compile and run programs on a machine with hidden deterministic memory aliasing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a source file to an assembly listing plus a metadata sidecar
    Compile(CompileCmd),
    /// Compile in memory, execute, and print the decoded result
    Run(RunCmd),
    /// Compare compiled behaviour against the reference evaluator
    Check(CheckCmd),
    /// Run many seeds and report trace structure and constant entropy
    Experiment(ExperimentCmd),
}

#[derive(Args, Debug)]
pub struct CompileCmd {
    /// Source file
    pub source: PathBuf,
    /// Lowering mode: unsafe, safe, or obf
    #[arg(long, default_value = "obf")]
    pub mode: Mode,
    /// Seed for the drawn codings (ignored outside obf mode)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant-length array dispatch: auto, linear, or tree
    #[arg(long, default_value = "auto")]
    pub arrays: ArrayStrategy,
    /// Output directory (defaults to the source file's directory)
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunCmd {
    /// Source file
    pub source: PathBuf,
    /// Lowering mode: unsafe, safe, or obf
    #[arg(long, default_value = "obf")]
    pub mode: Mode,
    /// Seed for the drawn codings
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant-length array dispatch: auto, linear, or tree
    #[arg(long, default_value = "auto")]
    pub arrays: ArrayStrategy,
    /// Entry-function arguments, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub input: Vec<i32>,
    /// Instruction budget
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    pub fuel: u64,
    /// Print one JSON line per executed instruction (value and hidden columns)
    #[arg(long)]
    pub trace: bool,
    /// Model silent aliasing hardware: a load whose key misses returns
    /// deterministic garbage drawn from this seed instead of faulting
    #[arg(long, num_args = 0..=1, default_missing_value = "0", value_name = "SEED")]
    pub garbage_mem: Option<u64>,
    /// Also write the result (and trace, if requested) as one JSON document
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckCmd {
    /// Source file
    pub source: PathBuf,
    /// Entry-function arguments, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub input: Vec<i32>,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Constant-length array dispatch: auto, linear, or tree
    #[arg(long, default_value = "auto")]
    pub arrays: ArrayStrategy,
    /// Instruction budget per run
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    pub fuel: u64,
    /// Negative control: add one to the N-th reconciliation constant in each
    /// obfuscated compilation, which must make the check fail
    #[arg(long, hide = true, value_name = "SITE")]
    pub corrupt_trailer: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ExperimentCmd {
    /// Source file
    pub source: PathBuf,
    /// Entry-function arguments, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub input: Vec<i32>,
    /// Lowering mode: unsafe, safe, or obf
    #[arg(long, default_value = "obf")]
    pub mode: Mode,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Constant-length array dispatch: auto, linear, or tree
    #[arg(long, default_value = "auto")]
    pub arrays: ArrayStrategy,
    /// Instruction budget per run
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    pub fuel: u64,
    /// Write the experiment and entropy report as one JSON document
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

/// Either one seed or a half-open range of them.
#[derive(Args, Debug, Clone)]
pub struct SeedArgs {
    /// Single compilation seed
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Half-open seed range `a..b`
    #[arg(long, value_parser = parse_seed_range, value_name = "A..B")]
    pub seeds: Option<SeedRange>,
}

#[derive(Clone, Debug)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn list(&self) -> Vec<u64> {
        (self.start..self.end).collect()
    }
}

fn parse_seed_range(s: &str) -> Result<SeedRange, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a half-open range like 0..10, got `{s}`"))?;
    let start: u64 = a.parse().map_err(|_| format!("bad range start `{a}`"))?;
    let end: u64 = b.parse().map_err(|_| format!("bad range end `{b}`"))?;
    if end <= start {
        return Err(format!("empty range {start}..{end}"));
    }
    if end - start > 100_000 {
        return Err(format!("range {start}..{end} is too large (max 100000 seeds)"));
    }
    Ok(SeedRange { start, end })
}

impl SeedArgs {
    fn list_or(&self, default: std::ops::Range<u64>) -> Vec<u64> {
        match (&self.seed, &self.seeds) {
            (Some(s), _) => vec![*s],
            (None, Some(r)) => r.list(),
            (None, None) => default.collect(),
        }
    }
}

/// A subcommand failure: what to print on stderr and what to exit with.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Failure {
        Failure { code, message: message.into() }
    }
}

type CmdResult = Result<(), Failure>;

/// Parse the process arguments and run; returns the exit code.
pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            // clap prints help/version on stdout and usage errors on stderr.
            let _ = e.print();
            e.exit_code()
        }
    }
}

/// Run an already-parsed invocation; returns the exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Compile(cmd) => compile_cmd(&cmd),
        Command::Run(cmd) => run_cmd(&cmd),
        Command::Check(cmd) => check_cmd(&cmd),
        Command::Experiment(cmd) => experiment_cmd(&cmd),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("aliasc: {}", f.message);
            f.code
        }
    }
}

// ===================== shared steps =====================

fn load_program(path: &Path) -> Result<TProgram, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_COMPILE, format!("{}: {e}", path.display())))?;
    check_source(&text)
        .map_err(|e| Failure::new(EXIT_COMPILE, format!("{}:{e}", path.display())))
}

fn compile_program(prog: &TProgram, opts: &CompileOptions) -> Result<Compiled, Failure> {
    compile(prog, opts).map_err(|e| Failure::new(EXIT_COMPILE, e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents)
        .map_err(|e| Failure::new(EXIT_COMPILE, format!("{}: {e}", path.display())))
}

fn stem_of(source: &Path) -> String {
    source
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string())
}

// ===================== compile =====================

fn compile_cmd(cmd: &CompileCmd) -> CmdResult {
    let prog = load_program(&cmd.source)?;
    let opts = CompileOptions { mode: cmd.mode, seed: cmd.seed, arrays: cmd.arrays };
    let compiled = compile_program(&prog, &opts)?;

    let dir = match &cmd.out {
        Some(d) => d.clone(),
        None => cmd.source.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::new(EXIT_COMPILE, format!("{}: {e}", dir.display())))?;
    }
    let stem = format!("{}.{}.{}", stem_of(&cmd.source), cmd.mode, cmd.seed);
    let asm_path = dir.join(format!("{stem}.asm"));
    let meta_path = dir.join(format!("{stem}.meta.json"));

    write_file(&asm_path, &listing(&compiled, &stem_of(&cmd.source), &opts))?;
    let meta = serde_json::to_string_pretty(&compiled.meta).expect("metadata serializes");
    write_file(&meta_path, &(meta + "\n"))?;

    println!("wrote {}", asm_path.display());
    println!("wrote {}", meta_path.display());
    Ok(())
}

/// Text listing in the machine's parseable assembly format: `#`-comment
/// header, a marker line before each function entry, and one instruction per
/// line with its pc and the generator's comment column. `parse_program`
/// reads the result back verbatim.
fn listing(c: &Compiled, name: &str, opts: &CompileOptions) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "# {name} — mode {}, seed {}", opts.mode, opts.seed);
    let _ = writeln!(
        out,
        "# {} instructions, {} functions, {} preloaded cells",
        c.program.len(),
        c.meta.functions.len(),
        c.meta.loader_cells.len()
    );
    let entries: std::collections::HashMap<u32, &str> =
        c.meta.functions.iter().map(|f| (f.entry_pc, f.name.as_str())).collect();
    for (pc, instr) in c.program.iter().enumerate() {
        if let Some(fname) = entries.get(&(pc as u32)) {
            let _ = writeln!(out, "\n# ===== {fname} =====");
        }
        let text = instr.to_string();
        let comment = &c.comments[pc];
        if comment.is_empty() {
            let _ = writeln!(out, "{text:<40} # {pc:04}");
        } else {
            let _ = writeln!(out, "{text:<40} # {pc:04}  {comment}");
        }
    }
    out
}

// ===================== run =====================

fn run_cmd(cmd: &RunCmd) -> CmdResult {
    let prog = load_program(&cmd.source)?;
    let opts = CompileOptions { mode: cmd.mode, seed: cmd.seed, arrays: cmd.arrays };
    let compiled = compile_program(&prog, &opts)?;
    let mem = match cmd.garbage_mem {
        Some(seed) => MemoryMode::Garbage { seed },
        None => MemoryMode::Fault,
    };

    let fin = match run_compiled(&compiled, &cmd.input, cmd.fuel, mem) {
        Ok(fin) => fin,
        Err(ExecError::Arity { expected, got }) => {
            return Err(Failure::new(
                EXIT_COMPILE,
                format!("entry function takes {expected} arguments, got {got} (use --input)"),
            ));
        }
        Err(ExecError::Machine(e)) => {
            return Err(Failure::new(EXIT_RUNTIME, e.to_string()));
        }
    };

    if cmd.trace {
        for ev in &fin.trace {
            println!("{}", ev.to_json_line(&compiled.program[ev.pc as usize].to_string()));
        }
    }
    println!("{}", fin.outcome);

    if let Some(path) = &cmd.json {
        let trace: Option<Vec<serde_json::Value>> = cmd.trace.then(|| {
            fin.trace
                .iter()
                .map(|ev| {
                    let line = ev.to_json_line(&compiled.program[ev.pc as usize].to_string());
                    serde_json::from_str(&line).expect("trace lines are JSON")
                })
                .collect()
        });
        let doc = serde_json::json!({
            "mode": cmd.mode,
            "seed": cmd.seed,
            "input": cmd.input,
            "outcome": fin.outcome,
            "steps": fin.steps,
            "trace": trace,
        });
        write_file(path, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
    }
    Ok(())
}

// ===================== check =====================

fn check_cmd(cmd: &CheckCmd) -> CmdResult {
    let prog = load_program(&cmd.source)?;
    let reference = eval_program(&prog, &cmd.input, cmd.fuel).map_err(|e| match e {
        OracleError::FuelExhausted { .. } => Failure::new(EXIT_RUNTIME, e.to_string()),
        _ => Failure::new(EXIT_COMPILE, format!("reference evaluation: {e}")),
    })?;

    let seeds = cmd.seeds.list_or(0..10);
    let mut configurations = 0;
    for &seed in &seeds {
        for mode in [Mode::PlainSafe, Mode::Obfuscated] {
            let opts = CompileOptions { mode, seed, arrays: cmd.arrays };
            let mut compiled = compile_program(&prog, &opts)?;
            if let (Some(site), Mode::Obfuscated) = (cmd.corrupt_trailer, mode) {
                corrupt_trailer(&mut compiled, site)
                    .map_err(|m| Failure::new(EXIT_COMPILE, m))?;
            }
            let case = format!("mode={mode} seed={seed} input={:?}", cmd.input);

            let fin = match run_compiled(&compiled, &cmd.input, cmd.fuel, MemoryMode::Fault) {
                Ok(fin) => fin,
                Err(ExecError::Arity { expected, got }) => {
                    return Err(Failure::new(
                        EXIT_COMPILE,
                        format!("entry function takes {expected} arguments, got {got}"),
                    ));
                }
                Err(ExecError::Machine(e)) => {
                    return Err(Failure::new(
                        EXIT_MISMATCH,
                        format!("diverged: {case}: machine fault: {e}"),
                    ));
                }
            };
            if fin.outcome != reference.outcome {
                return Err(Failure::new(
                    EXIT_MISMATCH,
                    format!(
                        "diverged: {case}: compiled {}, reference {}",
                        fin.outcome, reference.outcome
                    ),
                ));
            }
            let shadow = shadow_assignments(&compiled, &fin.trace);
            if shadow != reference.assignments {
                let at = shadow
                    .iter()
                    .zip(&reference.assignments)
                    .position(|(a, b)| a != b)
                    .unwrap_or_else(|| shadow.len().min(reference.assignments.len()));
                return Err(Failure::new(
                    EXIT_MISMATCH,
                    format!("diverged: {case}: assignment log differs at index {at}"),
                ));
            }
            configurations += 1;
        }
    }
    println!(
        "check passed: {configurations} configurations (safe, obf × {} seeds) agree with the reference",
        seeds.len()
    );
    Ok(())
}

/// Add one to the `idx`-th reconciliation (trailer-role) constant — the
/// negative control behind `check --corrupt-trailer`. Trailer constants are
/// never semantically neutral: breaking the address half faults the next
/// keyed access, and breaking the content half shifts every later decode.
fn corrupt_trailer(c: &mut Compiled, idx: usize) -> Result<(), String> {
    let site = c
        .meta
        .constant_sites
        .iter()
        .filter(|s| s.role == crate::codegen::meta::SiteRole::Trailer)
        .nth(idx)
        .ok_or_else(|| format!("corrupt-trailer {idx}: no such reconciliation site"))?
        .clone();
    let instr = &mut c.program[site.pc as usize];
    match (instr, site.operand) {
        (Instruction::Addi { k, .. }, 0) => *k = k.wrapping_add(1),
        (Instruction::Lw { disp, .. }, 0) => *disp = disp.wrapping_add(1),
        (Instruction::Sw { disp, .. }, 0) => *disp = disp.wrapping_add(1),
        (Instruction::Xor { k1, .. }, 0) => *k1 = k1.wrapping_add(1),
        (Instruction::Xor { k2, .. }, 1) => *k2 = k2.wrapping_add(1),
        (Instruction::Xor { k0, .. }, 2) => *k0 = k0.wrapping_add(1),
        _ => return Err(format!("site {idx} does not name a constant operand")),
    }
    Ok(())
}

// ===================== experiment =====================

fn experiment_cmd(cmd: &ExperimentCmd) -> CmdResult {
    let prog = load_program(&cmd.source)?;
    let seeds = cmd.seeds.list_or(0..20);
    let exp = analysis::experiment(&prog, &cmd.input, cmd.mode, cmd.arrays, &seeds, cmd.fuel)
        .map_err(|e| {
            let code = match e {
                AnalysisError::FingerprintMismatch { .. } => EXIT_FINGERPRINT,
                AnalysisError::OutcomeMismatch { .. } => EXIT_MISMATCH,
                AnalysisError::Run { .. } => EXIT_RUNTIME,
                AnalysisError::Compile { .. } | AnalysisError::TooFewSeeds { .. } => EXIT_COMPILE,
            };
            Failure::new(code, e.to_string())
        })?;
    let report = analysis::entropy_report(&exp.profiles, seeds.len());

    println!(
        "experiment: mode {}, {} seeds, decoded outcome {}",
        exp.mode, exp.summary.seeds, exp.outcome
    );
    println!(
        "trace structure: {} events, identical across seeds; {} write sites ({} varying, {} fixed)",
        exp.summary.events, exp.summary.sites, exp.summary.varying, exp.summary.fixed
    );
    print!("{}", report.table());

    if let Some(path) = &cmd.json {
        let doc = serde_json::json!({
            "mode": exp.mode,
            "seeds": exp.seeds,
            "outcome": exp.outcome,
            "summary": exp.summary,
            "profiles": exp.profiles,
            "report": report,
        });
        write_file(path, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests;
