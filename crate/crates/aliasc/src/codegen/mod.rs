//! Code generation: lowers a checked program onto the tagged machine.
//!
//! Three modes share one lowering structure:
//!
//! - [`Mode::Unsafe`] — textbook lowering. Stack addresses are formed
//!   arithmetically, so the hidden tag evolution breaks the frame protocol:
//!   the caller's first stack read after a call faults (or reads junk on
//!   silent hardware).
//! - [`Mode::PlainSafe`] — the repaired calling convention (frame pointer
//!   round-trips the stack register bit-exactly) with all randomization
//!   constants at zero.
//! - [`Mode::Obfuscated`] — the same code shape with per-compilation drawn
//!   displacements and content offsets folded into every constant, so two
//!   seeds agree on control flow but on almost nothing else.

mod harness;
mod intrinsics;
mod lower;
pub mod meta;
mod program;
mod rng;

use serde::{Deserialize, Serialize};

use crate::frontend::TProgram;
use crate::machine::Instruction;
pub use harness::{run_compiled, shadow_assignments, ExecError, Finished};
pub use meta::CompilationMeta;

/// How stack state is protected.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Mode {
    /// Naive frame handling; aliases on the first post-call stack read.
    #[serde(rename = "unsafe")]
    Unsafe,
    /// Correct frame handling, no randomization.
    #[serde(rename = "safe")]
    PlainSafe,
    /// Correct frame handling plus drawn address/content codings.
    #[serde(rename = "obf")]
    Obfuscated,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Unsafe => "unsafe",
            Mode::PlainSafe => "safe",
            Mode::Obfuscated => "obf",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unsafe" => Ok(Mode::Unsafe),
            "safe" => Ok(Mode::PlainSafe),
            "obf" => Ok(Mode::Obfuscated),
            other => Err(format!("unknown mode `{other}` (expected unsafe, safe, or obf)")),
        }
    }
}

/// Dispatch shape used for constant-length array accesses.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub enum ArrayStrategy {
    /// Linear chain up to 8 elements, balanced tree up to 16, linear above.
    #[default]
    Auto,
    /// Always a linear candidate chain.
    Linear,
    /// Always a balanced tree (arrays of at most 16 elements).
    Tree,
}

impl std::str::FromStr for ArrayStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ArrayStrategy::Auto),
            "linear" => Ok(ArrayStrategy::Linear),
            "tree" => Ok(ArrayStrategy::Tree),
            other => Err(format!("unknown array strategy `{other}` (expected auto, linear, or tree)")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    pub mode: Mode,
    pub seed: u64,
    pub arrays: ArrayStrategy,
}

impl CompileOptions {
    pub fn new(mode: Mode, seed: u64) -> Self {
        CompileOptions { mode, seed, arrays: ArrayStrategy::Auto }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum CodegenError {
    /// Unsafe mode keeps return addresses in per-function static cells, so a
    /// cyclic call graph cannot be compiled in that mode.
    #[error("unsafe mode cannot compile recursion: `{name}` calls itself (directly or indirectly)")]
    Recursion { name: String },
    /// The balanced-tree dispatch is capped at 16 elements.
    #[error("tree dispatch supports arrays of at most 16 elements, got {len}")]
    TreeTooLarge { len: u32 },
}

/// A compiled program: instructions, a per-instruction comment column, and
/// the metadata needed to run, decode, and audit it.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub program: Vec<Instruction>,
    pub comments: Vec<String>,
    pub meta: CompilationMeta,
}

/// Lower a checked program for the given mode and seed.
pub fn compile(prog: &TProgram, opts: &CompileOptions) -> Result<Compiled, CodegenError> {
    lower::compile(prog, opts)
}

#[cfg(test)]
mod tests;
