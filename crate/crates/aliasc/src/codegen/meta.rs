//! Compilation metadata: everything a verifier needs to decode, replay, or
//! predict a compiled program — the seed, the draw log, per-function call
//! conventions, preloaded cells, and the affine derivation of every emitted
//! constant.

use serde::{Deserialize, Serialize};

use super::Mode;

/// One signed draw reference inside an affine constant.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AffineTerm {
    /// Index into the compilation's draw log.
    pub draw: u32,
    /// +1 or −1.
    pub sign: i8,
}

/// An emitted constant expressed as `bias + Σ sign·draws[draw]` (wrapping).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AffineConst {
    pub bias: i32,
    pub terms: Vec<AffineTerm>,
}

impl AffineConst {
    /// Re-evaluate against a draw log. `None` if a term is out of range.
    pub fn eval(&self, draws: &[i32]) -> Option<i32> {
        let mut v = self.bias;
        for t in &self.terms {
            let dv = *draws.get(t.draw as usize)?;
            v = if t.sign >= 0 { v.wrapping_add(dv) } else { v.wrapping_sub(dv) };
        }
        Some(v)
    }
}

/// What a constant operand is doing, at the granularity the analyses need.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SiteRole {
    /// Ordinary lowered code.
    Code,
    /// Reconciliation code at a control-flow join.
    Trailer,
    /// Function prologue or epilogue.
    FrameLink,
    /// Inside an arithmetic helper routine (delta-free internals).
    Helper,
    /// Startup stub.
    Startup,
}

/// One constant operand in the finished program.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ConstantSite {
    pub pc: u32,
    /// Which operand of the instruction: addi/lw/sw have one (0); the
    /// xor form has k1=0, k2=1, k0=2.
    pub operand: u8,
    pub affine: AffineConst,
    pub role: SiteRole,
    /// True when this site is the first appearance of some draw in program
    /// order — its value is not derivable from earlier sites.
    pub fresh: bool,
}

impl ConstantSite {
    /// The constant this site names, read back out of the program.
    pub fn read(&self, program: &[crate::machine::Instruction]) -> Option<i32> {
        use crate::machine::Instruction as I;
        match (program.get(self.pc as usize)?, self.operand) {
            (I::Addi { k, .. }, 0) => Some(*k),
            (I::Lw { disp, .. }, 0) | (I::Sw { disp, .. }, 0) => Some(*disp),
            (I::Xor { k1, .. }, 0) => Some(*k1),
            (I::Xor { k2, .. }, 1) => Some(*k2),
            (I::Xor { k0, .. }, 2) => Some(*k0),
            _ => None,
        }
    }
}

/// A store instruction that materializes a named source-level assignment.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AssignSite {
    pub pc: u32,
    pub function: String,
    pub name: String,
    /// Content offset added to the stored value at this site.
    pub delta: i32,
}

/// A memory cell the loader must populate before execution starts.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LoaderCell {
    pub key_value: i32,
    pub key_tag: u32,
    pub value: i32,
    pub tag: u32,
}

/// Per-function call-convention data.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FunctionMeta {
    pub name: String,
    pub entry_pc: u32,
    pub frame_size: u32,
    /// Content offsets expected on the incoming argument registers.
    pub arg_deltas: Vec<i32>,
    /// Content offset carried by the return value register.
    pub ret_delta: i32,
    /// Slot index → source name, for the slots that have one.
    pub slot_names: Vec<(u32, String)>,
}

/// Everything recorded about one compilation.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CompilationMeta {
    pub seed: u64,
    pub mode: Mode,
    /// Complete log of drawn values, in draw order. All-zero outside
    /// obfuscating mode, but the indices still advance identically.
    pub draws: Vec<i32>,
    pub functions: Vec<FunctionMeta>,
    pub loader_cells: Vec<LoaderCell>,
    pub assign_sites: Vec<AssignSite>,
    pub constant_sites: Vec<ConstantSite>,
}

impl CompilationMeta {
    pub fn entry(&self) -> &FunctionMeta {
        &self.functions[0]
    }

    pub fn function(&self, name: &str) -> Option<&FunctionMeta> {
        self.functions.iter().find(|f| f.name == name)
    }
}

/// Mark each constant site `fresh` if it introduces a draw index not seen at
/// any earlier site (program order, then operand order).
pub fn classify_fresh(sites: &mut [ConstantSite]) {
    let mut seen = std::collections::HashSet::new();
    sites.sort_by_key(|s| (s.pc, s.operand));
    for site in sites.iter_mut() {
        let mut fresh = false;
        for t in &site.affine.terms {
            if seen.insert(t.draw) {
                fresh = true;
            }
        }
        site.fresh = fresh;
    }
}
