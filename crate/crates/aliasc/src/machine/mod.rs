//! Register machine with hidden deterministic memory aliasing.
//!
//! Every word the machine touches is a [`TaggedWord`]: a visible 32-bit value
//! plus an opaque 32-bit tag. Arithmetic evolves tags through [`tag_step`], a
//! fixed public mixing function, and the memory unit keys cells on the *full*
//! 64-bit pattern (value and tag together). Two addresses with equal values
//! but different calculation histories therefore name different cells. A load
//! whose key was never written is an [`ExecFault::AliasFault`] — or, in
//! garbage mode, returns stable pseudorandom junk the way silent hardware
//! would.
//!
//! Three properties hold by construction and are exercised by the test suite:
//! copies (`move`, `lw`, `sw`) preserve words bit-exactly; identical
//! calculation sequences reproduce identical bit patterns; and distinct
//! values never collide on one physical pattern (the value is embedded in the
//! key).

pub mod asm;

use std::collections::HashMap;
use std::fmt;

/// A machine word: the visible value and the hidden tag that rides along.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct TaggedWord {
    pub value: i32,
    pub tag: u32,
}

impl TaggedWord {
    pub const fn new(value: i32, tag: u32) -> Self {
        TaggedWord { value, tag }
    }

    /// A word as the machine reset produces it: the given value, tag zero.
    pub const fn reset(value: i32) -> Self {
        TaggedWord { value, tag: RESET_TAG }
    }

    /// Full physical bit pattern: value in the high half, tag in the low.
    pub fn key(self) -> u64 {
        ((self.value as u32 as u64) << 32) | self.tag as u64
    }

    /// `value|0x<tag>` notation used by traces and error messages.
    pub fn vh(self) -> String {
        format!("{}|0x{:08x}", self.value, self.tag)
    }
}

impl fmt::Display for TaggedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|0x{:08x}", self.value, self.tag)
    }
}

/// Tag every register holds immediately after machine reset (and that `jal`
/// stamps onto `ra`).
pub const RESET_TAG: u32 = 0;

/// Register file names. `zer` is a hardwired zero with the reset tag; writes
/// to it are discarded.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Reg {
    Zer,
    Sp,
    Fp,
    Ra,
    A0,
    A1,
    A2,
    A3,
    V0,
    V1,
    T0,
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
}

pub const NUM_REGS: usize = 20;

impl Reg {
    pub const ALL: [Reg; NUM_REGS] = [
        Reg::Zer,
        Reg::Sp,
        Reg::Fp,
        Reg::Ra,
        Reg::A0,
        Reg::A1,
        Reg::A2,
        Reg::A3,
        Reg::V0,
        Reg::V1,
        Reg::T0,
        Reg::T1,
        Reg::T2,
        Reg::T3,
        Reg::T4,
        Reg::T5,
        Reg::T6,
        Reg::T7,
        Reg::T8,
        Reg::T9,
    ];

    pub fn index(self) -> usize {
        Reg::ALL.iter().position(|r| *r == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Reg::Zer => "zer",
            Reg::Sp => "sp",
            Reg::Fp => "fp",
            Reg::Ra => "ra",
            Reg::A0 => "a0",
            Reg::A1 => "a1",
            Reg::A2 => "a2",
            Reg::A3 => "a3",
            Reg::V0 => "v0",
            Reg::V1 => "v1",
            Reg::T0 => "t0",
            Reg::T1 => "t1",
            Reg::T2 => "t2",
            Reg::T3 => "t3",
            Reg::T4 => "t4",
            Reg::T5 => "t5",
            Reg::T6 => "t6",
            Reg::T7 => "t7",
            Reg::T8 => "t8",
            Reg::T9 => "t9",
        }
    }

    /// Argument register for parameter position `i` (up to four).
    pub fn arg(i: usize) -> Reg {
        [Reg::A0, Reg::A1, Reg::A2, Reg::A3][i]
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Opcode of an instruction, used for trace fingerprints.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opcode {
    Addi,
    Move,
    Lw,
    Sw,
    B,
    Beq,
    Bne,
    Beqz,
    Xor,
    Jal,
    Jr,
    Stop,
}

impl Opcode {
    pub fn name(self) -> &'static str {
        match self {
            Opcode::Addi => "addi",
            Opcode::Move => "move",
            Opcode::Lw => "lw",
            Opcode::Sw => "sw",
            Opcode::B => "b",
            Opcode::Beq => "beq",
            Opcode::Bne => "bne",
            Opcode::Beqz => "beqz",
            Opcode::Xor => "xor",
            Opcode::Jal => "jal",
            Opcode::Jr => "jr",
            Opcode::Stop => "stop",
        }
    }
}

/// One machine instruction. Branch increments are relative to the *next*
/// instruction: a taken branch with increment `i` continues at `pc + 1 + i`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Instruction {
    /// `rd ← rs + k`
    Addi { rd: Reg, rs: Reg, k: i32 },
    /// `rd ← rs`, bit-exact (value and tag copied unchanged).
    Move { rd: Reg, rs: Reg },
    /// `rd ← mem[base + disp]`, keyed on the full address pattern.
    Lw { rd: Reg, disp: i32, base: Reg },
    /// `mem[base + disp] ← rs`, keyed on the full address pattern.
    Sw { disp: i32, base: Reg, rs: Reg },
    /// Unconditional skip of `i` instructions.
    B { i: i32 },
    /// Skip `i` instructions when the register *values* are equal.
    Beq { r1: Reg, r2: Reg, i: i32 },
    /// Skip `i` instructions when the register values differ.
    Bne { r1: Reg, r2: Reg, i: i32 },
    /// Skip `i` instructions when the register value is zero.
    Beqz { r1: Reg, i: i32 },
    /// `rd ← (r1 + k1) ^ (r2 + k2) − k0`, all arithmetic wrapping.
    Xor { rd: Reg, r1: Reg, r2: Reg, k1: i32, k2: i32, k0: i32 },
    /// `ra ← pc + 1` (reset tag), then jump to the absolute target.
    Jal { target: u32 },
    /// Jump to the absolute instruction index held in the register value.
    Jr { rs: Reg },
    /// Halt.
    Stop,
}

impl Instruction {
    pub fn opcode(&self) -> Opcode {
        match self {
            Instruction::Addi { .. } => Opcode::Addi,
            Instruction::Move { .. } => Opcode::Move,
            Instruction::Lw { .. } => Opcode::Lw,
            Instruction::Sw { .. } => Opcode::Sw,
            Instruction::B { .. } => Opcode::B,
            Instruction::Beq { .. } => Opcode::Beq,
            Instruction::Bne { .. } => Opcode::Bne,
            Instruction::Beqz { .. } => Opcode::Beqz,
            Instruction::Xor { .. } => Opcode::Xor,
            Instruction::Jal { .. } => Opcode::Jal,
            Instruction::Jr { .. } => Opcode::Jr,
            Instruction::Stop => Opcode::Stop,
        }
    }
}

/// Domain separator for [`tag_step`]. Address formation for `lw` and `sw`
/// shares one id so that a store and a later load built by the same
/// calculation reproduce the same key; it is distinct from `addi` so that
/// folding a displacement into the base register changes the key.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TagOp {
    Addi = 1,
    MemAddr = 2,
    Xor = 3,
}

fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}

fn absorb(h: u64, v: u64) -> u64 {
    mix64(h ^ v.wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// Deterministic tag transition: a fixed, public avalanche mix over the
/// operation id, the operand words (values and tags), and the embedded
/// constants, length-prefixed so distinct shapes cannot collide by
/// concatenation.
pub fn tag_step(op: TagOp, inputs: &[TaggedWord], consts: &[i32]) -> u32 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64 ^ (op as u64);
    h = absorb(h, inputs.len() as u64);
    for w in inputs {
        h = absorb(h, w.value as u32 as u64);
        h = absorb(h, w.tag as u64);
    }
    h = absorb(h, consts.len() as u64);
    for k in consts {
        h = absorb(h, *k as u32 as u64);
    }
    (h ^ (h >> 32)) as u32
}

/// How the memory unit answers a load whose key was never written.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MemoryMode {
    /// Fault loudly (the simulator default).
    Fault,
    /// Return deterministic pseudorandom junk derived from the key and this
    /// seed, and remember it so repeated reads agree — the way real silent
    /// hardware behaves.
    Garbage { seed: u64 },
}

/// A memory access recorded in the trace.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MemEvent {
    pub is_write: bool,
    /// The full address word used as the key.
    pub addr: TaggedWord,
    /// The word stored or loaded.
    pub word: TaggedWord,
}

/// One executed instruction: where it ran and every effect it had.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TraceEvent {
    pub step: u64,
    pub pc: u32,
    pub opcode: Opcode,
    /// Register writes performed by this instruction (at most one).
    pub writes: Vec<(Reg, TaggedWord)>,
    pub mem: Option<MemEvent>,
}

impl TraceEvent {
    /// Compact JSON-line form: `w` pairs and `m` triples use the
    /// `value|0x<tag>` notation.
    pub fn to_json_line(&self, text: &str) -> String {
        let writes: Vec<serde_json::Value> = self
            .writes
            .iter()
            .map(|(r, w)| serde_json::json!([r.name(), w.vh()]))
            .collect();
        let mem = self.mem.map(|m| {
            serde_json::json!([
                if m.is_write { "w" } else { "r" },
                m.addr.vh(),
                m.word.vh()
            ])
        });
        serde_json::json!({
            "step": self.step,
            "pc": self.pc,
            "op": self.opcode.name(),
            "text": text,
            "w": writes,
            "m": mem,
        })
        .to_string()
    }
}

/// A fault raised by a single instruction.
#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum ExecFault {
    #[error("alias fault: load keyed {} hit no cell", addr.vh())]
    AliasFault { addr: TaggedWord },
    #[error("jump to invalid pc {pc}")]
    InvalidPc { pc: i64 },
}

/// A failed run: the fault plus where it happened.
#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum MachineError {
    #[error("step {step}, pc {pc}: {fault}")]
    Fault {
        step: u64,
        pc: u32,
        fault: ExecFault,
    },
    #[error("fuel exhausted after {fuel} steps")]
    FuelExhausted { fuel: u64 },
}

/// Architectural state: register file, plain program counter, and the
/// key-addressed memory.
#[derive(Clone, Debug)]
pub struct MachineState {
    regs: [TaggedWord; NUM_REGS],
    pub pc: u32,
    pub halted: bool,
    memory: HashMap<u64, TaggedWord>,
    mode: MemoryMode,
    steps: u64,
}

impl MachineState {
    pub fn new(mode: MemoryMode) -> Self {
        MachineState {
            regs: [TaggedWord::reset(0); NUM_REGS],
            pc: 0,
            halted: false,
            memory: HashMap::new(),
            mode,
            steps: 0,
        }
    }

    pub fn reg(&self, r: Reg) -> TaggedWord {
        self.regs[r.index()]
    }

    /// Set a register wholesale (used by the harness to inject inputs and by
    /// tests to perturb tags). Writes to `zer` are discarded.
    pub fn set_reg(&mut self, r: Reg, w: TaggedWord) {
        if r != Reg::Zer {
            self.regs[r.index()] = w;
        }
    }

    /// Pre-load a memory cell (the loader's job for initialized globals).
    pub fn preload(&mut self, addr: TaggedWord, word: TaggedWord) {
        self.memory.insert(addr.key(), word);
    }

    pub fn mem_cell(&self, addr: TaggedWord) -> Option<TaggedWord> {
        self.memory.get(&addr.key()).copied()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn garbage_word(addr: TaggedWord, seed: u64) -> TaggedWord {
        let h = mix64(addr.key() ^ mix64(seed ^ 0x6761_7262_6167_6521));
        TaggedWord::new(h as u32 as i32, (h >> 32) as u32)
    }

    fn branch_target(&self, i: i32, taken: bool) -> Result<u32, ExecFault> {
        let next = if taken {
            self.pc as i64 + 1 + i as i64
        } else {
            self.pc as i64 + 1
        };
        if next < 0 {
            return Err(ExecFault::InvalidPc { pc: next });
        }
        Ok(next as u32)
    }

    /// Execute one instruction at the current pc, returning its trace event.
    /// The caller checks `pc` bounds; branch targets are validated here.
    pub fn exec_instruction(&mut self, instr: &Instruction) -> Result<TraceEvent, ExecFault> {
        let pc = self.pc;
        let mut writes = Vec::new();
        let mut mem = None;
        let mut next_pc = pc.wrapping_add(1);

        match *instr {
            Instruction::Addi { rd, rs, k } => {
                let src = self.reg(rs);
                let w = TaggedWord::new(
                    src.value.wrapping_add(k),
                    tag_step(TagOp::Addi, &[src], &[k]),
                );
                self.set_reg(rd, w);
                writes.push((rd, self.reg(rd)));
            }
            Instruction::Move { rd, rs } => {
                let w = self.reg(rs);
                self.set_reg(rd, w);
                writes.push((rd, self.reg(rd)));
            }
            Instruction::Lw { rd, disp, base } => {
                let b = self.reg(base);
                let addr = TaggedWord::new(
                    b.value.wrapping_add(disp),
                    tag_step(TagOp::MemAddr, &[b], &[disp]),
                );
                let word = match self.memory.get(&addr.key()) {
                    Some(w) => *w,
                    None => match self.mode {
                        MemoryMode::Fault => return Err(ExecFault::AliasFault { addr }),
                        MemoryMode::Garbage { seed } => {
                            let junk = Self::garbage_word(addr, seed);
                            self.memory.insert(addr.key(), junk);
                            junk
                        }
                    },
                };
                self.set_reg(rd, word);
                writes.push((rd, self.reg(rd)));
                mem = Some(MemEvent {
                    is_write: false,
                    addr,
                    word,
                });
            }
            Instruction::Sw { disp, base, rs } => {
                let b = self.reg(base);
                let addr = TaggedWord::new(
                    b.value.wrapping_add(disp),
                    tag_step(TagOp::MemAddr, &[b], &[disp]),
                );
                let word = self.reg(rs);
                self.memory.insert(addr.key(), word);
                mem = Some(MemEvent {
                    is_write: true,
                    addr,
                    word,
                });
            }
            Instruction::B { i } => {
                next_pc = self.branch_target(i, true)?;
            }
            Instruction::Beq { r1, r2, i } => {
                next_pc = self.branch_target(i, self.reg(r1).value == self.reg(r2).value)?;
            }
            Instruction::Bne { r1, r2, i } => {
                next_pc = self.branch_target(i, self.reg(r1).value != self.reg(r2).value)?;
            }
            Instruction::Beqz { r1, i } => {
                next_pc = self.branch_target(i, self.reg(r1).value == 0)?;
            }
            Instruction::Xor {
                rd,
                r1,
                r2,
                k1,
                k2,
                k0,
            } => {
                let a = self.reg(r1);
                let b = self.reg(r2);
                let v = (a.value.wrapping_add(k1) ^ b.value.wrapping_add(k2)).wrapping_sub(k0);
                let w = TaggedWord::new(v, tag_step(TagOp::Xor, &[a, b], &[k1, k2, k0]));
                self.set_reg(rd, w);
                writes.push((rd, self.reg(rd)));
            }
            Instruction::Jal { target } => {
                let ra = TaggedWord::new(pc.wrapping_add(1) as i32, RESET_TAG);
                self.set_reg(Reg::Ra, ra);
                writes.push((Reg::Ra, ra));
                next_pc = target;
            }
            Instruction::Jr { rs } => {
                let v = self.reg(rs).value;
                if v < 0 {
                    return Err(ExecFault::InvalidPc { pc: v as i64 });
                }
                next_pc = v as u32;
            }
            Instruction::Stop => {
                self.halted = true;
                next_pc = pc;
            }
        }

        let ev = TraceEvent {
            step: self.steps,
            pc,
            opcode: instr.opcode(),
            writes,
            mem,
        };
        self.steps += 1;
        self.pc = next_pc;
        Ok(ev)
    }
}

/// A completed run: final state plus the full trace.
#[derive(Clone, Debug)]
pub struct Run {
    pub state: MachineState,
    pub trace: Vec<TraceEvent>,
}

/// Execute `program` from pc 0 until `stop`, faulting, or running out of
/// fuel. `inputs` are injected into registers before the first instruction;
/// `preload` seeds memory cells (initialized global data).
pub fn run(
    program: &[Instruction],
    inputs: &[(Reg, TaggedWord)],
    preload: &[(TaggedWord, TaggedWord)],
    fuel: u64,
    mode: MemoryMode,
) -> Result<Run, MachineError> {
    let mut st = MachineState::new(mode);
    for (r, w) in inputs {
        st.set_reg(*r, *w);
    }
    for (addr, word) in preload {
        st.preload(*addr, *word);
    }
    let mut trace = Vec::new();
    while !st.halted {
        if st.steps >= fuel {
            return Err(MachineError::FuelExhausted { fuel });
        }
        let pc = st.pc;
        let instr = program.get(pc as usize).ok_or(MachineError::Fault {
            step: st.steps,
            pc,
            fault: ExecFault::InvalidPc { pc: pc as i64 },
        })?;
        let step = st.steps;
        let ev = st
            .exec_instruction(instr)
            .map_err(|fault| MachineError::Fault { step, pc, fault })?;
        trace.push(ev);
    }
    Ok(Run { state: st, trace })
}

#[cfg(test)]
mod tests;
