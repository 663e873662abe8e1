//! Arithmetic helper routines.
//!
//! The machine has no general register-register adder and no ordered
//! compares, so addition, comparison, multiplication, division, and modulo
//! are runtime routines built from `addi` (register + constant), the
//! three-constant `xor` form, and equality branches. Internally they work on
//! raw values; each routine strips its per-compilation argument codings on
//! entry and applies its result coding on exit, so callers never see raw
//! data cross the boundary.
//!
//! The core trick: `v ^ (v - 1)` turns the lowest set bit of `v` into the
//! mask `2^(k+1) - 1`, which a 32-arm equality chain can dispatch on. That
//! yields bit-by-bit addition (`add`), highest-differing-bit signed compare
//! (`lt`), shift-and-add multiplication (`mul`), and doubling restoring
//! division (`div`, with both operands negated into the non-positive domain
//! so `-2^31` never needs its absolute value). `mod` is `a - b*(a/b)`.

use super::meta::SiteRole;
use super::program::{Asm, Konst, Label};
use super::rng::{Draw, Draws};
use crate::machine::Reg;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Intr {
    Add,
    Lt,
    Mul,
    Div,
    Mod,
}

/// Emission (and cell-allocation) order.
pub const ALL: [Intr; 5] = [Intr::Add, Intr::Lt, Intr::Mul, Intr::Div, Intr::Mod];

impl Intr {
    fn ix(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Intr::Add => ".add",
            Intr::Lt => ".lt",
            Intr::Mul => ".mul",
            Intr::Div => ".div",
            Intr::Mod => ".mod",
        }
    }
}

/// Which helpers the program actually needs.
#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct Reach {
    pub add: bool,
    pub lt: bool,
    pub mul: bool,
    pub div: bool,
    pub modulo: bool,
}

impl Reach {
    pub fn set(&mut self, i: Intr) {
        match i {
            Intr::Add => self.add = true,
            Intr::Lt => self.lt = true,
            Intr::Mul => self.mul = true,
            Intr::Div => self.div = true,
            Intr::Mod => self.modulo = true,
        }
    }

    pub fn has(&self, i: Intr) -> bool {
        match i {
            Intr::Add => self.add,
            Intr::Lt => self.lt,
            Intr::Mul => self.mul,
            Intr::Div => self.div,
            Intr::Mod => self.modulo,
        }
    }

    /// Pull in everything the marked routines call.
    pub fn close(&mut self) {
        if self.modulo {
            self.div = true;
            self.mul = true;
        }
        if self.div {
            self.add = true;
            self.lt = true;
        }
        if self.mul {
            self.add = true;
        }
    }
}

/// Argument/result codings for one helper, drawn per compilation.
#[derive(Clone, Copy, Debug)]
pub struct Boundary {
    pub a0: Draw,
    pub a1: Draw,
    pub v0: Draw,
}

/// Static memory the non-leaf helpers use for state that must survive their
/// own calls: return addresses and division scratch. Addressed from `zer`,
/// written before read, raw content.
#[derive(Clone, Copy, Default, Debug)]
pub struct Cells {
    pub mul_ra: i32,
    pub div_ra: i32,
    pub div_b: i32,
    pub div_neg: i32,
    pub div_t: i32,
    pub mod_ra: i32,
    pub mod_a: i32,
    pub mod_b: i32,
}

pub struct Intrinsics {
    pub reach: Reach,
    bound: [Option<Boundary>; 5],
    label: [Option<Label>; 5],
    pub cells: Cells,
}

impl Intrinsics {
    /// Draw boundary codings (fixed order, reachable routines only) and
    /// allocate helper cells starting at `first_cell`. Returns the set and
    /// the next free cell address.
    pub fn plan(reach: Reach, draws: &mut Draws, asm: &mut Asm, first_cell: i32) -> (Self, i32) {
        let mut bound = [None; 5];
        let mut label = [None; 5];
        for i in ALL {
            if reach.has(i) {
                bound[i.ix()] =
                    Some(Boundary { a0: draws.draw(), a1: draws.draw(), v0: draws.draw() });
                label[i.ix()] = Some(asm.new_label());
            }
        }
        let mut cells = Cells::default();
        let mut next = first_cell;
        let mut cell = || {
            let c = next;
            next += 1;
            c
        };
        if reach.mul {
            cells.mul_ra = cell();
        }
        if reach.div {
            cells.div_ra = cell();
            cells.div_b = cell();
            cells.div_neg = cell();
            cells.div_t = cell();
        }
        if reach.modulo {
            cells.mod_ra = cell();
            cells.mod_a = cell();
            cells.mod_b = cell();
        }
        (Intrinsics { reach, bound, label, cells }, next)
    }

    pub fn bound(&self, i: Intr) -> Boundary {
        self.bound[i.ix()].expect("helper not planned")
    }

    pub fn label(&self, i: Intr) -> Label {
        self.label[i.ix()].expect("helper not planned")
    }

    /// Emit every reachable helper body (in fixed order).
    pub fn emit_all(&self, asm: &mut Asm) {
        let prev = asm.set_role(SiteRole::Helper);
        for i in ALL {
            if self.reach.has(i) {
                asm.place(self.label(i));
                match i {
                    Intr::Add => self.emit_add(asm),
                    Intr::Lt => self.emit_lt(asm),
                    Intr::Mul => self.emit_mul(asm),
                    Intr::Div => self.emit_div(asm),
                    Intr::Mod => self.emit_mod(asm),
                }
            }
        }
        asm.set_role(prev);
    }

    /// The four-instruction call sequence used between helpers: code the raw
    /// operands for the callee, call, strip the result coding.
    fn call(&self, asm: &mut Asm, target: Intr, x: Reg, y: Reg, dst: Reg, what: &str) {
        let b = self.bound(target);
        asm.addi(Reg::A0, x, Konst::lit(0).plus(b.a0), "");
        asm.addi(Reg::A1, y, Konst::lit(0).plus(b.a1), "");
        asm.jal(self.label(target), what.to_string());
        asm.addi(dst, Reg::V0, Konst::lit(0).minus(b.v0), "");
    }

    fn emit_add(&self, asm: &mut Asm) {
        let b = self.bound(Intr::Add);
        asm.addi(Reg::T0, Reg::A0, Konst::lit(0).minus(b.a0), "add: x");
        asm.addi(Reg::T1, Reg::A1, Konst::lit(0).minus(b.a1), "add: y");
        let loop_ = asm.label_at();
        let done = asm.new_label();
        asm.beqz(Reg::T1, done, "no bits left in y");
        asm.addi(Reg::T2, Reg::T1, Konst::lit(-1), "");
        asm.xor(Reg::T2, Reg::T1, Reg::T2, k0(), k0(), k0(), "lowest-bit mask of y");
        let arms = lowbit_dispatch(asm, Reg::T2, Reg::T3);
        for (k, arm) in arms.into_iter().enumerate() {
            asm.place(arm);
            asm.addi(Reg::T0, Reg::T0, Konst::lit(bit(k)), format!("x += 2^{k}"));
            asm.addi(Reg::T1, Reg::T1, Konst::lit(negbit(k)), format!("y -= 2^{k}"));
            asm.b(loop_, "");
        }
        asm.place(done);
        asm.addi(Reg::V0, Reg::T0, Konst::lit(0).plus(b.v0), "add: result");
        asm.jr(Reg::Ra, "");
    }

    fn emit_lt(&self, asm: &mut Asm) {
        let b = self.bound(Intr::Lt);
        let ret0 = asm.new_label();
        let ret1 = asm.new_label();
        asm.addi(Reg::T0, Reg::A0, Konst::lit(0).minus(b.a0), "lt: a");
        asm.addi(Reg::T1, Reg::A1, Konst::lit(0).minus(b.a1), "lt: b");
        asm.xor(Reg::T2, Reg::T0, Reg::T1, k0(), k0(), k0(), "differing bits");
        asm.beqz(Reg::T2, ret0, "equal");

        // Highest differing bit: strip lowest bits off d, remembering the
        // last mask seen.
        let scan_d = asm.label_at();
        let have_hi = asm.new_label();
        asm.beqz(Reg::T2, have_hi, "");
        asm.addi(Reg::T4, Reg::T2, Konst::lit(-1), "");
        asm.xor(Reg::T4, Reg::T2, Reg::T4, k0(), k0(), k0(), "lowest-bit mask of d");
        asm.mov(Reg::T3, Reg::T4, "remember (last survives = highest)");
        let arms = lowbit_dispatch(asm, Reg::T4, Reg::T5);
        for (k, arm) in arms.into_iter().enumerate() {
            asm.place(arm);
            asm.addi(Reg::T2, Reg::T2, Konst::lit(negbit(k)), "");
            asm.b(scan_d, "");
        }
        asm.place(have_hi);

        // Does a have that bit?
        asm.addi(Reg::T4, Reg::Zer, Konst::lit(0), "flag: a has the bit");
        let scan_a = asm.label_at();
        let decide = asm.new_label();
        asm.beqz(Reg::T0, decide, "");
        asm.addi(Reg::T5, Reg::T0, Konst::lit(-1), "");
        asm.xor(Reg::T5, Reg::T0, Reg::T5, k0(), k0(), k0(), "lowest-bit mask of a");
        let skip = asm.new_label();
        asm.bne(Reg::T5, Reg::T3, skip, "");
        asm.addi(Reg::T4, Reg::Zer, Konst::lit(1), "a has the highest differing bit");
        asm.place(skip);
        let arms = lowbit_dispatch(asm, Reg::T5, Reg::T2);
        for (k, arm) in arms.into_iter().enumerate() {
            asm.place(arm);
            asm.addi(Reg::T0, Reg::T0, Konst::lit(negbit(k)), "");
            asm.b(scan_a, "");
        }
        asm.place(decide);

        // Sign bit differing flips the reading: the negative side is smaller.
        let signs = asm.new_label();
        asm.addi(Reg::T5, Reg::Zer, Konst::lit(-1), "full mask = bit 31");
        asm.beq(Reg::T3, Reg::T5, signs, "");
        asm.beqz(Reg::T4, ret1, "same sign, b has the bit: a < b");
        asm.b(ret0, "");
        asm.place(signs);
        asm.beqz(Reg::T4, ret0, "b is the negative one");
        asm.place(ret1);
        asm.addi(Reg::V0, Reg::Zer, Konst::lit(1).plus(b.v0), "lt: true");
        asm.jr(Reg::Ra, "");
        asm.place(ret0);
        asm.addi(Reg::V0, Reg::Zer, Konst::lit(0).plus(b.v0), "lt: false");
        asm.jr(Reg::Ra, "");
    }

    fn emit_mul(&self, asm: &mut Asm) {
        let b = self.bound(Intr::Mul);
        asm.sw(Konst::lit(self.cells.mul_ra), Reg::Zer, Reg::Ra, "mul: save ra");
        asm.addi(Reg::T8, Reg::A0, Konst::lit(0).minus(b.a0), "mul: s");
        asm.addi(Reg::T7, Reg::A1, Konst::lit(0).minus(b.a1), "mul: v");
        asm.addi(Reg::T6, Reg::Zer, Konst::lit(0), "mul: acc");
        asm.addi(Reg::T9, Reg::Zer, Konst::lit(0), "mul: s is a·2^j, j = 0");
        let loop_ = asm.label_at();
        let done = asm.new_label();
        asm.beqz(Reg::T7, done, "");
        asm.addi(Reg::T0, Reg::T7, Konst::lit(-1), "");
        asm.xor(Reg::T0, Reg::T7, Reg::T0, k0(), k0(), k0(), "lowest-bit mask of v");
        let step = asm.new_label();
        let arms = lowbit_dispatch(asm, Reg::T0, Reg::T1);
        for (k, arm) in arms.into_iter().enumerate() {
            asm.place(arm);
            asm.addi(Reg::T4, Reg::Zer, Konst::lit(k as i32), "target shift");
            asm.addi(Reg::T5, Reg::Zer, Konst::lit(negbit(k)), "bit to clear");
            asm.b(step, "");
        }
        asm.place(step);
        let dbl = asm.label_at();
        let dbl_done = asm.new_label();
        asm.beq(Reg::T9, Reg::T4, dbl_done, "");
        self.call(asm, Intr::Add, Reg::T8, Reg::T8, Reg::T8, "s += s");
        asm.addi(Reg::T9, Reg::T9, Konst::lit(1), "");
        asm.b(dbl, "");
        asm.place(dbl_done);
        self.call(asm, Intr::Add, Reg::T6, Reg::T8, Reg::T6, "acc += s");
        self.call(asm, Intr::Add, Reg::T7, Reg::T5, Reg::T7, "clear the bit of v");
        asm.b(loop_, "");
        asm.place(done);
        asm.addi(Reg::V0, Reg::T6, Konst::lit(0).plus(b.v0), "mul: result");
        asm.lw(Reg::Ra, Konst::lit(self.cells.mul_ra), Reg::Zer, "");
        asm.jr(Reg::Ra, "");
    }

    fn emit_div(&self, asm: &mut Asm) {
        let b = self.bound(Intr::Div);
        let c = self.cells;
        asm.sw(Konst::lit(c.div_ra), Reg::Zer, Reg::Ra, "div: save ra");
        asm.addi(Reg::T0, Reg::A0, Konst::lit(0).minus(b.a0), "div: a");
        asm.addi(Reg::T1, Reg::A1, Konst::lit(0).minus(b.a1), "div: b");
        let nonzero = asm.new_label();
        asm.bne(Reg::T1, Reg::Zer, nonzero, "");
        asm.addi(Reg::V1, Reg::Zer, Konst::lit(2), "divide by zero");
        asm.stop("");
        asm.place(nonzero);

        // -2^31 / -1 wraps back to -2^31; every other pair survives negation.
        let general = asm.new_label();
        asm.addi(Reg::T2, Reg::Zer, Konst::lit(i32::MIN), "");
        asm.bne(Reg::T0, Reg::T2, general, "");
        asm.addi(Reg::T2, Reg::Zer, Konst::lit(-1), "");
        asm.bne(Reg::T1, Reg::T2, general, "");
        asm.addi(Reg::V0, Reg::Zer, Konst::lit(i32::MIN).plus(b.v0), "wrapping edge");
        asm.lw(Reg::Ra, Konst::lit(c.div_ra), Reg::Zer, "");
        asm.jr(Reg::Ra, "");
        asm.place(general);

        asm.mov(Reg::T6, Reg::T0, "");
        asm.mov(Reg::T7, Reg::T1, "");
        self.call(asm, Intr::Lt, Reg::T6, Reg::Zer, Reg::T8, "a < 0 ?");
        self.call(asm, Intr::Lt, Reg::T7, Reg::Zer, Reg::T9, "b < 0 ?");
        asm.xor(Reg::T2, Reg::T8, Reg::T9, k0(), k0(), k0(), "quotient sign");
        asm.sw(Konst::lit(c.div_neg), Reg::Zer, Reg::T2, "");
        // Work in the non-positive domain so |-2^31| is never needed.
        let a_neg = asm.new_label();
        asm.bne(Reg::T8, Reg::Zer, a_neg, "");
        asm.xor(Reg::T6, Reg::T6, Reg::Zer, k0(), Konst::lit(-1), Konst::lit(-1), "A = -a");
        asm.place(a_neg);
        let b_neg = asm.new_label();
        asm.bne(Reg::T9, Reg::Zer, b_neg, "");
        asm.xor(Reg::T7, Reg::T7, Reg::Zer, k0(), Konst::lit(-1), Konst::lit(-1), "B = -b");
        asm.place(b_neg);
        asm.sw(Konst::lit(c.div_b), Reg::Zer, Reg::T7, "");
        asm.addi(Reg::T8, Reg::Zer, Konst::lit(0), "q = 0");

        // Subtract the largest 2^k·B that still fits, repeat.
        let outer = asm.label_at();
        let fix = asm.new_label();
        asm.lw(Reg::T7, Konst::lit(c.div_b), Reg::Zer, "D = B");
        self.call(asm, Intr::Lt, Reg::T7, Reg::T6, Reg::T0, "B < A means |B| > |A|");
        asm.bne(Reg::T0, Reg::Zer, fix, "");
        asm.addi(Reg::T9, Reg::Zer, Konst::lit(1), "Q = 1");
        let inner = asm.label_at();
        let inner_done = asm.new_label();
        self.call(asm, Intr::Add, Reg::T7, Reg::T7, Reg::T0, "try D2 = D + D");
        asm.sw(Konst::lit(c.div_t), Reg::Zer, Reg::T0, "");
        self.call(asm, Intr::Lt, Reg::T0, Reg::Zer, Reg::T1, "wrapped out of range?");
        asm.beqz(Reg::T1, inner_done, "");
        asm.lw(Reg::T0, Konst::lit(c.div_t), Reg::Zer, "");
        self.call(asm, Intr::Lt, Reg::T0, Reg::T6, Reg::T1, "overshoots A?");
        asm.bne(Reg::T1, Reg::Zer, inner_done, "");
        asm.lw(Reg::T7, Konst::lit(c.div_t), Reg::Zer, "accept D2");
        self.call(asm, Intr::Add, Reg::T9, Reg::T9, Reg::T9, "Q += Q");
        asm.b(inner, "");
        asm.place(inner_done);
        asm.xor(Reg::T0, Reg::T7, Reg::Zer, k0(), Konst::lit(-1), Konst::lit(-1), "-D");
        self.call(asm, Intr::Add, Reg::T6, Reg::T0, Reg::T6, "A -= D");
        self.call(asm, Intr::Add, Reg::T8, Reg::T9, Reg::T8, "q += Q");
        asm.b(outer, "");

        asm.place(fix);
        let pos = asm.new_label();
        asm.lw(Reg::T0, Konst::lit(c.div_neg), Reg::Zer, "");
        asm.beqz(Reg::T0, pos, "");
        asm.xor(Reg::T8, Reg::T8, Reg::Zer, k0(), Konst::lit(-1), Konst::lit(-1), "negate q");
        asm.place(pos);
        asm.addi(Reg::V0, Reg::T8, Konst::lit(0).plus(b.v0), "div: result");
        asm.lw(Reg::Ra, Konst::lit(c.div_ra), Reg::Zer, "");
        asm.jr(Reg::Ra, "");
    }

    fn emit_mod(&self, asm: &mut Asm) {
        let b = self.bound(Intr::Mod);
        let c = self.cells;
        asm.sw(Konst::lit(c.mod_ra), Reg::Zer, Reg::Ra, "mod: save ra");
        asm.addi(Reg::T0, Reg::A0, Konst::lit(0).minus(b.a0), "mod: a");
        asm.sw(Konst::lit(c.mod_a), Reg::Zer, Reg::T0, "");
        asm.addi(Reg::T1, Reg::A1, Konst::lit(0).minus(b.a1), "mod: b");
        asm.sw(Konst::lit(c.mod_b), Reg::Zer, Reg::T1, "");
        self.call(asm, Intr::Div, Reg::T0, Reg::T1, Reg::T0, "a / b");
        asm.lw(Reg::T1, Konst::lit(c.mod_b), Reg::Zer, "");
        self.call(asm, Intr::Mul, Reg::T1, Reg::T0, Reg::T0, "b · (a/b)");
        asm.xor(Reg::T0, Reg::T0, Reg::Zer, k0(), Konst::lit(-1), Konst::lit(-1), "negate");
        asm.lw(Reg::T1, Konst::lit(c.mod_a), Reg::Zer, "");
        let add = self.bound(Intr::Add);
        asm.addi(Reg::A0, Reg::T1, Konst::lit(0).plus(add.a0), "");
        asm.addi(Reg::A1, Reg::T0, Konst::lit(0).plus(add.a1), "");
        asm.jal(self.label(Intr::Add), "a - b·(a/b)");
        asm.addi(Reg::V0, Reg::V0, Konst::lit(0).minus(add.v0).plus(b.v0), "mod: result");
        asm.lw(Reg::Ra, Konst::lit(c.mod_ra), Reg::Zer, "");
        asm.jr(Reg::Ra, "");
    }
}

fn k0() -> Konst {
    Konst::lit(0)
}

/// Mask `2^(k+1) - 1` (as the wrapped i32 for k = 31).
fn mask(k: usize) -> i32 {
    (((1u64 << (k + 1)) - 1) as u32) as i32
}

/// `2^k` as the wrapped i32.
fn bit(k: usize) -> i32 {
    (1u32 << k) as i32
}

fn negbit(k: usize) -> i32 {
    bit(k).wrapping_neg()
}

/// 32-arm equality dispatch over a lowest-set-bit mask held in `mask_reg`.
/// Emits the compare chain plus a fall-through internal trap; the caller
/// places and fills the returned arm labels.
fn lowbit_dispatch(asm: &mut Asm, mask_reg: Reg, scratch: Reg) -> Vec<Label> {
    let arms: Vec<Label> = (0..32).map(|_| asm.new_label()).collect();
    for (k, arm) in arms.iter().enumerate() {
        asm.addi(scratch, Reg::Zer, Konst::lit(mask(k)), "");
        asm.beq(mask_reg, scratch, *arm, "");
    }
    asm.addi(Reg::V1, Reg::Zer, Konst::lit(3), "impossible mask");
    asm.stop("");
    arms
}
