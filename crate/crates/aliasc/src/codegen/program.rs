//! Assembly construction: labels, branch fixups, constant-site recording,
//! and the per-slot coding database.

use super::meta::{AffineConst, AffineTerm, SiteRole};
use super::rng::{Draw, Draws};
use crate::machine::{Instruction, Reg};

/// A constant operand under construction: its concrete value, the
/// draw-independent bias, and the signed draws folded in. `v` is always
/// `bias + Σ sign·draw` in wrapping arithmetic.
#[derive(Clone, Debug)]
pub struct Konst {
    pub v: i32,
    bias: i32,
    terms: Vec<AffineTerm>,
}

impl Konst {
    pub fn lit(v: i32) -> Self {
        Konst { v, bias: v, terms: Vec::new() }
    }

    pub fn plus(mut self, d: Draw) -> Self {
        self.v = self.v.wrapping_add(d.v);
        self.terms.push(AffineTerm { draw: d.idx, sign: 1 });
        self
    }

    pub fn minus(mut self, d: Draw) -> Self {
        self.v = self.v.wrapping_sub(d.v);
        self.terms.push(AffineTerm { draw: d.idx, sign: -1 });
        self
    }

    pub fn offset(mut self, k: i32) -> Self {
        self.v = self.v.wrapping_add(k);
        self.bias = self.bias.wrapping_add(k);
        self
    }

    pub fn plus_k(mut self, other: &Konst) -> Self {
        self.v = self.v.wrapping_add(other.v);
        self.bias = self.bias.wrapping_add(other.bias);
        self.terms.extend(other.terms.iter().copied());
        self
    }

    pub fn minus_k(mut self, other: &Konst) -> Self {
        self.v = self.v.wrapping_sub(other.v);
        self.bias = self.bias.wrapping_sub(other.bias);
        self.terms
            .extend(other.terms.iter().map(|t| AffineTerm { draw: t.draw, sign: -t.sign }));
        self
    }

    /// `−self`.
    pub fn neg(self) -> Self {
        Konst::lit(0).minus_k(&self)
    }

    /// The draw-independent part. Zero means the constant is pure drawn
    /// content — exactly the adjustments the plain modes drop.
    pub fn bias(&self) -> i32 {
        self.bias
    }

    pub fn affine(&self) -> AffineConst {
        AffineConst { bias: self.bias, terms: self.terms.clone() }
    }
}

/// The pair of drawn codings that protect one stack slot: the address
/// displacement its accesses use, and the offset its stored content carries.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SlotCoding {
    pub disp: Draw,
    pub off: Draw,
}

impl SlotCoding {
    pub fn draw(draws: &mut Draws) -> Self {
        SlotCoding { disp: draws.draw(), off: draws.draw() }
    }
}

/// Per-slot coding state for the function being compiled. Cloned at control
/// flow splits; joins are reconciled with trailer code.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DState {
    pub slots: Vec<SlotCoding>,
}

impl DState {
    pub fn fresh(len: u32, draws: &mut Draws) -> Self {
        DState { slots: (0..len).map(|_| SlotCoding::draw(draws)).collect() }
    }

    pub fn redraw(&mut self, slot: u32, draws: &mut Draws) -> SlotCoding {
        let c = SlotCoding::draw(draws);
        self.slots[slot as usize] = c;
        c
    }

    /// Record a coding drawn by the caller (used where the coding must be
    /// fixed before the value computation that feeds the store).
    pub fn install(&mut self, slot: u32, c: SlotCoding) {
        self.slots[slot as usize] = c;
    }

    pub fn coding(&self, slot: u32) -> SlotCoding {
        self.slots[slot as usize]
    }

    /// Slots whose coding identity differs — exactly the slots written on
    /// one side since the states diverged. Draw indices are compared, never
    /// values, so the answer is the same for every seed.
    pub fn diverged_from(&self, other: &DState) -> Vec<u32> {
        self.slots
            .iter()
            .zip(&other.slots)
            .enumerate()
            .filter(|(_, (a, b))| a.disp.idx != b.disp.idx || a.off.idx != b.off.idx)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Label(usize);

enum Fixup {
    /// Relative branch: patch `i` so pc+1+i lands on the label.
    Rel { pc: u32, label: Label },
    /// Absolute call target.
    Abs { pc: u32, label: Label },
}

/// Recorded location of one constant operand plus its affine derivation.
pub struct Site {
    pub pc: u32,
    pub operand: u8,
    pub affine: AffineConst,
    pub role: SiteRole,
}

/// Whole-program assembler.
pub struct Asm {
    instrs: Vec<Instruction>,
    comments: Vec<String>,
    labels: Vec<Option<u32>>,
    fixups: Vec<Fixup>,
    pub sites: Vec<Site>,
    role: SiteRole,
}

impl Asm {
    pub fn new() -> Self {
        Asm {
            instrs: Vec::new(),
            comments: Vec::new(),
            labels: Vec::new(),
            fixups: Vec::new(),
            sites: Vec::new(),
            role: SiteRole::Code,
        }
    }

    pub fn here(&self) -> u32 {
        self.instrs.len() as u32
    }

    pub fn new_label(&mut self) -> Label {
        self.labels.push(None);
        Label(self.labels.len() - 1)
    }

    pub fn place(&mut self, label: Label) {
        debug_assert!(self.labels[label.0].is_none(), "label placed twice");
        self.labels[label.0] = Some(self.here());
    }

    pub fn label_at(&mut self) -> Label {
        let l = self.new_label();
        self.place(l);
        l
    }

    /// Switch the role recorded for upcoming constant sites; returns the
    /// previous role so callers can restore it.
    pub fn set_role(&mut self, role: SiteRole) -> SiteRole {
        std::mem::replace(&mut self.role, role)
    }

    pub fn emit(&mut self, instr: Instruction, comment: impl Into<String>) -> u32 {
        let pc = self.here();
        self.instrs.push(instr);
        self.comments.push(comment.into());
        pc
    }

    fn record(&mut self, pc: u32, operand: u8, k: &Konst) {
        self.sites.push(Site { pc, operand, affine: k.affine(), role: self.role });
    }

    pub fn addi(&mut self, rd: Reg, rs: Reg, k: Konst, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::Addi { rd, rs, k: k.v }, comment);
        self.record(pc, 0, &k);
        pc
    }

    pub fn mov(&mut self, rd: Reg, rs: Reg, comment: impl Into<String>) -> u32 {
        self.emit(Instruction::Move { rd, rs }, comment)
    }

    pub fn lw(&mut self, rd: Reg, disp: Konst, base: Reg, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::Lw { rd, disp: disp.v, base }, comment);
        self.record(pc, 0, &disp);
        pc
    }

    pub fn sw(&mut self, disp: Konst, base: Reg, rs: Reg, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::Sw { disp: disp.v, base, rs }, comment);
        self.record(pc, 0, &disp);
        pc
    }

    #[allow(clippy::too_many_arguments)]
    pub fn xor(
        &mut self,
        rd: Reg,
        r1: Reg,
        r2: Reg,
        k1: Konst,
        k2: Konst,
        k0: Konst,
        comment: impl Into<String>,
    ) -> u32 {
        let pc = self.emit(
            Instruction::Xor { rd, r1, r2, k1: k1.v, k2: k2.v, k0: k0.v },
            comment,
        );
        self.record(pc, 0, &k1);
        self.record(pc, 1, &k2);
        self.record(pc, 2, &k0);
        pc
    }

    pub fn b(&mut self, target: Label, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::B { i: 0 }, comment);
        self.fixups.push(Fixup::Rel { pc, label: target });
        pc
    }

    pub fn beq(&mut self, r1: Reg, r2: Reg, target: Label, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::Beq { r1, r2, i: 0 }, comment);
        self.fixups.push(Fixup::Rel { pc, label: target });
        pc
    }

    pub fn bne(&mut self, r1: Reg, r2: Reg, target: Label, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::Bne { r1, r2, i: 0 }, comment);
        self.fixups.push(Fixup::Rel { pc, label: target });
        pc
    }

    pub fn beqz(&mut self, r1: Reg, target: Label, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::Beqz { r1, i: 0 }, comment);
        self.fixups.push(Fixup::Rel { pc, label: target });
        pc
    }

    pub fn jal(&mut self, target: Label, comment: impl Into<String>) -> u32 {
        let pc = self.emit(Instruction::Jal { target: 0 }, comment);
        self.fixups.push(Fixup::Abs { pc, label: target });
        pc
    }

    pub fn jr(&mut self, rs: Reg, comment: impl Into<String>) -> u32 {
        self.emit(Instruction::Jr { rs }, comment)
    }

    pub fn stop(&mut self, comment: impl Into<String>) -> u32 {
        self.emit(Instruction::Stop, comment)
    }

    /// Resolve all branch and call targets.
    pub fn patch(&mut self) {
        for fixup in self.fixups.drain(..) {
            match fixup {
                Fixup::Rel { pc, label } => {
                    let target = self.labels[label.0].expect("label placed");
                    let i = target as i64 - (pc as i64 + 1);
                    let i = i32::try_from(i).expect("branch distance fits");
                    match &mut self.instrs[pc as usize] {
                        Instruction::B { i: slot }
                        | Instruction::Beq { i: slot, .. }
                        | Instruction::Bne { i: slot, .. }
                        | Instruction::Beqz { i: slot, .. } => *slot = i,
                        other => unreachable!("relative fixup on {other:?}"),
                    }
                }
                Fixup::Abs { pc, label } => {
                    let target = self.labels[label.0].expect("label placed");
                    match &mut self.instrs[pc as usize] {
                        Instruction::Jal { target: slot } => *slot = target,
                        other => unreachable!("absolute fixup on {other:?}"),
                    }
                }
            }
        }
    }

    pub fn finish(self) -> (Vec<Instruction>, Vec<String>, Vec<Site>) {
        debug_assert!(self.fixups.is_empty(), "patch() must run before finish()");
        (self.instrs, self.comments, self.sites)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_patch_forward_and_backward_branches() {
        let mut asm = Asm::new();
        let top = asm.label_at();
        let out = asm.new_label();
        asm.beqz(Reg::T0, out, "");
        asm.addi(Reg::T0, Reg::T0, Konst::lit(-1), "");
        asm.b(top, "");
        asm.place(out);
        asm.stop("");
        asm.patch();
        let (instrs, _, _) = asm.finish();
        // beqz at pc 0 → target 3: i = 2; b at pc 2 → target 0: i = −3
        assert!(matches!(instrs[0], Instruction::Beqz { i: 2, .. }));
        assert!(matches!(instrs[2], Instruction::B { i: -3 }));
    }

    #[test]
    fn constant_sites_recover_their_bias() {
        let mut draws = Draws::new(99, false);
        let a = draws.draw();
        let b = draws.draw();
        let mut asm = Asm::new();
        let k = Konst::lit(7).plus(a).minus(b);
        asm.addi(Reg::T1, Reg::Sp, k, "");
        asm.patch();
        let (instrs, _, sites) = asm.finish();
        let emitted = match instrs[0] {
            Instruction::Addi { k, .. } => k,
            _ => unreachable!(),
        };
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].affine.bias, 7);
        assert_eq!(sites[0].affine.eval(&[a.v, b.v]), Some(emitted));
    }

    #[test]
    fn konst_algebra_tracks_value_and_bias_together() {
        let mut draws = Draws::new(5, false);
        let a = draws.draw();
        let b = draws.draw();
        let x = Konst::lit(10).plus(a);
        let y = Konst::lit(3).plus(b);
        let z = x.clone().minus_k(&y).offset(1);
        assert_eq!(z.v, 10i32.wrapping_add(a.v).wrapping_sub(3).wrapping_sub(b.v) + 1);
        assert_eq!(z.affine().bias, 8);
        assert_eq!(z.affine().eval(&[a.v, b.v]), Some(z.v));
        let n = y.neg();
        assert_eq!(n.v, (-3i32).wrapping_sub(b.v));
        assert_eq!(n.affine().eval(&[a.v, b.v]), Some(n.v));
    }
}
