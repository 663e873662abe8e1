//! The lowering itself: frame construction, the per-slot coding database
//! with trailer reconciliation at control-flow joins, expression evaluation
//! under content deltas, and the equality-dispatch array access forms.
//!
//! One code path serves all three modes. Outside the obfuscating mode the
//! draw stream yields zeros (indices still advance identically), and the
//! instructions whose only job is moving drawn content — recodes, trailers —
//! are dropped; address formation and real arithmetic stay.

use std::collections::HashMap;

use crate::frontend::{
    ArithOp, ArrayLen, ArrayPlace, ArrayRef, CmpOp, LValue, PtrBase, TBlock, TExpr, TExprKind,
    TFunction, TInitItem, TProgram, TStmt,
};
use crate::machine::{tag_step, Reg, TagOp, TaggedWord};
use crate::oracle::Trap;

use super::intrinsics::{Intr, Intrinsics, Reach};
use super::meta::{
    classify_fresh, AssignSite, CompilationMeta, ConstantSite, FunctionMeta, LoaderCell, SiteRole,
};
use super::program::{Asm, DState, Konst, Label, SlotCoding};
use super::rng::{Draw, Draws};
use super::{ArrayStrategy, CodegenError, CompileOptions, Compiled, Mode};

/// Largest array the balanced-tree dispatch accepts (4 flag registers).
const TREE_MAX: u32 = 16;
/// Under `Auto`, linear chains win up to this many elements.
const AUTO_LINEAR_MAX: u32 = 8;

pub(super) fn compile(prog: &TProgram, opts: &CompileOptions) -> Result<Compiled, CodegenError> {
    if opts.mode == Mode::Unsafe {
        check_no_recursion(prog)?;
    }
    if opts.arrays == ArrayStrategy::Tree {
        validate_tree_lengths(prog)?;
    }

    let mut draws = Draws::new(opts.seed, opts.mode != Mode::Obfuscated);
    let mut asm = Asm::new();

    // Global draw order: stack-base offset, global codings (declaration
    // order), helper call boundaries, user call boundaries — then the
    // per-function streams in emission order.
    let dsp = draws.draw();
    let global_codings: Vec<SlotCoding> =
        prog.globals.iter().map(|_| SlotCoding::draw(&mut draws)).collect();

    let mut reach = scan_reach(prog);
    reach.close();
    let (intr, mut next_cell) = Intrinsics::plan(reach, &mut draws, &mut asm, prog.heap_end());

    let fns: Vec<FnInfo> = prog
        .functions
        .iter()
        .map(|f| FnInfo {
            label: asm.new_label(),
            args: f.params.iter().map(|_| draws.draw()).collect(),
            ret: draws.draw(),
        })
        .collect();

    // Without a frame protocol the return address lives in a per-function
    // static cell past the globals.
    let ra_cells: Vec<i32> = prog
        .functions
        .iter()
        .map(|_| {
            let cell = next_cell;
            if opts.mode == Mode::Unsafe {
                next_cell += 1;
            }
            cell
        })
        .collect();

    let trap_oob = asm.new_label();
    let global_by_base: HashMap<i32, usize> =
        prog.globals.iter().enumerate().map(|(i, g)| (g.base, i)).collect();

    let mut cg = Cg {
        prog,
        mode: opts.mode,
        strategy: opts.arrays,
        asm,
        draws,
        dsp,
        global_codings,
        global_by_base,
        intr,
        fns,
        ra_cells,
        trap_oob,
        assign_sites: Vec::new(),
        entry_pcs: vec![0; prog.functions.len()],
    };

    cg.emit_startup();
    for idx in 0..prog.functions.len() {
        cg.emit_function(idx);
    }
    cg.intr.emit_all(&mut cg.asm);

    // Shared out-of-bounds stop; division guards trap inline.
    cg.asm.place(trap_oob);
    cg.asm.addi(
        Reg::V1,
        Reg::Zer,
        Konst::lit(Trap::OutOfBounds.code()),
        "flag: out of bounds",
    );
    cg.asm.stop("halt on trap");

    Ok(cg.finish(opts))
}

// ===================== pre-passes =====================

/// One node of the checked tree, as seen by [`visit_block`].
enum Node<'e> {
    Expr(&'e TExpr),
    Array(&'e ArrayRef),
}

fn visit_block<'e>(b: &'e TBlock, f: &mut dyn FnMut(Node<'e>)) {
    for s in &b.stmts {
        visit_stmt(s, f);
    }
}

fn visit_stmt<'e>(s: &'e TStmt, f: &mut dyn FnMut(Node<'e>)) {
    match s {
        TStmt::Expr(e) | TStmt::Return(e) => visit_expr(e, f),
        TStmt::Block(b) => visit_block(b, f),
        TStmt::If { cond, then_b, else_b } => {
            visit_expr(cond, f);
            visit_block(then_b, f);
            visit_block(else_b, f);
        }
        TStmt::While { cond, body } => {
            visit_expr(cond, f);
            visit_block(body, f);
        }
        TStmt::For { cond, update, body } => {
            if let Some(c) = cond {
                visit_expr(c, f);
            }
            if let Some(u) = update {
                visit_expr(u, f);
            }
            visit_block(body, f);
        }
        TStmt::InitArray { arr, items } => {
            f(Node::Array(arr));
            for item in items {
                visit_expr(&item.value, f);
            }
        }
        TStmt::Break(_) | TStmt::Continue(_) => {}
    }
}

fn visit_expr<'e>(e: &'e TExpr, f: &mut dyn FnMut(Node<'e>)) {
    f(Node::Expr(e));
    match &e.kind {
        TExprKind::Int(_) => {}
        TExprKind::Load(lv) => visit_lvalue(lv, f),
        TExprKind::Not(x) | TExprKind::Neg(x) => visit_expr(x, f),
        TExprKind::Arith { lhs, rhs, .. }
        | TExprKind::Cmp { lhs, rhs, .. }
        | TExprKind::And { lhs, rhs }
        | TExprKind::Or { lhs, rhs } => {
            visit_expr(lhs, f);
            visit_expr(rhs, f);
        }
        TExprKind::Assign { target, value } => {
            visit_expr(value, f);
            visit_lvalue(target, f);
        }
        TExprKind::PtrAssign { arr, offset, .. } => {
            f(Node::Array(arr));
            if let Some(o) = offset {
                visit_expr(o, f);
            }
        }
        TExprKind::Call { args, .. } => {
            for a in args {
                visit_expr(a, f);
            }
        }
    }
}

fn visit_lvalue<'e>(lv: &'e LValue, f: &mut dyn FnMut(Node<'e>)) {
    match lv {
        LValue::Slot { .. } | LValue::Global { .. } => {}
        LValue::Index { arr, index } => {
            f(Node::Array(arr));
            visit_expr(index, f);
        }
        LValue::Deref { arr, offset, .. } => {
            f(Node::Array(arr));
            if let Some((o, _)) = offset {
                visit_expr(o, f);
            }
        }
    }
}

fn check_no_recursion(prog: &TProgram) -> Result<(), CodegenError> {
    let n = prog.functions.len();
    let mut callees: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, f) in prog.functions.iter().enumerate() {
        visit_block(&f.body, &mut |node| {
            if let Node::Expr(e) = node {
                if let TExprKind::Call { callee, .. } = &e.kind {
                    callees[i].push(*callee);
                }
            }
        });
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    fn dfs(i: usize, callees: &[Vec<usize>], color: &mut [Color]) -> Option<usize> {
        color[i] = Color::Grey;
        for &j in &callees[i] {
            match color[j] {
                Color::Grey => return Some(j),
                Color::White => {
                    if let Some(c) = dfs(j, callees, color) {
                        return Some(c);
                    }
                }
                Color::Black => {}
            }
        }
        color[i] = Color::Black;
        None
    }

    let mut color = vec![Color::White; n];
    for i in 0..n {
        if color[i] == Color::White {
            if let Some(c) = dfs(i, &callees, &mut color) {
                return Err(CodegenError::Recursion { name: prog.functions[c].name.clone() });
            }
        }
    }
    Ok(())
}

fn validate_tree_lengths(prog: &TProgram) -> Result<(), CodegenError> {
    let mut too_large = None;
    for f in &prog.functions {
        visit_block(&f.body, &mut |node| {
            if let Node::Array(arr) = node {
                if let ArrayLen::Const(n) = arr.len {
                    if n > TREE_MAX && too_large.is_none() {
                        too_large = Some(n);
                    }
                }
            }
        });
    }
    match too_large {
        Some(len) => Err(CodegenError::TreeTooLarge { len }),
        None => Ok(()),
    }
}

/// Which helper routines the program can reach, using the same operand
/// classification the lowering applies.
fn scan_reach(prog: &TProgram) -> Reach {
    let mut reach = Reach::default();
    let runtime = |o: &TExpr| !matches!(o.kind, TExprKind::Int(_));
    for f in &prog.functions {
        visit_block(&f.body, &mut |node| {
            let e = match node {
                Node::Expr(e) => e,
                Node::Array(_) => return,
            };
            match &e.kind {
                TExprKind::Arith { op, lhs, rhs } => {
                    if let Shape::Helper { target, .. } = arith_shape(*op, lhs, rhs) {
                        reach.set(target);
                    }
                }
                TExprKind::Cmp { op: CmpOp::Lt, .. } => reach.set(Intr::Lt),
                TExprKind::Load(LValue::Deref { offset: Some((o, _)), .. })
                | TExprKind::Assign { target: LValue::Deref { offset: Some((o, _)), .. }, .. }
                    if runtime(o) =>
                {
                    reach.set(Intr::Add)
                }
                TExprKind::PtrAssign { offset: Some(o), .. } if runtime(o) => {
                    reach.set(Intr::Add)
                }
                _ => {}
            }
        });
    }
    reach
}

/// Stack arrays of a function in first-occurrence order, with their
/// reserved extents.
fn stack_arrays(f: &TFunction) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::new();
    visit_block(&f.body, &mut |node| {
        if let Node::Array(arr) = node {
            if let ArrayPlace::Stack { base_slot } = arr.place {
                if !out.iter().any(|(b, _)| *b == base_slot) {
                    out.push((base_slot, arr.len.reserved()));
                }
            }
        }
    });
    out
}

/// Cells the loader must create: one per global word, keyed exactly the way
/// the emitted access sequences re-derive the address at run time.
fn loader_cells(prog: &TProgram, codings: &[SlotCoding], mode: Mode) -> Vec<LoaderCell> {
    let zer = TaggedWord::reset(0);
    let mut cells = Vec::new();
    for (g, c) in prog.globals.iter().zip(codings) {
        for i in 0..g.len {
            let addr = g.base + i as i32;
            let key = if mode == Mode::Obfuscated || g.len > 1 {
                // addi rX zer (addr−Δ); lw/sw Δ(rX) — how scalars are
                // reached in the obfuscating mode and how array elements
                // are reached in every mode (Δ collapses to zero outside
                // the obfuscating mode, but the extra address step still
                // shapes the key).
                let k = addr.wrapping_sub(c.disp.v);
                let base_word = TaggedWord::new(k, tag_step(TagOp::Addi, &[zer], &[k]));
                TaggedWord::new(
                    base_word.value.wrapping_add(c.disp.v),
                    tag_step(TagOp::MemAddr, &[base_word], &[c.disp.v]),
                )
            } else {
                // Plain scalar access goes straight through the zero
                // register: lw/sw addr(zer).
                TaggedWord::new(addr, tag_step(TagOp::MemAddr, &[zer], &[addr]))
            };
            let init = g.init.get(i as usize).copied().unwrap_or(0);
            cells.push(LoaderCell {
                key_value: key.value,
                key_tag: key.tag,
                value: init.wrapping_add(c.off.v),
                tag: crate::machine::RESET_TAG,
            });
        }
    }
    cells
}

// ===================== operand classification =====================

/// How a binary arithmetic node lowers.
enum Shape<'e> {
    /// `e + k`: fold the literal into the result's content delta — no code.
    Fold { e: &'e TExpr, k: i32 },
    /// `k − e`: one masked-xor negation.
    NegFrom { e: &'e TExpr, k: i32 },
    /// General case: helper call (subtraction negates the right operand).
    Helper { target: Intr, negate_rhs: bool },
}

fn arith_shape<'e>(op: ArithOp, lhs: &'e TExpr, rhs: &'e TExpr) -> Shape<'e> {
    match op {
        ArithOp::Add => match (&lhs.kind, &rhs.kind) {
            (_, TExprKind::Int(k)) => Shape::Fold { e: lhs, k: *k },
            (TExprKind::Int(k), _) => Shape::Fold { e: rhs, k: *k },
            _ => Shape::Helper { target: Intr::Add, negate_rhs: false },
        },
        ArithOp::Sub => match (&lhs.kind, &rhs.kind) {
            (_, TExprKind::Int(k)) => Shape::Fold { e: lhs, k: k.wrapping_neg() },
            (TExprKind::Int(k), _) => Shape::NegFrom { e: rhs, k: *k },
            _ => Shape::Helper { target: Intr::Add, negate_rhs: true },
        },
        ArithOp::Mul => Shape::Helper { target: Intr::Mul, negate_rhs: false },
        ArithOp::Div => Shape::Helper { target: Intr::Div, negate_rhs: false },
        ArithOp::Mod => Shape::Helper { target: Intr::Mod, negate_rhs: false },
    }
}

// ===================== lowering context =====================

/// Call-convention data for one user function.
struct FnInfo {
    label: Label,
    /// Content deltas expected on the argument registers.
    args: Vec<Draw>,
    /// Content delta carried by the return register.
    ret: Draw,
}

#[derive(Clone)]
struct LoopCtx {
    cont: Label,
    brk: Label,
    /// Coding state `continue` must restore before jumping.
    cont_state: DState,
    /// Coding state at the loop exit.
    brk_state: DState,
}

struct FnCtx {
    idx: usize,
    scratch_base: u32,
    scratch_count: u32,
    d: DState,
    /// Per-array content/displacement codings, fixed for the function.
    arrays: HashMap<u32, SlotCoding>,
    epi: Label,
    loops: Vec<LoopCtx>,
    /// Expression spill depth (scratch slots in use).
    depth: u32,
}

impl FnCtx {
    fn spill_slot(&self) -> u32 {
        debug_assert!(self.depth < self.scratch_count, "spill walker under-reserved");
        self.scratch_base + self.depth
    }
}

/// Element access: load into t2, or store the value staged in t0.
#[derive(Clone, Copy, PartialEq, Eq)]
enum AccOp {
    Read,
    Write,
}

/// What the raw comparand in t3 means to the search loop.
#[derive(Clone, Copy, PartialEq, Eq)]
enum DynTarget {
    Index,
    Addr,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Form {
    Linear,
    Tree,
}

struct Cg<'a> {
    prog: &'a TProgram,
    mode: Mode,
    strategy: ArrayStrategy,
    asm: Asm,
    draws: Draws,
    /// Offset carried by the stack register (its value minus the nominal
    /// stack address).
    dsp: Draw,
    global_codings: Vec<SlotCoding>,
    global_by_base: HashMap<i32, usize>,
    intr: Intrinsics,
    fns: Vec<FnInfo>,
    ra_cells: Vec<i32>,
    trap_oob: Label,
    assign_sites: Vec<AssignSite>,
    entry_pcs: Vec<u32>,
}

impl Cg<'_> {
    fn obf(&self) -> bool {
        self.mode == Mode::Obfuscated
    }

    /// Does the calling convention round-trip the stack word through fp?
    fn framed(&self) -> bool {
        self.mode != Mode::Unsafe
    }

    /// A draw as a pure content delta.
    fn delta(d: Draw) -> Konst {
        Konst::lit(0).plus(d)
    }

    /// Constant that turns the stack register into slot `slot`'s access
    /// word under coding `c`.
    fn slot_addr(&self, slot: u32, c: SlotCoding) -> Konst {
        Konst::lit(slot as i32).minus(self.dsp).minus(c.disp)
    }

    /// Canonical slot read: form the displaced address, then load. Returns
    /// the content delta the register now carries.
    fn read_slot(&mut self, ctx: &FnCtx, rd: Reg, slot: u32, what: &str) -> Konst {
        let c = ctx.d.coding(slot);
        let addr = self.slot_addr(slot, c);
        self.asm.addi(rd, Reg::Sp, addr, format!("address of {what}"));
        self.asm.lw(rd, Self::delta(c.disp), rd, format!("load {what}"));
        Self::delta(c.off)
    }

    /// Emit `addi rd rs k` unless `k` is a pure drawn-content adjustment,
    /// which the plain modes drop (forwarding `rs`). Returns the register
    /// now holding the value.
    fn maybe_recode(&mut self, rd: Reg, rs: Reg, k: Konst, what: impl Into<String>) -> Reg {
        if self.obf() || k.bias() != 0 {
            self.asm.addi(rd, rs, k, what);
            rd
        } else {
            debug_assert_eq!(k.v, 0, "plain-mode draws must be zero");
            rs
        }
    }

    /// Store `src` (carrying delta `src_d`) into `slot` under coding `c`.
    /// Returns the store's pc.
    fn store_coded(&mut self, slot: u32, c: SlotCoding, src: Reg, src_d: &Konst, what: &str) -> u32 {
        let k = Self::delta(c.off).minus_k(src_d);
        let staged = self.maybe_recode(Reg::T0, src, k, format!("recode {what}"));
        let addr = self.slot_addr(slot, c);
        self.asm.addi(Reg::T1, Reg::Sp, addr, format!("address of {what}"));
        self.asm.sw(Self::delta(c.disp), Reg::T1, staged, format!("store {what}"))
    }

    /// Reconcile the coding database across a control-flow edge: every slot
    /// whose coding identity diverged is read under `from` and re-stored
    /// under `to`. Pure recoding — nothing to do outside the obfuscating
    /// mode.
    fn emit_trailers(&mut self, from: &DState, to: &DState, why: &str) {
        if !self.obf() {
            return;
        }
        let prev = self.asm.set_role(SiteRole::Trailer);
        for slot in from.diverged_from(to) {
            let fc = from.coding(slot);
            let tc = to.coding(slot);
            self.asm.addi(
                Reg::T0,
                Reg::Sp,
                self.slot_addr(slot, fc),
                format!("{why}: address of slot {slot}"),
            );
            self.asm.lw(Reg::T0, Self::delta(fc.disp), Reg::T0, format!("{why}: read slot {slot}"));
            self.asm.addi(
                Reg::T0,
                Reg::T0,
                Self::delta(tc.off).minus_k(&Self::delta(fc.off)),
                format!("{why}: recode slot {slot}"),
            );
            self.asm.addi(
                Reg::T1,
                Reg::Sp,
                self.slot_addr(slot, tc),
                format!("{why}: new address of slot {slot}"),
            );
            self.asm.sw(Self::delta(tc.disp), Reg::T1, Reg::T0, format!("{why}: restore slot {slot}"));
        }
        self.asm.set_role(prev);
    }

    /// Branch to `target` when the value in t2 (carrying `delta`) is zero,
    /// without exposing the raw value: both comparands carry the delta.
    fn cover_beq(&mut self, delta: &Konst, target: Label, what: &str) {
        self.asm.addi(Reg::T3, Reg::Zer, delta.clone(), format!("cover zero for {what}"));
        self.asm.beq(Reg::T2, Reg::T3, target, what);
    }

    // ===================== program skeleton =====================

    fn emit_startup(&mut self) {
        let prev = self.asm.set_role(SiteRole::Startup);
        self.asm.addi(Reg::Sp, Reg::Zer, Self::delta(self.dsp), "stack base");
        self.asm.jal(self.fns[0].label, format!("enter {}", self.prog.functions[0].name));
        self.asm.stop("program complete");
        self.asm.set_role(prev);
    }

    fn emit_function(&mut self, idx: usize) {
        let prog = self.prog;
        let f = &prog.functions[idx];
        let frame = &f.frame;
        let fsize = frame.size as i32;

        self.asm.place(self.fns[idx].label);
        self.entry_pcs[idx] = self.asm.here();

        let prev = self.asm.set_role(SiteRole::FrameLink);

        // --- frame construction ---
        let mut ra_coding = None;
        let mut fp_disp = None;
        if self.framed() {
            // The caller's stack word must survive bit-exactly: park it in
            // fp, saving the old fp through the *old* stack word first.
            let dfp = self.draws.draw();
            self.asm.addi(
                Reg::T1,
                Reg::Sp,
                Konst::lit(-1).minus(self.dsp).minus(dfp),
                "address of the frame-pointer slot",
            );
            self.asm.sw(Self::delta(dfp), Reg::T1, Reg::Fp, "save frame pointer");
            self.asm.mov(Reg::Fp, Reg::Sp, "keep the caller's stack word");
            self.asm.addi(Reg::Sp, Reg::Sp, Konst::lit(-fsize), "open the frame");
            let doff = self.draws.draw();
            let ddisp = self.draws.draw();
            let c = SlotCoding { disp: ddisp, off: doff };
            self.store_coded(frame.ra_slot, c, Reg::Ra, &Konst::lit(0), "return address");
            ra_coding = Some(c);
            fp_disp = Some(dfp);
        } else {
            self.asm.sw(
                Konst::lit(self.ra_cells[idx]),
                Reg::Zer,
                Reg::Ra,
                "save return address to its static cell",
            );
            self.asm.addi(Reg::Sp, Reg::Sp, Konst::lit(-fsize), "open the frame");
        }

        // --- slot coding database ---
        // Initial codings for every var and scratch slot; the parameter
        // stores realize the parameters' initial codings.
        let dlen = frame.ra_slot;
        let d = DState::fresh(dlen, &mut self.draws);
        for (i, pname) in f.params.iter().enumerate() {
            let c = d.coding(i as u32);
            let src_d = Self::delta(self.fns[idx].args[i]);
            self.store_coded(i as u32, c, Reg::arg(i), &src_d, pname);
        }

        // Array content codings: one per array, for the whole function.
        let mut arrays = HashMap::new();
        let mut in_array = vec![false; dlen as usize];
        for (base_slot, reserved) in stack_arrays(f) {
            arrays.insert(base_slot, SlotCoding::draw(&mut self.draws));
            for s in base_slot..base_slot + reserved {
                in_array[s as usize] = true;
            }
        }

        // Zero-fill every non-parameter scalar slot under its initial
        // coding, so a cell exists wherever a later join may recode one.
        for s in f.params.len() as u32..dlen {
            if in_array[s as usize] {
                continue;
            }
            let c = d.coding(s);
            self.store_coded(s, c, Reg::Zer, &Konst::lit(0), "zero-fill");
        }

        self.asm.set_role(prev);

        // --- body ---
        let epi = self.asm.new_label();
        let mut ctx = FnCtx {
            idx,
            scratch_base: frame.scratch_base,
            scratch_count: frame.scratch_count,
            d,
            arrays,
            epi,
            loops: Vec::new(),
            depth: 0,
        };
        let falls = self.lower_block(&mut ctx, &f.body);
        if falls {
            self.asm.addi(Reg::V0, Reg::Zer, Self::delta(self.fns[idx].ret), "default return value");
        }
        self.asm.place(epi);

        // --- frame teardown ---
        let prev = self.asm.set_role(SiteRole::FrameLink);
        if self.framed() {
            let c = ra_coding.expect("framed prologue ran");
            if self.obf() {
                self.asm.addi(Reg::T0, Reg::Sp, self.slot_addr(frame.ra_slot, c), "address of the return address");
                self.asm.lw(Reg::T0, Self::delta(c.disp), Reg::T0, "reload return address");
                self.asm.addi(Reg::Ra, Reg::T0, Self::delta(c.off).neg(), "strip return address");
            } else {
                self.asm.addi(Reg::Ra, Reg::Sp, self.slot_addr(frame.ra_slot, c), "address of the return address");
                self.asm.lw(Reg::Ra, Self::delta(c.disp), Reg::Ra, "reload return address");
            }
            let dfp = fp_disp.expect("framed prologue ran");
            self.asm.mov(Reg::Sp, Reg::Fp, "close the frame: caller stack word, bit-exact");
            self.asm.addi(
                Reg::Fp,
                Reg::Sp,
                Konst::lit(-1).minus(self.dsp).minus(dfp),
                "address of the saved frame pointer",
            );
            self.asm.lw(Reg::Fp, Self::delta(dfp), Reg::Fp, "reload frame pointer");
            self.asm.jr(Reg::Ra, "return");
        } else {
            // Arithmetic restore: same value, different derivation — the
            // caller's next stack access will miss its cells.
            self.asm.addi(Reg::Sp, Reg::Sp, Konst::lit(fsize), "close the frame arithmetically");
            self.asm.lw(Reg::Ra, Konst::lit(self.ra_cells[idx]), Reg::Zer, "reload return address");
            self.asm.jr(Reg::Ra, "return");
        }
        self.asm.set_role(prev);
    }

    fn finish(mut self, opts: &CompileOptions) -> Compiled {
        self.asm.patch();
        let functions = self
            .prog
            .functions
            .iter()
            .enumerate()
            .map(|(i, f)| FunctionMeta {
                name: f.name.clone(),
                entry_pc: self.entry_pcs[i],
                frame_size: f.frame.size,
                arg_deltas: self.fns[i].args.iter().map(|d| d.v).collect(),
                ret_delta: self.fns[i].ret.v,
                slot_names: f.frame.names.iter().map(|(n, s)| (*s, n.clone())).collect(),
            })
            .collect();
        let loader_cells = loader_cells(self.prog, &self.global_codings, self.mode);
        let (program, comments, sites) = self.asm.finish();
        let mut constant_sites: Vec<ConstantSite> = sites
            .into_iter()
            .map(|s| ConstantSite {
                pc: s.pc,
                operand: s.operand,
                affine: s.affine,
                role: s.role,
                fresh: false,
            })
            .collect();
        classify_fresh(&mut constant_sites);
        let meta = CompilationMeta {
            seed: opts.seed,
            mode: opts.mode,
            draws: self.draws.into_log(),
            functions,
            loader_cells,
            assign_sites: self.assign_sites,
            constant_sites,
        };
        Compiled { program, comments, meta }
    }

    // ===================== statements =====================

    fn lower_block(&mut self, ctx: &mut FnCtx, b: &TBlock) -> bool {
        let mut falls = true;
        for s in &b.stmts {
            if !self.lower_stmt(ctx, s) {
                falls = false;
            }
        }
        falls
    }

    /// Lower one statement; returns whether control can fall past it.
    fn lower_stmt(&mut self, ctx: &mut FnCtx, s: &TStmt) -> bool {
        match s {
            TStmt::Expr(e) => {
                debug_assert_eq!(ctx.depth, 0);
                self.eval(ctx, e);
                true
            }
            TStmt::Block(b) => self.lower_block(ctx, b),
            TStmt::If { cond, then_b, else_b } => self.lower_if(ctx, cond, then_b, else_b),
            TStmt::While { cond, body } => self.lower_while(ctx, cond, body),
            TStmt::For { cond, update, body } => {
                self.lower_for(ctx, cond.as_ref(), update.as_ref(), body)
            }
            TStmt::InitArray { arr, items } => {
                self.lower_init_array(ctx, arr, items);
                true
            }
            TStmt::Break(_) => {
                let lc = ctx.loops.last().cloned().expect("checker rejects stray break");
                self.emit_trailers(&ctx.d, &lc.brk_state, "break");
                ctx.d = lc.brk_state;
                self.asm.b(lc.brk, "break");
                false
            }
            TStmt::Continue(_) => {
                let lc = ctx.loops.last().cloned().expect("checker rejects stray continue");
                self.emit_trailers(&ctx.d, &lc.cont_state, "continue");
                ctx.d = lc.cont_state;
                self.asm.b(lc.cont, "continue");
                false
            }
            TStmt::Return(e) => {
                let de = self.eval(ctx, e);
                let ret = Self::delta(self.fns[ctx.idx].ret);
                self.asm.addi(Reg::V0, Reg::T2, ret.minus_k(&de), "stage return value");
                self.asm.b(ctx.epi, "to the epilogue");
                false
            }
        }
    }

    fn lower_if(&mut self, ctx: &mut FnCtx, cond: &TExpr, then_b: &TBlock, else_b: &TBlock) -> bool {
        let dc = self.eval(ctx, cond);
        let lelse = self.asm.new_label();
        self.cover_beq(&dc, lelse, "if: condition false");
        let d_split = ctx.d.clone();

        let then_falls = self.lower_block(ctx, then_b);
        let d_then = ctx.d.clone();
        // The skip branch exists when there is something to skip: else-arm
        // code, or (in the obfuscating mode) join trailers.
        let ljoin = if then_falls && (!else_b.stmts.is_empty() || self.obf()) {
            let l = self.asm.new_label();
            self.asm.b(l, "if: past the other arm");
            Some(l)
        } else {
            None
        };

        self.asm.place(lelse);
        ctx.d = d_split.clone();
        let else_falls = self.lower_block(ctx, else_b);

        match (then_falls, else_falls) {
            (true, true) => {
                self.emit_trailers(&ctx.d, &d_then, "if join");
                ctx.d = d_then;
            }
            (true, false) => ctx.d = d_then,
            (false, true) => {}
            (false, false) => ctx.d = d_split,
        }
        if let Some(l) = ljoin {
            self.asm.place(l);
        }
        then_falls || else_falls
    }

    fn lower_while(&mut self, ctx: &mut FnCtx, cond: &TExpr, body: &TBlock) -> bool {
        let d_head = ctx.d.clone();
        let lcond = self.asm.label_at();
        let dc = self.eval(ctx, cond);
        let lexit = self.asm.new_label();
        self.cover_beq(&dc, lexit, "while: done");
        let d_enter = ctx.d.clone();

        ctx.loops.push(LoopCtx {
            cont: lcond,
            brk: lexit,
            cont_state: d_head.clone(),
            brk_state: d_enter.clone(),
        });
        let falls = self.lower_block(ctx, body);
        ctx.loops.pop();

        if falls {
            self.emit_trailers(&ctx.d, &d_head, "loop back-edge");
            self.asm.b(lcond, "loop");
        }
        self.asm.place(lexit);
        ctx.d = d_enter;
        true
    }

    fn lower_for(
        &mut self,
        ctx: &mut FnCtx,
        cond: Option<&TExpr>,
        update: Option<&TExpr>,
        body: &TBlock,
    ) -> bool {
        let d_head = ctx.d.clone();
        let lcond = self.asm.label_at();
        let lexit = self.asm.new_label();
        let lupd = self.asm.new_label();
        if let Some(c) = cond {
            let dc = self.eval(ctx, c);
            self.cover_beq(&dc, lexit, "for: done");
        }
        let d_enter = ctx.d.clone();

        ctx.loops.push(LoopCtx {
            cont: lupd,
            brk: lexit,
            cont_state: d_enter.clone(),
            brk_state: d_enter.clone(),
        });
        let falls = self.lower_block(ctx, body);
        ctx.loops.pop();

        if falls {
            self.emit_trailers(&ctx.d, &d_enter, "loop-update entry");
        }
        self.asm.place(lupd);
        ctx.d = d_enter.clone();
        if let Some(u) = update {
            self.eval(ctx, u);
        }
        self.emit_trailers(&ctx.d, &d_head, "loop back-edge");
        self.asm.b(lcond, "loop");
        self.asm.place(lexit);
        ctx.d = d_enter;
        true
    }

    fn lower_init_array(&mut self, ctx: &mut FnCtx, arr: &ArrayRef, items: &[TInitItem]) {
        debug_assert!(
            matches!(arr.len, ArrayLen::Const(_)),
            "parameter-sized arrays have no initializer"
        );
        let c = self.array_coding(ctx, arr);
        for item in items {
            let dv = self.eval(ctx, &item.value);
            let staged =
                self.maybe_recode(Reg::T0, Reg::T2, Self::delta(c.off).minus_k(&dv), "stage fill value");
            for i in item.lo..=item.hi {
                self.emit_element_addr(Reg::T1, arr.place, c, i, "fill element");
                self.asm.sw(Self::delta(c.disp), Reg::T1, staged, format!("init element {i}"));
            }
        }
    }

    // ===================== expressions =====================

    /// Evaluate `e` into t2; returns the content delta t2 carries.
    fn eval(&mut self, ctx: &mut FnCtx, e: &TExpr) -> Konst {
        match &e.kind {
            TExprKind::Int(k) => {
                let f = self.draws.draw();
                self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(*k).plus(f), format!("literal {k}"));
                Self::delta(f)
            }
            TExprKind::Load(lv) => self.load_lvalue(ctx, lv),
            TExprKind::Not(x) => {
                let dx = self.eval(ctx, x);
                self.asm.addi(Reg::T3, Reg::T2, dx.neg(), "strip for the zero test");
                let lone = self.asm.new_label();
                let lend = self.asm.new_label();
                self.asm.beqz(Reg::T3, lone, "zero → 1");
                let f = self.draws.draw();
                self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(0).plus(f), "not: 0");
                self.asm.b(lend, "");
                self.asm.place(lone);
                self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(1).plus(f), "not: 1");
                self.asm.place(lend);
                Self::delta(f)
            }
            TExprKind::Neg(x) => {
                let dx = self.eval(ctx, x);
                let f = self.draws.draw();
                self.asm.xor(
                    Reg::T2,
                    Reg::T2,
                    Reg::Zer,
                    dx.neg(),
                    Konst::lit(-1),
                    Konst::lit(-1).minus(f),
                    "negate",
                );
                Self::delta(f)
            }
            TExprKind::Arith { op, lhs, rhs } => match arith_shape(*op, lhs, rhs) {
                Shape::Fold { e, k } => {
                    let d = self.eval(ctx, e);
                    // t2 = v + δ = (v+k) + (δ−k): relabel only.
                    d.offset(k.wrapping_neg())
                }
                Shape::NegFrom { e, k } => {
                    let d = self.eval(ctx, e);
                    let f = self.draws.draw();
                    self.asm.xor(
                        Reg::T2,
                        Reg::T2,
                        Reg::Zer,
                        d.neg(),
                        Konst::lit(-1),
                        Konst::lit((-1i32).wrapping_sub(k)).minus(f),
                        format!("{k} − value"),
                    );
                    Self::delta(f)
                }
                Shape::Helper { target, negate_rhs } => {
                    self.eval_helper2(ctx, lhs, rhs, target, negate_rhs)
                }
            },
            TExprKind::Cmp { op, lhs, rhs } => match op {
                CmpOp::Lt => self.eval_helper2(ctx, lhs, rhs, Intr::Lt, false),
                CmpOp::Eq => self.eval_eq(ctx, lhs, rhs, true),
                CmpOp::Ne => self.eval_eq(ctx, lhs, rhs, false),
            },
            TExprKind::And { lhs, rhs } => self.eval_short_circuit(ctx, lhs, rhs, true),
            TExprKind::Or { lhs, rhs } => self.eval_short_circuit(ctx, lhs, rhs, false),
            TExprKind::Assign { target, value } => self.eval_assign(ctx, target, value),
            TExprKind::PtrAssign { ptr_slot, base, arr, offset, negate } => {
                self.eval_ptr_assign(ctx, *ptr_slot, *base, arr, offset.as_deref(), *negate)
            }
            TExprKind::Call { callee, args } => self.eval_call(ctx, *callee, args),
        }
    }

    /// Park t2 in the next scratch slot. Pairs with [`Self::unspill`].
    fn spill(&mut self, ctx: &mut FnCtx, d: &Konst) -> u32 {
        let slot = ctx.spill_slot();
        let c = ctx.d.redraw(slot, &mut self.draws);
        self.store_coded(slot, c, Reg::T2, d, "spilled operand");
        ctx.depth += 1;
        slot
    }

    fn unspill(&mut self, ctx: &mut FnCtx, rd: Reg, slot: u32, what: &str) -> Konst {
        ctx.depth -= 1;
        self.read_slot(ctx, rd, slot, what)
    }

    /// Two-operand helper call: left operand spilled across the right's
    /// evaluation, then both staged onto the call boundary.
    fn eval_helper2(
        &mut self,
        ctx: &mut FnCtx,
        lhs: &TExpr,
        rhs: &TExpr,
        target: Intr,
        negate_rhs: bool,
    ) -> Konst {
        let dl = self.eval(ctx, lhs);
        let slot = self.spill(ctx, &dl);
        let mut dr = self.eval(ctx, rhs);
        if negate_rhs {
            let f = self.draws.draw();
            self.asm.xor(
                Reg::T2,
                Reg::T2,
                Reg::Zer,
                dr.neg(),
                Konst::lit(-1),
                Konst::lit(-1).minus(f),
                "negate the subtrahend",
            );
            dr = Self::delta(f);
        }
        let ds = self.unspill(ctx, Reg::T3, slot, "left operand");
        let b = self.intr.bound(target);
        self.asm.addi(Reg::A0, Reg::T3, Konst::lit(0).plus(b.a0).minus_k(&ds), "first argument");
        self.asm.addi(Reg::A1, Reg::T2, Konst::lit(0).plus(b.a1).minus_k(&dr), "second argument");
        self.asm.jal(self.intr.label(target), format!("call {}", target.name()));
        self.asm.mov(Reg::T2, Reg::V0, "helper result");
        Self::delta(b.v0)
    }

    fn eval_eq(&mut self, ctx: &mut FnCtx, lhs: &TExpr, rhs: &TExpr, want_equal: bool) -> Konst {
        let dl = self.eval(ctx, lhs);
        let slot = self.spill(ctx, &dl);
        let dr = self.eval(ctx, rhs);
        let ds = self.unspill(ctx, Reg::T3, slot, "left operand");
        // Strip both sides in one step: zero exactly on equality.
        self.asm.xor(Reg::T3, Reg::T3, Reg::T2, ds.neg(), dr.neg(), Konst::lit(0), "compare");
        let lhit = self.asm.new_label();
        let lend = self.asm.new_label();
        self.asm.beqz(Reg::T3, lhit, "equal");
        let f = self.draws.draw();
        let (on_neq, on_eq) = if want_equal { (0, 1) } else { (1, 0) };
        self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(on_neq).plus(f), "not equal");
        self.asm.b(lend, "");
        self.asm.place(lhit);
        self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(on_eq).plus(f), "equal");
        self.asm.place(lend);
        Self::delta(f)
    }

    fn eval_short_circuit(&mut self, ctx: &mut FnCtx, lhs: &TExpr, rhs: &TExpr, is_and: bool) -> Konst {
        let dl = self.eval(ctx, lhs);
        let lshort = self.asm.new_label();
        let lend = self.asm.new_label();
        self.asm.addi(Reg::T3, Reg::Zer, dl.clone(), "cover zero for the left value");
        if is_and {
            self.asm.beq(Reg::T2, Reg::T3, lshort, "left false → short-circuit");
        } else {
            self.asm.bne(Reg::T2, Reg::T3, lshort, "left true → short-circuit");
        }
        let d_split = ctx.d.clone();

        let dr = self.eval(ctx, rhs);
        let f = self.draws.draw();
        let lrhs_false = self.asm.new_label();
        self.asm.addi(Reg::T3, Reg::Zer, dr.clone(), "cover zero for the right value");
        self.asm.beq(Reg::T2, Reg::T3, lrhs_false, "right false");
        self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(1).plus(f), "result: true");
        self.asm.b(lend, "");
        self.asm.place(lrhs_false);
        self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(0).plus(f), "result: false");
        self.asm.b(lend, "");

        // Short-circuit arm: skipped the right side entirely, so its slot
        // writes must be reconciled before rejoining.
        self.asm.place(lshort);
        let short_val = if is_and { 0 } else { 1 };
        self.asm.addi(Reg::T2, Reg::Zer, Konst::lit(short_val).plus(f), "short-circuit result");
        self.emit_trailers(&d_split, &ctx.d, "short-circuit join");
        self.asm.place(lend);
        Self::delta(f)
    }

    fn eval_assign(&mut self, ctx: &mut FnCtx, target: &LValue, value: &TExpr) -> Konst {
        match target {
            LValue::Slot { slot, name } => {
                let dv = self.eval(ctx, value);
                let c = ctx.d.redraw(*slot, &mut self.draws);
                let pc = self.store_coded(*slot, c, Reg::T2, &dv, name);
                let function = self.prog.functions[ctx.idx].name.clone();
                self.assign_sites.push(AssignSite {
                    pc,
                    function,
                    name: name.clone(),
                    delta: c.off.v,
                });
                dv
            }
            LValue::Global { addr, name } => {
                let dv = self.eval(ctx, value);
                let c = self.global_codings[self.global_by_base[addr]];
                let staged = self.maybe_recode(
                    Reg::T0,
                    Reg::T2,
                    Self::delta(c.off).minus_k(&dv),
                    format!("recode {name}"),
                );
                let pc = if self.obf() {
                    self.asm.addi(
                        Reg::T1,
                        Reg::Zer,
                        Konst::lit(*addr).minus(c.disp),
                        format!("address of {name}"),
                    );
                    self.asm.sw(Self::delta(c.disp), Reg::T1, staged, format!("store {name}"))
                } else {
                    self.asm.sw(Konst::lit(*addr), Reg::Zer, staged, format!("store {name}"))
                };
                let function = self.prog.functions[ctx.idx].name.clone();
                self.assign_sites.push(AssignSite {
                    pc,
                    function,
                    name: name.clone(),
                    delta: c.off.v,
                });
                dv
            }
            LValue::Index { arr, index } => {
                let dv = self.eval(ctx, value);
                let slot = self.spill(ctx, &dv);
                let di = self.eval(ctx, index);
                let ds = self.unspill(ctx, Reg::T0, slot, "value to store");
                let c = self.array_coding(ctx, arr);
                self.maybe_recode(
                    Reg::T0,
                    Reg::T0,
                    Self::delta(c.off).minus_k(&ds),
                    "stage under the element coding",
                );
                self.access_array(ctx, arr, c, &di, AccOp::Write);
                self.asm.mov(Reg::T2, Reg::T0, "assignment value");
                Self::delta(c.off)
            }
            LValue::Deref { ptr_slot, arr, offset } => {
                self.deref_access(ctx, *ptr_slot, arr, offset.as_ref(), Some(value))
            }
        }
    }

    fn eval_call(&mut self, ctx: &mut FnCtx, callee: usize, args: &[TExpr]) -> Konst {
        let base = ctx.depth;
        let mut parked = Vec::with_capacity(args.len());
        for a in args {
            let da = self.eval(ctx, a);
            parked.push(self.spill(ctx, &da));
        }
        for (i, &slot) in parked.iter().enumerate() {
            let areg = Reg::arg(i);
            let ds = self.read_slot(ctx, areg, slot, "argument");
            let want = self.fns[callee].args[i];
            self.maybe_recode(areg, areg, Konst::lit(0).plus(want).minus_k(&ds), "argument coding");
        }
        ctx.depth = base;
        self.asm.jal(self.fns[callee].label, format!("call {}", self.prog.functions[callee].name));
        self.asm.mov(Reg::T2, Reg::V0, "call result");
        Self::delta(self.fns[callee].ret)
    }

    fn eval_ptr_assign(
        &mut self,
        ctx: &mut FnCtx,
        ptr_slot: u32,
        base: PtrBase,
        arr: &ArrayRef,
        offset: Option<&TExpr>,
        negate: bool,
    ) -> Konst {
        // The stored word is an absolute element address. Its coding is
        // drawn before the value computation so every path recodes to the
        // same target.
        let c = SlotCoding::draw(&mut self.draws);
        let (base_reg, base_k) = match arr.place {
            ArrayPlace::Stack { base_slot } => {
                (Reg::Sp, Konst::lit(base_slot as i32).minus(self.dsp))
            }
            ArrayPlace::Heap { base } => (Reg::Zer, Konst::lit(base)),
        };
        let const_off: Option<i32> = match offset {
            None => Some(0),
            Some(e) => match e.kind {
                TExprKind::Int(k) => Some(if negate { k.wrapping_neg() } else { k }),
                _ => None,
            },
        };
        match (const_off, base) {
            (Some(k), PtrBase::Array) => {
                self.asm.addi(
                    Reg::T2,
                    base_reg,
                    base_k.offset(k).plus(c.off),
                    "point at the element",
                );
            }
            (Some(k), PtrBase::Ptr(q)) => {
                let dq = self.read_slot(ctx, Reg::T2, q, "source pointer");
                self.asm.addi(
                    Reg::T2,
                    Reg::T2,
                    Konst::lit(k).plus(c.off).minus_k(&dq),
                    "step the pointer",
                );
            }
            (None, b) => {
                let e = offset.expect("runtime offset");
                let mut de = self.eval(ctx, e);
                if negate {
                    let f = self.draws.draw();
                    self.asm.xor(
                        Reg::T2,
                        Reg::T2,
                        Reg::Zer,
                        de.neg(),
                        Konst::lit(-1),
                        Konst::lit(-1).minus(f),
                        "negate the step",
                    );
                    de = Self::delta(f);
                }
                let badd = self.intr.bound(Intr::Add);
                self.asm.addi(Reg::A0, Reg::T2, Konst::lit(0).plus(badd.a0).minus_k(&de), "step amount");
                match b {
                    PtrBase::Array => {
                        self.asm.addi(Reg::A1, base_reg, base_k.plus(badd.a1), "array base");
                    }
                    PtrBase::Ptr(q) => {
                        let dq = self.read_slot(ctx, Reg::T3, q, "source pointer");
                        self.asm.addi(
                            Reg::A1,
                            Reg::T3,
                            Konst::lit(0).plus(badd.a1).minus_k(&dq),
                            "source pointer",
                        );
                    }
                }
                self.asm.jal(self.intr.label(Intr::Add), "form the element address");
                self.asm.addi(
                    Reg::T2,
                    Reg::V0,
                    Self::delta(c.off).minus_k(&Self::delta(badd.v0)),
                    "carry the pointer coding",
                );
            }
        }
        ctx.d.install(ptr_slot, c);
        self.store_coded(ptr_slot, c, Reg::T2, &Self::delta(c.off), "pointer");
        Self::delta(c.off)
    }

    // ===================== lvalues and arrays =====================

    fn load_lvalue(&mut self, ctx: &mut FnCtx, lv: &LValue) -> Konst {
        match lv {
            LValue::Slot { slot, name } => self.read_slot(ctx, Reg::T2, *slot, name),
            LValue::Global { addr, name } => {
                let c = self.global_codings[self.global_by_base[addr]];
                if self.obf() {
                    self.asm.addi(
                        Reg::T2,
                        Reg::Zer,
                        Konst::lit(*addr).minus(c.disp),
                        format!("address of {name}"),
                    );
                    self.asm.lw(Reg::T2, Self::delta(c.disp), Reg::T2, format!("load {name}"));
                } else {
                    self.asm.lw(Reg::T2, Konst::lit(*addr), Reg::Zer, format!("load {name}"));
                }
                Self::delta(c.off)
            }
            LValue::Index { arr, index } => {
                let di = self.eval(ctx, index);
                let c = self.array_coding(ctx, arr);
                self.access_array(ctx, arr, c, &di, AccOp::Read)
            }
            LValue::Deref { ptr_slot, arr, offset } => {
                self.deref_access(ctx, *ptr_slot, arr, offset.as_ref(), None)
            }
        }
    }

    fn array_coding(&self, ctx: &FnCtx, arr: &ArrayRef) -> SlotCoding {
        match arr.place {
            ArrayPlace::Stack { base_slot } => {
                *ctx.arrays.get(&base_slot).expect("array coding drawn in the prologue")
            }
            ArrayPlace::Heap { base } => self.global_codings[self.global_by_base[&base]],
        }
    }

    fn const_form(&self, n: u32) -> Form {
        match self.strategy {
            ArrayStrategy::Linear => Form::Linear,
            ArrayStrategy::Tree => {
                if n < 2 {
                    Form::Linear
                } else {
                    Form::Tree
                }
            }
            ArrayStrategy::Auto => {
                if n > AUTO_LINEAR_MAX && n <= TREE_MAX {
                    Form::Tree
                } else {
                    Form::Linear
                }
            }
        }
    }

    /// Indexed access, all forms. The index value sits in t2 carrying `di`;
    /// writes expect the staged value in t0.
    fn access_array(
        &mut self,
        ctx: &mut FnCtx,
        arr: &ArrayRef,
        c: SlotCoding,
        di: &Konst,
        op: AccOp,
    ) -> Konst {
        match arr.len {
            ArrayLen::Const(n) => match self.const_form(n) {
                Form::Linear => {
                    let cands = (0..n)
                        .map(|d| (Reg::Zer, Konst::lit(d as i32).plus_k(di)))
                        .collect();
                    self.linear_chain(arr.place, c, n, cands, op)
                }
                Form::Tree => self.tree_dispatch(arr.place, c, n, di, op),
            },
            ArrayLen::Dynamic { size_slot, cap } => {
                self.asm.addi(Reg::T3, Reg::T2, di.clone().neg(), "raw index");
                self.dyn_loop(ctx, arr.place, c, size_slot, cap, DynTarget::Index, op)
            }
        }
    }

    /// `*p` / `*(p ± e)`: `value` present → store it, absent → load.
    fn deref_access(
        &mut self,
        ctx: &mut FnCtx,
        ptr_slot: u32,
        arr: &ArrayRef,
        offset: Option<&(Box<TExpr>, bool)>,
        value: Option<&TExpr>,
    ) -> Konst {
        let c = self.array_coding(ctx, arr);
        let op = if value.is_some() { AccOp::Write } else { AccOp::Read };
        let parked = value.map(|v| {
            let dv = self.eval(ctx, v);
            self.spill(ctx, &dv)
        });

        let const_off: Option<i32> = match offset {
            None => Some(0),
            Some((e, neg)) => match e.kind {
                TExprKind::Int(k) => Some(if *neg { k.wrapping_neg() } else { k }),
                _ => None,
            },
        };

        match const_off {
            Some(shift) => {
                // The pointer stays coded; candidates fold the shift and
                // the pointer's content delta into their constants.
                let dq = self.read_slot(ctx, Reg::T2, ptr_slot, "pointer");
                self.reload_staged(ctx, parked, c);
                match arr.len {
                    ArrayLen::Const(n) => {
                        let cands = (0..n)
                            .map(|d| match arr.place {
                                ArrayPlace::Stack { base_slot } => (
                                    Reg::Sp,
                                    Konst::lit((base_slot + d) as i32)
                                        .offset(shift.wrapping_neg())
                                        .minus(self.dsp)
                                        .plus_k(&dq),
                                ),
                                ArrayPlace::Heap { base } => (
                                    Reg::Zer,
                                    Konst::lit(base + d as i32)
                                        .offset(shift.wrapping_neg())
                                        .plus_k(&dq),
                                ),
                            })
                            .collect();
                        self.linear_chain(arr.place, c, n, cands, op)
                    }
                    ArrayLen::Dynamic { size_slot, cap } => {
                        self.asm.addi(
                            Reg::T3,
                            Reg::T2,
                            Konst::lit(shift).minus_k(&dq),
                            "raw target address",
                        );
                        self.dyn_loop(ctx, arr.place, c, size_slot, cap, DynTarget::Addr, op)
                    }
                }
            }
            None => {
                let (e, neg) = offset.expect("runtime offset");
                let mut de = self.eval(ctx, e);
                if *neg {
                    let f = self.draws.draw();
                    self.asm.xor(
                        Reg::T2,
                        Reg::T2,
                        Reg::Zer,
                        de.neg(),
                        Konst::lit(-1),
                        Konst::lit(-1).minus(f),
                        "negate the offset",
                    );
                    de = Self::delta(f);
                }
                let dq = self.read_slot(ctx, Reg::T3, ptr_slot, "pointer");
                let badd = self.intr.bound(Intr::Add);
                self.asm.addi(Reg::A0, Reg::T2, Konst::lit(0).plus(badd.a0).minus_k(&de), "offset");
                self.asm.addi(Reg::A1, Reg::T3, Konst::lit(0).plus(badd.a1).minus_k(&dq), "pointer");
                self.asm.jal(self.intr.label(Intr::Add), "step the pointer");
                match arr.len {
                    ArrayLen::Const(n) => {
                        self.asm.addi(Reg::T2, Reg::V0, Self::delta(badd.v0).neg(), "raw target address");
                        self.reload_staged(ctx, parked, c);
                        let cands = (0..n)
                            .map(|d| match arr.place {
                                ArrayPlace::Stack { base_slot } => (
                                    Reg::Sp,
                                    Konst::lit((base_slot + d) as i32).minus(self.dsp),
                                ),
                                ArrayPlace::Heap { base } => (Reg::Zer, Konst::lit(base + d as i32)),
                            })
                            .collect();
                        self.linear_chain(arr.place, c, n, cands, op)
                    }
                    ArrayLen::Dynamic { size_slot, cap } => {
                        self.asm.addi(Reg::T3, Reg::V0, Self::delta(badd.v0).neg(), "raw target address");
                        self.reload_staged(ctx, parked, c);
                        self.dyn_loop(ctx, arr.place, c, size_slot, cap, DynTarget::Addr, op)
                    }
                }
            }
        }
    }

    /// Reload a parked store-value into t0 under the element coding.
    fn reload_staged(&mut self, ctx: &mut FnCtx, parked: Option<u32>, c: SlotCoding) {
        if let Some(slot) = parked {
            let ds = self.unspill(ctx, Reg::T0, slot, "value to store");
            self.maybe_recode(
                Reg::T0,
                Reg::T0,
                Self::delta(c.off).minus_k(&ds),
                "stage under the element coding",
            );
        }
    }

    /// Form the access word for one array element.
    fn emit_element_addr(&mut self, rd: Reg, place: ArrayPlace, c: SlotCoding, elem: u32, what: &str) {
        match place {
            ArrayPlace::Stack { base_slot } => {
                let k = Konst::lit((base_slot + elem) as i32).minus(self.dsp).minus(c.disp);
                self.asm.addi(rd, Reg::Sp, k, format!("address of {what} {elem}"));
            }
            ArrayPlace::Heap { base } => {
                let k = Konst::lit(base + elem as i32).minus(c.disp);
                self.asm.addi(rd, Reg::Zer, k, format!("address of {what} {elem}"));
            }
        }
    }

    /// Candidate-per-element dispatch: each candidate is staged into t3 and
    /// compared against t2; a miss after the last candidate traps.
    fn linear_chain(
        &mut self,
        place: ArrayPlace,
        c: SlotCoding,
        n: u32,
        cands: Vec<(Reg, Konst)>,
        op: AccOp,
    ) -> Konst {
        debug_assert_eq!(cands.len(), n as usize);
        let done = self.asm.new_label();
        let leaves: Vec<Label> = (0..n).map(|_| self.asm.new_label()).collect();
        for (d, (rs, k)) in cands.into_iter().enumerate() {
            self.asm.addi(Reg::T3, rs, k, format!("candidate {d}"));
            self.asm.beq(Reg::T2, Reg::T3, leaves[d], format!("element {d}?"));
        }
        self.asm.b(self.trap_oob, "no element matched");
        for (d, &leaf) in leaves.iter().enumerate() {
            self.asm.place(leaf);
            self.emit_element_addr(Reg::T1, place, c, d as u32, "element");
            match op {
                AccOp::Read => {
                    self.asm.lw(Reg::T2, Self::delta(c.disp), Reg::T1, format!("load element {d}"));
                }
                AccOp::Write => {
                    self.asm.sw(Self::delta(c.disp), Reg::T1, Reg::T0, format!("store element {d}"));
                }
            }
            self.asm.b(done, "");
        }
        self.asm.place(done);
        Self::delta(c.off)
    }

    /// Balanced dispatch: strip the index, decompose it into bit flags by
    /// repeated lowest-set-bit extraction, then walk a branch tree over the
    /// flags to a leaf per element.
    fn tree_dispatch(
        &mut self,
        place: ArrayPlace,
        c: SlotCoding,
        n: u32,
        di: &Konst,
        op: AccOp,
    ) -> Konst {
        debug_assert!((2..=TREE_MAX).contains(&n));
        let bits = (32 - (n - 1).leading_zeros()) as usize;
        let flag_regs = [Reg::T4, Reg::T5, Reg::T6, Reg::T7];
        let flags = &flag_regs[..bits];

        self.asm.addi(Reg::T3, Reg::T2, di.clone().neg(), "raw index");
        for (k, f) in flags.iter().enumerate() {
            self.asm.addi(*f, Reg::Zer, Konst::lit(0), format!("bit {k}: absent"));
        }
        let lwalk = self.asm.new_label();
        let lloop = self.asm.label_at();
        self.asm.beqz(Reg::T3, lwalk, "all bits consumed");
        self.asm.addi(Reg::T8, Reg::T3, Konst::lit(-1), "index − 1");
        self.asm.xor(
            Reg::T8,
            Reg::T3,
            Reg::T8,
            Konst::lit(0),
            Konst::lit(0),
            Konst::lit(0),
            "lowest-set-bit mask",
        );
        let sets: Vec<Label> = (0..bits).map(|_| self.asm.new_label()).collect();
        for (k, &set) in sets.iter().enumerate() {
            let mask = ((1u64 << (k + 1)) - 1) as i32;
            self.asm.addi(Reg::T9, Reg::Zer, Konst::lit(mask), format!("mask for bit {k}"));
            self.asm.beq(Reg::T8, Reg::T9, set, format!("bit {k}?"));
        }
        self.asm.b(self.trap_oob, "bit outside the tree");
        for (k, &set) in sets.iter().enumerate() {
            self.asm.place(set);
            self.asm.addi(flags[k], Reg::Zer, Konst::lit(1), format!("bit {k}: present"));
            self.asm.addi(Reg::T3, Reg::T3, Konst::lit(-(1i32 << k)), "clear the bit");
            self.asm.b(lloop, "");
        }

        self.asm.place(lwalk);
        let done = self.asm.new_label();
        self.tree_walk(place, c, n, op, done, flags, bits, 0);
        self.asm.place(done);
        Self::delta(c.off)
    }

    fn tree_walk(
        &mut self,
        place: ArrayPlace,
        c: SlotCoding,
        n: u32,
        op: AccOp,
        done: Label,
        flags: &[Reg],
        bits: usize,
        prefix: u32,
    ) {
        if bits == 0 {
            if prefix < n {
                self.emit_element_addr(Reg::T1, place, c, prefix, "element");
                match op {
                    AccOp::Read => {
                        self.asm.lw(Reg::T2, Self::delta(c.disp), Reg::T1, format!("load element {prefix}"));
                    }
                    AccOp::Write => {
                        self.asm.sw(Self::delta(c.disp), Reg::T1, Reg::T0, format!("store element {prefix}"));
                    }
                }
                self.asm.b(done, "");
            } else {
                self.asm.b(self.trap_oob, "padded leaf");
            }
            return;
        }
        let lzero = self.asm.new_label();
        self.asm.beqz(flags[bits - 1], lzero, format!("bit {} clear?", bits - 1));
        self.tree_walk(place, c, n, op, done, flags, bits - 1, prefix | (1 << (bits - 1)));
        self.asm.place(lzero);
        self.tree_walk(place, c, n, op, done, flags, bits - 1, prefix);
    }

    /// Parameter-sized arrays: walk the reservation, counting upward, and
    /// stop by equality on the current size, the cap, or the target. The
    /// stepping register runs over real addresses; only element contents
    /// carry a delta.
    fn dyn_loop(
        &mut self,
        ctx: &mut FnCtx,
        place: ArrayPlace,
        c: SlotCoding,
        size_slot: u32,
        cap: u32,
        target: DynTarget,
        op: AccOp,
    ) -> Konst {
        let base_slot = match place {
            ArrayPlace::Stack { base_slot } => base_slot,
            ArrayPlace::Heap { .. } => unreachable!("parameter-sized arrays live on the stack"),
        };
        self.asm.addi(Reg::T4, Reg::Zer, Konst::lit(0), "search counter");
        self.asm.addi(
            Reg::T5,
            Reg::Sp,
            Konst::lit(base_slot as i32).minus(self.dsp),
            "stepping address",
        );
        let dn = self.read_slot(ctx, Reg::T6, size_slot, "array size");
        self.maybe_recode(Reg::T6, Reg::T6, dn.neg(), "strip the size");
        self.asm.addi(Reg::T7, Reg::Zer, Konst::lit(cap as i32), "reservation cap");
        let lfound = self.asm.new_label();
        let lloop = self.asm.label_at();
        self.asm.beq(Reg::T4, Reg::T6, self.trap_oob, "size exit");
        self.asm.beq(Reg::T4, Reg::T7, self.trap_oob, "cap exit");
        match target {
            DynTarget::Index => self.asm.beq(Reg::T4, Reg::T3, lfound, "index found"),
            DynTarget::Addr => self.asm.beq(Reg::T5, Reg::T3, lfound, "address found"),
        };
        self.asm.addi(Reg::T4, Reg::T4, Konst::lit(1), "next index");
        self.asm.addi(Reg::T5, Reg::T5, Konst::lit(1), "next address");
        self.asm.b(lloop, "search");
        self.asm.place(lfound);
        match op {
            AccOp::Read => {
                self.asm.lw(Reg::T2, Konst::lit(0), Reg::T5, "load the element");
            }
            AccOp::Write => {
                self.asm.sw(Konst::lit(0), Reg::T5, Reg::T0, "store the element");
            }
        }
        Self::delta(c.off)
    }
}
