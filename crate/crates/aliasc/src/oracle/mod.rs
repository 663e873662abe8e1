//! Reference interpreter for type-checked programs.
//!
//! Evaluates the typed program directly with ordinary wrapping 32-bit
//! integer semantics — no registers, no tags, no obfuscation. Compiled
//! output in any mode must agree with this interpreter on the final
//! outcome, including traps, and on every scalar assignment along the way
//! (the [`Eval::assignments`] log is the differential tester's shadow).
//!
//! Out-of-language conditions (reading an uninitialized variable, running
//! out of fuel) are reported as [`OracleError`]s, not outcomes: programs in
//! the test corpus are expected to avoid them.

use crate::frontend::{
    ArithOp, ArrayLen, ArrayPlace, ArrayRef, CmpOp, LValue, PtrBase, TBlock, TExpr, TExprKind,
    TProgram, TStmt,
};
use std::collections::HashMap;

#[cfg(test)]
mod tests;

/// How a program run ends, as observable from outside.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    /// Normal completion with the entry function's return value.
    Value(i32),
    Trap(Trap),
}

/// A runtime guard firing. The compiled program reports the same condition
/// through its reserved trap register before stopping.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub enum Trap {
    OutOfBounds,
    DivideByZero,
    /// Compiler-inserted guard that should be unreachable.
    Internal,
}

impl Trap {
    /// Code stored in the trap register by compiled programs.
    pub fn code(self) -> i32 {
        match self {
            Trap::OutOfBounds => 1,
            Trap::DivideByZero => 2,
            Trap::Internal => 3,
        }
    }

    pub fn from_code(code: i32) -> Option<Trap> {
        match code {
            1 => Some(Trap::OutOfBounds),
            2 => Some(Trap::DivideByZero),
            3 => Some(Trap::Internal),
            _ => None,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "{v}"),
            Outcome::Trap(Trap::OutOfBounds) => write!(f, "trap: out-of-bounds access"),
            Outcome::Trap(Trap::DivideByZero) => write!(f, "trap: division by zero"),
            Outcome::Trap(Trap::Internal) => write!(f, "trap: internal guard"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum OracleError {
    #[error("entry function `{name}` takes {expected} arguments, got {got}")]
    InputArity { name: String, expected: usize, got: usize },
    #[error("evaluation exceeded {fuel} steps")]
    FuelExhausted { fuel: u64 },
    #[error("`{name}` is read before it is written")]
    Uninitialized { name: String },
}

/// One scalar taking a new value, in execution order.
#[derive(Clone, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub struct Assignment {
    pub function: String,
    pub name: String,
    pub value: i32,
}

#[derive(Clone, Debug)]
pub struct Eval {
    pub outcome: Outcome,
    /// Every scalar (slot or global) assignment executed, in order.
    pub assignments: Vec<Assignment>,
    /// Statements executed; a cheap effort measure for tests.
    pub steps: u64,
}

/// Run `prog` from its entry function on `args`.
pub fn eval_program(prog: &TProgram, args: &[i32], fuel: u64) -> Result<Eval, OracleError> {
    let entry = prog.entry();
    if args.len() != entry.params.len() {
        return Err(OracleError::InputArity {
            name: entry.name.clone(),
            expected: entry.params.len(),
            got: args.len(),
        });
    }
    let mut ev = Evaluator {
        prog,
        globals: prog
            .globals
            .iter()
            .flat_map(|g| {
                g.init.iter().enumerate().map(|(i, &v)| (g.base + i as i32, v))
            })
            .collect(),
        fuel_left: fuel,
        fuel,
        assignments: Vec::new(),
    };
    let outcome = match ev.call(0, args.to_vec()) {
        Ok(v) => Outcome::Value(v),
        Err(Halt::Trap(t)) => Outcome::Trap(t),
        Err(Halt::Error(e)) => return Err(e),
    };
    Ok(Eval { outcome, assignments: ev.assignments, steps: fuel - ev.fuel_left })
}

enum Halt {
    Trap(Trap),
    Error(OracleError),
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(i32),
}

struct Frame {
    func: usize,
    slots: Vec<Option<i32>>,
}

struct Evaluator<'p> {
    prog: &'p TProgram,
    globals: HashMap<i32, i32>,
    fuel_left: u64,
    fuel: u64,
    assignments: Vec<Assignment>,
}

impl<'p> Evaluator<'p> {
    fn call(&mut self, func: usize, args: Vec<i32>) -> Result<i32, Halt> {
        self.spend()?;
        let f = self.prog.function(func);
        let mut frame =
            Frame { func, slots: vec![None; f.frame.vars as usize] };
        for (i, v) in args.into_iter().enumerate() {
            frame.slots[i] = Some(v);
        }
        match self.block(&f.body, &mut frame)? {
            Flow::Return(v) => Ok(v),
            // Falling off the end returns 0, like the compiled epilogue.
            Flow::Normal => Ok(0),
            Flow::Break | Flow::Continue => unreachable!("loop flow escaped a function body"),
        }
    }

    fn spend(&mut self) -> Result<(), Halt> {
        if self.fuel_left == 0 {
            return Err(Halt::Error(OracleError::FuelExhausted { fuel: self.fuel }));
        }
        self.fuel_left -= 1;
        Ok(())
    }

    fn block(&mut self, b: &TBlock, frame: &mut Frame) -> Result<Flow, Halt> {
        for s in &b.stmts {
            match self.stmt(s, frame)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &TStmt, frame: &mut Frame) -> Result<Flow, Halt> {
        self.spend()?;
        match s {
            TStmt::Expr(e) => {
                self.expr(e, frame)?;
                Ok(Flow::Normal)
            }
            TStmt::Block(b) => self.block(b, frame),
            TStmt::If { cond, then_b, else_b } => {
                if self.expr(cond, frame)? != 0 {
                    self.block(then_b, frame)
                } else {
                    self.block(else_b, frame)
                }
            }
            TStmt::While { cond, body } => loop {
                if self.expr(cond, frame)? == 0 {
                    return Ok(Flow::Normal);
                }
                match self.block(body, frame)? {
                    Flow::Normal | Flow::Continue => {}
                    Flow::Break => return Ok(Flow::Normal),
                    ret @ Flow::Return(_) => return Ok(ret),
                }
                self.spend()?;
            },
            TStmt::For { cond, update, body } => loop {
                if let Some(c) = cond {
                    if self.expr(c, frame)? == 0 {
                        return Ok(Flow::Normal);
                    }
                }
                match self.block(body, frame)? {
                    Flow::Normal | Flow::Continue => {}
                    Flow::Break => return Ok(Flow::Normal),
                    ret @ Flow::Return(_) => return Ok(ret),
                }
                if let Some(u) = update {
                    self.expr(u, frame)?;
                }
                self.spend()?;
            },
            TStmt::InitArray { arr, items } => {
                for item in items {
                    let v = self.expr(&item.value, frame)?;
                    for idx in item.lo..=item.hi {
                        self.write_element(arr, idx as i32, v, frame)?;
                    }
                }
                Ok(Flow::Normal)
            }
            TStmt::Break(_) => Ok(Flow::Break),
            TStmt::Continue(_) => Ok(Flow::Continue),
            TStmt::Return(e) => {
                let v = self.expr(e, frame)?;
                Ok(Flow::Return(v))
            }
        }
    }

    fn expr(&mut self, e: &TExpr, frame: &mut Frame) -> Result<i32, Halt> {
        match &e.kind {
            TExprKind::Int(n) => Ok(*n),
            TExprKind::Load(lv) => self.load(lv, frame),
            TExprKind::Not(inner) => Ok(i32::from(self.expr(inner, frame)? == 0)),
            TExprKind::Neg(inner) => Ok(self.expr(inner, frame)?.wrapping_neg()),
            TExprKind::Arith { op, lhs, rhs } => {
                let a = self.expr(lhs, frame)?;
                let b = self.expr(rhs, frame)?;
                match op {
                    ArithOp::Add => Ok(a.wrapping_add(b)),
                    ArithOp::Sub => Ok(a.wrapping_sub(b)),
                    ArithOp::Mul => Ok(a.wrapping_mul(b)),
                    ArithOp::Div if b == 0 => Err(Halt::Trap(Trap::DivideByZero)),
                    ArithOp::Div => Ok(a.wrapping_div(b)),
                    ArithOp::Mod if b == 0 => Err(Halt::Trap(Trap::DivideByZero)),
                    ArithOp::Mod => Ok(a.wrapping_rem(b)),
                }
            }
            TExprKind::Cmp { op, lhs, rhs } => {
                let a = self.expr(lhs, frame)?;
                let b = self.expr(rhs, frame)?;
                Ok(i32::from(match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                }))
            }
            TExprKind::And { lhs, rhs } => {
                if self.expr(lhs, frame)? == 0 {
                    return Ok(0);
                }
                Ok(i32::from(self.expr(rhs, frame)? != 0))
            }
            TExprKind::Or { lhs, rhs } => {
                if self.expr(lhs, frame)? != 0 {
                    return Ok(1);
                }
                Ok(i32::from(self.expr(rhs, frame)? != 0))
            }
            TExprKind::Assign { target, value } => {
                // Value first, then the target address — the compiled order.
                let v = self.expr(value, frame)?;
                match target {
                    LValue::Slot { slot, name } => {
                        frame.slots[*slot as usize] = Some(v);
                        self.log(frame.func, name, v);
                    }
                    LValue::Global { addr, name } => {
                        self.globals.insert(*addr, v);
                        self.log(frame.func, name, v);
                    }
                    LValue::Index { arr, index } => {
                        let idx = self.expr(index, frame)?;
                        self.write_element(arr, idx, v, frame)?;
                    }
                    LValue::Deref { ptr_slot, arr, offset } => {
                        let idx = self.deref_index(*ptr_slot, offset, frame)?;
                        self.write_element(arr, idx, v, frame)?;
                    }
                }
                Ok(v)
            }
            TExprKind::PtrAssign { ptr_slot, base, offset, negate, .. } => {
                let off =
                    offset.as_ref().map(|o| self.expr(o, frame)).transpose()?.unwrap_or(0);
                let off = if *negate { off.wrapping_neg() } else { off };
                let base = match base {
                    PtrBase::Array => 0,
                    PtrBase::Ptr(slot) => self.read_slot(*slot, frame)?,
                };
                let idx = base.wrapping_add(off);
                frame.slots[*ptr_slot as usize] = Some(idx);
                Ok(idx)
            }
            TExprKind::Call { callee, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.expr(a, frame)?);
                }
                self.call(*callee, vals)
            }
        }
    }

    fn load(&mut self, lv: &LValue, frame: &mut Frame) -> Result<i32, Halt> {
        match lv {
            LValue::Slot { slot, name } => {
                frame.slots[*slot as usize].ok_or_else(|| {
                    Halt::Error(OracleError::Uninitialized { name: name.clone() })
                })
            }
            LValue::Global { addr, .. } => Ok(*self.globals.get(addr).expect("global exists")),
            LValue::Index { arr, index } => {
                let idx = self.expr(index, frame)?;
                self.read_element(arr, idx, frame)
            }
            LValue::Deref { ptr_slot, arr, offset } => {
                let idx = self.deref_index(*ptr_slot, offset, frame)?;
                self.read_element(arr, idx, frame)
            }
        }
    }

    /// The element index a dereference resolves to.
    fn deref_index(
        &mut self,
        ptr_slot: u32,
        offset: &Option<(Box<TExpr>, bool)>,
        frame: &mut Frame,
    ) -> Result<i32, Halt> {
        let base = self.read_slot(ptr_slot, frame)?;
        let off = match offset {
            Some((o, negate)) => {
                let v = self.expr(o, frame)?;
                if *negate {
                    v.wrapping_neg()
                } else {
                    v
                }
            }
            None => 0,
        };
        Ok(base.wrapping_add(off))
    }

    fn read_slot(&self, slot: u32, frame: &Frame) -> Result<i32, Halt> {
        frame.slots[slot as usize].ok_or_else(|| {
            let f = self.prog.function(frame.func);
            let name = f
                .frame
                .names
                .iter()
                .rev()
                .find(|(_, s)| *s == slot)
                .map(|(n, _)| n.clone())
                .unwrap_or_else(|| format!("slot {slot}"));
            Halt::Error(OracleError::Uninitialized { name })
        })
    }

    /// Bounds an index against an array's runtime length.
    ///
    /// Dynamic arrays are bounded by the size parameter's *current* value and
    /// by the reserved capacity — exactly the two exits of the compiled search
    /// loop. The loop counts upward and stops on *equality*, so a size outside
    /// `0..=cap` never stops it and the reservation cap rules instead.
    fn check_bounds(&mut self, arr: &ArrayRef, idx: i32, frame: &mut Frame) -> Result<(), Halt> {
        let len = match arr.len {
            ArrayLen::Const(n) => n as i64,
            ArrayLen::Dynamic { size_slot, cap } => {
                let n = self.read_slot(size_slot, frame)? as i64;
                if (0..=cap as i64).contains(&n) {
                    n
                } else {
                    cap as i64
                }
            }
        };
        if (idx as i64) < 0 || (idx as i64) >= len {
            return Err(Halt::Trap(Trap::OutOfBounds));
        }
        Ok(())
    }

    fn read_element(&mut self, arr: &ArrayRef, idx: i32, frame: &mut Frame) -> Result<i32, Halt> {
        self.check_bounds(arr, idx, frame)?;
        match arr.place {
            ArrayPlace::Stack { base_slot } => self.read_slot(base_slot + idx as u32, frame),
            ArrayPlace::Heap { base } => {
                Ok(*self.globals.get(&(base + idx)).expect("global element exists"))
            }
        }
    }

    fn write_element(
        &mut self,
        arr: &ArrayRef,
        idx: i32,
        v: i32,
        frame: &mut Frame,
    ) -> Result<(), Halt> {
        self.check_bounds(arr, idx, frame)?;
        match arr.place {
            ArrayPlace::Stack { base_slot } => {
                frame.slots[(base_slot + idx as u32) as usize] = Some(v);
            }
            ArrayPlace::Heap { base } => {
                self.globals.insert(base + idx, v);
            }
        }
        Ok(())
    }

    fn log(&mut self, func: usize, name: &str, value: i32) {
        self.assignments.push(Assignment {
            function: self.prog.function(func).name.clone(),
            name: name.to_string(),
            value,
        });
    }
}
