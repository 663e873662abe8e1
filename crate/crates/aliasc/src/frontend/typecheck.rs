//! Type checking, name resolution, and stack-frame layout.
//!
//! Produces a typed program in which every variable reference is resolved to
//! a stack slot or heap address, every pointer use is tied to its `restrict`
//! array, comparison operators are normalized to `==`, `!=`, `<`, and frame
//! sizes (including expression spill slots) are fixed.
//!
//! Frame shape, slot indices relative to the frame's stack pointer:
//!
//! ```text
//! F-1   saved frame pointer   (written through the caller's sp, slot -1)
//! F-2   saved return address
//! ...   spill slots for expression evaluation
//! ...   locals in declaration order (arrays/struct fields contiguous)
//! 0..P  parameters
//! ```

use super::ast::{self, BinOp, UnOp};
use super::lexer::Span;
use super::{FrontendError, DYNAMIC_ARRAY_CAP, MAX_PARAMS};
use std::collections::HashMap;

/// First heap address handed to user globals. The stack occupies addresses
/// going down from 0, so any positive base keeps the regions apart.
pub const GLOBAL_BASE: i32 = 64;

// ===================== typed program =====================

#[derive(Clone, Debug)]
pub struct TProgram {
    /// functions[0] is the program entry point.
    pub functions: Vec<TFunction>,
    pub globals: Vec<GlobalDef>,
}

impl TProgram {
    pub fn entry(&self) -> &TFunction {
        &self.functions[0]
    }

    pub fn function(&self, idx: usize) -> &TFunction {
        &self.functions[idx]
    }

    /// First heap address not used by globals.
    pub fn heap_end(&self) -> i32 {
        self.globals
            .last()
            .map(|g| g.base + g.len as i32)
            .unwrap_or(GLOBAL_BASE)
    }
}

#[derive(Clone, Debug)]
pub struct GlobalDef {
    pub name: String,
    pub base: i32,
    pub len: u32,
    /// One word per cell; scalars have len 1. Uninitialized cells are zero.
    pub init: Vec<i32>,
}

#[derive(Clone, Debug)]
pub struct TFunction {
    pub name: String,
    pub params: Vec<String>,
    pub frame: FrameLayout,
    pub body: TBlock,
    pub span: Span,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FrameLayout {
    /// Total frame words F, including the saved fp and ra slots.
    pub size: u32,
    /// Words holding parameters and locals (slots `0..vars`).
    pub vars: u32,
    /// First expression spill slot.
    pub scratch_base: u32,
    pub scratch_count: u32,
    pub ra_slot: u32,
    pub fp_slot: u32,
    /// Source name → base slot, in declaration order (shadowed names repeat).
    pub names: Vec<(String, u32)>,
}

#[derive(Clone, Debug)]
pub struct TBlock {
    pub stmts: Vec<TStmt>,
}

#[derive(Clone, Debug)]
pub enum TStmt {
    Expr(TExpr),
    Block(TBlock),
    If { cond: TExpr, then_b: TBlock, else_b: TBlock },
    While { cond: TExpr, body: TBlock },
    /// `init` statements are emitted before the node by the checker.
    For { cond: Option<TExpr>, update: Option<TExpr>, body: TBlock },
    /// Element-by-element array initialization (ranges are inclusive).
    InitArray { arr: ArrayRef, items: Vec<TInitItem> },
    Break(Span),
    Continue(Span),
    Return(TExpr),
}

#[derive(Clone, Debug)]
pub struct TInitItem {
    pub lo: u32,
    pub hi: u32,
    pub value: TExpr,
}

#[derive(Clone, Debug)]
pub struct TExpr {
    pub kind: TExprKind,
    pub span: Span,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
}

#[derive(Clone, Debug)]
pub enum TExprKind {
    Int(i32),
    Load(LValue),
    Not(Box<TExpr>),
    Neg(Box<TExpr>),
    Arith { op: ArithOp, lhs: Box<TExpr>, rhs: Box<TExpr> },
    Cmp { op: CmpOp, lhs: Box<TExpr>, rhs: Box<TExpr> },
    And { lhs: Box<TExpr>, rhs: Box<TExpr> },
    Or { lhs: Box<TExpr>, rhs: Box<TExpr> },
    Assign { target: LValue, value: Box<TExpr> },
    /// `p = a + e`, `p = p - e`, ... — the stored word is an element address.
    PtrAssign { ptr_slot: u32, base: PtrBase, arr: ArrayRef, offset: Option<Box<TExpr>>, negate: bool },
    Call { callee: usize, args: Vec<TExpr> },
}

#[derive(Clone, Debug)]
pub enum LValue {
    /// A scalar local/param/struct-field at a frame slot.
    Slot { slot: u32, name: String },
    /// A scalar global at an absolute heap address.
    Global { addr: i32, name: String },
    Index { arr: ArrayRef, index: Box<TExpr> },
    /// `*p` or `*(p ± e)`.
    Deref { ptr_slot: u32, arr: ArrayRef, offset: Option<(Box<TExpr>, bool)> },
}

#[derive(Clone, Copy, Debug)]
pub enum PtrBase {
    /// Offset from the array's own base.
    Array,
    /// Offset from another pointer's current value (same restrict binding).
    Ptr(u32),
}

#[derive(Clone, Debug)]
pub struct ArrayRef {
    pub place: ArrayPlace,
    pub len: ArrayLen,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ArrayPlace {
    Stack { base_slot: u32 },
    Heap { base: i32 },
}

#[derive(Clone, Copy, Debug)]
pub enum ArrayLen {
    Const(u32),
    /// Size lives in a parameter slot; `cap` words are reserved.
    Dynamic { size_slot: u32, cap: u32 },
}

impl ArrayLen {
    /// Upper bound on reserved words.
    pub fn reserved(&self) -> u32 {
        match *self {
            ArrayLen::Const(n) => n,
            ArrayLen::Dynamic { cap, .. } => cap,
        }
    }
}

// ===================== checker =====================

pub fn typecheck(prog: &ast::Program) -> Result<TProgram, FrontendError> {
    let mut file_scope: HashMap<String, Binding> = HashMap::new();
    let mut globals = Vec::new();
    let mut next_addr = GLOBAL_BASE;
    let mut signatures: Vec<(String, usize, Span)> = Vec::new();

    // Pass 1: file-scope constants and globals (in order), function signatures.
    for item in &prog.items {
        match item {
            ast::Item::Const { name, value, span } => {
                let v = const_eval(value, &file_scope)?;
                declare_unique(&mut file_scope, name, Binding::Const(v), *span)?;
            }
            ast::Item::Global { name, size, init, span } => {
                let (len, init_words) = match size {
                    None => {
                        let init_words = match init.first() {
                            Some(ast::InitItem::Positional(e)) => {
                                vec![const_eval(e, &file_scope)?]
                            }
                            Some(_) => {
                                return Err(FrontendError::type_error(
                                    *span,
                                    "scalar globals take a single constant initializer",
                                ))
                            }
                            None => vec![0],
                        };
                        (1, init_words)
                    }
                    Some(size) => {
                        let n = require_array_size(size, &file_scope, *span)?;
                        let mut words = vec![0i32; n as usize];
                        fill_const_init(init, n, &mut words, &file_scope, *span)?;
                        (n, words)
                    }
                };
                let binding = if size.is_none() {
                    Binding::GlobalScalar { addr: next_addr }
                } else {
                    Binding::Array(ArrayRef {
                        place: ArrayPlace::Heap { base: next_addr },
                        len: ArrayLen::Const(len),
                    })
                };
                declare_unique(&mut file_scope, name, binding, *span)?;
                globals.push(GlobalDef {
                    name: name.clone(),
                    base: next_addr,
                    len,
                    init: init_words,
                });
                next_addr += len as i32;
            }
            ast::Item::Function(f) => {
                if signatures.iter().any(|(n, _, _)| n == &f.name) {
                    return Err(FrontendError::type_error(
                        f.span,
                        format!("function `{}` defined twice", f.name),
                    ));
                }
                if f.params.len() > MAX_PARAMS {
                    return Err(FrontendError::type_error(
                        f.span,
                        format!(
                            "function `{}` has {} parameters; at most {MAX_PARAMS} are supported",
                            f.name,
                            f.params.len()
                        ),
                    ));
                }
                signatures.push((f.name.clone(), f.params.len(), f.span));
            }
        }
    }

    if signatures.is_empty() {
        return Err(FrontendError::Type {
            line: 1,
            col: 1,
            msg: "program declares no function; the first function is the entry point".into(),
        });
    }

    // Pass 2: function bodies.
    let mut functions = Vec::new();
    for item in &prog.items {
        if let ast::Item::Function(f) = item {
            let mut checker = FnChecker {
                file_scope: &file_scope,
                signatures: &signatures,
                scopes: vec![HashMap::new()],
                next_slot: 0,
                param_count: f.params.len() as u32,
                names: Vec::new(),
                loop_depth: 0,
            };
            functions.push(checker.check_function(f)?);
        }
    }

    Ok(TProgram { functions, globals })
}

#[derive(Clone, Debug)]
enum Binding {
    Const(i32),
    Scalar { slot: u32 },
    GlobalScalar { addr: i32 },
    Array(ArrayRef),
    Pointer { slot: u32, arr: ArrayRef },
    Struct { base_slot: u32, fields: Vec<String> },
}

fn declare_unique(
    scope: &mut HashMap<String, Binding>,
    name: &str,
    binding: Binding,
    span: Span,
) -> Result<(), FrontendError> {
    if scope.insert(name.to_string(), binding).is_some() {
        return Err(FrontendError::type_error(
            span,
            format!("`{name}` is declared twice at file scope"),
        ));
    }
    Ok(())
}

/// Evaluate a compile-time constant expression.
fn const_eval(e: &ast::Expr, consts: &HashMap<String, Binding>) -> Result<i32, FrontendError> {
    match &e.kind {
        ast::ExprKind::Int(n) => Ok(*n),
        ast::ExprKind::Var(name) => match consts.get(name) {
            Some(Binding::Const(v)) => Ok(*v),
            _ => Err(FrontendError::type_error(
                e.span,
                format!("`{name}` is not a compile-time constant"),
            )),
        },
        ast::ExprKind::Unary { op, expr } => {
            let v = const_eval(expr, consts)?;
            Ok(match op {
                UnOp::Neg => v.wrapping_neg(),
                UnOp::Not => i32::from(v == 0),
            })
        }
        ast::ExprKind::Binary { op, lhs, rhs } => {
            let a = const_eval(lhs, consts)?;
            let b = const_eval(rhs, consts)?;
            match op {
                BinOp::Add => Ok(a.wrapping_add(b)),
                BinOp::Sub => Ok(a.wrapping_sub(b)),
                BinOp::Mul => Ok(a.wrapping_mul(b)),
                BinOp::Div | BinOp::Mod if b == 0 => Err(FrontendError::type_error(
                    e.span,
                    "division by zero in constant expression",
                )),
                BinOp::Div => Ok(a.wrapping_div(b)),
                BinOp::Mod => Ok(a.wrapping_rem(b)),
                BinOp::Eq => Ok(i32::from(a == b)),
                BinOp::Ne => Ok(i32::from(a != b)),
                BinOp::Lt => Ok(i32::from(a < b)),
                BinOp::Le => Ok(i32::from(a <= b)),
                BinOp::Gt => Ok(i32::from(a > b)),
                BinOp::Ge => Ok(i32::from(a >= b)),
                BinOp::And => Ok(i32::from(a != 0 && b != 0)),
                BinOp::Or => Ok(i32::from(a != 0 || b != 0)),
            }
        }
        _ => Err(FrontendError::type_error(e.span, "expression is not a compile-time constant")),
    }
}

fn require_array_size(
    size: &ast::Expr,
    consts: &HashMap<String, Binding>,
    span: Span,
) -> Result<u32, FrontendError> {
    let n = const_eval(size, consts)?;
    if n <= 0 {
        return Err(FrontendError::layout(span, format!("array size {n} must be positive")));
    }
    Ok(n as u32)
}

/// Resolve a constant initializer list into per-word values.
fn fill_const_init(
    items: &[ast::InitItem],
    len: u32,
    words: &mut [i32],
    consts: &HashMap<String, Binding>,
    span: Span,
) -> Result<(), FrontendError> {
    let mut cursor: u32 = 0;
    for item in items {
        match item {
            ast::InitItem::Positional(e) => {
                if cursor >= len {
                    return Err(FrontendError::type_error(
                        span,
                        format!("initializer has more than {len} elements"),
                    ));
                }
                words[cursor as usize] = const_eval(e, consts)?;
                cursor += 1;
            }
            ast::InitItem::Range { lo, hi, value } => {
                let lo = const_eval(lo, consts)?;
                let hi = const_eval(hi, consts)?;
                let v = const_eval(value, consts)?;
                if lo < 0 || hi < lo || hi as u32 >= len {
                    return Err(FrontendError::type_error(
                        span,
                        format!("initializer range [{lo} ... {hi}] is outside 0..{len}"),
                    ));
                }
                for w in &mut words[lo as usize..=hi as usize] {
                    *w = v;
                }
                cursor = hi as u32 + 1;
            }
        }
    }
    Ok(())
}

/// The type of a checked expression.
enum Ty {
    Int,
    /// A pointer-valued expression (only `p = ...` forms); unusable as int.
    Ptr,
}

struct FnChecker<'a> {
    file_scope: &'a HashMap<String, Binding>,
    signatures: &'a [(String, usize, Span)],
    scopes: Vec<HashMap<String, Binding>>,
    next_slot: u32,
    param_count: u32,
    names: Vec<(String, u32)>,
    loop_depth: u32,
}

impl<'a> FnChecker<'a> {
    fn check_function(&mut self, f: &ast::Function) -> Result<TFunction, FrontendError> {
        for (i, (p, pspan)) in f.params.iter().enumerate() {
            if f.params[..i].iter().any(|(q, _)| q == p) {
                return Err(FrontendError::type_error(
                    *pspan,
                    format!("parameter `{p}` repeated"),
                ));
            }
            let slot = self.alloc(p, 1);
            debug_assert_eq!(slot, i as u32);
            self.declare(p, Binding::Scalar { slot });
        }
        let body = self.check_block(&f.body)?;
        let vars = self.next_slot;
        let scratch_count = depth_block(&body, 0);
        let size = vars + scratch_count + 2;
        let frame = FrameLayout {
            size,
            vars,
            scratch_base: vars,
            scratch_count,
            ra_slot: size - 2,
            fp_slot: size - 1,
            names: std::mem::take(&mut self.names),
        };
        Ok(TFunction {
            name: f.name.clone(),
            params: f.params.iter().map(|(p, _)| p.clone()).collect(),
            frame,
            body,
            span: f.span,
        })
    }

    fn alloc(&mut self, name: &str, words: u32) -> u32 {
        let slot = self.next_slot;
        self.next_slot += words;
        self.names.push((name.to_string(), slot));
        slot
    }

    fn declare(&mut self, name: &str, binding: Binding) {
        self.scopes.last_mut().expect("scope stack").insert(name.to_string(), binding);
    }

    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .or_else(|| self.file_scope.get(name))
    }

    /// Constants visible here, for const-expression evaluation.
    fn visible_consts(&self) -> HashMap<String, Binding> {
        let mut all = self.file_scope.clone();
        for scope in &self.scopes {
            for (k, v) in scope {
                all.insert(k.clone(), v.clone());
            }
        }
        all
    }

    fn check_block(&mut self, b: &ast::Block) -> Result<TBlock, FrontendError> {
        self.scopes.push(HashMap::new());
        let mut stmts = Vec::new();
        for s in &b.stmts {
            self.check_stmt(s, &mut stmts)?;
        }
        self.scopes.pop();
        Ok(TBlock { stmts })
    }

    /// Check a statement used as a loop/branch body, giving it its own scope.
    fn check_body(&mut self, s: &ast::Stmt) -> Result<TBlock, FrontendError> {
        match s {
            ast::Stmt::Block(b) => self.check_block(b),
            other => {
                self.scopes.push(HashMap::new());
                let mut stmts = Vec::new();
                self.check_stmt(other, &mut stmts)?;
                self.scopes.pop();
                Ok(TBlock { stmts })
            }
        }
    }

    fn check_stmt(&mut self, s: &ast::Stmt, out: &mut Vec<TStmt>) -> Result<(), FrontendError> {
        match s {
            ast::Stmt::Empty => Ok(()),
            ast::Stmt::Decl(d) => self.check_decl(d, out),
            ast::Stmt::Expr(e) => {
                let (te, _) = self.check_expr(e)?;
                out.push(TStmt::Expr(te));
                Ok(())
            }
            ast::Stmt::Block(b) => {
                let tb = self.check_block(b)?;
                out.push(TStmt::Block(tb));
                Ok(())
            }
            ast::Stmt::If { cond, then_branch, else_branch, .. } => {
                let cond = self.check_int_expr(cond)?;
                let then_b = self.check_body(then_branch)?;
                let else_b = match else_branch {
                    Some(e) => self.check_body(e)?,
                    None => TBlock { stmts: Vec::new() },
                };
                out.push(TStmt::If { cond, then_b, else_b });
                Ok(())
            }
            ast::Stmt::While { cond, body, .. } => {
                let cond = self.check_int_expr(cond)?;
                self.loop_depth += 1;
                let body = self.check_body(body)?;
                self.loop_depth -= 1;
                out.push(TStmt::While { cond, body });
                Ok(())
            }
            ast::Stmt::For { init, cond, update, body, .. } => {
                // The init declaration scopes over the whole loop.
                self.scopes.push(HashMap::new());
                let mut init_stmts = Vec::new();
                if let Some(init) = init {
                    self.check_stmt(init, &mut init_stmts)?;
                }
                out.append(&mut init_stmts);
                let cond = cond.as_ref().map(|c| self.check_int_expr(c)).transpose()?;
                let update = update.as_ref().map(|u| self.check_any_expr(u)).transpose()?;
                self.loop_depth += 1;
                let body = self.check_body(body)?;
                self.loop_depth -= 1;
                self.scopes.pop();
                out.push(TStmt::For { cond, update, body });
                Ok(())
            }
            ast::Stmt::Break(span) => {
                if self.loop_depth == 0 {
                    return Err(FrontendError::type_error(*span, "`break` outside a loop"));
                }
                out.push(TStmt::Break(*span));
                Ok(())
            }
            ast::Stmt::Continue(span) => {
                if self.loop_depth == 0 {
                    return Err(FrontendError::type_error(*span, "`continue` outside a loop"));
                }
                out.push(TStmt::Continue(*span));
                Ok(())
            }
            ast::Stmt::Return { value, .. } => {
                let te = self.check_int_expr(value)?;
                out.push(TStmt::Return(te));
                Ok(())
            }
        }
    }

    fn check_decl(&mut self, d: &ast::Decl, out: &mut Vec<TStmt>) -> Result<(), FrontendError> {
        match d {
            ast::Decl::Const { name, value, .. } => {
                let v = const_eval(value, &self.visible_consts())?;
                self.declare(name, Binding::Const(v));
                Ok(())
            }
            ast::Decl::Scalar { name, init, span } => {
                let init = init.as_ref().map(|e| self.check_int_expr(e)).transpose()?;
                let slot = self.alloc(name, 1);
                self.declare(name, Binding::Scalar { slot });
                if let Some(value) = init {
                    out.push(TStmt::Expr(TExpr {
                        kind: TExprKind::Assign {
                            target: LValue::Slot { slot, name: name.clone() },
                            value: Box::new(value),
                        },
                        span: *span,
                    }));
                }
                Ok(())
            }
            ast::Decl::Array { name, size, init, span } => {
                let consts = self.visible_consts();
                let len = match const_eval(size, &consts) {
                    Ok(n) if n <= 0 => {
                        return Err(FrontendError::layout(
                            *span,
                            format!("array size {n} must be positive"),
                        ))
                    }
                    Ok(n) => ArrayLen::Const(n as u32),
                    Err(_) => match &size.kind {
                        ast::ExprKind::Var(v) => match self.lookup(v) {
                            Some(Binding::Scalar { slot }) if *slot < self.param_count => {
                                ArrayLen::Dynamic {
                                    size_slot: *slot,
                                    cap: DYNAMIC_ARRAY_CAP,
                                }
                            }
                            _ => {
                                return Err(FrontendError::type_error(
                                    size.span,
                                    "array size must be a constant or a function parameter",
                                ))
                            }
                        },
                        _ => {
                            return Err(FrontendError::type_error(
                                size.span,
                                "array size must be a constant or a function parameter",
                            ))
                        }
                    },
                };
                if matches!(len, ArrayLen::Dynamic { .. }) && !init.is_empty() {
                    return Err(FrontendError::type_error(
                        *span,
                        "arrays with runtime size cannot have initializers",
                    ));
                }
                let base_slot = self.alloc(name, len.reserved());
                let arr = ArrayRef { place: ArrayPlace::Stack { base_slot }, len };
                self.declare(name, Binding::Array(arr.clone()));
                if !init.is_empty() {
                    let n = match len {
                        ArrayLen::Const(n) => n,
                        ArrayLen::Dynamic { .. } => unreachable!(),
                    };
                    let items = self.check_init_items(init, n, *span)?;
                    out.push(TStmt::InitArray { arr, items });
                }
                Ok(())
            }
            ast::Decl::Pointer { name, array, init, span } => {
                let array = array.as_ref().ok_or_else(|| {
                    FrontendError::type_error(
                        *span,
                        format!(
                            "pointer `{name}` needs a `restrict <array>` clause naming the array it may point into"
                        ),
                    )
                })?;
                let arr = match self.lookup(array) {
                    Some(Binding::Array(a)) => a.clone(),
                    Some(_) => {
                        return Err(FrontendError::type_error(
                            *span,
                            format!("`restrict {array}`: `{array}` is not an array"),
                        ))
                    }
                    None => {
                        return Err(FrontendError::type_error(
                            *span,
                            format!("`restrict {array}`: no array `{array}` in scope"),
                        ))
                    }
                };
                let init = init
                    .as_ref()
                    .map(|e| self.check_ptr_rhs(e, &arr))
                    .transpose()?;
                let slot = self.alloc(name, 1);
                self.declare(name, Binding::Pointer { slot, arr: arr.clone() });
                if let Some((base, offset, negate, espan)) = init {
                    out.push(TStmt::Expr(TExpr {
                        kind: TExprKind::PtrAssign {
                            ptr_slot: slot,
                            base,
                            arr,
                            offset: offset.map(Box::new),
                            negate,
                        },
                        span: espan,
                    }));
                }
                Ok(())
            }
            ast::Decl::Struct { name, fields, span } => {
                if fields.is_empty() {
                    return Err(FrontendError::layout(*span, "struct has no fields"));
                }
                for (i, (f, fspan)) in fields.iter().enumerate() {
                    if fields[..i].iter().any(|(g, _)| g == f) {
                        return Err(FrontendError::type_error(
                            *fspan,
                            format!("field `{f}` repeated"),
                        ));
                    }
                }
                let base_slot = self.alloc(name, fields.len() as u32);
                // Field slots carry their qualified names for diagnostics.
                for (i, (f, _)) in fields.iter().enumerate() {
                    self.names.push((format!("{name}.{f}"), base_slot + i as u32));
                }
                self.declare(
                    name,
                    Binding::Struct {
                        base_slot,
                        fields: fields.iter().map(|(f, _)| f.clone()).collect(),
                    },
                );
                Ok(())
            }
        }
    }

    fn check_init_items(
        &mut self,
        items: &[ast::InitItem],
        len: u32,
        span: Span,
    ) -> Result<Vec<TInitItem>, FrontendError> {
        let consts = self.visible_consts();
        let mut out = Vec::new();
        let mut cursor: u32 = 0;
        for item in items {
            match item {
                ast::InitItem::Positional(e) => {
                    if cursor >= len {
                        return Err(FrontendError::type_error(
                            span,
                            format!("initializer has more than {len} elements"),
                        ));
                    }
                    let value = self.check_int_expr(e)?;
                    out.push(TInitItem { lo: cursor, hi: cursor, value });
                    cursor += 1;
                }
                ast::InitItem::Range { lo, hi, value } => {
                    let lo = const_eval(lo, &consts)?;
                    let hi = const_eval(hi, &consts)?;
                    if lo < 0 || hi < lo || hi as u32 >= len {
                        return Err(FrontendError::type_error(
                            span,
                            format!("initializer range [{lo} ... {hi}] is outside 0..{len}"),
                        ));
                    }
                    let value = self.check_int_expr(value)?;
                    out.push(TInitItem { lo: lo as u32, hi: hi as u32, value });
                    cursor = hi as u32 + 1;
                }
            }
        }
        Ok(out)
    }

    fn check_int_expr(&mut self, e: &ast::Expr) -> Result<TExpr, FrontendError> {
        let (te, ty) = self.check_expr(e)?;
        match ty {
            Ty::Int => Ok(te),
            Ty::Ptr => Err(FrontendError::type_error(
                e.span,
                "pointer expression used where an int is required",
            )),
        }
    }

    /// Check an expression in statement position (pointer assignments allowed).
    fn check_any_expr(&mut self, e: &ast::Expr) -> Result<TExpr, FrontendError> {
        Ok(self.check_expr(e)?.0)
    }

    fn check_expr(&mut self, e: &ast::Expr) -> Result<(TExpr, Ty), FrontendError> {
        let span = e.span;
        let int = |kind| (TExpr { kind, span }, Ty::Int);
        match &e.kind {
            ast::ExprKind::Int(n) => Ok(int(TExprKind::Int(*n))),
            ast::ExprKind::Var(name) => match self.lookup(name) {
                Some(Binding::Const(v)) => Ok(int(TExprKind::Int(*v))),
                Some(Binding::Scalar { slot }) => Ok(int(TExprKind::Load(LValue::Slot {
                    slot: *slot,
                    name: name.clone(),
                }))),
                Some(Binding::GlobalScalar { addr }) => Ok(int(TExprKind::Load(
                    LValue::Global { addr: *addr, name: name.clone() },
                ))),
                Some(Binding::Pointer { .. }) => Err(FrontendError::type_error(
                    span,
                    format!("pointer `{name}` can only be dereferenced or reassigned"),
                )),
                Some(Binding::Array(_)) => Err(FrontendError::type_error(
                    span,
                    format!("array `{name}` used as a value"),
                )),
                Some(Binding::Struct { .. }) => Err(FrontendError::type_error(
                    span,
                    format!("struct `{name}` used as a value"),
                )),
                None => Err(FrontendError::type_error(span, format!("`{name}` is not declared"))),
            },
            ast::ExprKind::Unary { op, expr } => {
                let inner = self.check_int_expr(expr)?;
                Ok(int(match op {
                    UnOp::Not => TExprKind::Not(Box::new(inner)),
                    UnOp::Neg => TExprKind::Neg(Box::new(inner)),
                }))
            }
            ast::ExprKind::Binary { op, lhs, rhs } => {
                let l = self.check_int_expr(lhs)?;
                let r = self.check_int_expr(rhs)?;
                // Fold literal operands so constant subexpressions cost no code.
                if let (TExprKind::Int(a), TExprKind::Int(b)) = (&l.kind, &r.kind) {
                    let (a, b) = (*a, *b);
                    if matches!(op, BinOp::Div | BinOp::Mod) && b == 0 {
                        return Err(FrontendError::type_error(
                            span,
                            "division by zero in constant expression",
                        ));
                    }
                    let v = match op {
                        BinOp::Add => a.wrapping_add(b),
                        BinOp::Sub => a.wrapping_sub(b),
                        BinOp::Mul => a.wrapping_mul(b),
                        BinOp::Div => a.wrapping_div(b),
                        BinOp::Mod => a.wrapping_rem(b),
                        BinOp::Eq => i32::from(a == b),
                        BinOp::Ne => i32::from(a != b),
                        BinOp::Lt => i32::from(a < b),
                        BinOp::Le => i32::from(a <= b),
                        BinOp::Gt => i32::from(a > b),
                        BinOp::Ge => i32::from(a >= b),
                        BinOp::And => i32::from(a != 0 && b != 0),
                        BinOp::Or => i32::from(a != 0 || b != 0),
                    };
                    return Ok(int(TExprKind::Int(v)));
                }
                let b = |e: TExpr| Box::new(e);
                Ok(int(match op {
                    BinOp::Add => TExprKind::Arith { op: ArithOp::Add, lhs: b(l), rhs: b(r) },
                    BinOp::Sub => TExprKind::Arith { op: ArithOp::Sub, lhs: b(l), rhs: b(r) },
                    BinOp::Mul => TExprKind::Arith { op: ArithOp::Mul, lhs: b(l), rhs: b(r) },
                    BinOp::Div => TExprKind::Arith { op: ArithOp::Div, lhs: b(l), rhs: b(r) },
                    BinOp::Mod => TExprKind::Arith { op: ArithOp::Mod, lhs: b(l), rhs: b(r) },
                    BinOp::Eq => TExprKind::Cmp { op: CmpOp::Eq, lhs: b(l), rhs: b(r) },
                    BinOp::Ne => TExprKind::Cmp { op: CmpOp::Ne, lhs: b(l), rhs: b(r) },
                    BinOp::Lt => TExprKind::Cmp { op: CmpOp::Lt, lhs: b(l), rhs: b(r) },
                    // a <= b  ⇔  !(b < a); a > b ⇔ b < a; a >= b ⇔ !(a < b)
                    BinOp::Le => TExprKind::Not(Box::new(TExpr {
                        kind: TExprKind::Cmp { op: CmpOp::Lt, lhs: b(r), rhs: b(l) },
                        span,
                    })),
                    BinOp::Gt => TExprKind::Cmp { op: CmpOp::Lt, lhs: b(r), rhs: b(l) },
                    BinOp::Ge => TExprKind::Not(Box::new(TExpr {
                        kind: TExprKind::Cmp { op: CmpOp::Lt, lhs: b(l), rhs: b(r) },
                        span,
                    })),
                    BinOp::And => TExprKind::And { lhs: b(l), rhs: b(r) },
                    BinOp::Or => TExprKind::Or { lhs: b(l), rhs: b(r) },
                }))
            }
            ast::ExprKind::Index { .. } | ast::ExprKind::Deref(_) | ast::ExprKind::Member { .. } => {
                let lv = self.check_lvalue(e)?;
                Ok(int(TExprKind::Load(lv)))
            }
            ast::ExprKind::Assign { target, value } => {
                // Pointer targets route to pointer arithmetic.
                if let ast::ExprKind::Var(name) = &target.kind {
                    if let Some(Binding::Pointer { slot, arr }) = self.lookup(name) {
                        let (slot, arr) = (*slot, arr.clone());
                        let (base, offset, negate, _) = self.check_ptr_rhs(value, &arr)?;
                        return Ok((
                            TExpr {
                                kind: TExprKind::PtrAssign {
                                    ptr_slot: slot,
                                    base,
                                    arr,
                                    offset: offset.map(Box::new),
                                    negate,
                                },
                                span,
                            },
                            Ty::Ptr,
                        ));
                    }
                }
                let lv = self.check_lvalue(target)?;
                let value = self.check_int_expr(value)?;
                Ok(int(TExprKind::Assign { target: lv, value: Box::new(value) }))
            }
            ast::ExprKind::Call { name, args } => {
                let (idx, arity) = self
                    .signatures
                    .iter()
                    .enumerate()
                    .find(|(_, (n, _, _))| n == name)
                    .map(|(i, (_, a, _))| (i, *a))
                    .ok_or_else(|| {
                        FrontendError::type_error(span, format!("function `{name}` is not defined"))
                    })?;
                if args.len() != arity {
                    return Err(FrontendError::type_error(
                        span,
                        format!("`{name}` takes {arity} arguments, got {}", args.len()),
                    ));
                }
                let args = args
                    .iter()
                    .map(|a| self.check_int_expr(a))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(int(TExprKind::Call { callee: idx, args }))
            }
        }
    }

    fn check_lvalue(&mut self, e: &ast::Expr) -> Result<LValue, FrontendError> {
        let span = e.span;
        match &e.kind {
            ast::ExprKind::Var(name) => match self.lookup(name) {
                Some(Binding::Scalar { slot }) => {
                    Ok(LValue::Slot { slot: *slot, name: name.clone() })
                }
                Some(Binding::GlobalScalar { addr }) => {
                    Ok(LValue::Global { addr: *addr, name: name.clone() })
                }
                Some(_) => Err(FrontendError::type_error(
                    span,
                    format!("`{name}` cannot be assigned as a scalar"),
                )),
                None => Err(FrontendError::type_error(span, format!("`{name}` is not declared"))),
            },
            ast::ExprKind::Index { base, index } => {
                let arr = match &base.kind {
                    ast::ExprKind::Var(name) => match self.lookup(name) {
                        Some(Binding::Array(a)) => a.clone(),
                        Some(_) => {
                            return Err(FrontendError::type_error(
                                base.span,
                                format!("`{name}` is not an array"),
                            ))
                        }
                        None => {
                            return Err(FrontendError::type_error(
                                base.span,
                                format!("`{name}` is not declared"),
                            ))
                        }
                    },
                    _ => {
                        return Err(FrontendError::type_error(
                            base.span,
                            "only named arrays can be indexed",
                        ))
                    }
                };
                let index = self.check_int_expr(index)?;
                Ok(LValue::Index { arr, index: Box::new(index) })
            }
            ast::ExprKind::Deref(inner) => {
                // *p, *(p + e), *(p - e)
                let (ptr_slot, arr, offset) = self.check_ptr_expr(inner)?;
                Ok(LValue::Deref { ptr_slot, arr, offset })
            }
            ast::ExprKind::Member { base, field } => {
                let name = match &base.kind {
                    ast::ExprKind::Var(name) => name,
                    _ => {
                        return Err(FrontendError::type_error(
                            base.span,
                            "field access requires a named struct",
                        ))
                    }
                };
                match self.lookup(name) {
                    Some(Binding::Struct { base_slot, fields }) => {
                        let pos = fields.iter().position(|f| f == field).ok_or_else(|| {
                            FrontendError::type_error(
                                span,
                                format!("`{name}` has no field `{field}`"),
                            )
                        })?;
                        Ok(LValue::Slot {
                            slot: *base_slot + pos as u32,
                            name: format!("{name}.{field}"),
                        })
                    }
                    Some(_) => Err(FrontendError::type_error(
                        span,
                        format!("`{name}` is not a struct"),
                    )),
                    None => Err(FrontendError::type_error(span, format!("`{name}` is not declared"))),
                }
            }
            _ => Err(FrontendError::type_error(span, "expression is not assignable")),
        }
    }

    /// Resolve the inside of a dereference: a pointer name with an optional
    /// constant-free offset, `p` or `p + e` or `p - e`.
    #[allow(clippy::type_complexity)]
    fn check_ptr_expr(
        &mut self,
        e: &ast::Expr,
    ) -> Result<(u32, ArrayRef, Option<(Box<TExpr>, bool)>), FrontendError> {
        match &e.kind {
            ast::ExprKind::Var(name) => match self.lookup(name) {
                Some(Binding::Pointer { slot, arr }) => Ok((*slot, arr.clone(), None)),
                _ => Err(FrontendError::type_error(
                    e.span,
                    format!("`{name}` is not a restrict pointer"),
                )),
            },
            ast::ExprKind::Binary { op: op @ (BinOp::Add | BinOp::Sub), lhs, rhs } => {
                let (slot, arr, existing) = self.check_ptr_expr(lhs)?;
                if existing.is_some() {
                    return Err(FrontendError::type_error(
                        e.span,
                        "pointer offsets cannot be chained; use one `p ± e`",
                    ));
                }
                let off = self.check_int_expr(rhs)?;
                Ok((slot, arr, Some((Box::new(off), *op == BinOp::Sub))))
            }
            _ => Err(FrontendError::type_error(
                e.span,
                "dereference requires a restrict pointer, optionally `p ± e`",
            )),
        }
    }

    /// Resolve the right-hand side of a pointer assignment.
    #[allow(clippy::type_complexity)]
    fn check_ptr_rhs(
        &mut self,
        e: &ast::Expr,
        target_arr: &ArrayRef,
    ) -> Result<(PtrBase, Option<TExpr>, bool, Span), FrontendError> {
        let span = e.span;
        let base_of = |this: &Self, name: &str| -> Option<PtrBase> {
            match this.lookup(name) {
                Some(Binding::Array(a)) if a.place == target_arr.place => Some(PtrBase::Array),
                Some(Binding::Pointer { slot, arr }) if arr.place == target_arr.place => {
                    Some(PtrBase::Ptr(*slot))
                }
                _ => None,
            }
        };
        match &e.kind {
            ast::ExprKind::Var(name) => base_of(self, name)
                .map(|b| (b, None, false, span))
                .ok_or_else(|| {
                    FrontendError::type_error(
                        span,
                        format!("`{name}` is not the pointer's restrict array or a pointer into it"),
                    )
                }),
            ast::ExprKind::Binary { op: op @ (BinOp::Add | BinOp::Sub), lhs, rhs } => {
                // a + e, p + e, e + a (add only)
                if let ast::ExprKind::Var(name) = &lhs.kind {
                    if let Some(b) = base_of(self, name) {
                        let off = self.check_int_expr(rhs)?;
                        return Ok((b, Some(off), *op == BinOp::Sub, span));
                    }
                }
                if *op == BinOp::Add {
                    if let ast::ExprKind::Var(name) = &rhs.kind {
                        if let Some(b) = base_of(self, name) {
                            let off = self.check_int_expr(lhs)?;
                            return Ok((b, Some(off), false, span));
                        }
                    }
                }
                Err(FrontendError::type_error(
                    span,
                    "pointer assignment must be `a ± e` or `p ± e` within the restrict array",
                ))
            }
            _ => Err(FrontendError::type_error(
                span,
                "pointer assignment must be `a ± e` or `p ± e` within the restrict array",
            )),
        }
    }
}

// ===================== spill-depth walker =====================
//
// Mirrors the code generator's evaluation discipline: results accumulate in
// one register, the left operand of a strict binary operation is spilled to
// a scratch slot while the right is evaluated, and call arguments occupy one
// scratch slot each. The walker may over-reserve (it ignores the code
// generator's constant folding) but must never under-reserve; the generator
// asserts its actual usage stays within this bound.

fn depth_block(b: &TBlock, d: u32) -> u32 {
    b.stmts.iter().map(|s| depth_stmt(s, d)).max().unwrap_or(d)
}

fn depth_stmt(s: &TStmt, d: u32) -> u32 {
    match s {
        TStmt::Expr(e) => depth_expr(e, d),
        TStmt::Block(b) => depth_block(b, d),
        TStmt::If { cond, then_b, else_b } => depth_expr(cond, d)
            .max(depth_block(then_b, d))
            .max(depth_block(else_b, d)),
        TStmt::While { cond, body } => depth_expr(cond, d).max(depth_block(body, d)),
        TStmt::For { cond, update, body } => cond
            .as_ref()
            .map(|c| depth_expr(c, d))
            .unwrap_or(d)
            .max(update.as_ref().map(|u| depth_expr(u, d)).unwrap_or(d))
            .max(depth_block(body, d)),
        TStmt::InitArray { items, .. } => {
            items.iter().map(|i| depth_expr(&i.value, d)).max().unwrap_or(d)
        }
        TStmt::Break(_) | TStmt::Continue(_) => d,
        TStmt::Return(e) => depth_expr(e, d),
    }
}

fn depth_expr(e: &TExpr, d: u32) -> u32 {
    match &e.kind {
        TExprKind::Int(_) => d,
        TExprKind::Load(lv) => depth_lvalue_read(lv, d),
        TExprKind::Not(inner) | TExprKind::Neg(inner) => depth_expr(inner, d),
        TExprKind::Arith { lhs, rhs, .. } | TExprKind::Cmp { lhs, rhs, .. } => {
            depth_expr(lhs, d).max(d + 1).max(depth_expr(rhs, d + 1))
        }
        TExprKind::And { lhs, rhs } | TExprKind::Or { lhs, rhs } => {
            depth_expr(lhs, d).max(depth_expr(rhs, d))
        }
        TExprKind::Assign { target, value } => match target {
            LValue::Slot { .. } | LValue::Global { .. } => depth_expr(value, d),
            LValue::Index { index, .. } => {
                depth_expr(value, d).max(d + 1).max(depth_expr(index, d + 1))
            }
            LValue::Deref { offset, .. } => {
                let v = depth_expr(value, d);
                match offset {
                    Some((off, _)) => v.max(d + 1).max(depth_expr(off, d + 1)),
                    None => v.max(d + 1),
                }
            }
        },
        TExprKind::PtrAssign { offset, .. } => {
            offset.as_ref().map(|o| depth_expr(o, d)).unwrap_or(d)
        }
        TExprKind::Call { args, .. } => {
            let mut max = d + args.len() as u32;
            for (i, a) in args.iter().enumerate() {
                max = max.max(depth_expr(a, d + i as u32));
            }
            max
        }
    }
}

fn depth_lvalue_read(lv: &LValue, d: u32) -> u32 {
    match lv {
        LValue::Slot { .. } | LValue::Global { .. } => d,
        LValue::Index { index, .. } => depth_expr(index, d),
        LValue::Deref { offset, .. } => {
            offset.as_ref().map(|(o, _)| depth_expr(o, d)).unwrap_or(d)
        }
    }
}
