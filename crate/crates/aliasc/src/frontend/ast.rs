//! Untyped syntax tree and its pretty-printer.
//!
//! The printer exists so tests can check the round-trip property: printing a
//! parse tree and reparsing it yields the same tree.

use super::lexer::Span;
use std::fmt::Write as _;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Program {
    pub items: Vec<Item>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Item {
    /// `const int NAME = expr;` — a file-scope compile-time constant.
    Const { name: String, value: Expr, span: Span },
    /// `int g;` / `int g = expr;` / `int g[size];` / `int g[size] = {...};`
    Global { name: String, size: Option<Expr>, init: Vec<InitItem>, span: Span },
    Function(Function),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Function {
    pub name: String,
    pub params: Vec<(String, Span)>,
    pub body: Block,
    pub span: Span,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Stmt {
    Decl(Decl),
    Expr(Expr),
    Block(Block),
    If { cond: Expr, then_branch: Box<Stmt>, else_branch: Option<Box<Stmt>>, span: Span },
    While { cond: Expr, body: Box<Stmt>, span: Span },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Expr>,
        body: Box<Stmt>,
        span: Span,
    },
    Break(Span),
    Continue(Span),
    Return { value: Expr, span: Span },
    /// A stray `;`.
    Empty,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Decl {
    /// `const int NAME = expr;` at block scope.
    Const { name: String, value: Expr, span: Span },
    Scalar { name: String, init: Option<Expr>, span: Span },
    Array { name: String, size: Expr, init: Vec<InitItem>, span: Span },
    /// `int *p restrict a;` with optional `= a + e` initializer. A missing
    /// `restrict` clause parses but is rejected by the type checker.
    Pointer { name: String, array: Option<String>, init: Option<Expr>, span: Span },
    /// `struct { int a; int b; } x;`
    Struct { name: String, fields: Vec<(String, Span)>, span: Span },
}

/// One entry of a braced array initializer: either positional or a GNU-style
/// designated range `[lo ... hi] = value`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum InitItem {
    Positional(Expr),
    Range { lo: Expr, hi: Expr, value: Expr },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength for the printer; higher binds tighter.
    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Eq for Expr {}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ExprKind {
    Int(i32),
    Var(String),
    Unary { op: UnOp, expr: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Index { base: Box<Expr>, index: Box<Expr> },
    Deref(Box<Expr>),
    Member { base: Box<Expr>, field: String },
    Assign { target: Box<Expr>, value: Box<Expr> },
    Call { name: String, args: Vec<Expr> },
}

/// Render a program as source text that reparses to the same tree
/// (spans aside).
pub fn pretty(program: &Program) -> String {
    let mut p = Printer::default();
    for item in &program.items {
        p.item(item);
    }
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn pad(&mut self) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
    }

    fn item(&mut self, item: &Item) {
        match item {
            Item::Const { name, value, .. } => {
                self.pad();
                self.out.push_str(&format!("const int {name} = "));
                self.expr(value, 0);
                self.out.push_str(";\n");
            }
            Item::Global { name, size, init, .. } => {
                self.pad();
                self.out.push_str(&format!("int {name}"));
                if let Some(size) = size {
                    self.out.push('[');
                    self.expr(size, 0);
                    self.out.push(']');
                    if !init.is_empty() {
                        self.out.push_str(" = ");
                        self.init_list(init);
                    }
                } else if let Some(InitItem::Positional(e)) = init.first() {
                    self.out.push_str(" = ");
                    self.expr(e, 0);
                }
                self.out.push_str(";\n");
            }
            Item::Function(f) => {
                self.pad();
                let params: Vec<String> =
                    f.params.iter().map(|(p, _)| format!("int {p}")).collect();
                self.out.push_str(&format!("int {}({}) ", f.name, params.join(", ")));
                self.block(&f.body);
                self.out.push('\n');
            }
        }
    }

    fn init_list(&mut self, items: &[InitItem]) {
        self.out.push('{');
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            match item {
                InitItem::Positional(e) => self.expr(e, 0),
                InitItem::Range { lo, hi, value } => {
                    self.out.push('[');
                    self.expr(lo, 0);
                    self.out.push_str(" ... ");
                    self.expr(hi, 0);
                    self.out.push_str("] = ");
                    self.expr(value, 0);
                }
            }
        }
        self.out.push('}');
    }

    fn block(&mut self, block: &Block) {
        self.out.push_str("{\n");
        self.indent += 1;
        for stmt in &block.stmts {
            self.stmt(stmt);
        }
        self.indent -= 1;
        self.pad();
        self.out.push('}');
    }

    fn stmt(&mut self, stmt: &Stmt) {
        self.pad();
        self.stmt_inline(stmt);
        self.out.push('\n');
    }

    /// Print a statement without the leading indent (already emitted).
    fn stmt_inline(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Decl(d) => self.decl(d),
            Stmt::Expr(e) => {
                self.expr(e, 0);
                self.out.push(';');
            }
            Stmt::Block(b) => self.block(b),
            Stmt::If { cond, then_branch, else_branch, .. } => {
                self.out.push_str("if (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.stmt_inline(then_branch);
                if let Some(e) = else_branch {
                    self.out.push_str(" else ");
                    self.stmt_inline(e);
                }
            }
            Stmt::While { cond, body, .. } => {
                self.out.push_str("while (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.stmt_inline(body);
            }
            Stmt::For { init, cond, update, body, .. } => {
                self.out.push_str("for (");
                match init.as_deref() {
                    Some(Stmt::Decl(d)) => self.decl(d),
                    Some(Stmt::Expr(e)) => {
                        self.expr(e, 0);
                        self.out.push(';');
                    }
                    _ => self.out.push(';'),
                }
                self.out.push(' ');
                if let Some(c) = cond {
                    self.expr(c, 0);
                }
                self.out.push_str("; ");
                if let Some(u) = update {
                    self.expr(u, 0);
                }
                self.out.push_str(") ");
                self.stmt_inline(body);
            }
            Stmt::Break(_) => self.out.push_str("break;"),
            Stmt::Continue(_) => self.out.push_str("continue;"),
            Stmt::Return { value, .. } => {
                self.out.push_str("return ");
                self.expr(value, 0);
                self.out.push(';');
            }
            Stmt::Empty => self.out.push(';'),
        }
    }

    fn decl(&mut self, decl: &Decl) {
        match decl {
            Decl::Const { name, value, .. } => {
                self.out.push_str(&format!("const int {name} = "));
                self.expr(value, 0);
                self.out.push(';');
            }
            Decl::Scalar { name, init, .. } => {
                self.out.push_str(&format!("int {name}"));
                if let Some(e) = init {
                    self.out.push_str(" = ");
                    self.expr(e, 0);
                }
                self.out.push(';');
            }
            Decl::Array { name, size, init, .. } => {
                self.out.push_str(&format!("int {name}["));
                self.expr(size, 0);
                self.out.push(']');
                if !init.is_empty() {
                    self.out.push_str(" = ");
                    self.init_list(init);
                }
                self.out.push(';');
            }
            Decl::Pointer { name, array, init, .. } => {
                self.out.push_str(&format!("int *{name}"));
                if let Some(array) = array {
                    self.out.push_str(&format!(" restrict {array}"));
                }
                if let Some(e) = init {
                    self.out.push_str(" = ");
                    self.expr(e, 0);
                }
                self.out.push(';');
            }
            Decl::Struct { name, fields, .. } => {
                let fields: Vec<String> =
                    fields.iter().map(|(f, _)| format!("int {f};")).collect();
                self.out.push_str(&format!("struct {{ {} }} {name};", fields.join(" ")));
            }
        }
    }

    fn expr(&mut self, expr: &Expr, min_prec: u8) {
        match &expr.kind {
            ExprKind::Int(n) => {
                let _ = write!(self.out, "{n}");
            }
            ExprKind::Var(v) => self.out.push_str(v),
            ExprKind::Unary { op, expr: inner } => {
                self.out.push_str(match op {
                    UnOp::Not => "!",
                    UnOp::Neg => "-",
                });
                // `-` followed by a leading `-` would re-lex as `--`.
                let leading_minus = matches!(&inner.kind, ExprKind::Int(n) if *n < 0)
                    || matches!(&inner.kind, ExprKind::Unary { op: UnOp::Neg, .. });
                if *op == UnOp::Neg && leading_minus {
                    self.out.push('(');
                    self.expr(inner, 0);
                    self.out.push(')');
                } else {
                    self.expr(inner, 8);
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let prec = op.precedence();
                let parens = prec < min_prec;
                if parens {
                    self.out.push('(');
                }
                self.expr(lhs, prec);
                let _ = write!(self.out, " {} ", op.symbol());
                // Left-associative: the right operand needs one level more.
                self.expr(rhs, prec + 1);
                if parens {
                    self.out.push(')');
                }
            }
            ExprKind::Index { base, index } => {
                self.expr(base, 9);
                self.out.push('[');
                self.expr(index, 0);
                self.out.push(']');
            }
            ExprKind::Deref(inner) => {
                self.out.push('*');
                self.expr(inner, 8);
            }
            ExprKind::Member { base, field } => {
                self.expr(base, 9);
                self.out.push('.');
                self.out.push_str(field);
            }
            ExprKind::Assign { target, value } => {
                let parens = min_prec > 0;
                if parens {
                    self.out.push('(');
                }
                self.expr(target, 8);
                self.out.push_str(" = ");
                self.expr(value, 0);
                if parens {
                    self.out.push(')');
                }
            }
            ExprKind::Call { name, args } => {
                self.out.push_str(name);
                self.out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(a, 0);
                }
                self.out.push(')');
            }
        }
    }
}
