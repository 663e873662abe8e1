//! Front end for the mini-C source language: lexer, parser, type checker,
//! and stack-frame layout.
//!
//! The language is a small C subset: a single word-sized `int` scalar type,
//! fixed- and parameter-sized local arrays, anonymous two-or-more field
//! structs, and pointers that must be declared with a `restrict` binding
//! naming the array they point into (`int *p restrict a;`). Pointers move
//! only by whole-array arithmetic (`p = a + e;`) and are read or written
//! through `*p`.
//!
//! Diagnostics carry `line:col` positions; the caller prefixes the file
//! name.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod typecheck;

#[cfg(test)]
mod tests;

pub use ast::{BinOp, Block, Decl, Expr, ExprKind, Function, InitItem, Item, Program, Stmt, UnOp};
pub use lexer::{Lexer, Span, Token, TokenKind};
pub use parser::parse;
pub use typecheck::{
    typecheck, ArithOp, ArrayLen, ArrayPlace, ArrayRef, CmpOp, FrameLayout, GlobalDef, LValue,
    PtrBase, TBlock, TExpr, TExprKind, TFunction, TInitItem, TProgram, TStmt, GLOBAL_BASE,
};

/// Maximum words reserved for an array whose size is a runtime parameter.
pub const DYNAMIC_ARRAY_CAP: u32 = 64;

/// Maximum number of function parameters (one per argument register).
pub const MAX_PARAMS: usize = 4;

/// A diagnostic from any front-end stage.
#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum FrontendError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("{line}:{col}: type error: {msg}")]
    Type { line: u32, col: u32, msg: String },
    #[error("{line}:{col}: layout error: {msg}")]
    Layout { line: u32, col: u32, msg: String },
}

impl FrontendError {
    pub fn syntax(span: Span, msg: impl Into<String>) -> Self {
        FrontendError::Syntax { line: span.line, col: span.col, msg: msg.into() }
    }

    pub fn type_error(span: Span, msg: impl Into<String>) -> Self {
        FrontendError::Type { line: span.line, col: span.col, msg: msg.into() }
    }

    pub fn layout(span: Span, msg: impl Into<String>) -> Self {
        FrontendError::Layout { line: span.line, col: span.col, msg: msg.into() }
    }
}

/// Parse and type-check in one step.
pub fn check_source(text: &str) -> Result<TProgram, FrontendError> {
    typecheck(&parse(text)?)
}
