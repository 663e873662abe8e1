//! Recursive-descent parser.

use super::ast::*;
use super::lexer::{Lexer, Span, Token, TokenKind};
use super::FrontendError;

/// Parse source text into an untyped syntax tree.
pub fn parse(text: &str) -> Result<Program, FrontendError> {
    let tokens = Lexer::new(text).tokenize()?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek().kind == *kind
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, FrontendError> {
        if self.at(&kind) {
            Ok(self.advance())
        } else {
            let found = self.peek();
            Err(FrontendError::syntax(
                found.span,
                format!("expected {}, found {}", kind.describe(), found.kind.describe()),
            ))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), FrontendError> {
        let tok = self.advance();
        match tok.kind {
            TokenKind::Ident(name) => Ok((name, tok.span)),
            other => Err(FrontendError::syntax(
                tok.span,
                format!("expected identifier, found {}", other.describe()),
            )),
        }
    }

    /// `int` and `char` are interchangeable type keywords.
    fn eat_type_keyword(&mut self) -> bool {
        self.eat(&TokenKind::KwInt) || self.eat(&TokenKind::KwChar)
    }

    fn at_type_keyword(&self) -> bool {
        matches!(self.peek().kind, TokenKind::KwInt | TokenKind::KwChar)
    }

    fn program(&mut self) -> Result<Program, FrontendError> {
        let mut items = Vec::new();
        while !self.at(&TokenKind::Eof) {
            items.push(self.item()?);
        }
        Ok(Program { items })
    }

    fn item(&mut self) -> Result<Item, FrontendError> {
        let span = self.peek().span;
        if self.eat(&TokenKind::KwConst) {
            if !self.eat_type_keyword() {
                return Err(FrontendError::syntax(self.peek().span, "expected `int` after `const`"));
            }
            let (name, _) = self.expect_ident()?;
            self.expect(TokenKind::Assign)?;
            let value = self.expr()?;
            self.expect(TokenKind::Semi)?;
            return Ok(Item::Const { name, value, span });
        }
        if !self.eat_type_keyword() {
            return Err(FrontendError::syntax(
                span,
                format!("expected a declaration, found {}", self.peek().kind.describe()),
            ));
        }
        let (name, _) = self.expect_ident()?;
        if self.at(&TokenKind::LParen) {
            return self.function(name, span).map(Item::Function);
        }
        // Global variable.
        if self.eat(&TokenKind::LBracket) {
            let size = self.expr()?;
            self.expect(TokenKind::RBracket)?;
            let init =
                if self.eat(&TokenKind::Assign) { self.init_list()? } else { Vec::new() };
            self.expect(TokenKind::Semi)?;
            return Ok(Item::Global { name, size: Some(size), init, span });
        }
        let init = if self.eat(&TokenKind::Assign) {
            vec![InitItem::Positional(self.expr()?)]
        } else {
            Vec::new()
        };
        self.expect(TokenKind::Semi)?;
        Ok(Item::Global { name, size: None, init, span })
    }

    fn function(&mut self, name: String, span: Span) -> Result<Function, FrontendError> {
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                let pspan = self.peek().span;
                if !self.eat_type_keyword() {
                    return Err(FrontendError::syntax(pspan, "expected `int` parameter type"));
                }
                let (pname, pspan) = self.expect_ident()?;
                params.push((pname, pspan));
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        let body = self.block()?;
        Ok(Function { name, params, body, span })
    }

    fn block(&mut self) -> Result<Block, FrontendError> {
        self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        while !self.at(&TokenKind::RBrace) {
            if self.at(&TokenKind::Eof) {
                return Err(FrontendError::syntax(self.peek().span, "unterminated block"));
            }
            stmts.push(self.stmt()?);
        }
        self.expect(TokenKind::RBrace)?;
        Ok(Block { stmts })
    }

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let span = self.peek().span;
        match &self.peek().kind {
            TokenKind::Semi => {
                self.advance();
                Ok(Stmt::Empty)
            }
            TokenKind::LBrace => Ok(Stmt::Block(self.block()?)),
            TokenKind::KwInt | TokenKind::KwChar | TokenKind::KwConst | TokenKind::KwStruct => {
                Ok(Stmt::Decl(self.decl()?))
            }
            TokenKind::KwIf => {
                self.advance();
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let then_branch = Box::new(self.stmt()?);
                let else_branch = if self.eat(&TokenKind::KwElse) {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                Ok(Stmt::If { cond, then_branch, else_branch, span })
            }
            TokenKind::KwWhile => {
                self.advance();
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let body = Box::new(self.stmt()?);
                Ok(Stmt::While { cond, body, span })
            }
            TokenKind::KwFor => {
                self.advance();
                self.expect(TokenKind::LParen)?;
                let init = if self.eat(&TokenKind::Semi) {
                    None
                } else if self.at_type_keyword() {
                    let d = self.decl()?;
                    match &d {
                        Decl::Scalar { .. } => {}
                        _ => {
                            return Err(FrontendError::syntax(
                                span,
                                "only scalar declarations are allowed in a for-initializer",
                            ))
                        }
                    }
                    Some(Box::new(Stmt::Decl(d)))
                } else {
                    let e = self.expr()?;
                    self.expect(TokenKind::Semi)?;
                    Some(Box::new(Stmt::Expr(e)))
                };
                let cond = if self.at(&TokenKind::Semi) { None } else { Some(self.expr()?) };
                self.expect(TokenKind::Semi)?;
                let update =
                    if self.at(&TokenKind::RParen) { None } else { Some(self.expr()?) };
                self.expect(TokenKind::RParen)?;
                let body = Box::new(self.stmt()?);
                Ok(Stmt::For { init, cond, update, body, span })
            }
            TokenKind::KwBreak => {
                self.advance();
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Break(span))
            }
            TokenKind::KwContinue => {
                self.advance();
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Continue(span))
            }
            TokenKind::KwReturn => {
                self.advance();
                let value = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Return { value, span })
            }
            _ => {
                let e = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    /// A local declaration; the leading keyword has not been consumed.
    fn decl(&mut self) -> Result<Decl, FrontendError> {
        let span = self.peek().span;
        if self.eat(&TokenKind::KwConst) {
            if !self.eat_type_keyword() {
                return Err(FrontendError::syntax(self.peek().span, "expected `int` after `const`"));
            }
            let (name, _) = self.expect_ident()?;
            self.expect(TokenKind::Assign)?;
            let value = self.expr()?;
            self.expect(TokenKind::Semi)?;
            return Ok(Decl::Const { name, value, span });
        }
        if self.eat(&TokenKind::KwStruct) {
            self.expect(TokenKind::LBrace)?;
            let mut fields = Vec::new();
            while !self.eat(&TokenKind::RBrace) {
                let fspan = self.peek().span;
                if !self.eat_type_keyword() {
                    return Err(FrontendError::syntax(fspan, "expected `int` field"));
                }
                let (fname, fspan) = self.expect_ident()?;
                self.expect(TokenKind::Semi)?;
                fields.push((fname, fspan));
            }
            let (name, _) = self.expect_ident()?;
            self.expect(TokenKind::Semi)?;
            return Ok(Decl::Struct { name, fields, span });
        }
        // int ...
        self.eat_type_keyword();
        if self.eat(&TokenKind::Star) {
            let (name, _) = self.expect_ident()?;
            let array = if self.eat(&TokenKind::KwRestrict) {
                Some(self.expect_ident()?.0)
            } else {
                None
            };
            let init =
                if self.eat(&TokenKind::Assign) { Some(self.expr()?) } else { None };
            self.expect(TokenKind::Semi)?;
            return Ok(Decl::Pointer { name, array, init, span });
        }
        let (name, _) = self.expect_ident()?;
        if self.eat(&TokenKind::LBracket) {
            let size = self.expr()?;
            self.expect(TokenKind::RBracket)?;
            let init =
                if self.eat(&TokenKind::Assign) { self.init_list()? } else { Vec::new() };
            self.expect(TokenKind::Semi)?;
            return Ok(Decl::Array { name, size, init, span });
        }
        let init = if self.eat(&TokenKind::Assign) { Some(self.expr()?) } else { None };
        self.expect(TokenKind::Semi)?;
        Ok(Decl::Scalar { name, init, span })
    }

    fn init_list(&mut self) -> Result<Vec<InitItem>, FrontendError> {
        self.expect(TokenKind::LBrace)?;
        let mut items = Vec::new();
        loop {
            if self.at(&TokenKind::RBrace) {
                break;
            }
            if self.eat(&TokenKind::LBracket) {
                let lo = self.expr()?;
                self.expect(TokenKind::Ellipsis)?;
                let hi = self.expr()?;
                self.expect(TokenKind::RBracket)?;
                self.expect(TokenKind::Assign)?;
                let value = self.expr()?;
                items.push(InitItem::Range { lo, hi, value });
            } else {
                items.push(InitItem::Positional(self.expr()?));
            }
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        self.expect(TokenKind::RBrace)?;
        Ok(items)
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.assignment()
    }

    fn assignment(&mut self) -> Result<Expr, FrontendError> {
        let lhs = self.binary(0)?;
        if self.at(&TokenKind::Assign) {
            let span = self.advance().span;
            let value = self.assignment()?;
            return Ok(Expr {
                kind: ExprKind::Assign { target: Box::new(lhs), value: Box::new(value) },
                span,
            });
        }
        Ok(lhs)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match &self.peek().kind {
                TokenKind::OrOr => BinOp::Or,
                TokenKind::AndAnd => BinOp::And,
                TokenKind::EqEq => BinOp::Eq,
                TokenKind::NotEq => BinOp::Ne,
                TokenKind::Lt => BinOp::Lt,
                TokenKind::Le => BinOp::Le,
                TokenKind::Gt => BinOp::Gt,
                TokenKind::Ge => BinOp::Ge,
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                TokenKind::Percent => BinOp::Mod,
                _ => break,
            };
            let prec = match op {
                BinOp::Or => 1,
                BinOp::And => 2,
                BinOp::Eq | BinOp::Ne => 3,
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
                BinOp::Add | BinOp::Sub => 5,
                BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
            };
            if prec < min_prec {
                break;
            }
            let span = self.advance().span;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        let span = self.peek().span;
        match &self.peek().kind {
            TokenKind::Bang => {
                self.advance();
                let inner = self.unary()?;
                Ok(Expr { kind: ExprKind::Unary { op: UnOp::Not, expr: Box::new(inner) }, span })
            }
            TokenKind::Minus => {
                self.advance();
                let inner = self.unary()?;
                // Fold negated literals so `-5` is a literal, not an operation.
                if let ExprKind::Int(n) = inner.kind {
                    return Ok(Expr { kind: ExprKind::Int(n.wrapping_neg()), span });
                }
                Ok(Expr { kind: ExprKind::Unary { op: UnOp::Neg, expr: Box::new(inner) }, span })
            }
            TokenKind::Star => {
                self.advance();
                let inner = self.unary()?;
                Ok(Expr { kind: ExprKind::Deref(Box::new(inner)), span })
            }
            TokenKind::PlusPlus | TokenKind::MinusMinus => {
                // Prefix increment/decrement desugars to an assignment.
                let op = if self.advance().kind == TokenKind::PlusPlus {
                    BinOp::Add
                } else {
                    BinOp::Sub
                };
                let target = self.unary()?;
                let one = Expr { kind: ExprKind::Int(1), span };
                let bumped = Expr {
                    kind: ExprKind::Binary {
                        op,
                        lhs: Box::new(target.clone()),
                        rhs: Box::new(one),
                    },
                    span,
                };
                Ok(Expr {
                    kind: ExprKind::Assign { target: Box::new(target), value: Box::new(bumped) },
                    span,
                })
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.primary()?;
        loop {
            let span = self.peek().span;
            if self.eat(&TokenKind::LBracket) {
                let index = self.expr()?;
                self.expect(TokenKind::RBracket)?;
                e = Expr {
                    kind: ExprKind::Index { base: Box::new(e), index: Box::new(index) },
                    span,
                };
            } else if self.eat(&TokenKind::Dot) {
                let (field, _) = self.expect_ident()?;
                e = Expr { kind: ExprKind::Member { base: Box::new(e), field }, span };
            } else if self.at(&TokenKind::LParen) {
                let name = match e.kind {
                    ExprKind::Var(name) => name,
                    _ => {
                        return Err(FrontendError::syntax(
                            span,
                            "only named functions can be called",
                        ))
                    }
                };
                self.advance();
                let mut args = Vec::new();
                if !self.at(&TokenKind::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::RParen)?;
                e = Expr { kind: ExprKind::Call { name, args }, span: e.span };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let tok = self.advance();
        match tok.kind {
            TokenKind::Int(n) => Ok(Expr { kind: ExprKind::Int(n), span: tok.span }),
            TokenKind::Ident(name) => Ok(Expr { kind: ExprKind::Var(name), span: tok.span }),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            other => Err(FrontendError::syntax(
                tok.span,
                format!("expected an expression, found {}", other.describe()),
            )),
        }
    }
}
