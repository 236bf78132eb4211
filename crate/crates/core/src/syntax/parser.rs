//! Recursive-descent parser for SmartML source text.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "datatype",
    "constructor",
    "contract",
    "extends",
    "function",
    "if",
    "else",
    "while",
    "let",
    "in",
    "assert",
    "return",
    "throw",
    "try",
    "abort",
    "success",
    "new",
    "super",
    "this",
    "sender",
    "true",
    "false",
    "switch",
    "case",
    "default",
    "irrelevant",
    "skip",
    "int",
    "bool",
    "string",
    "address",
    "void",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

const TYPE_KEYWORDS: &[&str] = &["int", "bool", "string", "address", "void"];

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    p.program()
}

/// Parses a single statement sequence, as found inside a method body.
pub fn parse_statements(src: &str) -> Result<Stmt, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let s = p.stmt_list(&Tok::Eof)?;
    p.expect(&Tok::Eof)?;
    Ok(s)
}

/// Parses a single expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    p.expect(&Tok::Eof)?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            let sym = format!("`{}`", t.symbol());
            Err(self.error(&[&sym]))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            let s = format!("`{kw}`");
            Err(self.error(&[&s]))
        }
    }

    fn is_ident_at(&self, n: usize) -> bool {
        matches!(self.peek_at(n), Tok::Ident(s) if !is_keyword(s))
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    /// True when a type starts at offset `n`.
    fn type_starts_at(&self, n: usize) -> bool {
        match self.peek_at(n) {
            Tok::Ident(s) => TYPE_KEYWORDS.contains(&s.as_str()) || !is_keyword(s),
            _ => false,
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        let t = match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "int" => Type::Int,
                "bool" => Type::Bool,
                "string" => Type::String,
                "address" => Type::Address,
                "void" => Type::Unit,
                other if !is_keyword(other) => Type::Named(s),
                _ => return Err(self.error(&["type"])),
            },
            _ => return Err(self.error(&["type"])),
        };
        self.bump();
        Ok(t)
    }

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        loop {
            if self.is_kw("datatype") {
                prog.adts.push(self.adt()?);
            } else if self.is_kw("contract") {
                prog.contracts.push(self.contract()?);
            } else if self.peek() == &Tok::Eof {
                return Ok(prog);
            } else {
                return Err(self.error(&["`datatype`", "`contract`", "end of input"]));
            }
        }
    }

    // ---- datatypes ----

    fn adt(&mut self) -> PResult<AdtDecl> {
        self.expect_kw("datatype")?;
        let name = self.ident()?;
        self.expect(&Tok::LBrace)?;
        self.expect_kw("constructor")?;
        self.expect(&Tok::LBrace)?;
        let mut constructors = vec![self.adt_ctor()?];
        while self.eat(&Tok::Pipe) {
            constructors.push(self.adt_ctor()?);
        }
        self.expect(&Tok::RBrace)?;
        self.eat(&Tok::Semi);
        let mut functions = Vec::new();
        while !self.eat(&Tok::RBrace) {
            functions.push(self.adt_function()?);
        }
        Ok(AdtDecl {
            name,
            constructors,
            functions,
        })
    }

    fn adt_ctor(&mut self) -> PResult<AdtCtor> {
        let name = self.ident()?;
        let params = if self.peek() == &Tok::LParen {
            self.params()?
        } else {
            Vec::new()
        };
        Ok(AdtCtor { name, params })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect(&Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            let ty = self.ty()?;
            let name = self.ident()?;
            out.push(Param { name, ty });
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            if !self.eat(&Tok::Comma) {
                return Err(self.error(&["`,`", "`)`"]));
            }
        }
    }

    fn adt_function(&mut self) -> PResult<AdtFunction> {
        let ret = self.ty()?;
        let name = self.ident()?;
        let params = self.params()?;
        self.expect(&Tok::LBrace)?;
        let body = self.adt_body()?;
        self.expect(&Tok::RBrace)?;
        Ok(AdtFunction {
            name,
            params,
            ret,
            body,
        })
    }

    fn adt_block(&mut self) -> PResult<AdtBody> {
        self.expect(&Tok::LBrace)?;
        let b = self.adt_body()?;
        self.expect(&Tok::RBrace)?;
        Ok(b)
    }

    fn adt_body(&mut self) -> PResult<AdtBody> {
        if self.eat_kw("if") {
            self.expect(&Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(&Tok::RParen)?;
            let then = self.adt_block()?;
            self.expect_kw("else")?;
            let els = self.adt_block()?;
            return Ok(AdtBody::If {
                cond,
                then: Box::new(then),
                els: Box::new(els),
            });
        }
        if self.eat_kw("return") {
            let e = self.expr()?;
            self.expect(&Tok::Semi)?;
            return Ok(AdtBody::Return(e));
        }
        if self.eat_kw("switch") {
            self.expect(&Tok::LParen)?;
            let scrutinee = self.expr()?;
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::LBrace)?;
            let mut cases = Vec::new();
            let mut default = None;
            loop {
                if self.eat_kw("case") {
                    let pat = self.pattern()?;
                    self.expect(&Tok::Colon)?;
                    let body = self.adt_body()?;
                    cases.push((pat, body));
                } else if self.eat_kw("default") {
                    self.expect(&Tok::Colon)?;
                    default = Some(Box::new(self.adt_body()?));
                    self.expect(&Tok::RBrace)?;
                    break;
                } else if self.eat(&Tok::RBrace) {
                    break;
                } else {
                    return Err(self.error(&["`case`", "`default`", "`}`"]));
                }
            }
            return Ok(AdtBody::Switch {
                scrutinee,
                cases,
                default,
            });
        }
        if self.type_starts_at(0) && self.is_ident_at(1) && matches!(self.peek_at(2), Tok::Assign | Tok::ColonEq) {
            let ty = self.ty()?;
            let name = self.ident()?;
            self.bump();
            let value = self.expr()?;
            self.expect(&Tok::Semi)?;
            let body = self.adt_body()?;
            return Ok(AdtBody::Let {
                ty,
                name,
                value,
                body: Box::new(body),
            });
        }
        if self.is_ident_at(0) && self.peek_at(1) == &Tok::LParen {
            let name = self.ident()?;
            let args = self.args()?;
            self.expect(&Tok::Semi)?;
            return Ok(AdtBody::Invoke { name, args });
        }
        Err(self.error(&["`if`", "`return`", "`switch`", "declaration", "function call"]))
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => Ok(Pattern::Int(-n)),
                    _ => Err(self.error(&["integer"])),
                }
            }
            Tok::Int(n) => {
                self.bump();
                Ok(Pattern::Int(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Pattern::Str(s))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Pattern::Bool(s == "true"))
            }
            _ => {
                let name = self.ident()?;
                let mut binders = Vec::new();
                if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
                    loop {
                        binders.push(self.ident()?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(&Tok::Comma)?;
                    }
                }
                Ok(Pattern::Ctor { name, binders })
            }
        }
    }

    // ---- contracts ----

    fn contract(&mut self) -> PResult<ContractDecl> {
        self.expect_kw("contract")?;
        let name = self.ident()?;
        let parent = if self.eat_kw("extends") {
            Some(self.ident()?)
        } else {
            None
        };
        self.expect(&Tok::LBrace)?;
        let mut c = ContractDecl {
            name,
            parent,
            fields: Vec::new(),
            constructor: None,
            methods: Vec::new(),
        };
        while !self.eat(&Tok::RBrace) {
            if self.is_kw("constructor") {
                if c.constructor.is_some() {
                    return Err(self.error(&["a single constructor"]));
                }
                c.constructor = Some(self.constructor()?);
            } else if self.eat_kw("irrelevant") {
                let ty = self.ty()?;
                let name = self.ident()?;
                self.expect(&Tok::Semi)?;
                c.fields.push(FieldDecl {
                    name,
                    ty,
                    irrelevant: true,
                });
            } else if self.is_kw("function")
                || (self.type_starts_at(0)
                    && (self.is_kw_at(1, "function") || (self.is_ident_at(1) && self.peek_at(2) == &Tok::LParen)))
            {
                c.methods.push(self.method()?);
            } else if self.type_starts_at(0) && self.is_ident_at(1) {
                let ty = self.ty()?;
                let name = self.ident()?;
                self.expect(&Tok::Semi)?;
                c.fields.push(FieldDecl {
                    name,
                    ty,
                    irrelevant: false,
                });
            } else {
                return Err(self.error(&["field", "`constructor`", "method", "`}`"]));
            }
        }
        Ok(c)
    }

    fn constructor(&mut self) -> PResult<ConstructorDecl> {
        self.expect_kw("constructor")?;
        let params = self.params()?;
        self.expect(&Tok::LBrace)?;
        let mut super_args = None;
        if self.eat_kw("super") {
            super_args = Some(self.args()?);
            self.expect(&Tok::Semi)?;
        }
        let mut inits = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.eat_kw("this") {
                self.expect(&Tok::Dot)?;
            }
            let f = self.ident()?;
            if !self.eat(&Tok::Assign) && !self.eat(&Tok::ColonEq) {
                return Err(self.error(&["`=`"]));
            }
            let rhs = self.rhs(false)?;
            if !self.eat(&Tok::Semi) && self.peek() != &Tok::RBrace {
                return Err(self.error(&["`;`"]));
            }
            inits.push((f, rhs));
        }
        Ok(ConstructorDecl {
            params,
            super_args,
            inits,
        })
    }

    fn method(&mut self) -> PResult<MethodDecl> {
        let ret = if self.eat_kw("function") {
            Type::Unit
        } else {
            let t = self.ty()?;
            self.eat_kw("function");
            t
        };
        let name = self.ident()?;
        let params = self.params()?;
        let body = self.block()?;
        Ok(MethodDecl {
            name,
            params,
            ret,
            body,
        })
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Stmt> {
        self.expect(&Tok::LBrace)?;
        let s = self.stmt_list(&Tok::RBrace)?;
        self.expect(&Tok::RBrace)?;
        Ok(s)
    }

    fn stmt_list(&mut self, end: &Tok) -> PResult<Stmt> {
        let mut stmts = Vec::new();
        while self.peek() != end {
            if self.is_declaration() {
                let ty = self.ty()?;
                let var = self.ident()?;
                self.bump();
                let rhs = self.rhs(true)?;
                self.end_simple(end)?;
                let body = self.stmt_list(end)?;
                stmts.push(Stmt::Let {
                    var,
                    ty: Some(ty),
                    rhs,
                    body: Box::new(body),
                });
                break;
            }
            stmts.push(self.stmt(end)?);
        }
        Ok(Stmt::seq(stmts))
    }

    fn is_declaration(&self) -> bool {
        self.type_starts_at(0) && self.is_ident_at(1) && matches!(self.peek_at(2), Tok::Assign | Tok::ColonEq)
    }

    /// Consumes the `;` ending a simple statement; optional before `end`.
    fn end_simple(&mut self, end: &Tok) -> PResult<()> {
        if self.eat(&Tok::Semi) || self.peek() == end {
            Ok(())
        } else {
            Err(self.error(&["`;`"]))
        }
    }

    fn stmt(&mut self, end: &Tok) -> PResult<Stmt> {
        if self.eat_kw("if") {
            self.expect(&Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(&Tok::RParen)?;
            let then = self.block()?;
            let els = if self.eat_kw("else") {
                if self.is_kw("if") {
                    Some(Box::new(self.stmt(end)?))
                } else {
                    Some(Box::new(self.block()?))
                }
            } else {
                None
            };
            self.eat(&Tok::Semi);
            return Ok(Stmt::If {
                cond,
                then: Box::new(then),
                els,
            });
        }
        if self.eat_kw("while") {
            self.expect(&Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(&Tok::RParen)?;
            let body = self.block()?;
            self.eat(&Tok::Semi);
            return Ok(Stmt::While {
                cond,
                body: Box::new(body),
            });
        }
        if self.eat_kw("let") {
            let ty = if self.type_starts_at(0) && self.is_ident_at(1) {
                Some(self.ty()?)
            } else {
                None
            };
            let var = self.ident()?;
            if !self.eat(&Tok::ColonEq) && !self.eat(&Tok::Assign) {
                return Err(self.error(&["`:=`"]));
            }
            let rhs = self.rhs(true)?;
            self.expect_kw("in")?;
            let body = if self.peek() == &Tok::LBrace {
                self.block()?
            } else {
                self.stmt(end)?
            };
            self.eat(&Tok::Semi);
            return Ok(Stmt::Let {
                var,
                ty,
                rhs,
                body: Box::new(body),
            });
        }
        if self.eat_kw("assert") {
            self.expect(&Tok::LParen)?;
            let e = self.expr()?;
            self.expect(&Tok::RParen)?;
            self.end_simple(end)?;
            return Ok(Stmt::Assert(e));
        }
        if self.eat_kw("return") {
            let e = if self.peek() == &Tok::Semi || self.peek() == end {
                None
            } else {
                Some(self.expr()?)
            };
            self.end_simple(end)?;
            return Ok(Stmt::Return(e));
        }
        if self.eat_kw("throw") {
            let e = self.expr()?;
            self.end_simple(end)?;
            return Ok(Stmt::Throw(e));
        }
        if self.eat_kw("skip") {
            self.end_simple(end)?;
            return Ok(Stmt::Skip);
        }
        if self.eat_kw("try") {
            let target = if self.lvalue_assign_ahead() {
                let lv = self.lvalue()?;
                self.bump();
                Some(lv)
            } else {
                None
            };
            let call = match self.invocation()? {
                Some(c) => c,
                None => return Err(self.error(&["method invocation"])),
            };
            self.eat(&Tok::Semi);
            self.expect_kw("abort")?;
            let abort_var = if self.eat(&Tok::LParen) {
                let v = self.ident()?;
                self.expect(&Tok::RParen)?;
                Some(v)
            } else {
                None
            };
            let abort = self.block()?;
            self.expect_kw("success")?;
            let success = self.block()?;
            self.eat(&Tok::Semi);
            return Ok(Stmt::Try {
                target,
                call,
                abort_var,
                abort: Box::new(abort),
                success: Box::new(success),
            });
        }
        if self.peek() == &Tok::LBrace {
            let b = self.block()?;
            self.eat(&Tok::Semi);
            return Ok(b);
        }
        if self.lvalue_assign_ahead() {
            let target = self.lvalue()?;
            self.bump();
            let rhs = self.rhs(true)?;
            self.end_simple(end)?;
            return Ok(match rhs {
                Rhs::Invoke(call) => Stmt::CallAssign { target, call },
                rhs => Stmt::Assign { target, rhs },
            });
        }
        if let Some(call) = self.invocation()? {
            self.end_simple(end)?;
            return Ok(Stmt::Call(call));
        }
        Err(self.error(&["statement"]))
    }

    fn lvalue_assign_ahead(&self) -> bool {
        let assign = |t: &Tok| matches!(t, Tok::Assign | Tok::ColonEq);
        (self.is_ident_at(0) && assign(self.peek_at(1)))
            || (self.is_kw("this") && self.peek_at(1) == &Tok::Dot && self.is_ident_at(2) && assign(self.peek_at(3)))
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        if self.eat_kw("this") {
            self.expect(&Tok::Dot)?;
            Ok(LValue::Field(self.ident()?))
        } else {
            Ok(LValue::Var(self.ident()?))
        }
    }

    /// Tries `receiver[$value].method(args)`; restores the position and
    /// returns `None` if the tokens do not form an invocation.
    fn invocation(&mut self) -> PResult<Option<Invocation>> {
        let start = self.pos;
        let receiver = if self.eat_kw("this") {
            if self.peek() == &Tok::Dot && self.is_ident_at(1) && matches!(self.peek_at(2), Tok::Dot | Tok::Dollar) {
                self.bump();
                Receiver::Field(self.ident()?)
            } else {
                Receiver::This
            }
        } else if self.eat_kw("sender") {
            Receiver::Sender
        } else if self.is_ident_at(0) {
            Receiver::Var(self.ident()?)
        } else {
            return Ok(None);
        };
        let value = if self.eat(&Tok::Dollar) {
            Some(self.value_atom()?)
        } else {
            None
        };
        if !(self.peek() == &Tok::Dot && self.is_ident_at(1) && self.peek_at(2) == &Tok::LParen) {
            if value.is_some() {
                return Err(self.error(&["`.method(...)`"]));
            }
            self.pos = start;
            return Ok(None);
        }
        self.bump();
        let method = self.ident()?;
        let args = self.args()?;
        Ok(Some(Invocation {
            receiver,
            value,
            method,
            args,
        }))
    }

    fn value_atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Amount => {
                self.bump();
                Ok(Expr::Amount)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "this" => {
                self.bump();
                self.expect(&Tok::Dot)?;
                Ok(Expr::Field(self.ident()?))
            }
            Tok::Ident(s) if s == "sender" => {
                self.bump();
                Ok(Expr::Sender)
            }
            _ => Ok(Expr::Var(self.ident()?)),
        }
    }

    fn rhs(&mut self, allow_invoke: bool) -> PResult<Rhs> {
        if self.eat_kw("new") {
            let contract = self.ident()?;
            let args = self.args()?;
            return Ok(Rhs::New { contract, args });
        }
        if allow_invoke {
            let start = self.pos;
            if let Some(call) = self.invocation()? {
                if matches!(self.peek(), Tok::Semi | Tok::RBrace | Tok::Eof) || self.is_kw("in") {
                    return Ok(Rhs::Invoke(call));
                }
                self.pos = start;
            }
        }
        Ok(Rhs::Expr(self.expr()?))
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(&Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            if !self.eat(&Tok::Comma) {
                return Err(self.error(&["`,`", "`)`"]));
            }
        }
    }

    // ---- expressions ----
    // Precedence, loosest first: `||`, `&&`, comparisons, `+ -`, `* /`, unary `!`.

    pub fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::Cmp(CmpOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp_expr()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.cmp_expr()?;
            lhs = Expr::Cmp(CmpOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq | Tok::Assign => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            Tok::Le => CmpOp::Le,
            Tok::Ge => CmpOp::Ge,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Bang) {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.peek() == &Tok::Minus {
            if let Tok::Int(n) = self.peek_at(1).clone() {
                self.bump();
                self.bump();
                return Ok(Expr::Int(-n));
            }
            self.bump();
            return Err(self.error(&["integer literal"]));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.peek() == &Tok::Dot {
            self.bump();
            let name = self.ident()?;
            if self.peek() == &Tok::LParen {
                let args = self.args()?;
                e = Expr::Invoke {
                    receiver: Box::new(e),
                    name,
                    args,
                };
            } else {
                e = Expr::Proj(Box::new(e), name);
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Amount => {
                self.bump();
                Ok(Expr::Amount)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::Bool(s == "true"))
                }
                "sender" => {
                    self.bump();
                    Ok(Expr::Sender)
                }
                "this" => {
                    self.bump();
                    if self.peek() == &Tok::Dot && self.is_ident_at(1) && self.peek_at(2) != &Tok::LParen {
                        self.bump();
                        Ok(Expr::Field(self.ident()?))
                    } else {
                        Ok(Expr::This)
                    }
                }
                _ => {
                    let name = self.ident()?;
                    if self.peek() == &Tok::LParen {
                        let args = self.args()?;
                        Ok(Expr::Apply { name, args })
                    } else {
                        Ok(Expr::Var(name))
                    }
                }
            },
            _ => Err(self.error(&["expression"])),
        }
    }
}
