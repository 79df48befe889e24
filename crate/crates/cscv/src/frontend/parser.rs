//! Recursive-descent parser and post-parse validation for contracts and
//! properties.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::lexer::{Pos, Tok, Token};
use super::FrontendError;

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn here(&self) -> Pos {
        self.tokens[self.pos].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: impl Into<String>) -> FrontendError {
        let pos = self.here();
        FrontendError::Syntax {
            line: pos.line,
            col: pos.col,
            expected: format!("{}, found {}", expected.into(), self.peek().describe()),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FrontendError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), FrontendError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.advance();
                Ok(())
            }
            _ => Err(self.err(format!("`{kw}`"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn parse_ident(&mut self, what: &str) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.err(what)),
        }
    }

    // ---- contracts ----

    pub fn parse_contract(&mut self) -> Result<ContractAST, FrontendError> {
        let mut wrap256 = false;
        if self.at_keyword("pragma") {
            self.advance();
            self.expect_keyword("wrap256")?;
            self.expect(Tok::Semi, "`;`")?;
            wrap256 = true;
        }
        self.expect_keyword("contract")?;
        let name = self.parse_ident("contract name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut state_vars = Vec::new();
        while self.at_keyword("state") {
            state_vars.push(self.parse_state_decl()?);
        }
        let mut functions = Vec::new();
        while self.at_keyword("external") || self.at_keyword("view") {
            functions.push(self.parse_fun_decl()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        self.expect(Tok::Eof, "end of input")?;
        Ok(ContractAST { name, wrap256, state_vars, functions })
    }

    fn parse_state_decl(&mut self) -> Result<StateVar, FrontendError> {
        self.expect_keyword("state")?;
        let name = self.parse_ident("state variable name")?;
        self.expect(Tok::Colon, "`:`")?;
        let ty = self.parse_type()?;
        let init = if *self.peek() == Tok::Assign {
            self.advance();
            Some(self.parse_literal()?)
        } else {
            None
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(StateVar { name, ty, init })
    }

    fn parse_type(&mut self) -> Result<VarType, FrontendError> {
        if self.at_keyword("int") {
            self.advance();
            Ok(VarType::Int)
        } else if self.at_keyword("bool") {
            self.advance();
            Ok(VarType::Bool)
        } else if self.at_keyword("address") {
            self.advance();
            Ok(VarType::Address)
        } else if self.at_keyword("map") {
            self.advance();
            self.expect(Tok::Lt, "`<`")?;
            self.expect_keyword("address")?;
            self.expect(Tok::Comma, "`,`")?;
            self.expect_keyword("int")?;
            self.expect(Tok::Gt, "`>`")?;
            Ok(VarType::MapAddrInt)
        } else {
            Err(self.err("a type (`int`, `bool`, `address`, or `map<address, int>`)"))
        }
    }

    fn parse_literal(&mut self) -> Result<Literal, FrontendError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Literal::Int(v))
            }
            Tok::Minus => {
                self.advance();
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.advance();
                        Ok(Literal::Int(-v))
                    }
                    _ => Err(self.err("integer literal after `-`")),
                }
            }
            Tok::Addr(a) => {
                self.advance();
                Ok(Literal::Addr(a))
            }
            Tok::Ident(s) if s == "true" => {
                self.advance();
                Ok(Literal::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.advance();
                Ok(Literal::Bool(false))
            }
            _ => Err(self.err("a literal")),
        }
    }

    fn parse_fun_decl(&mut self) -> Result<FunctionDecl, FrontendError> {
        let kind = if self.at_keyword("external") {
            self.advance();
            FnKind::External
        } else {
            self.expect_keyword("view")?;
            FnKind::View
        };
        self.expect_keyword("fn")?;
        let name = self.parse_ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let pname = self.parse_ident("parameter name")?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.parse_type()?;
                params.push(Param { name: pname, ty });
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let ret = if *self.peek() == Tok::Arrow {
            self.advance();
            Some(self.parse_type()?)
        } else {
            None
        };
        let body = self.parse_block()?;
        Ok(FunctionDecl { name, kind, params, ret, body })
    }

    fn parse_block(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            stmts.push(self.parse_stmt()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(stmts)
    }

    fn parse_stmt(&mut self) -> Result<Stmt, FrontendError> {
        if self.at_keyword("require") {
            self.advance();
            self.expect(Tok::LParen, "`(`")?;
            let cond = self.parse_expr()?;
            self.expect(Tok::RParen, "`)`")?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Stmt::Require(cond));
        }
        if self.at_keyword("call") {
            self.advance();
            let target = self.parse_expr()?;
            let amount = self.parse_expr()?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Stmt::Call { target, amount });
        }
        if self.at_keyword("if") {
            self.advance();
            self.expect(Tok::LParen, "`(`")?;
            let cond = self.parse_expr()?;
            self.expect(Tok::RParen, "`)`")?;
            let then_body = self.parse_block()?;
            let else_body = if self.at_keyword("else") {
                self.advance();
                self.parse_block()?
            } else {
                Vec::new()
            };
            return Ok(Stmt::If { cond, then_body, else_body });
        }
        if self.at_keyword("return") {
            self.advance();
            if *self.peek() == Tok::Semi {
                self.advance();
                return Ok(Stmt::Return(None));
            }
            let value = self.parse_expr()?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Stmt::Return(Some(value)));
        }
        // Assignment: `lvalue = expr;`
        let name = self.parse_ident("a statement")?;
        let target = if *self.peek() == Tok::LBracket {
            self.advance();
            let key = self.parse_expr()?;
            self.expect(Tok::RBracket, "`]`")?;
            LValue::MapEntry { map: name, key }
        } else {
            LValue::Var(name)
        };
        self.expect(Tok::Assign, "`=`")?;
        let value = self.parse_expr()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Stmt::Assign { target, value })
    }

    // ---- expressions (precedence climbing) ----

    fn parse_expr(&mut self) -> Result<Expr, FrontendError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.parse_and()?;
        while *self.peek() == Tok::OrOr {
            self.advance();
            let rhs = self.parse_and()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.parse_cmp()?;
        while *self.peek() == Tok::AndAnd {
            self.advance();
            let rhs = self.parse_cmp()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_cmp(&mut self) -> Result<Expr, FrontendError> {
        let lhs = self.parse_add()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.parse_add()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn parse_add(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_mul()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek() {
            Tok::Minus => {
                self.advance();
                let inner = self.parse_unary()?;
                Ok(Expr::Unary(UnOp::Neg, Box::new(inner)))
            }
            Tok::Bang => {
                self.advance();
                let inner = self.parse_unary()?;
                Ok(Expr::Unary(UnOp::Not, Box::new(inner)))
            }
            _ => self.parse_primary(),
        }
    }

    fn parse_primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Lit(Literal::Int(v)))
            }
            Tok::Addr(a) => {
                self.advance();
                Ok(Expr::Lit(Literal::Addr(a)))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if name == "true" {
                    self.advance();
                    return Ok(Expr::Lit(Literal::Bool(true)));
                }
                if name == "false" {
                    self.advance();
                    return Ok(Expr::Lit(Literal::Bool(false)));
                }
                if name == "msg" {
                    self.advance();
                    self.expect(Tok::Dot, "`.`")?;
                    return match self.peek().clone() {
                        Tok::Ident(field) if field == "sender" => {
                            self.advance();
                            Ok(Expr::MsgSender)
                        }
                        Tok::Ident(field) if field == "value" => {
                            self.advance();
                            Ok(Expr::MsgValue)
                        }
                        _ => Err(self.err("`sender` or `value` after `msg.`")),
                    };
                }
                if is_reserved(&name) {
                    return Err(self.err("an expression"));
                }
                self.advance();
                match self.peek() {
                    Tok::LParen => {
                        self.advance();
                        self.expect(Tok::RParen, "`)` (calls take no arguments)")?;
                        Ok(Expr::ViewCall(name))
                    }
                    Tok::LBracket => {
                        self.advance();
                        let key = self.parse_expr()?;
                        self.expect(Tok::RBracket, "`]`")?;
                        Ok(Expr::MapIndex { map: name, key: Box::new(key) })
                    }
                    _ => Ok(Expr::Ident(name)),
                }
            }
            _ => Err(self.err("an expression")),
        }
    }

    // ---- properties ----

    pub fn parse_property(&mut self, source: &str) -> Result<TemporalProperty, FrontendError> {
        let quantifier = if self.at_keyword("always") {
            self.advance();
            Quantifier::Always
        } else if self.at_keyword("eventually") {
            self.advance();
            Quantifier::Eventually
        } else {
            return Err(self.err("`always`"));
        };
        let pred = self.parse_prop_implies()?;
        self.expect(Tok::Eof, "end of property")?;
        Ok(TemporalProperty { quantifier, pred, source: source.trim().to_string() })
    }

    fn parse_prop_implies(&mut self) -> Result<PropExpr, FrontendError> {
        let lhs = self.parse_prop_or()?;
        if *self.peek() == Tok::Arrow {
            self.advance();
            let rhs = self.parse_prop_implies()?;
            return Ok(PropExpr::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn parse_prop_or(&mut self) -> Result<PropExpr, FrontendError> {
        let mut lhs = self.parse_prop_and()?;
        while *self.peek() == Tok::OrOr {
            self.advance();
            let rhs = self.parse_prop_and()?;
            lhs = PropExpr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_prop_and(&mut self) -> Result<PropExpr, FrontendError> {
        let mut lhs = self.parse_prop_cmp()?;
        while *self.peek() == Tok::AndAnd {
            self.advance();
            let rhs = self.parse_prop_cmp()?;
            lhs = PropExpr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_prop_cmp(&mut self) -> Result<PropExpr, FrontendError> {
        let lhs = self.parse_prop_add()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.parse_prop_add()?;
        Ok(PropExpr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn parse_prop_add(&mut self) -> Result<PropExpr, FrontendError> {
        let mut lhs = self.parse_prop_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_prop_mul()?;
            lhs = PropExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_prop_mul(&mut self) -> Result<PropExpr, FrontendError> {
        let mut lhs = self.parse_prop_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.parse_prop_unary()?;
            lhs = PropExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_prop_unary(&mut self) -> Result<PropExpr, FrontendError> {
        match self.peek() {
            Tok::Minus => {
                self.advance();
                let inner = self.parse_prop_unary()?;
                Ok(PropExpr::Unary(UnOp::Neg, Box::new(inner)))
            }
            Tok::Bang => {
                self.advance();
                let inner = self.parse_prop_unary()?;
                Ok(PropExpr::Unary(UnOp::Not, Box::new(inner)))
            }
            _ => self.parse_prop_primary(),
        }
    }

    fn parse_prop_primary(&mut self) -> Result<PropExpr, FrontendError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(PropExpr::Lit(Literal::Int(v)))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.parse_prop_implies()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if name == "true" {
                    self.advance();
                    return Ok(PropExpr::Lit(Literal::Bool(true)));
                }
                if name == "false" {
                    self.advance();
                    return Ok(PropExpr::Lit(Literal::Bool(false)));
                }
                if name == "old" {
                    // Peek ahead: `old(` begins an old-term, a bare `old`
                    // identifier would be rejected by binding anyway.
                    if *self.peek_at(1) == Tok::LParen {
                        self.advance();
                        self.advance();
                        if self.at_keyword("old") && *self.peek_at(1) == Tok::LParen {
                            return Err(FrontendError::NestedOld);
                        }
                        let lv = self.parse_prop_lvalue()?;
                        self.expect(Tok::RParen, "`)`")?;
                        return Ok(PropExpr::Old(lv));
                    }
                }
                let lv = self.parse_prop_lvalue()?;
                Ok(PropExpr::State(lv))
            }
            _ => Err(self.err("a predicate term")),
        }
    }

    fn parse_prop_lvalue(&mut self) -> Result<PropLValue, FrontendError> {
        let name = self.parse_ident("a state variable")?;
        if *self.peek() == Tok::LBracket {
            self.advance();
            let key = match self.peek().clone() {
                Tok::Addr(a) => {
                    self.advance();
                    PropKey::Addr(a)
                }
                Tok::AtAttacker => {
                    self.advance();
                    PropKey::Attacker
                }
                _ => return Err(self.err("an address literal or `@attacker` as map key")),
            };
            self.expect(Tok::RBracket, "`]`")?;
            return Ok(PropLValue::MapEntry { map: name, key });
        }
        Ok(PropLValue::Var(name))
    }
}

fn is_reserved(word: &str) -> bool {
    matches!(
        word,
        "contract"
            | "state"
            | "external"
            | "view"
            | "fn"
            | "require"
            | "call"
            | "if"
            | "else"
            | "return"
            | "int"
            | "bool"
            | "address"
            | "map"
            | "msg"
            | "pragma"
            | "true"
            | "false"
            | "always"
            | "eventually"
            | "old"
    )
}

// ---- validation ----

struct Checker<'a> {
    contract: &'a ContractAST,
    vars: BTreeMap<&'a str, VarType>,
    views: BTreeMap<&'a str, &'a FunctionDecl>,
}

pub fn validate_contract(contract: &ContractAST) -> Result<(), FrontendError> {
    let mut vars = BTreeMap::new();
    for v in &contract.state_vars {
        if vars.insert(v.name.as_str(), v.ty).is_some() {
            return Err(FrontendError::Kind(format!(
                "duplicate state variable `{}`",
                v.name
            )));
        }
        if let Some(init) = &v.init {
            let ok = match (v.ty, init) {
                (VarType::Int, Literal::Int(_)) => true,
                (VarType::Bool, Literal::Bool(_)) => true,
                (VarType::Address, Literal::Addr(_)) => true,
                (VarType::MapAddrInt, _) => false,
                _ => false,
            };
            if !ok {
                return Err(FrontendError::Kind(format!(
                    "initializer of `{}` does not match its type {}",
                    v.name, v.ty
                )));
            }
        }
    }
    let mut fnames = BTreeSet::new();
    let mut views = BTreeMap::new();
    for f in &contract.functions {
        if !fnames.insert(f.name.as_str()) {
            return Err(FrontendError::Kind(format!("duplicate function `{}`", f.name)));
        }
        if vars.contains_key(f.name.as_str()) {
            return Err(FrontendError::Kind(format!(
                "function `{}` shadows a state variable",
                f.name
            )));
        }
        if f.kind == FnKind::View {
            views.insert(f.name.as_str(), f);
        }
    }
    let checker = Checker { contract, vars, views };
    for f in &contract.functions {
        checker.check_function(f)?;
    }
    checker.check_view_acyclicity()?;
    Ok(())
}

impl<'a> Checker<'a> {
    fn check_function(&self, f: &FunctionDecl) -> Result<(), FrontendError> {
        if f.kind == FnKind::View && f.ret.is_none() {
            return Err(FrontendError::Kind(format!(
                "view function `{}` must declare a return type",
                f.name
            )));
        }
        let mut params = BTreeMap::new();
        for p in &f.params {
            if p.ty == VarType::MapAddrInt {
                return Err(FrontendError::Kind(format!(
                    "parameter `{}` of `{}` has a map type",
                    p.name, f.name
                )));
            }
            if params.insert(p.name.as_str(), p.ty).is_some() {
                return Err(FrontendError::Kind(format!(
                    "duplicate parameter `{}` in `{}`",
                    p.name, f.name
                )));
            }
            if self.vars.contains_key(p.name.as_str()) {
                return Err(FrontendError::Kind(format!(
                    "parameter `{}` of `{}` shadows a state variable",
                    p.name, f.name
                )));
            }
        }
        self.check_block(&f.body, f, &params)
    }

    fn check_block(
        &self,
        stmts: &[Stmt],
        f: &FunctionDecl,
        params: &BTreeMap<&str, VarType>,
    ) -> Result<(), FrontendError> {
        let mut returned = false;
        for stmt in stmts {
            if returned {
                return Err(FrontendError::Kind(format!(
                    "statement after `return` in `{}`",
                    f.name
                )));
            }
            match stmt {
                Stmt::Require(cond) => {
                    self.expect_ty(cond, VarType::Bool, f, params)?;
                }
                Stmt::Assign { target, value } => {
                    if f.kind == FnKind::View {
                        return Err(FrontendError::Kind(format!(
                            "assignment in view function `{}`",
                            f.name
                        )));
                    }
                    let target_ty = match target {
                        LValue::Var(name) => match self.vars.get(name.as_str()) {
                            Some(VarType::MapAddrInt) => {
                                return Err(FrontendError::Kind(format!(
                                    "cannot assign whole map `{name}`"
                                )))
                            }
                            Some(ty) => *ty,
                            None => return Err(FrontendError::Resolution(name.clone())),
                        },
                        LValue::MapEntry { map, key } => {
                            match self.vars.get(map.as_str()) {
                                Some(VarType::MapAddrInt) => {}
                                Some(_) => {
                                    return Err(FrontendError::Kind(format!(
                                        "`{map}` is not a map"
                                    )))
                                }
                                None => return Err(FrontendError::Resolution(map.clone())),
                            }
                            self.expect_ty(key, VarType::Address, f, params)?;
                            VarType::Int
                        }
                    };
                    self.expect_ty(value, target_ty, f, params)?;
                }
                Stmt::Call { target, amount } => {
                    if f.kind == FnKind::View {
                        return Err(FrontendError::Kind(format!(
                            "`call` in view function `{}`",
                            f.name
                        )));
                    }
                    self.expect_ty(target, VarType::Address, f, params)?;
                    self.expect_ty(amount, VarType::Int, f, params)?;
                }
                Stmt::If { cond, then_body, else_body } => {
                    self.expect_ty(cond, VarType::Bool, f, params)?;
                    self.check_block(then_body, f, params)?;
                    self.check_block(else_body, f, params)?;
                }
                Stmt::Return(value) => {
                    match (&f.ret, value) {
                        (Some(ty), Some(e)) => self.expect_ty(e, *ty, f, params)?,
                        (Some(ty), None) => {
                            return Err(FrontendError::Kind(format!(
                                "`{}` must return a value of type {ty}",
                                f.name
                            )))
                        }
                        (None, Some(_)) => {
                            return Err(FrontendError::Kind(format!(
                                "`{}` has no return type",
                                f.name
                            )))
                        }
                        (None, None) => {}
                    }
                    returned = true;
                }
            }
        }
        Ok(())
    }

    fn infer_ty(
        &self,
        e: &Expr,
        f: &FunctionDecl,
        params: &BTreeMap<&str, VarType>,
    ) -> Result<VarType, FrontendError> {
        match e {
            Expr::Lit(lit) => Ok(lit.ty()),
            Expr::Ident(name) => {
                if let Some(ty) = params.get(name.as_str()) {
                    return Ok(*ty);
                }
                match self.vars.get(name.as_str()) {
                    Some(VarType::MapAddrInt) => Err(FrontendError::Kind(format!(
                        "map `{name}` must be indexed"
                    ))),
                    Some(ty) => Ok(*ty),
                    None => Err(FrontendError::Resolution(name.clone())),
                }
            }
            Expr::MapIndex { map, key } => {
                match self.vars.get(map.as_str()) {
                    Some(VarType::MapAddrInt) => {}
                    Some(_) => return Err(FrontendError::Kind(format!("`{map}` is not a map"))),
                    None => return Err(FrontendError::Resolution(map.clone())),
                }
                self.expect_ty(key, VarType::Address, f, params)?;
                Ok(VarType::Int)
            }
            Expr::MsgSender => Ok(VarType::Address),
            Expr::MsgValue => Ok(VarType::Int),
            Expr::ViewCall(name) => match self.views.get(name.as_str()) {
                Some(g) => {
                    if !g.params.is_empty() {
                        return Err(FrontendError::Kind(format!(
                            "view `{name}` takes parameters and cannot be called from contract code"
                        )));
                    }
                    Ok(g.ret.expect("views have return types"))
                }
                None => {
                    if self.contract.function(name).is_some() {
                        Err(FrontendError::Kind(format!(
                            "external function `{name}` cannot appear in call position"
                        )))
                    } else {
                        Err(FrontendError::Resolution(name.clone()))
                    }
                }
            },
            Expr::Unary(UnOp::Neg, inner) => {
                self.expect_ty(inner, VarType::Int, f, params)?;
                Ok(VarType::Int)
            }
            Expr::Unary(UnOp::Not, inner) => {
                self.expect_ty(inner, VarType::Bool, f, params)?;
                Ok(VarType::Bool)
            }
            Expr::Binary(op, a, b) => {
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                        self.expect_ty(a, VarType::Int, f, params)?;
                        self.expect_ty(b, VarType::Int, f, params)?;
                        Ok(VarType::Int)
                    }
                    BinOp::And | BinOp::Or => {
                        self.expect_ty(a, VarType::Bool, f, params)?;
                        self.expect_ty(b, VarType::Bool, f, params)?;
                        Ok(VarType::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let ta = self.infer_ty(a, f, params)?;
                        let tb = self.infer_ty(b, f, params)?;
                        if ta != tb || ta == VarType::MapAddrInt {
                            return Err(FrontendError::Kind(format!(
                                "cannot compare {ta} with {tb}"
                            )));
                        }
                        Ok(VarType::Bool)
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        self.expect_ty(a, VarType::Int, f, params)?;
                        self.expect_ty(b, VarType::Int, f, params)?;
                        Ok(VarType::Bool)
                    }
                }
            }
        }
    }

    fn expect_ty(
        &self,
        e: &Expr,
        want: VarType,
        f: &FunctionDecl,
        params: &BTreeMap<&str, VarType>,
    ) -> Result<(), FrontendError> {
        let got = self.infer_ty(e, f, params)?;
        if got != want {
            return Err(FrontendError::Kind(format!(
                "expected {want}, found {got} in `{}`",
                f.name
            )));
        }
        Ok(())
    }

    /// View functions may call other views; the call graph must be acyclic
    /// so inlining and evaluation terminate.
    fn check_view_acyclicity(&self) -> Result<(), FrontendError> {
        fn visit<'b>(
            name: &'b str,
            views: &BTreeMap<&'b str, &'b FunctionDecl>,
            visiting: &mut Vec<&'b str>,
            done: &mut BTreeSet<&'b str>,
        ) -> Result<(), FrontendError> {
            if done.contains(name) {
                return Ok(());
            }
            if visiting.contains(&name) {
                return Err(FrontendError::Kind(format!(
                    "recursive view function `{name}`"
                )));
            }
            visiting.push(name);
            if let Some(f) = views.get(name) {
                let mut callees = Vec::new();
                for stmt in &f.body {
                    collect_stmt_calls(stmt, &mut callees);
                }
                for callee in callees {
                    visit(leak_str(&callee, views)?, views, visiting, done)?;
                }
            }
            visiting.pop();
            done.insert(name);
            Ok(())
        }

        fn leak_str<'b>(
            name: &str,
            views: &BTreeMap<&'b str, &'b FunctionDecl>,
        ) -> Result<&'b str, FrontendError> {
            views
                .get_key_value(name)
                .map(|(k, _)| *k)
                .ok_or_else(|| FrontendError::Resolution(name.to_string()))
        }

        let mut done = BTreeSet::new();
        for name in self.views.keys() {
            visit(name, &self.views, &mut Vec::new(), &mut done)?;
        }
        Ok(())
    }
}

pub(crate) fn collect_stmt_calls(stmt: &Stmt, out: &mut Vec<String>) {
    match stmt {
        Stmt::Require(e) => collect_expr_calls(e, out),
        Stmt::Assign { target, value } => {
            if let LValue::MapEntry { key, .. } = target {
                collect_expr_calls(key, out);
            }
            collect_expr_calls(value, out);
        }
        Stmt::Call { target, amount } => {
            collect_expr_calls(target, out);
            collect_expr_calls(amount, out);
        }
        Stmt::If { cond, then_body, else_body } => {
            collect_expr_calls(cond, out);
            for s in then_body {
                collect_stmt_calls(s, out);
            }
            for s in else_body {
                collect_stmt_calls(s, out);
            }
        }
        Stmt::Return(Some(e)) => collect_expr_calls(e, out),
        Stmt::Return(None) => {}
    }
}

pub(crate) fn collect_expr_calls(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::ViewCall(name) => out.push(name.clone()),
        Expr::MapIndex { key, .. } => collect_expr_calls(key, out),
        Expr::Unary(_, a) => collect_expr_calls(a, out),
        Expr::Binary(_, a, b) => {
            collect_expr_calls(a, out);
            collect_expr_calls(b, out);
        }
        _ => {}
    }
}

pub fn validate_property(
    prop: &TemporalProperty,
    contract: &ContractAST,
) -> Result<(), FrontendError> {
    check_prop_expr(&prop.pred, contract)?;
    if infer_prop_ty(&prop.pred, contract)? != VarType::Bool {
        return Err(FrontendError::Kind("property predicate must be boolean".into()));
    }
    Ok(())
}

fn check_prop_lvalue(lv: &PropLValue, contract: &ContractAST) -> Result<VarType, FrontendError> {
    match lv {
        PropLValue::Var(name) => match contract.state_var(name) {
            Some(v) if v.ty == VarType::MapAddrInt => {
                Err(FrontendError::Kind(format!("map `{name}` must be indexed")))
            }
            Some(v) => Ok(v.ty),
            None => Err(FrontendError::UnknownVariable(name.clone())),
        },
        PropLValue::MapEntry { map, .. } => match contract.state_var(map) {
            Some(v) if v.ty == VarType::MapAddrInt => Ok(VarType::Int),
            Some(_) => Err(FrontendError::Kind(format!("`{map}` is not a map"))),
            None => Err(FrontendError::UnknownVariable(map.clone())),
        },
    }
}

fn check_prop_expr(e: &PropExpr, contract: &ContractAST) -> Result<(), FrontendError> {
    match e {
        PropExpr::Lit(_) => Ok(()),
        PropExpr::State(lv) | PropExpr::Old(lv) => check_prop_lvalue(lv, contract).map(|_| ()),
        PropExpr::Unary(_, a) => check_prop_expr(a, contract),
        PropExpr::Binary(_, a, b) | PropExpr::Implies(a, b) => {
            check_prop_expr(a, contract)?;
            check_prop_expr(b, contract)
        }
    }
}

fn infer_prop_ty(e: &PropExpr, contract: &ContractAST) -> Result<VarType, FrontendError> {
    match e {
        PropExpr::Lit(lit) => Ok(lit.ty()),
        PropExpr::State(lv) | PropExpr::Old(lv) => check_prop_lvalue(lv, contract),
        PropExpr::Unary(UnOp::Neg, a) => {
            expect_prop_ty(a, VarType::Int, contract)?;
            Ok(VarType::Int)
        }
        PropExpr::Unary(UnOp::Not, a) => {
            expect_prop_ty(a, VarType::Bool, contract)?;
            Ok(VarType::Bool)
        }
        PropExpr::Implies(a, b) => {
            expect_prop_ty(a, VarType::Bool, contract)?;
            expect_prop_ty(b, VarType::Bool, contract)?;
            Ok(VarType::Bool)
        }
        PropExpr::Binary(op, a, b) => match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                expect_prop_ty(a, VarType::Int, contract)?;
                expect_prop_ty(b, VarType::Int, contract)?;
                Ok(VarType::Int)
            }
            BinOp::And | BinOp::Or => {
                expect_prop_ty(a, VarType::Bool, contract)?;
                expect_prop_ty(b, VarType::Bool, contract)?;
                Ok(VarType::Bool)
            }
            BinOp::Eq | BinOp::Ne => {
                let ta = infer_prop_ty(a, contract)?;
                let tb = infer_prop_ty(b, contract)?;
                if ta != tb {
                    return Err(FrontendError::Kind(format!("cannot compare {ta} with {tb}")));
                }
                Ok(VarType::Bool)
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                expect_prop_ty(a, VarType::Int, contract)?;
                expect_prop_ty(b, VarType::Int, contract)?;
                Ok(VarType::Bool)
            }
        },
    }
}

fn expect_prop_ty(
    e: &PropExpr,
    want: VarType,
    contract: &ContractAST,
) -> Result<(), FrontendError> {
    let got = infer_prop_ty(e, contract)?;
    if got != want {
        return Err(FrontendError::Kind(format!("expected {want}, found {got} in property")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_contract, parse_property};

    const VAULT: &str = r#"
        contract Vault {
            state balances: map<address, int>;
            state total: int;

            external fn deposit(amount: int) {
                require(amount > 0);
                balances[msg.sender] = balances[msg.sender] + amount;
                total = total + amount;
            }

            external fn withdraw(amount: int) {
                require(balances[msg.sender] >= amount);
                call msg.sender amount;
                balances[msg.sender] = balances[msg.sender] - amount;
                total = total - amount;
            }

            view fn getTotal() -> int {
                return total;
            }
        }
    "#;

    #[test]
    fn empty_contract_parses() {
        let c = parse_contract("contract E { }").unwrap();
        assert_eq!(c.name, "E");
        assert!(c.state_vars.is_empty());
        assert!(c.functions.is_empty());
    }

    #[test]
    fn vault_parses_with_expected_shape() {
        let c = parse_contract(VAULT).unwrap();
        assert_eq!(c.name, "Vault");
        let vars: Vec<_> = c.state_vars.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(vars, vec!["balances", "total"]);
        let ext: Vec<_> = c.external_functions().map(|f| f.name.as_str()).collect();
        assert_eq!(ext, vec!["deposit", "withdraw"]);
        let views: Vec<_> = c.view_functions().map(|f| f.name.as_str()).collect();
        assert_eq!(views, vec!["getTotal"]);
    }

    #[test]
    fn assignment_in_view_is_kind_error() {
        let src = "contract X { state t: int; view fn f() -> int { t = 1; } }";
        match parse_contract(src) {
            Err(FrontendError::Kind(msg)) => assert!(msg.contains("view")),
            other => panic!("expected KindError, got {other:?}"),
        }
    }

    #[test]
    fn call_in_view_is_kind_error() {
        let src = "contract X { state t: int; view fn f() -> int { call msg.sender 1; return t; } }";
        assert!(matches!(parse_contract(src), Err(FrontendError::Kind(_))));
    }

    #[test]
    fn statement_after_return_is_rejected() {
        let src = "contract X { state t: int; view fn f() -> int { return t; return t; } }";
        assert!(matches!(parse_contract(src), Err(FrontendError::Kind(_))));
    }

    #[test]
    fn unresolved_identifier_is_resolution_error() {
        let src = "contract X { external fn f() { ghost = 1; } }";
        assert!(matches!(parse_contract(src), Err(FrontendError::Resolution(n)) if n == "ghost"));
    }

    #[test]
    fn external_in_call_position_is_kind_error() {
        let src = "contract X { state t: int; external fn g() { t = 1; } external fn f() { t = g(); } }";
        assert!(matches!(parse_contract(src), Err(FrontendError::Kind(_))));
    }

    #[test]
    fn recursive_view_is_rejected() {
        let src = "contract X { view fn f() -> int { return f(); } }";
        assert!(matches!(parse_contract(src), Err(FrontendError::Kind(_))));
    }

    #[test]
    fn syntax_error_carries_position() {
        let src = "contract X {\n  state t: int\n}";
        match parse_contract(src) {
            Err(FrontendError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn simple_property_binds() {
        let c = parse_contract(VAULT).unwrap();
        let p = parse_property("always total >= 0", &c).unwrap();
        assert_eq!(p.quantifier, Quantifier::Always);
        assert!(!p.has_old());
        assert_eq!(p.referenced_vars(), vec!["total".to_string()]);
    }

    #[test]
    fn nested_old_is_rejected() {
        let c = parse_contract(VAULT).unwrap();
        assert_eq!(
            parse_property("always old(old(total)) >= 0", &c),
            Err(FrontendError::NestedOld)
        );
    }

    #[test]
    fn step_property_with_two_old_terms() {
        let src = "contract Amm { state reserveX: int; state reserveY: int; }";
        let c = parse_contract(src).unwrap();
        let p = parse_property(
            "always reserveX * reserveY >= old(reserveX) * old(reserveY)",
            &c,
        )
        .unwrap();
        let olds = p.old_lvalues();
        assert_eq!(olds.len(), 2);
        assert_eq!(p.referenced_vars(), vec!["reserveX".to_string(), "reserveY".to_string()]);
    }

    #[test]
    fn unknown_variable_in_property() {
        let c = parse_contract(VAULT).unwrap();
        assert!(matches!(
            parse_property("always ghost >= 0", &c),
            Err(FrontendError::UnknownVariable(n)) if n == "ghost"
        ));
    }

    #[test]
    fn attacker_key_only_in_map_position() {
        let c = parse_contract(VAULT).unwrap();
        let p = parse_property("always balances[@attacker] >= 0", &c).unwrap();
        assert_eq!(p.referenced_vars(), vec!["balances".to_string()]);
        assert!(parse_property("always total >= @attacker", &c).is_err());
    }

    #[test]
    fn eventually_parses_for_later_rejection() {
        let c = parse_contract(VAULT).unwrap();
        let p = parse_property("eventually total == 0", &c).unwrap();
        assert_eq!(p.quantifier, Quantifier::Eventually);
    }
}
