use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::ParseError;

/// Parses a Solidity source text into a [`SourceUnit`].
pub fn parse(source: &str) -> Result<SourceUnit, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { toks: tokens, pos: 0, src: source };
    p.source_unit()
}

const LOCATIONS: &[&str] = &["memory", "storage", "calldata"];

const RESERVED: &[&str] = &[
    "abstract", "anonymous", "as", "assembly", "break", "calldata", "catch", "constant", "constructor", "continue",
    "contract", "delete", "do", "else", "emit", "enum", "event", "external", "fallback", "for", "function", "if",
    "immutable", "import", "indexed", "interface", "internal", "is", "library", "mapping", "memory", "modifier",
    "new", "override", "payable", "pragma", "private", "public", "pure", "receive", "return", "returns",
    "storage", "struct", "try", "unchecked", "using", "view", "virtual", "while",
];

const UNITS: &[&str] = &[
    "wei", "gwei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks", "years",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=", ">>>="];

fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "==" | "!=" => 3,
        "<" | ">" | "<=" | ">=" => 4,
        "|" => 5,
        "^" => 6,
        "&" => 7,
        "<<" | ">>" | ">>>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        "**" => 11,
        _ => return None,
    })
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    src: &'a str,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    // ---- token helpers ----

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(text))
    }

    fn at_n(&self, n: usize, text: &str) -> bool {
        self.peek_at(n).is_some_and(|t| t.is(text))
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn next(&mut self) -> PResult<Token> {
        let t = self.peek().cloned().ok_or_else(|| self.eof_error())?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, text: &str) -> PResult<()> {
        match self.peek() {
            Some(t) if t.is(text) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError::new(t.line, t.col, format!("expected `{text}`, found `{}`", t.text))),
            None => Err(self.eof_error()),
        }
    }

    fn eof_error(&self) -> ParseError {
        match self.toks.last() {
            Some(t) => {
                let (line, col) = end_position(self.src, t.end);
                ParseError::new(line, col, "unexpected end of input")
            }
            None => ParseError::new(1, 1, "unexpected end of input"),
        }
    }

    fn error_here(&self, msg: impl Into<String>) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::new(t.line, t.col, msg),
            None => self.eof_error(),
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                let s = t.text.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    /// Identifier usable as a declared name.
    fn name(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident && !RESERVED.contains(&t.text.as_str()) => self.ident(),
            _ => Err(self.error_here("expected name")),
        }
    }

    fn at_ident(&self) -> bool {
        self.peek().is_some_and(|t| t.kind == TokenKind::Ident)
    }

    // ---- source unit ----

    fn source_unit(&mut self) -> PResult<SourceUnit> {
        let mut unit = SourceUnit::default();
        while let Some(tok) = self.peek().cloned() {
            match tok.text.as_str() {
                "pragma" if tok.kind == TokenKind::Ident => self.pragma(&mut unit)?,
                "import" if tok.kind == TokenKind::Ident => {
                    let import = self.import()?;
                    unit.imports.push(import);
                }
                "contract" | "interface" | "library" | "abstract" if tok.kind == TokenKind::Ident => {
                    let c = self.contract()?;
                    unit.contracts.push(c);
                }
                "}" => return Err(ParseError::new(tok.line, tok.col, "unbalanced `}`")),
                _ => {
                    let item = self.opaque()?;
                    unit.free_items.push(item);
                }
            }
        }
        if unit.contracts.is_empty() {
            let (line, col) = match self.toks.last() {
                Some(t) => end_position(self.src, t.end),
                None => (1, 1),
            };
            return Err(ParseError::new(line, col, "no contract definition"));
        }
        Ok(unit)
    }

    fn pragma(&mut self, unit: &mut SourceUnit) -> PResult<()> {
        let kw = self.next()?;
        let Some(name) = self.peek().cloned() else {
            return Err(self.eof_error());
        };
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.is(";") => break,
                Some(t) if t.is("pragma") || t.is("contract") || t.is("import") || t.is("{") || t.is("}") => {
                    return Err(ParseError::new(kw.line, kw.col, "malformed pragma: missing `;`"));
                }
                Some(t) => {
                    body.push(t.clone());
                    self.pos += 1;
                }
                None => return Err(ParseError::new(kw.line, kw.col, "malformed pragma: missing `;`")),
            }
        }
        self.pos += 1;
        if name.is("solidity") {
            let constraint = &body[1..];
            unit.pragma_req = version_constraint(constraint)
                .ok_or_else(|| ParseError::new(kw.line, kw.col, "malformed pragma: invalid version constraint"))?;
        } else {
            if body.is_empty() {
                return Err(ParseError::new(kw.line, kw.col, "malformed pragma"));
            }
            unit.extra_pragmas.push(join_tokens(&body));
        }
        Ok(())
    }

    fn import(&mut self) -> PResult<Import> {
        self.expect("import")?;
        let mut symbols = None;
        let path;
        if self.peek().is_some_and(|t| t.kind == TokenKind::Str) {
            path = unquote(&self.next()?.text);
        } else {
            let mut clause = Vec::new();
            while !self.at("from") {
                if self.peek().is_none() || self.at(";") {
                    return Err(self.error_here("malformed import"));
                }
                clause.push(self.next()?);
            }
            self.expect("from")?;
            let t = self.next()?;
            if t.kind != TokenKind::Str {
                return Err(ParseError::new(t.line, t.col, "expected import path"));
            }
            path = unquote(&t.text);
            symbols = Some(join_tokens(&clause));
        }
        let alias = if self.eat("as") { Some(self.ident()?) } else { None };
        self.expect(";")?;
        Ok(Import { path, symbols, alias })
    }

    fn contract(&mut self) -> PResult<ContractDef> {
        let kind = if self.eat("abstract") {
            self.expect("contract")?;
            ContractKind::AbstractContract
        } else {
            match self.next()?.text.as_str() {
                "contract" => ContractKind::Contract,
                "interface" => ContractKind::Interface,
                _ => ContractKind::Library,
            }
        };
        let mut c = ContractDef::new(kind, self.name()?);
        if self.eat("is") {
            loop {
                let mut name = self.ident()?;
                while self.eat(".") {
                    name.push('.');
                    name.push_str(&self.ident()?);
                }
                let args = if self.at("(") { Some(self.call_args_positional()?) } else { None };
                c.bases.push(BaseSpec { name, args });
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect("{")?;
        while !self.eat("}") {
            if self.peek().is_none() {
                return Err(self.eof_error());
            }
            let m = self.member()?;
            c.members.push(m);
        }
        Ok(c)
    }

    // ---- contract members ----

    fn member(&mut self) -> PResult<Member> {
        let start = self.pos;
        let tok = self.peek().cloned().ok_or_else(|| self.eof_error())?;
        let parsed = match tok.text.as_str() {
            "function" => self.function(FunctionKind::Function).map(Member::Function),
            "constructor" => self.function(FunctionKind::Constructor).map(Member::Function),
            "fallback" if self.at_n(1, "(") => self.function(FunctionKind::Fallback).map(Member::Function),
            "receive" if self.at_n(1, "(") => self.function(FunctionKind::Receive).map(Member::Function),
            "modifier" => self.modifier_def().map(Member::Modifier),
            "using" => self.using(),
            "event" | "struct" | "enum" | "error" => return self.opaque().map(Member::Opaque),
            _ => self.state_var().map(Member::StateVar),
        };
        match parsed {
            Ok(m) => Ok(m),
            Err(_) => {
                self.pos = start;
                self.opaque().map(Member::Opaque)
            }
        }
    }

    fn using(&mut self) -> PResult<Member> {
        self.expect("using")?;
        let mut library = self.ident()?;
        while self.eat(".") {
            library.push('.');
            library.push_str(&self.ident()?);
        }
        self.expect("for")?;
        let target = if self.eat("*") { "*".to_string() } else { self.type_name()? };
        self.expect(";")?;
        Ok(Member::Using { library, target })
    }

    fn state_var(&mut self) -> PResult<StateVarDef> {
        let ty = self.type_name()?;
        let mut var = StateVarDef::new(ty, Visibility::Unspecified, String::new());
        loop {
            let Some(t) = self.peek() else { return Err(self.eof_error()) };
            if let Some(v) = Visibility::from_keyword(&t.text) {
                var.visibility = v;
                self.pos += 1;
            } else if t.is("constant") {
                var.constant = true;
                self.pos += 1;
            } else if t.is("immutable") {
                var.immutable = true;
                self.pos += 1;
            } else {
                break;
            }
        }
        var.name = self.name()?;
        if self.eat("=") {
            var.init = Some(self.expr()?);
        }
        self.expect(";")?;
        Ok(var)
    }

    fn function(&mut self, kind: FunctionKind) -> PResult<FunctionDef> {
        let kw = self.next()?;
        let mut f = FunctionDef::new(String::new());
        f.kind = kind;
        match kind {
            FunctionKind::Function => {
                if self.at("(") {
                    f.kind = FunctionKind::LegacyFallback;
                } else {
                    f.name = self.ident()?;
                }
            }
            _ => f.name = kw.text.clone(),
        }
        f.params = self.param_list()?;
        loop {
            let Some(t) = self.peek().cloned() else { return Err(self.eof_error()) };
            if let Some(v) = Visibility::from_keyword(&t.text) {
                f.visibility = v;
                self.pos += 1;
            } else if t.is("payable") {
                f.mutability = Mutability::Payable;
                self.pos += 1;
            } else if t.is("view") || t.is("constant") {
                f.mutability = Mutability::View;
                self.pos += 1;
            } else if t.is("pure") {
                f.mutability = Mutability::Pure;
                self.pos += 1;
            } else if t.is("virtual") {
                f.is_virtual = true;
                self.pos += 1;
            } else if t.is("override") {
                f.overrides = Some(self.override_spec()?);
            } else if t.is("returns") {
                self.pos += 1;
                f.returns = self.param_list()?;
            } else if t.kind == TokenKind::Ident && !RESERVED.contains(&t.text.as_str()) {
                let mut name = self.ident()?;
                while self.eat(".") {
                    name.push('.');
                    name.push_str(&self.ident()?);
                }
                let args = if self.at("(") { Some(self.call_args_positional()?) } else { None };
                f.modifiers.push(ModifierInvocation { name, args });
            } else {
                break;
            }
        }
        if self.eat(";") {
            f.body = None;
        } else {
            f.body = Some(self.block()?);
        }
        Ok(f)
    }

    fn override_spec(&mut self) -> PResult<String> {
        self.expect("override")?;
        if !self.at("(") {
            return Ok("override".into());
        }
        self.pos += 1;
        let mut names = Vec::new();
        while !self.eat(")") {
            names.push(self.ident()?);
            self.eat(",");
        }
        Ok(format!("override({})", names.join(", ")))
    }

    fn modifier_def(&mut self) -> PResult<ModifierDef> {
        self.expect("modifier")?;
        let name = self.name()?;
        let params = if self.at("(") { self.param_list()? } else { Vec::new() };
        let mut is_virtual = false;
        loop {
            if self.eat("virtual") {
                is_virtual = true;
            } else if self.at("override") {
                self.override_spec()?;
            } else {
                break;
            }
        }
        let body = self.block()?;
        Ok(ModifierDef { name, params, is_virtual, body })
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        self.expect("(")?;
        let mut params = Vec::new();
        if self.eat(")") {
            return Ok(params);
        }
        loop {
            let ty = self.type_name()?;
            let location = match self.peek() {
                Some(t) if LOCATIONS.contains(&t.text.as_str()) => Some(self.next()?.text),
                _ => None,
            };
            let name = if self.at_ident() && !self.at("returns") && !RESERVED.contains(&self.peek().unwrap().text.as_str()) {
                Some(self.ident()?)
            } else {
                None
            };
            params.push(Param { ty, location, name });
            if self.eat(")") {
                return Ok(params);
            }
            self.expect(",")?;
        }
    }

    /// Parses a type name and returns its canonical text.
    fn type_name(&mut self) -> PResult<String> {
        let mut ty = if self.eat("mapping") {
            self.expect("(")?;
            let key = self.type_name()?;
            if self.at_ident() && !self.at("=>") {
                self.ident()?;
            }
            self.expect("=>")?;
            let value = self.type_name()?;
            if self.at_ident() {
                self.ident()?;
            }
            self.expect(")")?;
            format!("mapping({key} => {value})")
        } else {
            let t = self.peek().cloned().ok_or_else(|| self.eof_error())?;
            if t.kind != TokenKind::Ident || (RESERVED.contains(&t.text.as_str()) && t.text != "payable") {
                return Err(ParseError::new(t.line, t.col, "expected type"));
            }
            let mut name = self.ident()?;
            while self.at(".") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident) {
                self.pos += 1;
                name.push('.');
                name.push_str(&self.ident()?);
            }
            if name == "address" && self.eat("payable") {
                name.push_str(" payable");
            }
            name
        };
        while self.at("[") {
            self.pos += 1;
            if self.eat("]") {
                ty.push_str("[]");
            } else {
                let size = self.expr()?;
                self.expect("]")?;
                ty.push('[');
                ty.push_str(&super::render::render_expr(&size));
                ty.push(']');
            }
        }
        Ok(ty)
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Vec<Statement>> {
        self.expect("{")?;
        let mut body = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.eof_error()),
                Some(t) if t.is("}") => {
                    self.pos += 1;
                    return Ok(body);
                }
                Some(_) => body.push(self.statement()?),
            }
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        let start = self.pos;
        match self.try_statement() {
            Ok(s) => Ok(s),
            Err(_) => {
                self.pos = start;
                self.opaque().map(Statement::Opaque)
            }
        }
    }

    fn body_or_statement(&mut self) -> PResult<Vec<Statement>> {
        if self.at("{") {
            self.block()
        } else {
            Ok(vec![self.statement()?])
        }
    }

    fn try_statement(&mut self) -> PResult<Statement> {
        let tok = self.peek().cloned().ok_or_else(|| self.eof_error())?;
        if tok.kind == TokenKind::Punct && tok.text == "{" {
            return Ok(Statement::Block { unchecked: false, body: self.block()? });
        }
        if tok.kind == TokenKind::Ident {
            match tok.text.as_str() {
                "unchecked" if self.at_n(1, "{") => {
                    self.pos += 1;
                    return Ok(Statement::Block { unchecked: true, body: self.block()? });
                }
                "if" => {
                    self.pos += 1;
                    self.expect("(")?;
                    let condition = self.expr()?;
                    self.expect(")")?;
                    let then_body = self.body_or_statement()?;
                    let else_body = if self.eat("else") { Some(self.body_or_statement()?) } else { None };
                    return Ok(Statement::If { condition, then_body, else_body });
                }
                "require" | "assert" if self.at_n(1, "(") => {
                    let save = self.pos;
                    self.pos += 1;
                    let args = self.call_args_positional()?;
                    if self.at(";") && (1..=2).contains(&args.len()) {
                        self.pos += 1;
                        let mut it = args.into_iter();
                        return Ok(Statement::Require {
                            func: tok.text.clone(),
                            condition: it.next().unwrap(),
                            message: it.next(),
                        });
                    }
                    self.pos = save;
                }
                "emit" => {
                    self.pos += 1;
                    let e = self.expr()?;
                    self.expect(";")?;
                    return Ok(Statement::Emit(e));
                }
                "return" => {
                    self.pos += 1;
                    if self.eat(";") {
                        return Ok(Statement::Return(None));
                    }
                    let e = self.expr()?;
                    self.expect(";")?;
                    return Ok(Statement::Return(Some(e)));
                }
                "_" if self.at_n(1, ";") => {
                    self.pos += 2;
                    return Ok(Statement::Placeholder);
                }
                "for" | "while" | "do" | "try" | "assembly" | "break" | "continue" | "throw" => {
                    return self.opaque().map(Statement::Opaque);
                }
                "revert" if self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident) => {
                    return self.opaque().map(Statement::Opaque);
                }
                _ => {}
            }
        }

        let save = self.pos;
        if let Ok(decl) = self.local_decl() {
            return Ok(decl);
        }
        self.pos = save;
        let e = self.expr()?;
        self.expect(";")?;
        Ok(match e {
            Expr::Assign { op, target, value } => Statement::Assign { target: *target, op, value: *value },
            other => Statement::Expression(other),
        })
    }

    fn local_decl(&mut self) -> PResult<Statement> {
        if self.at("(") {
            self.pos += 1;
            let mut vars = Vec::new();
            loop {
                if self.at(",") || self.at(")") {
                    vars.push(None);
                } else {
                    vars.push(Some(self.typed_var()?));
                }
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
            if vars.iter().all(Option::is_none) {
                return Err(self.error_here("empty tuple declaration"));
            }
            self.expect("=")?;
            let value = self.expr()?;
            self.expect(";")?;
            return Ok(Statement::LocalDecl { vars, tuple: true, value: Some(value) });
        }
        let var = self.typed_var()?;
        let value = if self.eat("=") { Some(self.expr()?) } else { None };
        self.expect(";")?;
        Ok(Statement::LocalDecl { vars: vec![Some(var)], tuple: false, value })
    }

    fn typed_var(&mut self) -> PResult<Param> {
        let ty = self.type_name()?;
        let location = match self.peek() {
            Some(t) if LOCATIONS.contains(&t.text.as_str()) => Some(self.next()?.text),
            _ => None,
        };
        let name = self.name()?;
        Ok(Param { ty, location, name: Some(name) })
    }

    /// Captures a balanced construct as normalized token text.
    fn opaque(&mut self) -> PResult<String> {
        let start_tok = self.peek().cloned().ok_or_else(|| self.eof_error())?;
        let start = self.pos;
        let mut depth: i64 = 0;
        let mut awaiting_while = start_tok.is("do");
        loop {
            let Some(t) = self.peek().cloned() else {
                return Err(self.eof_error());
            };
            match t.text.as_str() {
                "(" | "[" | "{" if t.kind == TokenKind::Punct => depth += 1,
                ")" | "]" | "}" if t.kind == TokenKind::Punct => {
                    if depth == 0 {
                        if self.pos == start {
                            return Err(ParseError::new(t.line, t.col, format!("unexpected `{}`", t.text)));
                        }
                        // Statement without terminator before the enclosing `}`.
                        return Err(ParseError::new(t.line, t.col, "missing `;`"));
                    }
                    depth -= 1;
                    if depth == 0 && t.text == "}" {
                        self.pos += 1;
                        let continues = self.at("else") || self.at("catch") || (awaiting_while && self.at("while"));
                        if awaiting_while && self.at("while") {
                            awaiting_while = false;
                        }
                        if !continues {
                            return Ok(join_tokens(&self.toks[start..self.pos]));
                        }
                        continue;
                    }
                }
                ";" if t.kind == TokenKind::Punct && depth == 0 => {
                    self.pos += 1;
                    return Ok(join_tokens(&self.toks[start..self.pos]));
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let target = self.ternary()?;
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Punct && ASSIGN_OPS.contains(&t.text.as_str()) {
                let op = t.text.clone();
                self.pos += 1;
                let value = self.expr()?;
                return Ok(Expr::Assign {
                    op,
                    target: Box::new(target),
                    value: Box::new(value),
                });
            }
        }
        Ok(target)
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let condition = self.binary(1)?;
        if !self.eat("?") {
            return Ok(condition);
        }
        let then = self.expr()?;
        self.expect(":")?;
        let otherwise = self.expr()?;
        Ok(Expr::Ternary {
            condition: Box::new(condition),
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(t) = self.peek() {
            if t.kind != TokenKind::Punct {
                break;
            }
            let Some(prec) = binary_precedence(&t.text) else { break };
            if prec < min_prec {
                break;
            }
            let op = t.text.clone();
            self.pos += 1;
            // `**` is right-associative.
            let next_min = if op == "**" { prec } else { prec + 1 };
            let rhs = self.binary(next_min)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if let Some(t) = self.peek() {
            let is_prefix = (t.kind == TokenKind::Punct && matches!(t.text.as_str(), "!" | "-" | "~" | "++" | "--"))
                || t.is("delete");
            if is_prefix {
                let op = t.text.clone();
                self.pos += 1;
                let operand = self.unary()?;
                return Ok(Expr::Unary {
                    op,
                    operand: Box::new(operand),
                    postfix: false,
                });
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.at(".") {
                self.pos += 1;
                let member = self.ident()?;
                e = Expr::member(e, member);
            } else if self.at("[") {
                self.pos += 1;
                if self.eat("]") {
                    e = Expr::Index { base: Box::new(e), index: None };
                } else {
                    let idx = self.expr()?;
                    self.expect("]")?;
                    e = Expr::Index {
                        base: Box::new(e),
                        index: Some(Box::new(idx)),
                    };
                }
            } else if self.at("{") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident) && self.at_n(2, ":") {
                self.pos += 1;
                let mut options = Vec::new();
                loop {
                    let key = self.ident()?;
                    self.expect(":")?;
                    let v = self.expr()?;
                    options.push((key, v));
                    if self.eat("}") {
                        break;
                    }
                    self.expect(",")?;
                }
                if !self.at("(") {
                    return Err(self.error_here("expected call after call options"));
                }
                let args = self.call_args()?;
                e = Expr::Call {
                    callee: Box::new(e),
                    options,
                    args,
                };
            } else if self.at("(") {
                let args = self.call_args()?;
                e = Expr::Call {
                    callee: Box::new(e),
                    options: Vec::new(),
                    args,
                };
            } else if self.at("++") || self.at("--") {
                let op = self.next()?.text;
                e = Expr::Unary {
                    op,
                    operand: Box::new(e),
                    postfix: true,
                };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> PResult<CallArgs> {
        if self.at_n(1, "{") {
            self.expect("(")?;
            self.expect("{")?;
            let mut named = Vec::new();
            if !self.eat("}") {
                loop {
                    let key = self.ident()?;
                    self.expect(":")?;
                    let v = self.expr()?;
                    named.push((key, v));
                    if self.eat("}") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
            self.expect(")")?;
            return Ok(CallArgs::Named(named));
        }
        Ok(CallArgs::Positional(self.call_args_positional()?))
    }

    fn call_args_positional(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(")") {
                return Ok(args);
            }
            self.expect(",")?;
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().cloned().ok_or_else(|| self.eof_error())?;
        match t.kind {
            TokenKind::Number => {
                self.pos += 1;
                let mut text = t.text;
                if let Some(u) = self.peek() {
                    if u.kind == TokenKind::Ident && UNITS.contains(&u.text.as_str()) {
                        text.push(' ');
                        text.push_str(&u.text);
                        self.pos += 1;
                    }
                }
                Ok(Expr::Literal(text))
            }
            TokenKind::Str => {
                self.pos += 1;
                Ok(Expr::Literal(t.text))
            }
            TokenKind::Ident => match t.text.as_str() {
                "true" | "false" => {
                    self.pos += 1;
                    Ok(Expr::Literal(t.text))
                }
                "new" => {
                    self.pos += 1;
                    Ok(Expr::New(self.type_name()?))
                }
                "payable" | "type" => {
                    self.pos += 1;
                    Ok(Expr::Ident(t.text))
                }
                w if RESERVED.contains(&w) => Err(ParseError::new(t.line, t.col, format!("unexpected keyword `{w}`"))),
                _ => {
                    self.pos += 1;
                    Ok(Expr::Ident(t.text))
                }
            },
            TokenKind::Punct => match t.text.as_str() {
                "(" => {
                    self.pos += 1;
                    let mut items = Vec::new();
                    let mut saw_comma = false;
                    loop {
                        if self.at(",") || self.at(")") {
                            items.push(None);
                        } else {
                            items.push(Some(self.expr()?));
                        }
                        if self.eat(")") {
                            break;
                        }
                        self.expect(",")?;
                        saw_comma = true;
                    }
                    if !saw_comma {
                        return match items.pop().flatten() {
                            Some(inner) => Ok(Expr::Paren(Box::new(inner))),
                            None => Err(ParseError::new(t.line, t.col, "empty parentheses")),
                        };
                    }
                    Ok(Expr::Tuple(items))
                }
                "[" => {
                    self.pos += 1;
                    let mut items = Vec::new();
                    if !self.eat("]") {
                        loop {
                            items.push(self.expr()?);
                            if self.eat("]") {
                                break;
                            }
                            self.expect(",")?;
                        }
                    }
                    Ok(Expr::ArrayLit(items))
                }
                _ => Err(ParseError::new(t.line, t.col, format!("unexpected `{}`", t.text))),
            },
        }
    }
}

fn unquote(lit: &str) -> String {
    lit.get(1..lit.len().saturating_sub(1)).unwrap_or_default().to_string()
}

fn end_position(src: &str, byte: usize) -> (usize, usize) {
    let before = &src[..byte];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Joins tokens into a canonical single-line text that re-tokenizes to the
/// same sequence.
pub(crate) fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Token> = None;
    for t in tokens {
        if let Some(p) = prev {
            let tight_after = p.kind == TokenKind::Punct && matches!(p.text.as_str(), "(" | "[" | ".");
            let tight_before = t.kind == TokenKind::Punct
                && (matches!(t.text.as_str(), ")" | "]" | "," | ";" | ".")
                    || (matches!(t.text.as_str(), "(" | "[") && ((p.kind == TokenKind::Ident && !RESERVED.contains(&p.text.as_str())) || p.is(")") || p.is("]"))));
            // A number followed by `.` would re-lex as a longer number.
            let unsafe_join = p.kind == TokenKind::Number && t.is(".");
            if !(tight_after || tight_before) || unsafe_join {
                out.push(' ');
            }
        }
        out.push_str(&t.text);
        prev = Some(t);
    }
    out
}

/// Validates and normalizes a `pragma solidity` constraint.
fn version_constraint(tokens: &[Token]) -> Option<String> {
    if tokens.is_empty() {
        return None;
    }
    let mut out = String::new();
    let mut saw_version = false;
    let mut pending_op = false;
    for t in tokens {
        match t.kind {
            TokenKind::Number => {
                let parts: Vec<&str> = t.text.split('.').collect();
                if parts.len() > 3 || parts.iter().any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit())) {
                    return None;
                }
                if !out.is_empty() && !pending_op {
                    out.push(' ');
                }
                out.push_str(&t.text);
                saw_version = true;
                pending_op = false;
            }
            TokenKind::Punct if matches!(t.text.as_str(), "^" | "~" | ">" | "<" | ">=" | "<=" | "=") => {
                if pending_op {
                    return None;
                }
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&t.text);
                pending_op = true;
            }
            TokenKind::Punct if matches!(t.text.as_str(), "||" | "-") => {
                out.push(' ');
                out.push_str(&t.text);
                pending_op = false;
            }
            _ => return None,
        }
    }
    (saw_version && !pending_op).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pragma_normalization() {
        let u = parse("pragma solidity >=0.4.22   <0.6.0; contract A {}").unwrap();
        assert_eq!(u.pragma_req, ">=0.4.22 <0.6.0");
        let u = parse("pragma solidity ^0.8.19;\ncontract A {}").unwrap();
        assert_eq!(u.pragma_req, "^0.8.19");
    }

    #[test]
    fn malformed_pragma() {
        let err = parse("pragma solidity ;\ncontract A {}").unwrap_err();
        assert!(err.message.contains("pragma"), "{err}");
        let err = parse("pragma solidity ^0.8.x;\ncontract A {}").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(parse("pragma solidity ^0.8.0\ncontract A {}").is_err());
    }

    #[test]
    fn empty_and_truncated() {
        let err = parse("").unwrap_err();
        assert!(err.message.contains("no contract"));
        let err = parse("contract A {\n  function f() public {\n    x = 1;\n").unwrap_err();
        assert!(err.message.contains("end of input"), "{err}");
        assert_eq!(err.line, 3);
        let err = parse("contract A { }\n}").unwrap_err();
        assert_eq!((err.line, err.column), (2, 1));
    }

    #[test]
    fn opaque_statements_survive() {
        let src = "contract A { uint x; function f() public { for (uint i = 0; i < 3; i++) { x += i; } x = 1; } }";
        let u = parse(src).unwrap();
        let f = u.contracts[0].function("f").unwrap();
        assert!(matches!(&f.statements()[0], Statement::Opaque(t) if t.starts_with("for (uint i")));
        assert!(matches!(&f.statements()[1], Statement::Assign { .. }));
    }

    #[test]
    fn local_decls_vs_assignments() {
        let src = r#"contract A {
            mapping(address => uint256) b;
            function f(address to) public {
                (bool ok, ) = to.call{value: 1}("");
                uint256 amount = b[to];
                b[to] = 0;
                (amount, ok) = g();
                IERC20 token = IERC20(to);
            }
        }"#;
        let u = parse(src).unwrap();
        let body = u.contracts[0].function("f").unwrap().statements();
        assert!(matches!(&body[0], Statement::LocalDecl { tuple: true, vars, .. } if vars.len() == 2 && vars[1].is_none()));
        assert!(matches!(&body[1], Statement::LocalDecl { tuple: false, .. }));
        assert!(matches!(&body[2], Statement::Assign { op, .. } if op == "="));
        assert!(matches!(&body[3], Statement::Assign { target: Expr::Tuple(_), .. }));
        assert!(matches!(&body[4], Statement::LocalDecl { vars, .. } if vars[0].as_ref().unwrap().ty == "IERC20"));
    }

    #[test]
    fn legacy_constructs() {
        let src = r#"pragma solidity ^0.4.24;
        contract Bank {
            using SafeMath for uint256;
            mapping (address => uint) balances;
            function Bank() public {}
            function () payable {}
            function get() constant returns (uint) { return balances[msg.sender]; }
            function w() { require(msg.sender.call.value(balances[msg.sender])()); balances[msg.sender] = 0; }
        }"#;
        let u = parse(src).unwrap();
        let c = &u.contracts[0];
        assert!(matches!(&c.members[0], Member::Using { library, target } if library == "SafeMath" && target == "uint256"));
        assert_eq!(c.state_vars().next().unwrap().visibility, Visibility::Unspecified);
        assert_eq!(c.state_vars().next().unwrap().ty, "mapping(address => uint)");
        let kinds: Vec<_> = c.functions().map(|f| f.kind).collect();
        assert_eq!(kinds[1], FunctionKind::LegacyFallback);
        assert_eq!(c.function("get").unwrap().mutability, Mutability::View);
        assert!(matches!(&c.function("w").unwrap().statements()[0], Statement::Require { .. }));
    }

    #[test]
    fn inheritance_and_imports() {
        let src = r#"pragma solidity ^0.8.19;
        import "@openzeppelin/contracts/security/ReentrancyGuard.sol";
        import {Ownable} from "./Ownable.sol";
        contract S is ReentrancyGuard, Ownable(msg.sender) {
            event Paid(address indexed to, uint256 amount);
            function w(uint256 a) external nonReentrant onlyOwner { emit Paid(msg.sender, a); }
        }"#;
        let u = parse(src).unwrap();
        assert_eq!(u.imports.len(), 2);
        assert_eq!(u.imports[1].symbols.as_deref(), Some("{ Ownable }"));
        let c = &u.contracts[0];
        assert_eq!(c.base_names().collect::<Vec<_>>(), ["ReentrancyGuard", "Ownable"]);
        let w = c.function("w").unwrap();
        assert!(w.has_modifier("nonReentrant") && w.has_modifier("onlyOwner"));
        assert!(matches!(&c.members[0], Member::Opaque(t) if t == "event Paid(address indexed to, uint256 amount);"));
    }
}
