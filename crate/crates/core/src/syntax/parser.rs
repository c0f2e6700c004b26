use crate::ast::*;
use crate::syntax::lexer::{tokenize, Token, TokenKind};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

type PResult<T> = Result<T, ParseError>;

const TOP_LEVEL: &[&str] = &["type", "decl", "proc", "eqtype", "exec"];

pub struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    eof: usize,
    /// Type variables in scope (innermost last).
    tvars: Vec<String>,
}

/// Lexes and parses a whole program.
pub fn parse_source(src: &str) -> PResult<Signature> {
    let toks = tokenize(src).map_err(|e| ParseError { span: e.span, message: e.message })?;
    parse_program(&toks, src.len())
}

pub fn parse_program(toks: &[Token], eof: usize) -> PResult<Signature> {
    let mut p = Parser::new(toks, eof);
    let mut pragma = Pragma::default();
    if let Some(Token { kind: TokenKind::Pragma(text), span }) = p.peek_tok() {
        pragma = parse_pragma(text, *span)?;
        p.pos += 1;
    }
    let mut decls = Vec::new();
    while !p.at_eof() {
        decls.push(p.decl()?);
    }
    Ok(Signature::new(decls, pragma))
}

pub fn parse_pragma(text: &str, span: Span) -> PResult<Pragma> {
    let mut pragma = Pragma { span, ..Pragma::default() };
    for word in text.split_whitespace() {
        let err = || ParseError { span, message: format!("unknown option `{word}`") };
        let (key, value) = word.strip_prefix("--").and_then(|w| w.split_once('=')).ok_or_else(err)?;
        match key {
            "syntax" => {
                pragma.syntax = Some(match value {
                    "implicit" => SyntaxMode::Implicit,
                    "explicit" => SyntaxMode::Explicit,
                    _ => return Err(err()),
                })
            }
            "work" => pragma.work = Some(CostModel::parse(value).ok_or_else(err)?),
            "time" => pragma.time = Some(CostModel::parse(value).ok_or_else(err)?),
            _ => return Err(err()),
        }
    }
    Ok(pragma)
}

/// Parses a standalone type (used by tests and the pretty-printer round trip).
pub fn parse_type_str(src: &str, tvars: &[&str]) -> PResult<Type> {
    let toks = tokenize(src).map_err(|e| ParseError { span: e.span, message: e.message })?;
    let mut p = Parser::new(&toks, src.len());
    p.tvars = tvars.iter().map(|s| s.to_string()).collect();
    let t = p.ty()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_prop_str(src: &str) -> PResult<Prop> {
    let toks = tokenize(src).map_err(|e| ParseError { span: e.span, message: e.message })?;
    let mut p = Parser::new(&toks, src.len());
    let t = p.prop()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_exp_str(src: &str) -> PResult<Exp> {
    let toks = tokenize(src).map_err(|e| ParseError { span: e.span, message: e.message })?;
    let mut p = Parser::new(&toks, src.len());
    let t = p.exp()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_proc_str(src: &str, tvars: &[&str]) -> PResult<Proc> {
    let toks = tokenize(src).map_err(|e| ParseError { span: e.span, message: e.message })?;
    let mut p = Parser::new(&toks, src.len());
    p.tvars = tvars.iter().map(|s| s.to_string()).collect();
    let t = p.proc()?;
    p.expect_eof()?;
    Ok(t)
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Ident(s) => format!("identifier `{s}`"),
        TokenKind::Nat(n) => format!("numeral `{n}`"),
        TokenKind::Keyword(k) => format!("keyword `{k}`"),
        TokenKind::Symbol(s) => format!("`{s}`"),
        TokenKind::Pragma(_) => "`#options`".to_string(),
    }
}

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token], eof: usize) -> Parser<'a> {
        Parser { toks, pos: 0, eof, tvars: Vec::new() }
    }

    fn peek_tok(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, k: usize) -> Option<&TokenKind> {
        self.toks.get(self.pos + k).map(|t| &t.kind)
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> Span {
        match self.toks.get(self.pos) {
            Some(t) => t.span,
            None => Span::new(self.eof, self.eof),
        }
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].span.end
        }
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let found = match self.peek() {
            Some(k) => describe(k),
            None => "end of input".to_string(),
        };
        Err(ParseError { span: self.here(), message: format!("expected {expected}, found {found}") })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Symbol(x)) if *x == s)
    }

    fn is_sym_at(&self, k: usize, s: &str) -> bool {
        matches!(self.peek_at(k), Some(TokenKind::Symbol(x)) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Keyword(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Span> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(self.toks[self.pos - 1].span)
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<Span> {
        if self.is_kw(s) {
            self.pos += 1;
            Ok(self.toks[self.pos - 1].span)
        } else {
            self.error(&format!("keyword `{s}`"))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn is_ident(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(_)))
    }

    fn at_top_level(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::Keyword(k)) if TOP_LEVEL.contains(k))
    }

    // ---------------------------------------------------------------- declarations

    fn decl(&mut self) -> PResult<Decl> {
        let start = self.here().start;
        let d = match self.peek() {
            Some(TokenKind::Keyword("type")) => {
                self.pos += 1;
                let name = self.ident("type name")?;
                let tparams = self.tparams()?;
                let (iparams, _) = self.iparams(false)?;
                self.expect_sym("=")?;
                self.tvars = tparams.clone();
                let body = self.ty()?;
                self.tvars.clear();
                Decl::Type(TypeDef { name, tparams, iparams, body, span: Span::new(start, self.prev_end()) })
            }
            Some(TokenKind::Keyword("decl")) => {
                self.pos += 1;
                let name = self.ident("process name")?;
                let tparams = self.tparams()?;
                let (iparams, guard) = self.iparams(true)?;
                self.expect_sym(":")?;
                self.tvars = tparams.clone();
                let mut ctx = Vec::new();
                if !self.eat_sym(".") {
                    while self.is_sym("(") {
                        ctx.push(self.typed_channel()?);
                    }
                    if ctx.is_empty() {
                        return self.error("`.` or `(` for the channel context");
                    }
                }
                let pot = if self.eat_sym("|-") {
                    Exp::Nat(0)
                } else if self.eat_sym("|{") {
                    let e = self.exp()?;
                    self.expect_sym("}")?;
                    self.expect_sym("-")?;
                    e
                } else {
                    return self.error("`|-` or `|{q}-`");
                };
                let offer = self.typed_channel()?;
                self.tvars.clear();
                Decl::Proc(ProcDecl {
                    name,
                    tparams,
                    iparams,
                    guard,
                    ctx,
                    pot,
                    offer,
                    span: Span::new(start, self.prev_end()),
                })
            }
            Some(TokenKind::Keyword("proc")) => {
                self.pos += 1;
                let offered = self.ident("provided channel")?;
                self.expect_sym("<-")?;
                let name = self.ident("process name")?;
                let tparams = self.tparams()?;
                let (iparams, _) = self.iparams(false)?;
                let mut args = Vec::new();
                while self.is_ident() {
                    args.push(self.ident("channel")?);
                }
                self.expect_sym("=")?;
                self.tvars = tparams.clone();
                let body = self.proc()?;
                self.tvars.clear();
                if !self.at_eof() && !self.at_top_level() {
                    return self.error("a top-level declaration");
                }
                Decl::Def(ProcDef {
                    name,
                    offered,
                    tparams,
                    iparams,
                    args,
                    body,
                    span: Span::new(start, self.prev_end()),
                })
            }
            Some(TokenKind::Keyword("eqtype")) => {
                self.pos += 1;
                let left = self.ty()?;
                let kind = if self.eat_sym("=") {
                    EqKind::Equal
                } else if self.eat_sym("<=") {
                    EqKind::Sub
                } else {
                    return self.error("`=` or `<=`");
                };
                let right = self.ty()?;
                Decl::EqType(EqTypeDecl { left, right, kind, span: Span::new(start, self.prev_end()) })
            }
            Some(TokenKind::Keyword("exec")) => {
                self.pos += 1;
                let name = self.ident("process name")?;
                Decl::Exec(ExecDecl { name, span: Span::new(start, self.prev_end()) })
            }
            Some(TokenKind::Pragma(_)) => {
                return Err(ParseError {
                    span: self.here(),
                    message: "`#options` must be the first line of the file".into(),
                })
            }
            _ => return self.error("`type`, `decl`, `proc`, `eqtype` or `exec`"),
        };
        Ok(d)
    }

    fn typed_channel(&mut self) -> PResult<(String, Type)> {
        self.expect_sym("(")?;
        let x = self.ident("channel name")?;
        self.expect_sym(":")?;
        let t = self.ty()?;
        self.expect_sym(")")?;
        Ok((x, t))
    }

    /// `[a][b]...` or `[a, b]`.
    fn tparams(&mut self) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        while self.is_sym("[") {
            self.pos += 1;
            loop {
                out.push(self.ident("type parameter")?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("]")?;
        }
        Ok(out)
    }

    /// `{n}{m|phi}...`; guards are only allowed in declarations.
    fn iparams(&mut self, allow_guard: bool) -> PResult<(Vec<String>, Prop)> {
        let mut out = Vec::new();
        let mut guard = Prop::True;
        while self.is_sym("{") {
            self.pos += 1;
            loop {
                out.push(self.ident("index parameter")?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            if allow_guard && self.eat_sym("|") {
                let phi = self.prop()?;
                guard = Prop::and(guard, phi);
            }
            self.expect_sym("}")?;
        }
        Ok((out, guard))
    }

    // ---------------------------------------------------------------- types

    pub fn ty(&mut self) -> PResult<Type> {
        let left = self.tensor_ty()?;
        if self.eat_sym("-o") {
            let right = self.ty()?;
            Ok(Type::Lolli(Box::new(left), Box::new(right)))
        } else {
            Ok(left)
        }
    }

    fn tensor_ty(&mut self) -> PResult<Type> {
        let left = self.prefix_ty()?;
        if self.eat_sym("*") {
            let right = self.tensor_ty()?;
            Ok(Type::Tensor(Box::new(left), Box::new(right)))
        } else {
            Ok(left)
        }
    }

    fn prefix_ty(&mut self) -> PResult<Type> {
        let b = |t: Type| Box::new(t);
        match self.peek() {
            Some(TokenKind::Symbol("?")) | Some(TokenKind::Symbol("!")) => {
                let exists = self.is_sym("?");
                self.pos += 1;
                if self.eat_sym("[") {
                    let a = self.ident("type variable")?;
                    self.expect_sym("]")?;
                    self.expect_sym(".")?;
                    self.tvars.push(a.clone());
                    let body = self.ty();
                    self.tvars.pop();
                    let body = body?;
                    Ok(if exists { Type::ExistsTp(a, b(body)) } else { Type::ForallTp(a, b(body)) })
                } else {
                    let n = self.ident("index variable or `[`")?;
                    self.expect_sym(".")?;
                    let body = self.ty()?;
                    Ok(if exists { Type::ExistsIx(n, b(body)) } else { Type::ForallIx(n, b(body)) })
                }
            }
            Some(TokenKind::Symbol("?{")) | Some(TokenKind::Symbol("!{")) => {
                let assert = self.is_sym("?{");
                self.pos += 1;
                let phi = self.prop()?;
                self.expect_sym("}")?;
                self.expect_sym(".")?;
                let body = self.ty()?;
                Ok(if assert { Type::Assert(phi, b(body)) } else { Type::Assume(phi, b(body)) })
            }
            Some(TokenKind::Symbol("|{")) => {
                self.pos += 1;
                let r = self.exp()?;
                self.expect_sym("}")?;
                self.expect_sym(">")?;
                Ok(Type::Pay(r, b(self.ty()?)))
            }
            Some(TokenKind::Symbol("|>")) => {
                self.pos += 1;
                Ok(Type::Pay(Exp::Nat(1), b(self.ty()?)))
            }
            Some(TokenKind::Symbol("<{")) => {
                self.pos += 1;
                let r = self.exp()?;
                self.expect_sym("}")?;
                self.expect_sym("|")?;
                Ok(Type::Get(r, b(self.ty()?)))
            }
            Some(TokenKind::Symbol("<|")) => {
                self.pos += 1;
                Ok(Type::Get(Exp::Nat(1), b(self.ty()?)))
            }
            Some(TokenKind::Symbol("()")) => {
                self.pos += 1;
                Ok(Type::Next(Exp::Nat(1), b(self.ty()?)))
            }
            Some(TokenKind::Symbol("(")) if self.is_sym_at(1, "{") => {
                self.pos += 2;
                let t = self.exp()?;
                self.expect_sym("}")?;
                self.expect_sym(")")?;
                Ok(Type::Next(t, b(self.ty()?)))
            }
            Some(TokenKind::Symbol("[]")) => {
                self.pos += 1;
                Ok(Type::Box(b(self.ty()?)))
            }
            Some(TokenKind::Symbol("<>")) => {
                self.pos += 1;
                Ok(Type::Dia(b(self.ty()?)))
            }
            _ => self.atom_ty(),
        }
    }

    fn atom_ty(&mut self) -> PResult<Type> {
        match self.peek().cloned() {
            Some(TokenKind::Nat(1)) => {
                self.pos += 1;
                Ok(Type::One)
            }
            Some(TokenKind::Symbol("+{")) | Some(TokenKind::Symbol("&{")) => {
                let plus = self.is_sym("+{");
                self.pos += 1;
                let mut branches: Vec<(String, Type)> = Vec::new();
                loop {
                    let lspan = self.here();
                    let l = self.ident("label")?;
                    if branches.iter().any(|(m, _)| *m == l) {
                        return Err(ParseError { span: lspan, message: format!("duplicate label `{l}`") });
                    }
                    self.expect_sym(":")?;
                    let t = self.ty()?;
                    branches.push((l, t));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                if !self.eat_sym("}") {
                    return self.error("`,` or `}`");
                }
                Ok(if plus { Type::Plus(branches) } else { Type::With(branches) })
            }
            Some(TokenKind::Ident(v)) => {
                self.pos += 1;
                if self.tvars.contains(&v) && !self.is_sym("[") && !self.is_sym("{") {
                    return Ok(Type::Var(v));
                }
                let (tps, idx) = self.type_args()?;
                Ok(Type::Name(v, tps, idx))
            }
            Some(TokenKind::Symbol("(")) => {
                self.pos += 1;
                let t = self.ty()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.error("a type"),
        }
    }

    fn type_args(&mut self) -> PResult<(Vec<Type>, Vec<Exp>)> {
        let mut tps = Vec::new();
        while self.is_sym("[") {
            self.pos += 1;
            loop {
                tps.push(self.ty()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("]")?;
        }
        let mut idx = Vec::new();
        while self.is_sym("{") {
            self.pos += 1;
            loop {
                idx.push(self.exp()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("}")?;
        }
        Ok((tps, idx))
    }

    // ---------------------------------------------------------------- arithmetic

    pub fn exp(&mut self) -> PResult<Exp> {
        let mut e = self.term()?;
        loop {
            if self.eat_sym("+") {
                e = Exp::add(e, self.term()?);
            } else if self.eat_sym("-") {
                e = Exp::sub(e, self.term()?);
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> PResult<Exp> {
        let mut e = self.factor()?;
        while self.eat_sym("*") {
            e = Exp::mul(e, self.factor()?);
        }
        Ok(e)
    }

    fn factor(&mut self) -> PResult<Exp> {
        match self.peek().cloned() {
            Some(TokenKind::Nat(n)) => {
                self.pos += 1;
                Ok(Exp::Nat(n))
            }
            Some(TokenKind::Ident(v)) => {
                self.pos += 1;
                Ok(Exp::Var(v))
            }
            Some(TokenKind::Symbol("(")) => {
                self.pos += 1;
                let e = self.exp()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => self.error("an arithmetic expression"),
        }
    }

    pub fn prop(&mut self) -> PResult<Prop> {
        let mut p = self.conj()?;
        while self.eat_sym("\\/") {
            p = Prop::Or(Box::new(p), Box::new(self.conj()?));
        }
        Ok(p)
    }

    fn conj(&mut self) -> PResult<Prop> {
        let mut p = self.unary_prop()?;
        while self.eat_sym("/\\") {
            p = Prop::And(Box::new(p), Box::new(self.unary_prop()?));
        }
        Ok(p)
    }

    fn unary_prop(&mut self) -> PResult<Prop> {
        match self.peek().cloned() {
            Some(TokenKind::Symbol("~")) => {
                self.pos += 1;
                Ok(Prop::Not(Box::new(self.unary_prop()?)))
            }
            Some(TokenKind::Symbol("?")) | Some(TokenKind::Symbol("!")) => {
                let exists = self.is_sym("?");
                self.pos += 1;
                let n = self.ident("index variable")?;
                self.expect_sym(".")?;
                let body = self.prop()?;
                Ok(if exists { Prop::Exists(n, Box::new(body)) } else { Prop::Forall(n, Box::new(body)) })
            }
            Some(TokenKind::Ident(w))
                if (w == "true" || w == "false") && !self.at_arith_op_at(1) && !self.at_comparison_at(1) =>
            {
                self.pos += 1;
                Ok(if w == "true" { Prop::True } else { Prop::False })
            }
            Some(TokenKind::Symbol("(")) => {
                let save = self.pos;
                self.pos += 1;
                if let Ok(p) = self.prop() {
                    if self.eat_sym(")") && !self.at_comparison_at(0) && !self.at_arith_op_at(0) {
                        return Ok(p);
                    }
                }
                self.pos = save;
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    fn at_arith_op_at(&self, k: usize) -> bool {
        ["+", "-", "*"].iter().any(|s| self.is_sym_at(k, s))
    }

    fn at_comparison_at(&self, k: usize) -> bool {
        ["=", ">", "<", ">=", "<=", "!="].iter().any(|s| self.is_sym_at(k, s))
    }

    fn comparison(&mut self) -> PResult<Prop> {
        let a = self.exp()?;
        let op = match self.peek() {
            Some(TokenKind::Symbol(s)) if ["=", ">", "<", ">=", "<=", "!="].contains(s) => *s,
            _ => return self.error("a comparison (`=`, `>`, `<`, `>=`, `<=`, `!=`)"),
        };
        self.pos += 1;
        let b = self.exp()?;
        Ok(match op {
            "=" => Prop::Eq(a, b),
            ">" => Prop::Gt(a, b),
            "<" => Prop::Gt(b, a),
            ">=" => Prop::ge(a, b),
            "<=" => Prop::ge(b, a),
            _ => Prop::not(Prop::Eq(a, b)),
        })
    }

    // ---------------------------------------------------------------- processes

    pub fn proc(&mut self) -> PResult<Proc> {
        let start = self.here().start;
        let kw = match self.peek() {
            Some(TokenKind::Keyword(k)) => Some(*k),
            _ => None,
        };
        let b = Box::new;
        match kw {
            Some("case") => {
                self.pos += 1;
                let ch = self.ident("channel")?;
                let span = Span::new(start, self.prev_end());
                self.expect_sym("(")?;
                let mut branches: Vec<Branch> = Vec::new();
                loop {
                    let lspan = self.here();
                    let label = self.ident("label")?;
                    if branches.iter().any(|br| br.label == label) {
                        return Err(ParseError { span: lspan, message: format!("duplicate branch `{label}`") });
                    }
                    self.expect_sym("=>")?;
                    let body = self.proc()?;
                    branches.push(Branch { label, span: Span::new(lspan.start, self.prev_end()), body });
                    if !self.eat_sym("|") {
                        break;
                    }
                }
                self.expect_sym(")")?;
                Ok(Proc::new(span, ProcKind::Case { ch, branches }))
            }
            Some("send") => {
                self.pos += 1;
                let ch = self.ident("channel")?;
                if self.eat_sym("[") {
                    let tp = self.ty()?;
                    self.expect_sym("]")?;
                    let span = Span::new(start, self.prev_end());
                    let cont = self.seq()?;
                    Ok(Proc::new(span, ProcKind::SendType { ch, tp, cont: b(cont) }))
                } else if self.eat_sym("{") {
                    let e = self.exp()?;
                    self.expect_sym("}")?;
                    let span = Span::new(start, self.prev_end());
                    let cont = self.seq()?;
                    Ok(Proc::new(span, ProcKind::SendIdx { ch, e, cont: b(cont) }))
                } else {
                    let arg = self.ident("channel, `[type]` or `{index}`")?;
                    let span = Span::new(start, self.prev_end());
                    let cont = self.seq()?;
                    Ok(Proc::new(span, ProcKind::SendChan { ch, arg, cont: b(cont) }))
                }
            }
            Some("close") => {
                self.pos += 1;
                let ch = self.ident("channel")?;
                Ok(Proc::new(Span::new(start, self.prev_end()), ProcKind::Close { ch }))
            }
            Some("wait") => {
                self.pos += 1;
                let ch = self.ident("channel")?;
                let span = Span::new(start, self.prev_end());
                let cont = self.seq()?;
                Ok(Proc::new(span, ProcKind::Wait { ch, cont: b(cont) }))
            }
            Some(k @ ("assert" | "assume")) => {
                self.pos += 1;
                let ch = self.ident("channel")?;
                self.expect_sym("{")?;
                let phi = self.prop()?;
                self.expect_sym("}")?;
                let span = Span::new(start, self.prev_end());
                let cont = b(self.seq()?);
                Ok(Proc::new(
                    span,
                    if k == "assert" {
                        ProcKind::Assert { ch, phi, cont }
                    } else {
                        ProcKind::Assume { ch, phi, cont }
                    },
                ))
            }
            Some(k @ ("pay" | "get")) => {
                self.pos += 1;
                let ch = self.ident("channel")?;
                let r = self.opt_braced_exp()?;
                let span = Span::new(start, self.prev_end());
                let cont = b(self.seq()?);
                Ok(Proc::new(
                    span,
                    if k == "pay" { ProcKind::Pay { ch, r, cont } } else { ProcKind::Get { ch, r, cont } },
                ))
            }
            Some(k @ ("work" | "delay")) => {
                self.pos += 1;
                let e = self.opt_braced_exp()?;
                let span = Span::new(start, self.prev_end());
                let cont = b(self.seq()?);
                Ok(Proc::new(
                    span,
                    if k == "work" { ProcKind::Work { r: e, cont } } else { ProcKind::Delay { t: e, cont } },
                ))
            }
            Some(k @ ("when" | "now")) => {
                self.pos += 1;
                let ch = self.ident("channel")?;
                let span = Span::new(start, self.prev_end());
                let cont = b(self.seq()?);
                Ok(Proc::new(
                    span,
                    if k == "when" { ProcKind::When { ch, cont } } else { ProcKind::Now { ch, cont } },
                ))
            }
            Some("impossible") => {
                self.pos += 1;
                Ok(Proc::new(Span::new(start, self.prev_end()), ProcKind::Impossible))
            }
            Some(_) => self.error("a process expression"),
            None => match self.peek().cloned() {
                Some(TokenKind::Symbol("(")) => {
                    self.pos += 1;
                    let p = self.proc()?;
                    self.expect_sym(")")?;
                    Ok(p)
                }
                Some(TokenKind::Symbol("[")) => {
                    self.pos += 1;
                    let var = self.ident("type variable")?;
                    self.expect_sym("]")?;
                    self.expect_sym("<-")?;
                    self.expect_kw("recv")?;
                    let ch = self.ident("channel")?;
                    let span = Span::new(start, self.prev_end());
                    self.tvars.push(var.clone());
                    let cont = self.seq();
                    self.tvars.pop();
                    Ok(Proc::new(span, ProcKind::RecvType { ch, var, cont: b(cont?) }))
                }
                Some(TokenKind::Symbol("{")) => {
                    self.pos += 1;
                    let var = self.ident("index variable")?;
                    self.expect_sym("}")?;
                    self.expect_sym("<-")?;
                    self.expect_kw("recv")?;
                    let ch = self.ident("channel")?;
                    let span = Span::new(start, self.prev_end());
                    let cont = self.seq()?;
                    Ok(Proc::new(span, ProcKind::RecvIdx { ch, var, cont: b(cont) }))
                }
                Some(TokenKind::Ident(x)) => {
                    self.pos += 1;
                    if self.eat_sym(".") {
                        let label = self.ident("label")?;
                        let span = Span::new(start, self.prev_end());
                        let cont = self.seq()?;
                        return Ok(Proc::new(span, ProcKind::SendLabel { ch: x, label, cont: b(cont) }));
                    }
                    if self.eat_sym("<->") {
                        let y = self.ident("channel")?;
                        return Ok(Proc::new(Span::new(start, self.prev_end()), ProcKind::Fwd { x, y }));
                    }
                    self.expect_sym("<-")?;
                    if self.is_kw("recv") {
                        self.pos += 1;
                        let ch = self.ident("channel")?;
                        let span = Span::new(start, self.prev_end());
                        let cont = self.seq()?;
                        return Ok(Proc::new(span, ProcKind::RecvChan { ch, var: x, cont: b(cont) }));
                    }
                    let f = self.ident("process name or `recv`")?;
                    let (tps, idx) = self.type_args()?;
                    let mut args = Vec::new();
                    while self.is_ident() {
                        args.push(self.ident("channel")?);
                    }
                    let span = Span::new(start, self.prev_end());
                    let cont = if self.eat_sym(";") { Some(b(self.proc()?)) } else { None };
                    Ok(Proc::new(span, ProcKind::Spawn { x, f, tps, idx, args, cont }))
                }
                _ => self.error("a process expression"),
            },
        }
    }

    fn seq(&mut self) -> PResult<Proc> {
        self.expect_sym(";")?;
        self.proc()
    }

    fn opt_braced_exp(&mut self) -> PResult<Exp> {
        if self.eat_sym("{") {
            let e = self.exp()?;
            self.expect_sym("}")?;
            Ok(e)
        } else {
            Ok(Exp::Nat(1))
        }
    }
}


#[cfg(test)]
mod tests {
    use super::tests_support::LISTING1;
    use super::*;

    #[test]
    fn listing_one_counts() {
        let sig = parse_source(LISTING1).unwrap();
        assert_eq!(sig.types.len(), 1);
        assert_eq!(sig.procs.len(), 2);
        assert_eq!(sig.defs.len(), 2);
        let q = &sig.types["queue"];
        assert!(matches!(&q.body, Type::With(bs) if bs.len() == 2));
        let Type::With(bs) = &q.body else { unreachable!() };
        assert!(matches!(&bs[0].1, Type::Lolli(a, _) if **a == Type::Var("A".into())));
    }

    #[test]
    fn dyck_labels() {
        let sig = parse_source("type T[x] = +{L : T[T[x]], R : x}\ntype D = +{L : T[D], $ : 1}").unwrap();
        let Type::Plus(bs) = &sig.types["D"].body else { panic!() };
        let labels: Vec<_> = bs.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["L", "$"]);
        let Type::Plus(bs) = &sig.types["T"].body else { panic!() };
        assert_eq!(bs[1].1, Type::Var("x".into()));
    }

    #[test]
    fn truncated_decl_is_error() {
        let err = parse_source("decl f :").unwrap_err();
        assert_eq!(err.span, Span::new(8, 8));
        assert!(err.message.contains("expected"));
    }

    #[test]
    fn precedence() {
        let t = parse_type_str("A * B -o C * D -o E", &["A", "B", "C", "D", "E"]).unwrap();
        let v = |s: &str| Box::new(Type::Var(s.into()));
        assert_eq!(
            t,
            Type::Lolli(
                Box::new(Type::Tensor(v("A"), v("B"))),
                Box::new(Type::Lolli(Box::new(Type::Tensor(v("C"), v("D"))), v("E")))
            )
        );
        let t = parse_type_str("() A -o ()()()q", &["A"]).unwrap();
        assert!(matches!(t, Type::Next(Exp::Nat(1), ref b) if matches!(**b, Type::Lolli(..))));
        let t = parse_type_str("({3}) 1", &[]).unwrap();
        assert_eq!(t, Type::Next(Exp::Nat(3), Box::new(Type::One)));
        let e = parse_exp_str("2*k+1-n").unwrap();
        assert_eq!(
            e,
            Exp::sub(Exp::add(Exp::mul(Exp::Nat(2), Exp::var("k")), Exp::Nat(1)), Exp::var("n"))
        );
    }

    #[test]
    fn props_and_sugar() {
        assert_eq!(
            parse_prop_str("k <= n").unwrap(),
            Prop::Gt(Exp::add(Exp::var("n"), Exp::Nat(1)), Exp::var("k"))
        );
        assert_eq!(
            parse_prop_str("(n+1) > 0 /\\ ~(n = 2)").unwrap(),
            Prop::And(
                Box::new(Prop::Gt(Exp::add(Exp::var("n"), Exp::Nat(1)), Exp::Nat(0))),
                Box::new(Prop::not(Prop::Eq(Exp::var("n"), Exp::Nat(2))))
            )
        );
        assert!(matches!(parse_prop_str("?k. n = 2*k").unwrap(), Prop::Exists(..)));
    }

    #[test]
    fn decl_with_potential_and_guard() {
        let sig = parse_source("decl f{n|n > 0} : (x : bin{n-1}) |{2*n}- (y : 1)").unwrap();
        let d = &sig.procs["f"];
        assert_eq!(d.pot, Exp::mul(Exp::Nat(2), Exp::var("n")));
        assert_eq!(d.guard, Prop::Gt(Exp::var("n"), Exp::Nat(0)));
    }

    #[test]
    fn pragma_is_parsed() {
        let sig = parse_source("#options --syntax=implicit --work=send\nexec main").unwrap();
        assert_eq!(sig.pragma.syntax, Some(SyntaxMode::Implicit));
        assert_eq!(sig.pragma.work, Some(CostModel::Send));
        assert!(parse_source("#options --color=red\n").is_err());
    }
}
