//! Text syntax for expressions, formulas, programs, labels and sequents.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{Expr, Int};
use crate::formula::{CmpOp, Formula};
use crate::label::{Label, LabelError, Store, StoreHeap};
use crate::program::{InstKind, Instantiation, Program};
use crate::sequent::{LFormula, Sequent};
use crate::subst::Subst;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
}

const KEYWORDS: &[&str] = &[
    "true", "false", "if", "then", "else", "end", "while", "do", "first", "Suf", "dispose", "cons",
    "ter", "halts", "eventually", "next",
];

const SYMBOLS: &[&str] = &[
    "|->", "|-", "||", ":=", "->", "=>", "<=", ">=", "&&", "**", "(", ")", "[", "]", "{", "}", ",",
    ";", ":", "+", "-", "*", "/", "=", "<", ">", "!", "?", ".", "@", "|",
];

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(Int),
    Ident(String),
    Sym(&'static str),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: Int = src[start..i].parse().map_err(|_| ParseError {
                message: format!("integer literal `{}` out of range", &src[start..i]),
                offset: start,
            })?;
            out.push((Tok::Int(n), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                out.push((Tok::Sym(s), i));
                i += s.len();
            }
            None => {
                return Err(ParseError {
                    message: format!("unexpected character `{c}`"),
                    offset: i,
                })
            }
        }
    }
    Ok(out)
}

/// Named definitions visible to the parser, plus the instantiation that fixes label shapes.
#[derive(Clone, Debug)]
pub struct Env {
    pub inst: Instantiation,
    pub programs: BTreeMap<String, Program>,
    pub formulas: BTreeMap<String, Formula>,
    pub labels: BTreeMap<String, Label>,
}

impl Env {
    pub fn new(inst: Instantiation) -> Env {
        Env {
            inst,
            programs: BTreeMap::new(),
            formulas: BTreeMap::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> InstKind {
        self.inst.kind
    }
}

pub struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_offset: usize,
    env: &'a Env,
    in_program: usize,
}

pub type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    pub fn new(src: &str, env: &'a Env) -> PResult<Parser<'a>> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            end_offset: src.len(),
            env,
            in_program: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_offset, |(_, o)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            message: message.into(),
            offset: self.offset(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(t)) if *t == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(t)) if t == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Int(n)) => format!("`{n}`"),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Sym(s)) => format!("`{s}`"),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn expect_end(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.err(format!("unexpected {}", self.describe()))
        }
    }

    /// Byte offset of the next token, for callers that split input by hand.
    pub fn position(&self) -> usize {
        self.offset()
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    pub fn int_literal(&mut self) -> PResult<Int> {
        let neg = self.eat_sym("-");
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(if neg { -n } else { n })
            }
            _ => self.err(format!("expected integer, found {}", self.describe())),
        }
    }

    fn attempt<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> Option<T> {
        let save = self.pos;
        match f(self) {
            Ok(v) => Some(v),
            Err(_) => {
                self.pos = save;
                None
            }
        }
    }

    // ---- expressions

    pub fn expr(&mut self) -> PResult<Expr> {
        let mut e = self.term()?;
        loop {
            if self.is_sym("+") {
                if self.in_program > 0 && self.plus_starts_program() {
                    break;
                }
                self.pos += 1;
                e = e + self.term()?;
            } else if self.eat_sym("-") {
                e = e - self.term()?;
            } else {
                break;
            }
        }
        Ok(e)
    }

    /// Inside programs `+` is also choice; decide by looking past it.
    fn plus_starts_program(&mut self) -> bool {
        match (self.peek_at(1), self.peek_at(2)) {
            (Some(Tok::Ident(_)), Some(Tok::Sym(":="))) => return true,
            (Some(Tok::Ident(k)), _)
                if ["if", "while", "dispose", "ter", "true", "false"].contains(&k.as_str()) =>
            {
                return true
            }
            (Some(Tok::Ident(k)), _) if self.env.programs.contains_key(k) => return true,
            (Some(Tok::Sym("[")), _) | (Some(Tok::Sym("!")), _) => return true,
            _ => {}
        }
        let save = self.pos;
        self.pos += 1;
        let ok = self.term().is_ok();
        let follows_program = matches!(self.peek(), Some(Tok::Sym(":=" | "?")));
        self.pos = save;
        !ok || follows_program
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            if self.is_sym("*") && self.starts_factor(1) {
                self.pos += 1;
                e = e * self.unary()?;
            } else if self.is_sym("/") && self.starts_int(1) {
                self.pos += 1;
                let d = self.int_literal()?;
                e = Expr::div(e, d).map_err(|_| ParseError {
                    message: "division by zero".into(),
                    offset: self.offset(),
                })?;
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn starts_factor(&self, k: usize) -> bool {
        match self.peek_at(k) {
            Some(Tok::Int(_)) | Some(Tok::Sym("(")) | Some(Tok::Sym("-")) => true,
            Some(Tok::Ident(s)) => !KEYWORDS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn starts_int(&self, k: usize) -> bool {
        match (self.peek_at(k), self.peek_at(k + 1)) {
            (Some(Tok::Int(_)), _) => true,
            (Some(Tok::Sym("-")), Some(Tok::Int(_))) => true,
            _ => false,
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            if let Some(Tok::Int(n)) = self.peek() {
                let n = *n;
                self.pos += 1;
                return Ok(Expr::Int(-n));
            }
            return Ok(-self.unary()?);
        }
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(Expr::Int(n))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Ok(Expr::Var(self.ident()?)),
        }
    }

    // ---- formulas

    pub fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if self.eat_sym("->") {
            let rhs = self.formula()?;
            return Ok(Formula::imp(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut f = self.conjunction()?;
        while self.eat_sym("||") {
            f = Formula::or(f, self.conjunction()?);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut f = self.separating()?;
        while self.eat_sym("&&") {
            f = Formula::and(f, self.separating()?);
        }
        Ok(f)
    }

    fn separating(&mut self) -> PResult<Formula> {
        let mut f = self.until()?;
        while self.eat_sym("**") {
            f = Formula::sep(f, self.until()?);
        }
        Ok(f)
    }

    fn until(&mut self) -> PResult<Formula> {
        let mut f = self.unary_formula()?;
        while self.eat_kw("Suf") {
            f = Formula::suf(f, self.unary_formula()?);
        }
        Ok(f)
    }

    fn unary_formula(&mut self) -> PResult<Formula> {
        if self.eat_sym("!") {
            return Ok(Formula::not(self.unary_formula()?));
        }
        if self.eat_kw("first") {
            return Ok(Formula::first(self.unary_formula()?));
        }
        if self.eat_kw("eventually") {
            return Ok(Formula::eventually(self.unary_formula()?));
        }
        if self.eat_kw("next") {
            return Ok(Formula::next(self.unary_formula()?));
        }
        if self.eat_sym("[") {
            let p = self.program_nested()?;
            self.expect_sym("]")?;
            return Ok(Formula::boxed(p, self.unary_formula()?));
        }
        if self.eat_sym("<") {
            let p = self.program_nested()?;
            self.expect_sym(">")?;
            return Ok(Formula::dia(p, self.unary_formula()?));
        }
        self.atomic_formula()
    }

    fn program_nested(&mut self) -> PResult<Program> {
        let saved = self.in_program;
        self.in_program += 1;
        let r = self.program();
        self.in_program = saved;
        r
    }

    fn atomic_formula(&mut self) -> PResult<Formula> {
        if self.eat_kw("true") {
            return Ok(Formula::True);
        }
        if self.eat_kw("false") {
            return Ok(Formula::False);
        }
        if let Some(Tok::Ident(name)) = self.peek() {
            if let Some(f) = self.env.formulas.get(name) {
                let next_is_op = matches!(
                    self.peek_at(1),
                    Some(Tok::Sym("+" | "-" | "*" | "/" | "=" | "<" | "<=" | ">" | ">=" | "|->"))
                );
                if !next_is_op {
                    let f = f.clone();
                    self.pos += 1;
                    return Ok(f);
                }
            }
        }
        if self.is_sym("(") {
            if let Some(f) = self.attempt(|p| p.comparison()) {
                return Ok(f);
            }
            self.pos += 1;
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Sym("=")) => CmpOp::Eq,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            Some(Tok::Sym("|->")) => {
                self.pos += 1;
                return Ok(Formula::PointsTo(lhs, self.expr()?));
            }
            _ => return self.err(format!("expected comparison, found {}", self.describe())),
        };
        self.pos += 1;
        Ok(Formula::Cmp(lhs, op, self.expr()?))
    }

    // ---- programs

    pub fn program(&mut self) -> PResult<Program> {
        let saved = self.in_program;
        self.in_program = saved.max(1);
        let r = self.choice();
        self.in_program = saved;
        r
    }

    fn choice(&mut self) -> PResult<Program> {
        let first = self.sequence()?;
        if self.eat_sym("+") {
            let rest = self.choice()?;
            return Ok(Program::choice(first, rest));
        }
        Ok(first)
    }

    fn sequence(&mut self) -> PResult<Program> {
        let first = self.postfix()?;
        if self.eat_sym(";") {
            let rest = self.sequence()?;
            return Ok(Program::seq(first, rest));
        }
        Ok(first)
    }

    fn postfix(&mut self) -> PResult<Program> {
        let mut p = self.primary_program()?;
        while self.eat_sym("*") {
            p = Program::star(p);
        }
        Ok(p)
    }

    fn primary_program(&mut self) -> PResult<Program> {
        if self.eat_kw("ter") {
            return Ok(Program::Ter);
        }
        if self.eat_kw("if") {
            let c = self.formula()?;
            self.expect_kw("then")?;
            let a = self.program()?;
            self.expect_kw("else")?;
            let b = self.program()?;
            self.expect_kw("end")?;
            return Ok(Program::ite(c, a, b));
        }
        if self.eat_kw("while") {
            let c = self.formula()?;
            self.expect_kw("do")?;
            let body = self.program()?;
            self.expect_kw("end")?;
            return Ok(Program::while_do(c, body));
        }
        if self.eat_kw("dispose") {
            self.expect_sym("(")?;
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(Program::Dispose(e));
        }
        if self.eat_sym("[") {
            let a = self.expr()?;
            self.expect_sym("]")?;
            self.expect_sym(":=")?;
            return Ok(Program::Store(a, self.expr()?));
        }
        if let (Some(Tok::Ident(x)), Some(Tok::Sym(":="))) = (self.peek(), self.peek_at(1)) {
            let x = x.clone();
            if KEYWORDS.contains(&x.as_str()) {
                return self.err(format!("`{x}` is a keyword"));
            }
            self.pos += 2;
            if self.eat_kw("cons") {
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                return Ok(Program::Alloc(x, e));
            }
            if self.eat_sym("[") {
                let e = self.expr()?;
                self.expect_sym("]")?;
                return Ok(Program::Load(x, e));
            }
            return Ok(Program::Assign(x, self.expr()?));
        }
        if let Some(Tok::Ident(name)) = self.peek() {
            if let Some(p) = self.env.programs.get(name) {
                let p = p.clone();
                self.pos += 1;
                return Ok(p);
            }
        }
        if self.is_sym("(") {
            let grouped = self.attempt(|p| {
                p.pos += 1;
                let inner = p.program()?;
                p.expect_sym(")")?;
                if p.is_sym("?") {
                    return p.err("test");
                }
                Ok(inner)
            });
            if let Some(inner) = grouped {
                return Ok(inner);
            }
        }
        let c = self.formula()?;
        self.expect_sym("?")?;
        Ok(Program::Test(c))
    }

    // ---- labels and sequents

    fn store(&mut self) -> PResult<Vec<(String, Expr)>> {
        self.expect_sym("{")?;
        let mut entries = Vec::new();
        if !self.eat_sym("}") {
            loop {
                let x = self.ident()?;
                self.expect_sym("->")?;
                entries.push((x, self.expr()?));
                if self.eat_sym("}") {
                    break;
                }
                self.expect_sym(",")?;
            }
        }
        Ok(entries)
    }

    pub fn heap(&mut self) -> PResult<BTreeMap<Int, Int>> {
        self.expect_sym("{")?;
        let mut heap = BTreeMap::new();
        if !self.eat_sym("}") {
            loop {
                let a = self.int_literal()?;
                self.expect_sym("->")?;
                let v = self.int_literal()?;
                if heap.insert(a, v).is_some() {
                    return self.err(format!("address {a} listed twice"));
                }
                if self.eat_sym("}") {
                    break;
                }
                self.expect_sym(",")?;
            }
        }
        Ok(heap)
    }

    fn checked_store(&self, entries: Vec<(String, Expr)>) -> PResult<Store> {
        Store::new(entries).map_err(|e| self.label_err(e))
    }

    fn label_err(&self, e: LabelError) -> ParseError {
        ParseError {
            message: e.to_string(),
            offset: self.offset(),
        }
    }

    pub fn label(&mut self) -> PResult<Label> {
        if let Some(Tok::Ident(name)) = self.peek() {
            if let Some(l) = self.env.labels.get(name) {
                let l = l.clone();
                self.pos += 1;
                return Ok(l);
            }
            return self.err(format!("unknown label `{name}`"));
        }
        let first = self.store()?;
        match self.env.kind() {
            InstKind::Sl => {
                let mut store = BTreeMap::new();
                for (x, e) in first {
                    let n = e.normalize().as_literal().ok_or_else(|| ParseError {
                        message: format!("store value `{e}` must be an integer"),
                        offset: self.offset(),
                    })?;
                    store.insert(x, n);
                }
                let heap = if self.eat_sym("@") { self.heap()? } else { BTreeMap::new() };
                Ok(Label::Heap(StoreHeap::new(store, heap).map_err(|e| self.label_err(e))?))
            }
            InstKind::Pl => {
                let mut seq = vec![self.checked_store(first)?];
                while self.eat_sym(".") {
                    let next = self.store()?;
                    seq.push(self.checked_store(next)?);
                }
                Ok(Label::Seq(seq))
            }
            InstKind::Wp | InstKind::Fodl => Ok(Label::Store(self.checked_store(first)?)),
        }
    }

    pub fn lformula(&mut self) -> PResult<LFormula> {
        if self.eat_sym("(") {
            let from = self.program()?;
            self.expect_sym(",")?;
            let src = self.label()?;
            self.expect_sym(")")?;
            self.expect_sym("=>")?;
            self.expect_sym("(")?;
            let to = self.program()?;
            self.expect_sym(",")?;
            let dst = self.label()?;
            self.expect_sym(")")?;
            if from.is_ter() {
                return self.err("a transition cannot start from the terminated program");
            }
            return Ok(LFormula::Transition { from, src, to, dst });
        }
        let l = self.label()?;
        if self.eat_kw("halts") {
            self.expect_sym("(")?;
            let p = self.program()?;
            self.expect_sym(")")?;
            return Ok(LFormula::Termination(l, p));
        }
        self.expect_sym(":")?;
        let f = self.formula()?;
        Ok(LFormula::Labeled(l, f))
    }

    fn lformula_list(&mut self, stop: &[&str]) -> PResult<Vec<LFormula>> {
        let mut out = Vec::new();
        if self.at_end() || stop.iter().any(|s| self.is_sym(s)) {
            return Ok(out);
        }
        loop {
            out.push(self.lformula()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        Ok(out)
    }

    pub fn sequent(&mut self) -> PResult<Sequent> {
        let left = self.lformula_list(&["|-"])?;
        self.expect_sym("|-")?;
        let right = self.lformula_list(&[])?;
        Ok(Sequent::new(left, right))
    }

    /// `[e/x, ...]`
    pub fn subst(&mut self) -> PResult<Subst> {
        self.expect_sym("[")?;
        let mut map = BTreeMap::new();
        if !self.eat_sym("]") {
            loop {
                let e = self.expr()?;
                self.expect_sym("/")?;
                let x = self.ident()?;
                map.insert(x, e);
                if self.eat_sym("]") {
                    break;
                }
                self.expect_sym(",")?;
            }
        }
        Ok(Subst::new(map))
    }

    pub fn peek_word(&self) -> Option<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s.clone()),
            Some(Tok::Int(n)) => Some(n.to_string()),
            Some(Tok::Sym(s)) => Some(s.to_string()),
            None => None,
        }
    }

    pub fn word(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected a word, found {}", self.describe())),
        }
    }

    pub fn number(&mut self) -> PResult<usize> {
        match self.peek() {
            Some(Tok::Int(n)) if *n >= 0 => {
                let n = *n as usize;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err(format!("expected a number, found {}", self.describe())),
        }
    }

    pub fn fail<T>(&self, message: impl Into<String>) -> PResult<T> {
        self.err(message)
    }

    pub fn eat_word(&mut self, w: &str) -> bool {
        self.eat_kw(w)
    }

    pub fn eat_symbol(&mut self, s: &str) -> bool {
        self.eat_sym(s)
    }

    pub fn expect_symbol(&mut self, s: &str) -> PResult<()> {
        self.expect_sym(s)
    }
}

fn whole<T>(src: &str, env: &Env, f: impl FnOnce(&mut Parser<'_>) -> PResult<T>) -> PResult<T> {
    let mut p = Parser::new(src, env)?;
    let v = f(&mut p)?;
    p.expect_end()?;
    Ok(v)
}

fn validated<T>(r: PResult<T>, check: impl FnOnce(&T) -> Result<(), String>) -> PResult<T> {
    let v = r?;
    check(&v).map_err(|message| ParseError { message, offset: 0 })?;
    Ok(v)
}

pub fn parse_expr(src: &str, env: &Env) -> PResult<Expr> {
    whole(src, env, |p| p.expr())
}

pub fn parse_formula(src: &str, env: &Env) -> PResult<Formula> {
    validated(whole(src, env, |p| p.formula()), |f| env.inst.check_formula(f))
}

pub fn parse_program(src: &str, env: &Env) -> PResult<Program> {
    validated(whole(src, env, |p| p.program()), |p| env.inst.check_program(p))
}

pub fn parse_label(src: &str, env: &Env) -> PResult<Label> {
    whole(src, env, |p| p.label())
}

pub fn parse_lformula(src: &str, env: &Env) -> PResult<LFormula> {
    validated(whole(src, env, |p| p.lformula()), |f| check_lformula(env, f))
}

pub fn parse_sequent(src: &str, env: &Env) -> PResult<Sequent> {
    validated(whole(src, env, |p| p.sequent()), |s| {
        s.left.iter().chain(&s.right).try_for_each(|f| check_lformula(env, f))
    })
}

pub fn parse_subst(src: &str, env: &Env) -> PResult<Subst> {
    whole(src, env, |p| p.subst())
}

pub fn check_lformula(env: &Env, f: &LFormula) -> Result<(), String> {
    let check_label = |l: &Label| {
        if l.kind_matches(env.kind()) {
            Ok(())
        } else {
            Err(format!("label `{l}` does not fit the {} instantiation", env.kind()))
        }
    };
    match f {
        LFormula::Labeled(l, phi) => {
            check_label(l)?;
            env.inst.check_formula(phi)
        }
        LFormula::Transition { from, src, to, dst } => {
            check_label(src)?;
            check_label(dst)?;
            env.inst.check_program(from)?;
            env.inst.check_program(to)
        }
        LFormula::Termination(l, p) => {
            check_label(l)?;
            env.inst.check_program(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp() -> Env {
        Env::new(Instantiation::wp())
    }

    #[test]
    fn division_binds_to_the_product() {
        let e = parse_expr("(2*N - m + 1)*m/2", &wp()).unwrap();
        assert!(matches!(e, Expr::Div(_, 2)));
    }

    #[test]
    fn formula_round_trip() {
        let env = wp();
        for src in [
            "s = ((N + 1)*N)/2",
            "[while n > 0 do s := s + n; n := n - 1 end](s = 15)",
            "!(x > 0) -> y <= 3 || z = 1 && true",
            "<x := x + 1>(x > 0)",
            "(x + 1)*2 >= -3",
        ] {
            let f = parse_formula(src, &env).unwrap();
            let printed = f.to_string();
            assert_eq!(parse_formula(&printed, &env).unwrap(), f, "{src} -> {printed}");
        }
    }

    #[test]
    fn regular_programs_parse() {
        let env = Env::new(Instantiation::fodl());
        let p = parse_program("((n > 0)?; s := s + n; n := n - 1)*; (!(n > 0))?", &env).unwrap();
        let printed = p.to_string();
        assert_eq!(parse_program(&printed, &env).unwrap(), p);
        let c = parse_program("x := 1 + x := 2", &env).unwrap();
        assert!(matches!(c, Program::Choice(..)));
        let c = parse_program("x := y + 1 + z := 2", &env).unwrap();
        assert_eq!(c.to_string(), "x := y + 1 + z := 2");
    }

    #[test]
    fn foreign_connectives_are_rejected() {
        assert!(parse_formula("x |-> 1 ** y |-> 1", &wp()).is_err());
        assert!(parse_formula("first (x > 0)", &wp()).is_err());
        assert!(parse_program("(x > 0)?", &wp()).is_err());
        let sl = Env::new(Instantiation::sl());
        assert!(parse_formula("x |-> 1 ** y |-> 1", &sl).is_ok());
        assert!(parse_program("while x > 0 do x := x - 1 end", &sl).is_err());
    }

    #[test]
    fn sequents_and_labels() {
        let env = wp();
        let s = parse_sequent("{x -> t} : t >= 0 |- {x -> t} : x + 1 > 0", &env).unwrap();
        assert_eq!(s.left.len(), 1);
        assert_eq!(s.right.len(), 1);
        assert_eq!(parse_sequent(&s.to_string(), &env).unwrap(), s);
        let empty = parse_sequent("|- {} : x > 0", &env).unwrap();
        assert!(empty.left.is_empty());
        let pl = Env::new(Instantiation::pl());
        let l = parse_label("{x -> -1}.{x -> 0}", &pl).unwrap();
        assert!(matches!(l, Label::Seq(ref v) if v.len() == 2));
        let sl = Env::new(Instantiation::sl());
        let h = parse_label("{x -> 37, y -> 38} @ {37 -> 1, 38 -> 1}", &sl).unwrap();
        assert_eq!(parse_label(&h.to_string(), &sl).unwrap(), h);
        let t = parse_lformula("(x := x + 1, {x -> t}) => (ter, {x -> t + 1})", &env).unwrap();
        assert!(matches!(t, LFormula::Transition { .. }));
    }

    #[test]
    fn substitutions() {
        let s = parse_subst("[m + 1/m, 0/k]", &wp()).unwrap();
        assert_eq!(s.get("k"), Some(&Expr::Int(0)));
        assert_eq!(s.to_string(), "[0/k, m + 1/m]");
    }

    #[test]
    fn heap_programs() {
        let sl = Env::new(Instantiation::sl());
        let p = parse_program("x := cons(1); y := cons(1); [y] := 37; y := [x + 1]; dispose(x + 1)", &sl)
            .unwrap();
        assert_eq!(parse_program(&p.to_string(), &sl).unwrap(), p);
    }
}
