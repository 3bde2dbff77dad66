//! Concrete syntax: programs, modification sequences and state dumps,
//! with positioned diagnostics and a canonical printer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;

use crate::dynprog::{Definition, DynamicProgram, Modification, Op, OpKind, ProgramBuilder, ProgramState};
use crate::logic::{Elem, Formula, Kind, Schema, Structure, Symbol, SymId, Tuple, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl Diagnostic {
    pub fn error(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { line: pos.line, column: pos.column, message: message.into(), severity: Severity::Error }
    }

    pub fn warning(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { line: pos.line, column: pos.column, message: message.into(), severity: Severity::Warning }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

pub fn format_diagnostics(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| d.to_string()).join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Nat(u64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const PUNCT: &[&str] = &[
    "<->", ":=", "!=", "&&", "||", "->", "{", "}", "(", ")", "[", "]", ",", ";", "/", "=", "!", ".", "+", "-", ":",
];

/// Splits text into tokens. `#` and `//` start line comments.
pub fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, Diagnostic> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push((Tok::Ident(s), pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let n = s.parse::<u64>().map_err(|_| Diagnostic::error(pos, format!("number {s} too large")))?;
            out.push((Tok::Nat(n), pos));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push((Tok::Sym(p), pos));
            }
            None => return Err(Diagnostic::error(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "schema", "input", "aux", "init", "on", "insert", "delete", "query", "true", "false", "exists", "forall",
];

/// Token cursor shared by the parsers of this crate.
pub struct Cursor {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

pub type PResult<T> = Result<T, Diagnostic>;

impl Cursor {
    pub fn new(text: &str) -> PResult<Self> {
        Ok(Cursor { toks: lex(text)?, at: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    pub fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(p) if *p == s)
    }

    pub fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    pub fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{k}`")))
        }
    }

    pub fn unexpected(&self, wanted: &str) -> Diagnostic {
        Diagnostic::error(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }

    /// An identifier that is not a keyword.
    pub fn name(&mut self) -> PResult<(String, Pos)> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    pub fn nat(&mut self) -> PResult<(u64, Pos)> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Ok((n, pos))
            }
            _ => Err(self.unexpected("a number")),
        }
    }
}

/// Formula parser over a fixed schema. Precedence from loosest:
/// `<->`, `->` (right associative), `||`, `&&`, then `!`, quantifiers and
/// atoms. Quantifier bodies extend as far right as possible.
pub struct FormulaParser<'a> {
    pub schema: &'a Schema,
}

impl FormulaParser<'_> {
    pub fn formula(&self, c: &mut Cursor) -> PResult<Formula> {
        let mut lhs = self.implies(c)?;
        while c.eat_sym("<->") {
            let rhs = self.implies(c)?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&self, c: &mut Cursor) -> PResult<Formula> {
        let lhs = self.or(c)?;
        if c.eat_sym("->") {
            let rhs = self.implies(c)?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&self, c: &mut Cursor) -> PResult<Formula> {
        let mut lhs = self.and(c)?;
        while c.eat_sym("||") {
            let rhs = self.and(c)?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&self, c: &mut Cursor) -> PResult<Formula> {
        let mut lhs = self.unary(c)?;
        while c.eat_sym("&&") {
            let rhs = self.unary(c)?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&self, c: &mut Cursor) -> PResult<Formula> {
        if c.eat_sym("!") {
            return Ok(Formula::not(self.unary(c)?));
        }
        if c.eat_sym("(") {
            let f = self.formula(c)?;
            c.expect_sym(")")?;
            return Ok(f);
        }
        if c.eat_kw("true") {
            return Ok(Formula::True);
        }
        if c.eat_kw("false") {
            return Ok(Formula::False);
        }
        for (kw, ex) in [("exists", true), ("forall", false)] {
            if c.eat_kw(kw) {
                let (v, _) = c.name()?;
                c.expect_sym(".")?;
                let body = Box::new(self.formula(c)?);
                return Ok(if ex { Formula::Exists(v, body) } else { Formula::Forall(v, body) });
            }
        }
        let (name, pos) = c.name().map_err(|_| c.unexpected("a formula"))?;
        if c.is_sym("(") {
            let args = parse_vars(c)?;
            let sym = self.schema.lookup(&name).ok_or_else(|| Diagnostic::error(pos, format!("unknown symbol {name}")))?;
            let ar = self.schema.arity(sym);
            if ar != args.len() {
                return Err(Diagnostic::error(pos, format!("symbol {name} has arity {ar}, used with {} arguments", args.len())));
            }
            return Ok(Formula::Atom(sym, args));
        }
        if c.eat_sym("=") {
            let (w, _) = c.name()?;
            return Ok(Formula::Eq(name, w));
        }
        if c.eat_sym("!=") {
            let (w, _) = c.name()?;
            return Ok(Formula::neq(&name, &w));
        }
        Err(Diagnostic::error(pos, format!("expected `(`, `=` or `!=` after {name}")))
    }
}

/// `"(" vars? ")"`
pub fn parse_vars(c: &mut Cursor) -> PResult<Vec<Var>> {
    c.expect_sym("(")?;
    let mut vs = Vec::new();
    if c.eat_sym(")") {
        return Ok(vs);
    }
    loop {
        vs.push(c.name()?.0);
        if c.eat_sym(")") {
            return Ok(vs);
        }
        c.expect_sym(",")?;
    }
}

pub fn parse_formula(schema: &Schema, text: &str) -> Result<Formula, Vec<Diagnostic>> {
    let mut c = Cursor::new(text).map_err(|d| vec![d])?;
    let f = FormulaParser { schema }.formula(&mut c).map_err(|d| vec![d])?;
    if !c.at_eof() {
        return Err(vec![c.unexpected("end of formula")]);
    }
    Ok(f)
}

/// `"schema" "{" decl* "}"`.
pub fn parse_schema_block(c: &mut Cursor) -> PResult<Schema> {
    c.expect_kw("schema")?;
    c.expect_sym("{")?;
    let mut syms: Vec<Symbol> = Vec::new();
    while !c.eat_sym("}") {
        let kind = if c.eat_kw("input") {
            Kind::Input
        } else if c.eat_kw("aux") {
            Kind::Aux
        } else {
            return Err(c.unexpected("`input`, `aux` or `}`"));
        };
        loop {
            let (name, pos) = c.name()?;
            c.expect_sym("/")?;
            let (ar, _) = c.nat()?;
            if syms.iter().any(|s| s.name == name) {
                return Err(Diagnostic::error(pos, format!("duplicate declaration of {name}")));
            }
            syms.push(Symbol::new(name, ar as usize, kind));
            if c.eat_sym(";") {
                break;
            }
            c.expect_sym(",")?;
        }
    }
    Schema::new(syms).map_err(|e| Diagnostic::error(c.pos(), e.to_string()))
}

/// Parses a program. On success returns the program plus warnings (one
/// per update entry filled in by the frame rule).
pub fn parse_program(text: &str) -> Result<(DynamicProgram, Vec<Diagnostic>), Vec<Diagnostic>> {
    parse_program_inner(text).map_err(|d| vec![d])
}

fn check_free(f: &Formula, allowed: &[Var], pos: Pos, what: &str) -> PResult<()> {
    for v in f.free_vars() {
        if !allowed.contains(&v) {
            return Err(Diagnostic::error(pos, format!("free variable {v} in {what} is not bound by the rule head")));
        }
    }
    Ok(())
}

fn check_distinct(vs: &[Var], pos: Pos) -> PResult<()> {
    for (i, v) in vs.iter().enumerate() {
        if vs[..i].contains(v) {
            return Err(Diagnostic::error(pos, format!("variable {v} occurs twice")));
        }
    }
    Ok(())
}

fn parse_program_inner(text: &str) -> PResult<(DynamicProgram, Vec<Diagnostic>)> {
    let mut c = Cursor::new(text)?;
    let schema = parse_schema_block(&mut c)?;
    let fp = FormulaParser { schema: &schema };
    let mut b = ProgramBuilder::new(schema.clone());
    let mut seen_init = BTreeSet::new();
    let aux_sym = |c: &Cursor, name: &str, pos: Pos| -> PResult<SymId> {
        let s = schema.lookup(name).ok_or_else(|| Diagnostic::error(pos, format!("unknown symbol {name}")))?;
        if schema.symbol(s).kind != Kind::Aux {
            return Err(Diagnostic::error(pos, format!("{name} is not an auxiliary symbol")));
        }
        let _ = c;
        Ok(s)
    };
    while c.eat_kw("init") {
        let (name, pos) = c.name()?;
        let sym = aux_sym(&c, &name, pos)?;
        let head = parse_vars(&mut c)?;
        check_distinct(&head, pos)?;
        if head.len() != schema.arity(sym) {
            return Err(Diagnostic::error(pos, format!("{name} has arity {}, head has {} variables", schema.arity(sym), head.len())));
        }
        c.expect_sym(":=")?;
        let fpos = c.pos();
        let body = fp.formula(&mut c)?;
        c.expect_sym(";")?;
        check_free(&body, &head, fpos, &format!("init {name}"))?;
        for s in body.symbols() {
            if schema.symbol(s).kind == Kind::Aux {
                return Err(Diagnostic::error(fpos, format!("initialization of {name} mentions auxiliary symbol {}", schema.name(s))));
            }
        }
        if !seen_init.insert(sym) {
            return Err(Diagnostic::error(pos, format!("duplicate init for {name}")));
        }
        b.init(sym, Definition { head, body });
    }
    let mut seen_ops = BTreeSet::new();
    while c.eat_kw("on") {
        let kpos = c.pos();
        let kind = if c.eat_kw("insert") {
            OpKind::Ins
        } else if c.eat_kw("delete") {
            OpKind::Del
        } else {
            return Err(c.unexpected("`insert` or `delete`"));
        };
        let (name, pos) = c.name()?;
        let sym = schema.lookup(&name).ok_or_else(|| Diagnostic::error(pos, format!("unknown symbol {name}")))?;
        if schema.symbol(sym).kind != Kind::Input {
            return Err(Diagnostic::error(pos, format!("{name} is not an input symbol")));
        }
        let params = parse_vars(&mut c)?;
        check_distinct(&params, pos)?;
        if params.len() != schema.arity(sym) {
            return Err(Diagnostic::error(pos, format!("{name} has arity {}, rule has {} parameters", schema.arity(sym), params.len())));
        }
        let op = Op { kind, sym };
        if !seen_ops.insert(op) {
            return Err(Diagnostic::error(kpos, format!("duplicate rule for {}", crate::dynprog::op_name(&schema, op))));
        }
        b.params_owned(op, params.clone());
        c.expect_sym("{")?;
        let mut seen = BTreeSet::new();
        while !c.eat_sym("}") {
            let (rname, rpos) = c.name()?;
            let aux = aux_sym(&c, &rname, rpos)?;
            let head = parse_vars(&mut c)?;
            if head.len() != schema.arity(aux) {
                return Err(Diagnostic::error(rpos, format!("{rname} has arity {}, head has {} variables", schema.arity(aux), head.len())));
            }
            let mut all = params.clone();
            all.extend(head.iter().cloned());
            check_distinct(&all, rpos)?;
            c.expect_sym(":=")?;
            let fpos = c.pos();
            let body = fp.formula(&mut c)?;
            c.expect_sym(";")?;
            check_free(&body, &all, fpos, &format!("update of {rname}"))?;
            if !seen.insert(aux) {
                return Err(Diagnostic::error(rpos, format!("duplicate update for {rname}")));
            }
            b.update(op, aux, Definition { head, body });
        }
    }
    if c.is_kw("init") {
        return Err(Diagnostic::error(c.pos(), "initializations must precede the update rules"));
    }
    c.expect_kw("query").map_err(|_| c.unexpected("`init`, `on` or `query`"))?;
    let (qname, qpos) = c.name()?;
    let q = aux_sym(&c, &qname, qpos)?;
    c.expect_sym(";")?;
    if !c.at_eof() {
        return Err(c.unexpected("end of input"));
    }
    b.query(q);
    let (p, warns) = b.build().map_err(|e| Diagnostic::error(qpos, e.to_string()))?;
    let end = c.pos();
    Ok((p, warns.into_iter().map(|w| Diagnostic::warning(end, w)).collect()))
}

const P_IFF: u8 = 1;
const P_IMP: u8 = 2;
const P_OR: u8 = 3;
const P_AND: u8 = 4;
const P_NOT: u8 = 5;

/// Prints a formula with minimal parentheses; quantifiers are
/// parenthesized whenever they are an operand.
pub fn print_formula(schema: &Schema, f: &Formula) -> String {
    let mut s = String::new();
    pf(schema, f, 0, &mut s);
    s
}

fn pf(schema: &Schema, f: &Formula, ctx: u8, out: &mut String) {
    let bin = |op: &str, p: u8, l: u8, r: u8, a: &Formula, b: &Formula, out: &mut String| {
        let paren = p < ctx;
        if paren {
            out.push('(');
        }
        pf(schema, a, l, out);
        out.push_str(&format!(" {op} "));
        pf(schema, b, r, out);
        if paren {
            out.push(')');
        }
    };
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Eq(a, b) => out.push_str(&format!("{a} = {b}")),
        Formula::Atom(s, vs) => out.push_str(&format!("{}({})", schema.name(*s), vs.join(", "))),
        Formula::Not(g) => match &**g {
            Formula::Eq(a, b) => out.push_str(&format!("{a} != {b}")),
            _ => {
                out.push('!');
                pf(schema, g, P_NOT, out);
            }
        },
        Formula::And(a, b) => bin("&&", P_AND, P_AND, P_AND + 1, a, b, out),
        Formula::Or(a, b) => bin("||", P_OR, P_OR, P_OR + 1, a, b, out),
        Formula::Implies(a, b) => bin("->", P_IMP, P_IMP + 1, P_IMP, a, b, out),
        Formula::Iff(a, b) => bin("<->", P_IFF, P_IFF, P_IFF + 1, a, b, out),
        Formula::Exists(v, g) | Formula::Forall(v, g) => {
            let kw = if matches!(f, Formula::Exists(..)) { "exists" } else { "forall" };
            let paren = ctx > 0;
            if paren {
                out.push('(');
            }
            out.push_str(&format!("{kw} {v}. "));
            pf(schema, g, 0, out);
            if paren {
                out.push(')');
            }
        }
    }
}

/// Canonical program text. Every update entry is printed explicitly, so
/// `parse_program(print_program(p))` reproduces `p` exactly.
pub fn print_program(p: &DynamicProgram) -> String {
    let sc = p.schema();
    let mut out = String::from("schema {\n");
    for s in sc.symbols() {
        out.push_str(&format!("  {} {}/{};\n", s.kind, s.name, s.arity));
    }
    out.push_str("}\n");
    for (&aux, def) in p.init_defs() {
        out.push_str(&format!("init {}({}) := {};\n", sc.name(aux), def.head.join(", "), print_formula(sc, &def.body)));
    }
    for (op, rule) in p.rules() {
        let kw = if op.kind == OpKind::Ins { "insert" } else { "delete" };
        out.push_str(&format!("on {kw} {}({}) {{\n", sc.name(op.sym), rule.params.join(", ")));
        for (&aux, def) in &rule.updates {
            out.push_str(&format!("  {}({}) := {};\n", sc.name(aux), def.head.join(", "), print_formula(sc, &def.body)));
        }
        out.push_str("}\n");
    }
    out.push_str(&format!("query {};\n", sc.name(p.query())));
    out
}

/// Parses a modification sequence: a `domain N` header followed by
/// `+NAME(args)` / `-NAME(args)` lines.
pub fn parse_sequence(schema: &Schema, text: &str) -> Result<(usize, Vec<Modification>), Vec<Diagnostic>> {
    parse_sequence_inner(schema, text).map_err(|d| vec![d])
}

fn parse_sequence_inner(schema: &Schema, text: &str) -> PResult<(usize, Vec<Modification>)> {
    let mut c = Cursor::new(text)?;
    if !c.is_kw("domain") {
        return Err(Diagnostic::error(c.pos(), "missing `domain N` header"));
    }
    c.bump();
    let (n, npos) = c.nat()?;
    if n == 0 {
        return Err(Diagnostic::error(npos, "domain must be non-empty"));
    }
    let mut seq = Vec::new();
    while !c.at_eof() {
        let kind = if c.eat_sym("+") {
            OpKind::Ins
        } else if c.eat_sym("-") {
            OpKind::Del
        } else {
            return Err(c.unexpected("`+` or `-`"));
        };
        let (name, pos) = c.name()?;
        let sym = schema.lookup(&name).ok_or_else(|| Diagnostic::error(pos, format!("unknown symbol {name}")))?;
        if schema.symbol(sym).kind != Kind::Input {
            return Err(Diagnostic::error(pos, format!("{name} is not an input symbol")));
        }
        c.expect_sym("(")?;
        let mut tuple: Tuple = Vec::new();
        if !c.eat_sym(")") {
            loop {
                let (e, epos) = c.nat()?;
                if e == 0 || e > n {
                    return Err(Diagnostic::error(epos, format!("element {e} outside domain 1..{n}")));
                }
                tuple.push(e as Elem);
                if c.eat_sym(")") {
                    break;
                }
                c.expect_sym(",")?;
            }
        }
        if tuple.len() != schema.arity(sym) {
            return Err(Diagnostic::error(pos, format!("{name} has arity {}, got {} arguments", schema.arity(sym), tuple.len())));
        }
        seq.push(Modification { kind, sym, tuple });
    }
    Ok((n as usize, seq))
}

pub fn print_sequence(schema: &Schema, n: usize, seq: &[Modification]) -> String {
    let mut out = format!("domain {n}\n");
    for m in seq {
        out.push_str(&format!("{}\n", m.display(schema)));
    }
    out
}

fn tuple_list(rel: &BTreeSet<Tuple>) -> String {
    format!("[{}]", rel.iter().map(|t| format!("[{}]", t.iter().join(","))).join(","))
}

/// Deterministic state dump: `domain: N`, then one `NAME: value` line per
/// relation in schema order. Bits are booleans, other relations sorted
/// arrays of integer arrays.
pub fn print_state(schema: &Schema, s: &ProgramState) -> String {
    print_structure(schema, &s.structure)
}

pub fn print_structure(schema: &Schema, s: &Structure) -> String {
    let mut out = format!("domain: {}\n", s.domain());
    for (id, sym) in schema.symbols().iter().enumerate() {
        if sym.arity == 0 {
            out.push_str(&format!("{}: {}\n", sym.name, s.bit(id)));
        } else {
            out.push_str(&format!("{}: {}\n", sym.name, tuple_list(s.relation(id))));
        }
    }
    out
}

/// Parses a `key: value` line of the report/state dialect.
pub fn split_key_value(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once(':')?;
    Some((k.trim(), v.trim()))
}

/// Inverse of [`print_state`].
pub fn parse_state(schema: &Schema, text: &str) -> Result<ProgramState, Vec<Diagnostic>> {
    let err = |line: usize, msg: String| vec![Diagnostic::error(Pos { line, column: 1 }, msg)];
    let mut domain = None;
    let mut rels: BTreeMap<SymId, BTreeSet<Tuple>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = split_key_value(line).ok_or_else(|| err(ln, "expected `key: value`".into()))?;
        let value: serde_json::Value = serde_json::from_str(v).map_err(|e| err(ln, format!("bad value: {e}")))?;
        if k == "domain" {
            domain = Some(value.as_u64().filter(|&n| n >= 1).ok_or_else(|| err(ln, "domain must be a positive integer".into()))? as usize);
            continue;
        }
        let sym = schema.lookup(k).ok_or_else(|| err(ln, format!("unknown symbol {k}")))?;
        let ar = schema.arity(sym);
        let mut set = BTreeSet::new();
        if ar == 0 {
            if value.as_bool().ok_or_else(|| err(ln, format!("{k} is a bit, expected true or false")))? {
                set.insert(Vec::new());
            }
        } else {
            let arr = value.as_array().ok_or_else(|| err(ln, format!("{k}: expected an array of tuples")))?;
            for t in arr {
                let t: Option<Tuple> = t.as_array().and_then(|xs| xs.iter().map(|x| x.as_u64().map(|e| e as Elem)).collect());
                let t = t.ok_or_else(|| err(ln, format!("{k}: tuples must be arrays of integers")))?;
                if t.len() != ar {
                    return Err(err(ln, format!("{k}: tuple of length {} for arity {ar}", t.len())));
                }
                set.insert(t);
            }
        }
        if rels.insert(sym, set).is_some() {
            return Err(err(ln, format!("duplicate key {k}")));
        }
    }
    let n = domain.ok_or_else(|| err(1, "missing domain".into()))?;
    let mut s = Structure::empty(schema, n);
    for (sym, set) in rels {
        s.set_relation(sym, set);
    }
    s.validate(schema).map_err(|e| err(1, e.to_string()))?;
    Ok(ProgramState { structure: s })
}
