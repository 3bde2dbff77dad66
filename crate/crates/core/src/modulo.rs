//! Set types and modulo expressions: direct evaluation on structures, a
//! compiler to consistent quantifier-free programs with 0-ary aux
//! relations, a bounded equivalence check and the set normal form for
//! insertion sequences.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::dsl::{parse_schema_block, Cursor, Diagnostic, PResult, Pos, Tok};
use crate::dynprog::{all_ops, Definition, DynamicProgram, Modification, OpKind, ProgramBuilder, ProgramState, SeqMode};
use crate::logic::{equality_patterns, Elem, Formula, Kind, Schema, Structure, Symbol, SymId, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModuloError {
    #[error("{0}")]
    Parse(Diagnostic),
    #[error("modulus {p} with residue {q}: need p >= 2 and q < p")]
    Modulus { p: u32, q: u32 },
    #[error("the set type has no atoms")]
    EmptySetType,
    #[error("the listed strict types are not one permutation class")]
    NotAnOrbit,
    #[error("set type of {k} elements exceeds the maximal input arity {max}")]
    ArityTooLarge { k: usize, max: usize },
    #[error("atom {0} does not use every position exactly as a strict atom")]
    NotStrict(String),
    #[error("{0} is not an input symbol of the schema")]
    UnknownSymbol(String),
    #[error("the query of the program is not a bit")]
    QueryNotBit,
    #[error("the program has input symbols {program:?}, the expression {expression:?}")]
    SchemaMismatch { program: Vec<String>, expression: Vec<String> },
}

/// `R(x_{pos_1}, ..., x_{pos_r})` with 0-based positions that cover
/// `0..k` exactly.
pub type StrictAtom = (SymId, Vec<usize>);

/// A strict atomic k-type: the strict atoms that hold.
pub type KType = BTreeSet<StrictAtom>;

/// All strict atoms over `k` positions for the input symbols of `schema`.
pub fn strict_atoms(schema: &Schema, k: usize) -> Vec<StrictAtom> {
    let mut out = Vec::new();
    for s in schema.input_ids() {
        let r = schema.arity(s);
        if k == 0 {
            if r == 0 {
                out.push((s, Vec::new()));
            }
            continue;
        }
        if r < k {
            continue;
        }
        for pos in (0..r).map(|_| 0..k).multi_cartesian_product() {
            if (0..k).all(|i| pos.contains(&i)) {
                out.push((s, pos));
            }
        }
    }
    out
}

/// The strict atomic type of the duplicate-free tuple `a`.
pub fn ktype(s: &Structure, atoms: &[StrictAtom], a: &[Elem]) -> KType {
    atoms
        .iter()
        .filter(|(sym, pos)| {
            let t: Vec<Elem> = pos.iter().map(|&i| a[i]).collect();
            s.contains(*sym, &t)
        })
        .cloned()
        .collect()
}

fn permute(t: &KType, sigma: &[usize]) -> KType {
    t.iter().map(|(s, pos)| (*s, pos.iter().map(|&i| sigma[i]).collect())).collect()
}

/// The permutation class of a strict k-type over the sets of size `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetType {
    k: usize,
    types: BTreeSet<KType>,
}

impl SetType {
    /// The class of `t` under all position permutations.
    pub fn from_ktype(k: usize, t: &KType) -> Self {
        let types = (0..k).permutations(k).map(|sigma| permute(t, &sigma)).collect();
        SetType { k, types }
    }

    /// Accepts exactly one permutation class, listed in part or in full.
    pub fn from_types(k: usize, listed: &BTreeSet<KType>) -> Result<Self, ModuloError> {
        let first = listed.iter().next().ok_or(ModuloError::NotAnOrbit)?;
        let class = SetType::from_ktype(k, first);
        if listed.is_subset(&class.types) {
            Ok(class)
        } else {
            Err(ModuloError::NotAnOrbit)
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn types(&self) -> &BTreeSet<KType> {
        &self.types
    }

    /// True iff no atom holds for sets of this type.
    pub fn is_empty_type(&self) -> bool {
        self.types.iter().all(|t| t.is_empty())
    }

    /// The least strict type of the class.
    pub fn canonical(&self) -> &KType {
        self.types.iter().next().expect("a class is never empty")
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> impl fmt::Display + 'a {
        SetTypeDisplay(self, schema)
    }

    fn map_symbols(&self, map: &impl Fn(SymId) -> SymId) -> SetType {
        let types = self.types.iter().map(|t| t.iter().map(|(s, pos)| (map(*s), pos.clone())).collect()).collect();
        SetType { k: self.k, types }
    }
}

struct SetTypeDisplay<'a>(&'a SetType, &'a Schema);

impl fmt::Display for SetTypeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let types = self.0.types.iter().map(|t| {
            let atoms = t.iter().map(|(s, pos)| format!("{}({})", self.1.name(*s), pos.iter().map(|i| i + 1).join(",")));
            format!("{{{}}}", atoms.format(", "))
        });
        write!(f, "[{}]", types.format(", "))
    }
}

/// The set type of `set` in `s`, over the input symbols of `schema`.
pub fn set_type(schema: &Schema, s: &Structure, set: &BTreeSet<Elem>) -> SetType {
    let a: Vec<Elem> = set.iter().copied().collect();
    let atoms = strict_atoms(schema, a.len());
    SetType::from_ktype(a.len(), &ktype(s, &atoms, &a))
}

/// The number of sets of type `gamma` in `s`.
pub fn count_set_type(schema: &Schema, s: &Structure, gamma: &SetType) -> usize {
    let atoms = strict_atoms(schema, gamma.k);
    s.elements().combinations(gamma.k).filter(|a| gamma.types.contains(&ktype(s, &atoms, a))).count()
}

/// A Boolean combination of constraints `#(gamma) = q mod p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModuloExpression {
    Simple { gamma: SetType, p: u32, q: u32 },
    Not(Box<ModuloExpression>),
    And(Box<ModuloExpression>, Box<ModuloExpression>),
    Or(Box<ModuloExpression>, Box<ModuloExpression>),
}

impl ModuloExpression {
    pub fn simple(gamma: SetType, p: u32, q: u32) -> Result<Self, ModuloError> {
        if p < 2 || q >= p {
            return Err(ModuloError::Modulus { p, q });
        }
        if gamma.is_empty_type() {
            return Err(ModuloError::EmptySetType);
        }
        Ok(ModuloExpression::Simple { gamma, p, q })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: ModuloExpression) -> Self {
        ModuloExpression::Not(Box::new(e))
    }

    pub fn and(a: ModuloExpression, b: ModuloExpression) -> Self {
        ModuloExpression::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: ModuloExpression, b: ModuloExpression) -> Self {
        ModuloExpression::Or(Box::new(a), Box::new(b))
    }

    /// Simple subexpressions, left to right.
    pub fn simples(&self) -> Vec<(&SetType, u32, u32)> {
        let mut out = Vec::new();
        fn rec<'a>(e: &'a ModuloExpression, out: &mut Vec<(&'a SetType, u32, u32)>) {
            match e {
                ModuloExpression::Simple { gamma, p, q } => out.push((gamma, *p, *q)),
                ModuloExpression::Not(a) => rec(a, out),
                ModuloExpression::And(a, b) | ModuloExpression::Or(a, b) => {
                    rec(a, out);
                    rec(b, out);
                }
            }
        }
        rec(self, &mut out);
        out
    }

    /// Evaluates the Boolean structure, taking simple subexpression `j`
    /// from `leaf(j)`.
    pub fn combine<T>(&self, leaf: &mut impl FnMut(usize) -> T, not: &impl Fn(T) -> T, and: &impl Fn(T, T) -> T, or: &impl Fn(T, T) -> T) -> T {
        fn rec<T>(
            e: &ModuloExpression,
            next: &mut usize,
            leaf: &mut impl FnMut(usize) -> T,
            not: &impl Fn(T) -> T,
            and: &impl Fn(T, T) -> T,
            or: &impl Fn(T, T) -> T,
        ) -> T {
            match e {
                ModuloExpression::Simple { .. } => {
                    *next += 1;
                    leaf(*next - 1)
                }
                ModuloExpression::Not(a) => {
                    let x = rec(a, next, leaf, not, and, or);
                    not(x)
                }
                ModuloExpression::And(a, b) => {
                    let x = rec(a, next, leaf, not, and, or);
                    let y = rec(b, next, leaf, not, and, or);
                    and(x, y)
                }
                ModuloExpression::Or(a, b) => {
                    let x = rec(a, next, leaf, not, and, or);
                    let y = rec(b, next, leaf, not, and, or);
                    or(x, y)
                }
            }
        }
        rec(self, &mut 0, leaf, not, and, or)
    }

    pub fn map_symbols(&self, map: &impl Fn(SymId) -> SymId) -> ModuloExpression {
        match self {
            ModuloExpression::Simple { gamma, p, q } => ModuloExpression::Simple { gamma: gamma.map_symbols(map), p: *p, q: *q },
            ModuloExpression::Not(a) => ModuloExpression::not(a.map_symbols(map)),
            ModuloExpression::And(a, b) => ModuloExpression::and(a.map_symbols(map), b.map_symbols(map)),
            ModuloExpression::Or(a, b) => ModuloExpression::or(a.map_symbols(map), b.map_symbols(map)),
        }
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> impl fmt::Display + 'a {
        ExprDisplay(self, schema, true)
    }
}

struct ExprDisplay<'a>(&'a ModuloExpression, &'a Schema, bool);

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sc = self.1;
        let (a, b, op) = match self.0 {
            ModuloExpression::Simple { gamma, p, q } => return write!(f, "count {} mod {p} = {q}", gamma.display(sc)),
            ModuloExpression::Not(a) => return write!(f, "!{}", ExprDisplay(a, sc, false)),
            ModuloExpression::And(a, b) => (a, b, "&&"),
            ModuloExpression::Or(a, b) => (a, b, "||"),
        };
        let inner = format!("{} {op} {}", ExprDisplay(a, sc, false), ExprDisplay(b, sc, false));
        if self.2 {
            write!(f, "{inner}")
        } else {
            write!(f, "({inner})")
        }
    }
}

pub fn eval_modexpr(schema: &Schema, s: &Structure, e: &ModuloExpression) -> bool {
    let simples = e.simples();
    e.combine(
        &mut |j| {
            let (gamma, p, q) = simples[j];
            count_set_type(schema, s, gamma) as u64 % p as u64 == q as u64
        },
        &|x| !x,
        &|x, y| x && y,
        &|x, y| x || y,
    )
}

// ---------------------------------------------------------------------
// Text syntax: `count [{E(1,2)}] mod 3 = 1 && !count [{U(1)}] mod 2 = 0`.

struct ExprParser<'a> {
    schema: &'a Schema,
}

impl ExprParser<'_> {
    fn expr(&self, c: &mut Cursor) -> PResult<ModuloExpression> {
        let mut lhs = self.conj(c)?;
        while c.eat_sym("||") {
            lhs = ModuloExpression::or(lhs, self.conj(c)?);
        }
        Ok(lhs)
    }

    fn conj(&self, c: &mut Cursor) -> PResult<ModuloExpression> {
        let mut lhs = self.unary(c)?;
        while c.eat_sym("&&") {
            lhs = ModuloExpression::and(lhs, self.unary(c)?);
        }
        Ok(lhs)
    }

    fn unary(&self, c: &mut Cursor) -> PResult<ModuloExpression> {
        if c.eat_sym("!") {
            return Ok(ModuloExpression::not(self.unary(c)?));
        }
        if c.eat_sym("(") {
            let e = self.expr(c)?;
            c.expect_sym(")")?;
            return Ok(e);
        }
        let pos = c.pos();
        c.expect_kw("count")?;
        let gamma = self.set_type(c)?;
        c.expect_kw("mod")?;
        let (p, _) = c.nat()?;
        c.expect_sym("=")?;
        let (q, _) = c.nat()?;
        let small = |v: u64| u32::try_from(v).map_err(|_| Diagnostic::error(pos, format!("{v} is too large")));
        ModuloExpression::simple(gamma, small(p)?, small(q)?).map_err(|e| Diagnostic::error(pos, e.to_string()))
    }

    fn set_type(&self, c: &mut Cursor) -> PResult<SetType> {
        let pos = c.pos();
        c.expect_sym("[")?;
        let mut listed: Vec<Vec<(SymId, Vec<usize>, Pos)>> = Vec::new();
        loop {
            c.expect_sym("{")?;
            let mut atoms = Vec::new();
            if !c.eat_sym("}") {
                loop {
                    atoms.push(self.atom(c)?);
                    if c.eat_sym("}") {
                        break;
                    }
                    c.expect_sym(",")?;
                }
            }
            listed.push(atoms);
            if c.eat_sym("]") {
                break;
            }
            c.expect_sym(",")?;
        }
        let k = listed.iter().flatten().flat_map(|(_, p, _)| p.iter().map(|i| i + 1)).max().unwrap_or(0);
        if k == 0 && listed.iter().all(|t| t.is_empty()) {
            return Err(Diagnostic::error(pos, ModuloError::EmptySetType.to_string()));
        }
        let mut types = BTreeSet::new();
        for t in listed {
            let mut kt = KType::new();
            for (s, p, apos) in t {
                if (0..k).any(|i| !p.contains(&i)) {
                    let text = format!("{}({})", self.schema.name(s), p.iter().map(|i| i + 1).join(","));
                    return Err(Diagnostic::error(apos, ModuloError::NotStrict(text).to_string()));
                }
                kt.insert((s, p));
            }
            types.insert(kt);
        }
        SetType::from_types(k, &types).map_err(|e| Diagnostic::error(pos, e.to_string()))
    }

    fn atom(&self, c: &mut Cursor) -> PResult<(SymId, Vec<usize>, Pos)> {
        let (name, pos) = c.name()?;
        let sym = self
            .schema
            .lookup(&name)
            .filter(|&s| self.schema.symbol(s).kind == Kind::Input)
            .ok_or_else(|| Diagnostic::error(pos, ModuloError::UnknownSymbol(name.clone()).to_string()))?;
        c.expect_sym("(")?;
        let mut positions = Vec::new();
        if !c.eat_sym(")") {
            loop {
                let (i, ipos) = c.nat()?;
                if i == 0 {
                    return Err(Diagnostic::error(ipos, "positions start at 1"));
                }
                positions.push(i as usize - 1);
                if c.eat_sym(")") {
                    break;
                }
                c.expect_sym(",")?;
            }
        }
        if positions.len() != self.schema.arity(sym) {
            let msg = format!("{name} has arity {}, found {} positions", self.schema.arity(sym), positions.len());
            return Err(Diagnostic::error(pos, msg));
        }
        Ok((sym, positions, pos))
    }
}

/// Parses an expression over the input symbols of `schema`.
pub fn parse_modexpr(schema: &Schema, text: &str) -> Result<ModuloExpression, ModuloError> {
    let run = || -> PResult<ModuloExpression> {
        let mut c = Cursor::new(text)?;
        let e = ExprParser { schema }.expr(&mut c)?;
        c.eat_sym(";");
        if !c.at_eof() {
            return Err(c.unexpected("end of input"));
        }
        Ok(e)
    };
    run().map_err(ModuloError::Parse)
}

/// Parses a file made of an input-only schema block and one expression.
pub fn parse_modexpr_file(text: &str) -> Result<(Schema, ModuloExpression), ModuloError> {
    let run = || -> PResult<(Schema, ModuloExpression)> {
        let mut c = Cursor::new(text)?;
        let pos = c.pos();
        let schema = parse_schema_block(&mut c)?;
        if let Some(s) = schema.aux_ids().first() {
            return Err(Diagnostic::error(pos, format!("{} is not an input symbol", schema.name(*s))));
        }
        let e = ExprParser { schema: &schema }.expr(&mut c)?;
        c.eat_sym(";");
        if !matches!(c.peek(), Tok::Eof) {
            return Err(c.unexpected("end of input"));
        }
        Ok((schema, e))
    };
    run().map_err(ModuloError::Parse)
}

/// Prints a file that [`parse_modexpr_file`] reads back.
pub fn print_modexpr_file(schema: &Schema, e: &ModuloExpression) -> String {
    let decls = schema.input_ids().into_iter().map(|s| format!("{}/{}", schema.name(s), schema.arity(s))).join(", ");
    format!("schema {{ input {decls}; }}\n{};\n", e.display(schema))
}

// ---------------------------------------------------------------------
// Compiler.

fn lit(sym: SymId, pos: &[usize], reps: &[&Var]) -> Formula {
    Formula::Atom(sym, pos.iter().map(|&c| reps[c].clone()).collect())
}

/// Formulas over the parameters `x` saying that the modification makes
/// the set `dom(x)` enter, respectively leave, type `gamma`.
fn change_formulas(atoms: &[StrictAtom], gamma: &SetType, sym: SymId, kind: OpKind, x: &[Var]) -> (Formula, Formula) {
    let mut enter = Vec::new();
    let mut leave = Vec::new();
    for pattern in equality_patterns(x.len()) {
        let classes = pattern.iter().max().map_or(0, |m| m + 1);
        if classes != gamma.k {
            continue;
        }
        let reps: Vec<&Var> = (0..classes).map(|c| &x[pattern.iter().position(|&p| p == c).unwrap()]).collect();
        let eqs = (0..x.len()).tuple_combinations().map(|(i, j)| {
            if pattern[i] == pattern[j] {
                Formula::eq(&x[i], &x[j])
            } else {
                Formula::neq(&x[i], &x[j])
            }
        });
        let shape = Formula::and_all(eqs);
        // The modified fact is the strict atom with positions `pattern`.
        let m: StrictAtom = (sym, pattern.clone());
        let present = lit(sym, &pattern, &reps);
        let before = match kind {
            OpKind::Ins => Formula::not(present),
            OpKind::Del => present,
        };
        for t in &gamma.types {
            let rest = atoms.iter().filter(|a| **a != m).map(|a| {
                let l = lit(a.0, &a.1, &reps);
                if t.contains(a) {
                    l
                } else {
                    Formula::not(l)
                }
            });
            let body = Formula::and_all([shape.clone(), before.clone()].into_iter().chain(rest));
            // Orbits preserve the number of atoms, so the other side of
            // the modification is outside the class.
            match (kind, t.contains(&m)) {
                (OpKind::Ins, true) | (OpKind::Del, false) => enter.push(body),
                (OpKind::Ins, false) | (OpKind::Del, true) => leave.push(body),
            }
        }
    }
    (Formula::or_all(enter), Formula::or_all(leave))
}

fn fresh_name(taken: &mut BTreeSet<String>, base: String) -> String {
    let mut name = base;
    while taken.contains(&name) {
        name.push('_');
    }
    taken.insert(name.clone());
    name
}

/// Compiles `e` over the input symbols of `schema` into a quantifier-free
/// program with bits only. Simple subexpression `j` with modulus `p` gets
/// bits `Count{j}_0..Count{j}_{p-1}`, exactly one of which holds; `Acc`
/// is the query.
pub fn compile_modexpr(schema: &Schema, e: &ModuloExpression) -> Result<DynamicProgram, ModuloError> {
    let inputs = schema.input_ids();
    let max = schema.max_arity(&inputs);
    for (gamma, p, q) in e.simples() {
        if p < 2 || q >= p {
            return Err(ModuloError::Modulus { p, q });
        }
        if gamma.is_empty_type() {
            return Err(ModuloError::EmptySetType);
        }
        if gamma.k > max {
            return Err(ModuloError::ArityTooLarge { k: gamma.k, max });
        }
        for (s, _) in gamma.types.iter().flatten() {
            if !inputs.contains(s) {
                return Err(ModuloError::UnknownSymbol(format!("#{s}")));
            }
        }
    }
    let mut symbols: Vec<Symbol> = inputs.iter().map(|&s| schema.symbol(s).clone()).collect();
    let index: BTreeMap<SymId, SymId> = inputs.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let e = e.map_symbols(&|s| index[&s]);
    let mut taken: BTreeSet<String> = symbols.iter().map(|s| s.name.clone()).collect();
    let simples = e.simples();
    let mut counters: Vec<Vec<SymId>> = Vec::new();
    for (j, (_, p, _)) in simples.iter().enumerate() {
        let mut bits = Vec::new();
        for r in 0..*p {
            bits.push(symbols.len());
            symbols.push(Symbol::new(fresh_name(&mut taken, format!("Count{j}_{r}")), 0, Kind::Aux));
        }
        counters.push(bits);
    }
    let acc = symbols.len();
    symbols.push(Symbol::new(fresh_name(&mut taken, "Acc".into()), 0, Kind::Aux));
    let out = Schema::new(symbols).expect("fresh names are distinct");
    let mut b = ProgramBuilder::new(out.clone());
    for op in all_ops(&out) {
        let x: Vec<Var> = (1..=out.arity(op.sym)).map(|i| format!("x{i}")).collect();
        b.params_owned(op, x.clone());
        let mut next_counts: Vec<Vec<Formula>> = Vec::new();
        for (j, (gamma, p, _)) in simples.iter().enumerate() {
            let atoms = strict_atoms(&out, gamma.k);
            let (enter, leave) = change_formulas(&atoms, gamma, op.sym, op.kind, &x);
            let c = |r: u32| Formula::Atom(counters[j][r as usize], Vec::new());
            let stay = Formula::and(Formula::not(enter.clone()), Formula::not(leave.clone()));
            let next: Vec<Formula> = (0..*p)
                .map(|r| {
                    Formula::or_all([
                        Formula::and(c(r), stay.clone()),
                        Formula::and(c((r + p - 1) % p), enter.clone()),
                        Formula::and(c((r + 1) % p), leave.clone()),
                    ])
                })
                .collect();
            for (r, f) in next.iter().enumerate() {
                b.update(op, counters[j][r], Definition { head: Vec::new(), body: f.simplified() });
            }
            next_counts.push(next);
        }
        let query = e.combine(
            &mut |j| next_counts[j][simples[j].2 as usize].clone(),
            &Formula::not,
            &Formula::and,
            &Formula::or,
        );
        b.update(op, acc, Definition { head: Vec::new(), body: query.simplified() });
    }
    for bits in &counters {
        b.init(bits[0], Definition { head: Vec::new(), body: Formula::True });
    }
    let init = e.combine(&mut |j| simples[j].2 == 0, &|x| !x, &|x, y| x && y, &|x, y| x || y);
    b.init(acc, Definition { head: Vec::new(), body: if init { Formula::True } else { Formula::False } });
    b.query(acc);
    Ok(b.build().expect("compiled programs are well formed").0)
}

// ---------------------------------------------------------------------
// Bounded equivalence.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    /// Every reachable state within the budgets agrees.
    Agree { states: usize },
    Counterexample { domain: usize, sequence: Vec<Modification>, program: bool, expression: bool },
}

/// Compares the query bit of `p` with `e` on every state reachable by at
/// most `max_len` modifications over domains `1..=max_domain`. Returns a
/// shortest counterexample on the least domain. With `InsertionsOnly`
/// only insertions are applied (repetitions included).
pub fn equivalence_check_bounded(
    p: &DynamicProgram,
    schema: &Schema,
    e: &ModuloExpression,
    max_domain: usize,
    max_len: usize,
    mode: SeqMode,
) -> Result<Equivalence, ModuloError> {
    let ps = p.schema();
    if ps.arity(p.query()) != 0 {
        return Err(ModuloError::QueryNotBit);
    }
    let sig = |sc: &Schema| -> BTreeSet<(String, usize)> {
        sc.input_ids().into_iter().map(|s| (sc.name(s).to_string(), sc.arity(s))).collect()
    };
    if sig(ps) != sig(schema) {
        let names = |sc: &Schema| sc.input_ids().into_iter().map(|s| sc.name(s).to_string()).collect();
        return Err(ModuloError::SchemaMismatch { program: names(ps), expression: names(schema) });
    }
    let e = e.map_symbols(&|s| ps.lookup(schema.name(s)).expect("same input names"));
    let mut states = 0;
    for n in 1..=max_domain {
        let mods: Vec<Modification> =
            p.modifications(n).into_iter().filter(|m| mode == SeqMode::All || m.kind == OpKind::Ins).collect();
        let init = p.init_state(n);
        let mut parent: BTreeMap<ProgramState, Option<(ProgramState, usize)>> = BTreeMap::new();
        let mut seen: HashSet<ProgramState> = HashSet::new();
        seen.insert(init.clone());
        parent.insert(init.clone(), None);
        let mut frontier = vec![init];
        for depth in 0..=max_len {
            for s in &frontier {
                states += 1;
                let program = s.structure.bit(p.query());
                let expression = eval_modexpr(ps, &s.structure, &e);
                if program != expression {
                    let mut sequence = Vec::new();
                    let mut cur = s.clone();
                    while let Some(Some((prev, m))) = parent.get(&cur) {
                        sequence.push(mods[*m].clone());
                        cur = prev.clone();
                    }
                    sequence.reverse();
                    return Ok(Equivalence::Counterexample { domain: n, sequence, program, expression });
                }
            }
            if depth == max_len {
                break;
            }
            let mut next = Vec::new();
            for s in &frontier {
                for (i, m) in mods.iter().enumerate() {
                    let t = p.apply(s, m);
                    if seen.insert(t.clone()) {
                        parent.insert(t.clone(), Some((s.clone(), i)));
                        next.push(t);
                    }
                }
            }
            frontier = next;
        }
    }
    Ok(Equivalence::Agree { states })
}

// ---------------------------------------------------------------------
// Set normal form.

fn dom(t: &[Elem]) -> BTreeSet<Elem> {
    t.iter().copied().collect()
}

/// An insertion sequence building the input part of `db`: the facts of
/// each set are contiguous, larger sets come first, and every set is
/// inserted along the least strict type of its class.
pub fn set_normal_form(schema: &Schema, db: &Structure) -> Vec<Modification> {
    let mut sets: BTreeSet<BTreeSet<Elem>> = BTreeSet::new();
    for s in schema.input_ids() {
        sets.extend(db.relation(s).iter().map(|t| dom(t)));
    }
    let mut order: Vec<BTreeSet<Elem>> = sets.into_iter().collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut out = Vec::new();
    for set in order {
        let k = set.len();
        let atoms = strict_atoms(schema, k);
        let a: Vec<Elem> = set.iter().copied().collect();
        let gamma = SetType::from_ktype(k, &ktype(db, &atoms, &a));
        let target = gamma.canonical();
        let enumeration = a
            .iter()
            .copied()
            .permutations(k)
            .find(|pa| &ktype(db, &atoms, pa) == target)
            .expect("some enumeration realizes every type of the class");
        for (sym, pos) in target {
            out.push(Modification::ins(*sym, pos.iter().map(|&i| enumeration[i]).collect()));
        }
    }
    out
}

/// Per-set blocks are contiguous and in non-increasing size order, and
/// every modification is an insertion.
pub fn satisfies_m1(seq: &[Modification]) -> bool {
    let mut done: BTreeSet<BTreeSet<Elem>> = BTreeSet::new();
    let mut cur: Option<BTreeSet<Elem>> = None;
    for m in seq {
        if m.kind != OpKind::Ins {
            return false;
        }
        let d = dom(&m.tuple);
        if cur.as_ref() == Some(&d) {
            continue;
        }
        if done.contains(&d) || cur.as_ref().is_some_and(|c| c.len() < d.len()) {
            return false;
        }
        if let Some(c) = cur.take() {
            done.insert(c);
        }
        cur = Some(d);
    }
    true
}

/// Sets of equal type in the resulting database are inserted by
/// isomorphic blocks.
pub fn satisfies_m2(schema: &Schema, seq: &[Modification]) -> bool {
    let n = seq.iter().flat_map(|m| m.tuple.iter().copied()).max().unwrap_or(1) as usize;
    let mut db = Structure::empty(schema, n);
    let mut blocks: BTreeMap<BTreeSet<Elem>, Vec<&Modification>> = BTreeMap::new();
    for m in seq {
        db.insert(m.sym, m.tuple.clone());
        blocks.entry(dom(&m.tuple)).or_default().push(m);
    }
    let mut first: BTreeMap<SetType, (&BTreeSet<Elem>, &Vec<&Modification>)> = BTreeMap::new();
    for (set, block) in &blocks {
        let gamma = set_type(schema, &db, set);
        let Some((a, alpha)) = first.get(&gamma) else {
            first.insert(gamma, (set, block));
            continue;
        };
        let src: Vec<Elem> = a.iter().copied().collect();
        let iso = set.iter().copied().permutations(set.len()).any(|img| {
            let pi = |e: Elem| img[src.iter().position(|&x| x == e).unwrap()];
            alpha.len() == block.len()
                && alpha.iter().zip(block).all(|(x, y)| x.sym == y.sym && x.tuple.iter().map(|&e| pi(e)).eq(y.tuple.iter().copied()))
        });
        if !iso {
            return false;
        }
    }
    true
}

/// `(2^m)!`, the pumping length for programs with `m` bits, if it fits.
pub fn pumping_length(m: u32) -> Option<u128> {
    let states = 1u128.checked_shl(m)?;
    (1..=states).try_fold(1u128, |acc, i| acc.checked_mul(i))
}
