//! Finite relational structures, first-order formulas and the type/color
//! machinery used to abstract states.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Domain elements are the integers `1..=n`.
pub type Elem = u32;
pub type Tuple = Vec<Elem>;
/// Index of a symbol inside its [`Schema`].
pub type SymId = usize;
pub type Var = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("duplicate symbol {0}")]
    DuplicateSymbol(String),
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("symbol {name} has arity {expected}, used with {found} arguments")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("unassigned free variable {0}")]
    UnassignedVariable(String),
    #[error("element {elem} outside domain 1..{domain}")]
    OutOfDomain { elem: Elem, domain: usize },
    #[error("combinatorial budget exceeded: {needed} > {limit}")]
    Budget { needed: u128, limit: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Input,
    Aux,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
    pub kind: Kind,
}

impl Symbol {
    pub fn new(name: impl Into<String>, arity: usize, kind: Kind) -> Self {
        Symbol { name: name.into(), arity, kind }
    }
}

/// An ordered list of relation symbols. The order is the canonical
/// enumeration order everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    symbols: Vec<Symbol>,
    index: HashMap<String, SymId>,
}

impl Schema {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self, LogicError> {
        let mut index = HashMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.name.clone(), i).is_some() {
                return Err(LogicError::DuplicateSymbol(s.name.clone()));
            }
        }
        Ok(Schema { symbols, index })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: SymId) -> &Symbol {
        &self.symbols[id]
    }

    pub fn name(&self, id: SymId) -> &str {
        &self.symbols[id].name
    }

    pub fn arity(&self, id: SymId) -> usize {
        self.symbols[id].arity
    }

    pub fn lookup(&self, name: &str) -> Option<SymId> {
        self.index.get(name).copied()
    }

    pub fn ids_of(&self, kind: Kind) -> Vec<SymId> {
        (0..self.symbols.len()).filter(|&i| self.symbols[i].kind == kind).collect()
    }

    pub fn input_ids(&self) -> Vec<SymId> {
        self.ids_of(Kind::Input)
    }

    pub fn aux_ids(&self) -> Vec<SymId> {
        self.ids_of(Kind::Aux)
    }

    pub fn all_ids(&self) -> Vec<SymId> {
        (0..self.symbols.len()).collect()
    }

    /// Symbols of `sub` with arity exactly one, in schema order.
    pub fn unary_of(&self, sub: &[SymId]) -> Vec<SymId> {
        sub.iter().copied().filter(|&s| self.arity(s) == 1).collect()
    }

    /// Symbols of `sub` with arity zero.
    pub fn bits_of(&self, sub: &[SymId]) -> Vec<SymId> {
        sub.iter().copied().filter(|&s| self.arity(s) == 0).collect()
    }

    pub fn max_arity(&self, sub: &[SymId]) -> usize {
        sub.iter().map(|&s| self.arity(s)).max().unwrap_or(0)
    }
}

/// A finite structure over a schema with domain `1..=domain`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Structure {
    domain: usize,
    rels: Vec<BTreeSet<Tuple>>,
}

impl Structure {
    /// The structure in which every relation is empty.
    pub fn empty(schema: &Schema, domain: usize) -> Self {
        assert!(domain >= 1, "domains are non-empty");
        Structure { domain, rels: vec![BTreeSet::new(); schema.len()] }
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        1..=(self.domain as Elem)
    }

    pub fn relation(&self, sym: SymId) -> &BTreeSet<Tuple> {
        &self.rels[sym]
    }

    pub fn relations(&self) -> &[BTreeSet<Tuple>] {
        &self.rels
    }

    pub fn set_relation(&mut self, sym: SymId, tuples: BTreeSet<Tuple>) {
        self.rels[sym] = tuples;
    }

    pub fn contains(&self, sym: SymId, tuple: &[Elem]) -> bool {
        self.rels[sym].contains(tuple)
    }

    pub fn bit(&self, sym: SymId) -> bool {
        self.rels[sym].contains(&Vec::new())
    }

    pub fn set_bit(&mut self, sym: SymId, value: bool) {
        if value {
            self.rels[sym].insert(Vec::new());
        } else {
            self.rels[sym].remove(&Vec::new() as &Tuple);
        }
    }

    pub fn insert(&mut self, sym: SymId, tuple: Tuple) -> bool {
        self.rels[sym].insert(tuple)
    }

    pub fn remove(&mut self, sym: SymId, tuple: &[Elem]) -> bool {
        self.rels[sym].remove(tuple)
    }

    /// Checks arities and domain bounds against the schema.
    pub fn validate(&self, schema: &Schema) -> Result<(), LogicError> {
        for (sym, rel) in self.rels.iter().enumerate() {
            for t in rel {
                if t.len() != schema.arity(sym) {
                    return Err(LogicError::ArityMismatch {
                        name: schema.name(sym).to_string(),
                        expected: schema.arity(sym),
                        found: t.len(),
                    });
                }
                for &e in t {
                    if e == 0 || e as usize > self.domain {
                        return Err(LogicError::OutOfDomain { elem: e, domain: self.domain });
                    }
                }
            }
        }
        Ok(())
    }

    /// True iff every relation in `syms` is empty.
    pub fn is_empty_on(&self, syms: &[SymId]) -> bool {
        syms.iter().all(|&s| self.rels[s].is_empty())
    }

    /// Renames elements by `perm`, where `perm[e-1]` is the image of `e`.
    pub fn permuted(&self, perm: &[Elem]) -> Structure {
        let rels = self
            .rels
            .iter()
            .map(|r| r.iter().map(|t| t.iter().map(|&e| perm[e as usize - 1]).collect()).collect())
            .collect();
        Structure { domain: self.domain, rels }
    }
}

/// All tuples of the given arity over `1..=n`, lexicographically.
pub fn all_tuples(n: usize, arity: usize) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut cur = vec![1 as Elem; arity];
    if n == 0 && arity > 0 {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = arity;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if (cur[i] as usize) < n {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = 1;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Eq(Var, Var),
    Atom(SymId, Vec<Var>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Exists(Var, Box<Formula>),
    Forall(Var, Box<Formula>),
}

/// Convenience constructors.
impl Formula {
    pub fn atom(sym: SymId, vars: &[&str]) -> Formula {
        Formula::Atom(sym, vars.iter().map(|v| v.to_string()).collect())
    }

    pub fn eq(a: &str, b: &str) -> Formula {
        Formula::Eq(a.to_string(), b.to_string())
    }

    pub fn neq(a: &str, b: &str) -> Formula {
        Formula::not(Formula::eq(a, b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn exists(v: &str, f: Formula) -> Formula {
        Formula::Exists(v.to_string(), Box::new(f))
    }

    pub fn forall(v: &str, f: Formula) -> Formula {
        Formula::Forall(v.to_string(), Box::new(f))
    }

    /// Left-nested conjunction; `True` for an empty list.
    pub fn and_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::True,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Left-nested disjunction; `False` for an empty list.
    pub fn or_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::False,
            Some(first) => it.fold(first, Formula::or),
        }
    }

    /// Folds `true` and `false` away and removes double negations.
    /// The result is equivalent on every structure.
    pub fn simplified(&self) -> Formula {
        use Formula::*;
        match self {
            True | False | Eq(..) | Atom(..) => self.clone(),
            Not(f) => match f.simplified() {
                True => False,
                False => True,
                Not(g) => *g,
                g => Formula::not(g),
            },
            And(a, b) => match (a.simplified(), b.simplified()) {
                (False, _) | (_, False) => False,
                (True, g) | (g, True) => g,
                (x, y) => Formula::and(x, y),
            },
            Or(a, b) => match (a.simplified(), b.simplified()) {
                (True, _) | (_, True) => True,
                (False, g) | (g, False) => g,
                (x, y) => Formula::or(x, y),
            },
            Implies(a, b) => match (a.simplified(), b.simplified()) {
                (False, _) | (_, True) => True,
                (True, g) => g,
                (g, False) => Formula::not(g).simplified(),
                (x, y) => Formula::implies(x, y),
            },
            Iff(a, b) => match (a.simplified(), b.simplified()) {
                (True, g) | (g, True) => g,
                (False, g) | (g, False) => Formula::not(g).simplified(),
                (x, y) => Formula::iff(x, y),
            },
            // Quantifiers stay: their value on constants depends on the domain being empty.
            Exists(v, f) => Exists(v.clone(), Box::new(f.simplified())),
            Forall(v, f) => Forall(v.clone(), Box::new(f.simplified())),
        }
    }

    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Eq(..) | Formula::Atom(..) => 0,
            Formula::Not(f) => f.quantifier_depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.quantifier_depth().max(b.quantifier_depth())
            }
            Formula::Exists(_, f) | Formula::Forall(_, f) => 1 + f.quantifier_depth(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        let mut note = |v: &Var, bound: &Vec<Var>| {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Eq(a, b) => {
                note(a, bound);
                note(b, bound);
            }
            Formula::Atom(_, vs) => {
                for v in vs {
                    note(v, bound);
                }
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Symbols occurring in atoms.
    pub fn symbols(&self) -> BTreeSet<SymId> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |s, _| {
            out.insert(s);
        });
        out
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(SymId, &[Var])) {
        match self {
            Formula::True | Formula::False | Formula::Eq(..) => {}
            Formula::Atom(s, vs) => f(*s, vs),
            Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => g.visit_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    /// Checks that atoms reference declared symbols with matching arity.
    pub fn check_arities(&self, schema: &Schema) -> Result<(), LogicError> {
        let mut err = None;
        self.visit_atoms(&mut |s, vs| {
            if err.is_some() {
                return;
            }
            if s >= schema.len() {
                err = Some(LogicError::UnknownSymbol(format!("#{s}")));
            } else if schema.arity(s) != vs.len() {
                err = Some(LogicError::ArityMismatch {
                    name: schema.name(s).to_string(),
                    expected: schema.arity(s),
                    found: vs.len(),
                });
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// Replaces symbol ids through `map` (used when moving formulas between schemas).
    pub fn map_symbols(&self, map: &impl Fn(SymId) -> SymId) -> Formula {
        let b = |f: &Formula| Box::new(f.map_symbols(map));
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Eq(a, c) => Formula::Eq(a.clone(), c.clone()),
            Formula::Atom(s, vs) => Formula::Atom(map(*s), vs.clone()),
            Formula::Not(f) => Formula::Not(b(f)),
            Formula::And(x, y) => Formula::And(b(x), b(y)),
            Formula::Or(x, y) => Formula::Or(b(x), b(y)),
            Formula::Implies(x, y) => Formula::Implies(b(x), b(y)),
            Formula::Iff(x, y) => Formula::Iff(b(x), b(y)),
            Formula::Exists(v, f) => Formula::Exists(v.clone(), b(f)),
            Formula::Forall(v, f) => Formula::Forall(v.clone(), b(f)),
        }
    }

    /// Replaces atoms by arbitrary formulas (`None` keeps the atom).
    pub fn subst_atoms(&self, map: &impl Fn(SymId, &[Var]) -> Option<Formula>) -> Formula {
        let b = |f: &Formula| Box::new(f.subst_atoms(map));
        match self {
            Formula::Atom(s, vs) => map(*s, vs).unwrap_or_else(|| self.clone()),
            Formula::True | Formula::False | Formula::Eq(..) => self.clone(),
            Formula::Not(f) => Formula::Not(b(f)),
            Formula::And(x, y) => Formula::And(b(x), b(y)),
            Formula::Or(x, y) => Formula::Or(b(x), b(y)),
            Formula::Implies(x, y) => Formula::Implies(b(x), b(y)),
            Formula::Iff(x, y) => Formula::Iff(b(x), b(y)),
            Formula::Exists(v, f) => Formula::Exists(v.clone(), b(f)),
            Formula::Forall(v, f) => Formula::Forall(v.clone(), b(f)),
        }
    }

    /// Renames free variables via `map`; bound variables are left alone.
    /// The caller must make sure no capture happens.
    pub fn rename_free(&self, map: &BTreeMap<Var, Var>) -> Formula {
        self.rename_inner(map, &mut Vec::new())
    }

    fn rename_inner(&self, map: &BTreeMap<Var, Var>, bound: &mut Vec<Var>) -> Formula {
        let r = |v: &Var, bound: &Vec<Var>| {
            if bound.contains(v) {
                v.clone()
            } else {
                map.get(v).cloned().unwrap_or_else(|| v.clone())
            }
        };
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Eq(a, c) => Formula::Eq(r(a, bound), r(c, bound)),
            Formula::Atom(s, vs) => Formula::Atom(*s, vs.iter().map(|v| r(v, bound)).collect()),
            Formula::Not(f) => Formula::Not(Box::new(f.rename_inner(map, bound))),
            Formula::And(x, y) => Formula::And(Box::new(x.rename_inner(map, bound)), Box::new(y.rename_inner(map, bound))),
            Formula::Or(x, y) => Formula::Or(Box::new(x.rename_inner(map, bound)), Box::new(y.rename_inner(map, bound))),
            Formula::Implies(x, y) => {
                Formula::Implies(Box::new(x.rename_inner(map, bound)), Box::new(y.rename_inner(map, bound)))
            }
            Formula::Iff(x, y) => Formula::Iff(Box::new(x.rename_inner(map, bound)), Box::new(y.rename_inner(map, bound))),
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                bound.push(v.clone());
                let body = Box::new(f.rename_inner(map, bound));
                bound.pop();
                if matches!(self, Formula::Exists(..)) {
                    Formula::Exists(v.clone(), body)
                } else {
                    Formula::Forall(v.clone(), body)
                }
            }
        }
    }
}

/// Formula with variables resolved to environment slots, for fast repeated
/// evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Compiled {
    True,
    False,
    Eq(usize, usize),
    Atom(SymId, Vec<usize>),
    Not(Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
    Implies(Box<Compiled>, Box<Compiled>),
    Iff(Box<Compiled>, Box<Compiled>),
    Exists(usize, Box<Compiled>),
    Forall(usize, Box<Compiled>),
}

impl Compiled {
    /// Compiles `f` so that `params[i]` lives in slot `i`. Fails on a free
    /// variable that is not a parameter.
    pub fn new(f: &Formula, params: &[Var]) -> Result<Compiled, LogicError> {
        let mut scope: Vec<Var> = params.to_vec();
        let c = Self::build(f, &mut scope)?;
        Ok(c)
    }

    fn slot(scope: &[Var], v: &Var) -> Result<usize, LogicError> {
        scope.iter().rposition(|w| w == v).ok_or_else(|| LogicError::UnassignedVariable(v.clone()))
    }

    fn build(f: &Formula, scope: &mut Vec<Var>) -> Result<Compiled, LogicError> {
        Ok(match f {
            Formula::True => Compiled::True,
            Formula::False => Compiled::False,
            Formula::Eq(a, b) => Compiled::Eq(Self::slot(scope, a)?, Self::slot(scope, b)?),
            Formula::Atom(s, vs) => {
                Compiled::Atom(*s, vs.iter().map(|v| Self::slot(scope, v)).collect::<Result<_, _>>()?)
            }
            Formula::Not(g) => Compiled::Not(Box::new(Self::build(g, scope)?)),
            Formula::And(a, b) => Compiled::And(Box::new(Self::build(a, scope)?), Box::new(Self::build(b, scope)?)),
            Formula::Or(a, b) => Compiled::Or(Box::new(Self::build(a, scope)?), Box::new(Self::build(b, scope)?)),
            Formula::Implies(a, b) => {
                Compiled::Implies(Box::new(Self::build(a, scope)?), Box::new(Self::build(b, scope)?))
            }
            Formula::Iff(a, b) => Compiled::Iff(Box::new(Self::build(a, scope)?), Box::new(Self::build(b, scope)?)),
            Formula::Exists(v, g) | Formula::Forall(v, g) => {
                scope.push(v.clone());
                let slot = scope.len() - 1;
                let body = Box::new(Self::build(g, scope)?);
                scope.pop();
                if matches!(f, Formula::Exists(..)) {
                    Compiled::Exists(slot, body)
                } else {
                    Compiled::Forall(slot, body)
                }
            }
        })
    }

    /// Evaluates with `env` holding at least the parameter slots. The
    /// environment is extended as needed for bound variables.
    pub fn eval(&self, s: &Structure, env: &mut Vec<Elem>) -> bool {
        match self {
            Compiled::True => true,
            Compiled::False => false,
            Compiled::Eq(a, b) => env[*a] == env[*b],
            Compiled::Atom(sym, slots) => {
                let rel = s.relation(*sym);
                if rel.is_empty() {
                    return false;
                }
                let t: Tuple = slots.iter().map(|&i| env[i]).collect();
                rel.contains(&t)
            }
            Compiled::Not(f) => !f.eval(s, env),
            Compiled::And(a, b) => a.eval(s, env) && b.eval(s, env),
            Compiled::Or(a, b) => a.eval(s, env) || b.eval(s, env),
            Compiled::Implies(a, b) => !a.eval(s, env) || b.eval(s, env),
            Compiled::Iff(a, b) => a.eval(s, env) == b.eval(s, env),
            Compiled::Exists(slot, f) | Compiled::Forall(slot, f) => {
                let exists = matches!(self, Compiled::Exists(..));
                if env.len() <= *slot {
                    env.resize(*slot + 1, 0);
                }
                let saved = env[*slot];
                let mut result = !exists;
                for e in 1..=(s.domain() as Elem) {
                    env[*slot] = e;
                    if f.eval(s, env) == exists {
                        result = exists;
                        break;
                    }
                }
                env[*slot] = saved;
                result
            }
        }
    }
}

/// Tarskian evaluation of `f` on `s` under `assignment`.
pub fn eval(s: &Structure, f: &Formula, assignment: &BTreeMap<Var, Elem>) -> Result<bool, LogicError> {
    let params: Vec<Var> = assignment.keys().cloned().collect();
    let compiled = Compiled::new(f, &params)?;
    let mut env: Vec<Elem> = assignment.values().copied().collect();
    for &e in &env {
        if e == 0 || e as usize > s.domain() {
            return Err(LogicError::OutOfDomain { elem: e, domain: s.domain() });
        }
    }
    Ok(compiled.eval(s, &mut env))
}

/// Quantifier depth of `f`.
pub fn quantifier_depth(f: &Formula) -> usize {
    f.quantifier_depth()
}

/// The atomic type of a tuple: its equality pattern plus the atoms over a
/// subschema that hold. Atom positions refer to the first position of each
/// equality class, so the representation is canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomicType {
    /// Class index of every position, numbered by first occurrence.
    pub pattern: Vec<usize>,
    /// Satisfied atoms as (symbol, representative positions), sorted.
    pub atoms: BTreeSet<(SymId, Vec<usize>)>,
}

impl AtomicType {
    pub fn arity(&self) -> usize {
        self.pattern.len()
    }

    /// Representative position of every equality class.
    pub fn representatives(&self) -> Vec<usize> {
        representatives(&self.pattern)
    }

    /// The classes of the equality pattern as sets of positions.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let k = self.pattern.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); k];
        for (pos, &c) in self.pattern.iter().enumerate() {
            out[c].push(pos);
        }
        out
    }

    /// Reads this type as a predicate on a concrete tuple.
    pub fn holds(&self, s: &Structure, t: &[Elem], sub: &[SymId], schema: &Schema) -> bool {
        atomic_type(s, t, sub, schema) == *self
    }
}

/// Restricted-growth encoding of the equality pattern of `t`.
pub fn equality_pattern(t: &[Elem]) -> Vec<usize> {
    let mut seen: Vec<Elem> = Vec::new();
    t.iter()
        .map(|e| match seen.iter().position(|x| x == e) {
            Some(i) => i,
            None => {
                seen.push(*e);
                seen.len() - 1
            }
        })
        .collect()
}

fn representatives(pattern: &[usize]) -> Vec<usize> {
    let mut reps = Vec::new();
    for (pos, &c) in pattern.iter().enumerate() {
        if c == reps.len() {
            reps.push(pos);
        }
    }
    reps
}

/// Atomic type of `t` in `s` restricted to the symbols `sub`.
pub fn atomic_type(s: &Structure, t: &[Elem], sub: &[SymId], schema: &Schema) -> AtomicType {
    let pattern = equality_pattern(t);
    let reps = representatives(&pattern);
    let mut atoms = BTreeSet::new();
    for &sym in sub {
        let ar = schema.arity(sym);
        for idx in all_tuples(reps.len(), ar) {
            let positions: Vec<usize> = idx.iter().map(|&i| reps[i as usize - 1]).collect();
            let tuple: Tuple = positions.iter().map(|&p| t[p]).collect();
            if s.contains(sym, &tuple) {
                atoms.insert((sym, positions));
            }
        }
    }
    AtomicType { pattern, atoms }
}

/// All restricted-growth strings of length `k` (set partitions of positions).
pub fn equality_patterns(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(cur: &mut Vec<usize>, k: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max {
            cur.push(c);
            rec(cur, k, if c == max { max + 1 } else { max }, out);
            cur.pop();
        }
    }
    rec(&mut Vec::new(), k, 0, &mut out);
    out
}

/// All candidate atoms for an equality pattern over `sub`.
pub fn candidate_atoms(pattern: &[usize], sub: &[SymId], schema: &Schema) -> Vec<(SymId, Vec<usize>)> {
    let reps = representatives(pattern);
    let mut out = Vec::new();
    for &sym in sub {
        for idx in all_tuples(reps.len(), schema.arity(sym)) {
            out.push((sym, idx.iter().map(|&i| reps[i as usize - 1]).collect()));
        }
    }
    out
}

/// Number of atomic k-types over `sub`, without enumerating them.
pub fn count_atomic_types(schema: &Schema, sub: &[SymId], k: usize) -> u128 {
    equality_patterns(k)
        .iter()
        .map(|p| {
            let n = candidate_atoms(p, sub, schema).len() as u32;
            if n >= 127 {
                u128::MAX
            } else {
                1u128 << n
            }
        })
        .fold(0u128, |a, b| a.saturating_add(b))
}

/// Complete, duplicate-free enumeration of atomic k-types over `sub`.
pub fn enumerate_atomic_types(
    schema: &Schema,
    sub: &[SymId],
    k: usize,
    limit: u128,
) -> Result<Vec<AtomicType>, LogicError> {
    let needed = count_atomic_types(schema, sub, k);
    if needed > limit {
        return Err(LogicError::Budget { needed, limit });
    }
    let mut out = Vec::with_capacity(needed as usize);
    for pattern in equality_patterns(k) {
        let cands = candidate_atoms(&pattern, sub, schema);
        for mask in 0u64..(1u64 << cands.len()) {
            let atoms = cands
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, a)| a.clone())
                .collect();
            out.push(AtomicType { pattern: pattern.clone(), atoms });
        }
    }
    Ok(out)
}

/// Colors over a list of unary symbols are bit masks: bit `i` is set iff
/// the element belongs to `unary[i]`. Color 0 is the uncolored color.
pub type Color = usize;

pub fn color_count(unary: &[SymId]) -> usize {
    1usize << unary.len()
}

pub fn color_of(s: &Structure, unary: &[SymId], e: Elem) -> Color {
    let mut c = 0;
    for (i, &u) in unary.iter().enumerate() {
        if s.contains(u, &[e]) {
            c |= 1 << i;
        }
    }
    c
}

/// All colors `c_0..c_L` in index order.
pub fn enumerate_colors(unary: &[SymId]) -> Vec<Color> {
    (0..color_count(unary)).collect()
}

/// Per-color element counts, optionally collapsed at a cap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColorHistogram {
    pub counts: Vec<usize>,
    pub cap: Option<usize>,
}

impl ColorHistogram {
    pub fn new(counts: Vec<usize>, cap: Option<usize>) -> Self {
        let counts = match cap {
            Some(k) => counts.into_iter().map(|c| c.min(k)).collect(),
            None => counts,
        };
        ColorHistogram { counts, cap }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `≃_k`: componentwise equal or both at least `k`.
    pub fn simeq(&self, other: &ColorHistogram, k: usize) -> bool {
        self.counts.len() == other.counts.len()
            && self.counts.iter().zip(&other.counts).all(|(&a, &b)| a == b || (a >= k && b >= k))
    }

    pub fn capped(&self, k: usize) -> ColorHistogram {
        ColorHistogram::new(self.counts.clone(), Some(k))
    }
}

/// Color histogram of `s` over the unary symbols of `sub`.
pub fn color_histogram(s: &Structure, sub: &[SymId], schema: &Schema, cap: Option<usize>) -> ColorHistogram {
    let unary = schema.unary_of(sub);
    let mut counts = vec![0; color_count(&unary)];
    for e in s.elements() {
        counts[color_of(s, &unary, e)] += 1;
    }
    ColorHistogram::new(counts, cap)
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Input => write!(f, "input"),
            Kind::Aux => write!(f, "aux"),
        }
    }
}
