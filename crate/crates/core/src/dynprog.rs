//! Dynamic programs: update tables, initialization, state transitions,
//! sequence enumeration, normal forms and fragment classification.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::logic::{all_tuples, Color, Compiled, Elem, Formula, Kind, LogicError, Schema, Structure, SymId, Tuple, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("{0} is not an input symbol")]
    NotInput(String),
    #[error("{0} is not an auxiliary symbol")]
    NotAux(String),
    #[error("{what}: expected {expected} variables, found {found}")]
    VarCount { what: String, expected: usize, found: usize },
    #[error("{what}: variable {var} occurs twice")]
    DuplicateVar { what: String, var: Var },
    #[error("{what}: free variable {var} is not bound by the rule head")]
    FreeVariable { what: String, var: Var },
    #[error("initialization of {sym} mentions auxiliary symbol {other}")]
    InitMentionsAux { sym: String, other: String },
    #[error("duplicate update for {0}")]
    DuplicateUpdate(String),
    #[error("no query symbol")]
    NoQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Ins,
    Del,
}

/// An operation `ins_S` or `del_S` on an input symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Op {
    pub kind: OpKind,
    pub sym: SymId,
}

impl Op {
    pub fn ins(sym: SymId) -> Op {
        Op { kind: OpKind::Ins, sym }
    }

    pub fn del(sym: SymId) -> Op {
        Op { kind: OpKind::Del, sym }
    }
}

/// A single insertion or deletion of a tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Modification {
    pub kind: OpKind,
    pub sym: SymId,
    pub tuple: Tuple,
}

impl Modification {
    pub fn ins(sym: SymId, tuple: Tuple) -> Self {
        Modification { kind: OpKind::Ins, sym, tuple }
    }

    pub fn del(sym: SymId, tuple: Tuple) -> Self {
        Modification { kind: OpKind::Del, sym, tuple }
    }

    pub fn op(&self) -> Op {
        Op { kind: self.kind, sym: self.sym }
    }

    /// Same tuple, opposite kind.
    pub fn inverse(&self) -> Modification {
        let kind = match self.kind {
            OpKind::Ins => OpKind::Del,
            OpKind::Del => OpKind::Ins,
        };
        Modification { kind, sym: self.sym, tuple: self.tuple.clone() }
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> impl fmt::Display + 'a {
        ModDisplay(self, schema)
    }
}

struct ModDisplay<'a>(&'a Modification, &'a Schema);

impl fmt::Display for ModDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0.kind == OpKind::Ins { '+' } else { '-' };
        write!(f, "{sign}{}({})", self.1.name(self.0.sym), self.0.tuple.iter().join(","))
    }
}

pub fn format_sequence(schema: &Schema, seq: &[Modification]) -> String {
    seq.iter().map(|m| m.display(schema).to_string()).join(" ")
}

/// An update or initialization formula with its head variables `y⃗`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Definition {
    pub head: Vec<Var>,
    pub body: Formula,
}

impl Definition {
    pub fn new(head: &[&str], body: Formula) -> Self {
        Definition { head: head.iter().map(|s| s.to_string()).collect(), body }
    }
}

/// Update formulas for one operation: parameters `x⃗` and one definition
/// per auxiliary symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub params: Vec<Var>,
    pub updates: BTreeMap<SymId, Definition>,
}

#[derive(Debug, Clone)]
struct CompiledProgram {
    // (op) -> list of (aux sym, arity, compiled body with params ++ head)
    rules: BTreeMap<Op, Vec<(SymId, usize, Compiled)>>,
    init: Vec<(SymId, usize, Compiled)>,
}

/// A dynamic program: a total update table, first-order initialization
/// and a designated query symbol.
#[derive(Debug, Clone)]
pub struct DynamicProgram {
    schema: Schema,
    rules: BTreeMap<Op, Rule>,
    init: BTreeMap<SymId, Definition>,
    query: SymId,
    compiled: CompiledProgram,
}

impl PartialEq for DynamicProgram {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.rules == other.rules && self.init == other.init && self.query == other.query
    }
}

impl Eq for DynamicProgram {}

/// Builds a [`DynamicProgram`], filling missing update formulas with the
/// frame rule `R(y⃗)` and missing initializations with `false`.
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    schema: Schema,
    rules: BTreeMap<Op, Rule>,
    init: BTreeMap<SymId, Definition>,
    query: Option<SymId>,
    errors: Vec<ProgramError>,
}

impl ProgramBuilder {
    pub fn new(schema: Schema) -> Self {
        ProgramBuilder { schema, rules: BTreeMap::new(), init: BTreeMap::new(), query: None, errors: Vec::new() }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn sym(&self, name: &str) -> SymId {
        self.schema.lookup(name).unwrap_or_else(|| panic!("unknown symbol {name}"))
    }

    /// Declares the parameters of the rule for `op`. Later calls must agree.
    pub fn params(&mut self, op: Op, params: &[&str]) -> &mut Self {
        let params: Vec<Var> = params.iter().map(|s| s.to_string()).collect();
        self.params_owned(op, params)
    }

    pub fn params_owned(&mut self, op: Op, params: Vec<Var>) -> &mut Self {
        let entry = self.rules.entry(op).or_insert_with(|| Rule { params: params.clone(), updates: BTreeMap::new() });
        entry.params = params;
        self
    }

    /// Adds the update formula for `aux` under `op`.
    pub fn update(&mut self, op: Op, aux: SymId, def: Definition) -> &mut Self {
        let arity = self.schema.arity(op.sym);
        let rule = self.rules.entry(op).or_insert_with(|| Rule { params: default_params(arity), updates: BTreeMap::new() });
        if rule.updates.insert(aux, def).is_some() {
            let name = format!("{} under {}", self.schema.name(aux), op_name(&self.schema, op));
            self.errors.push(ProgramError::DuplicateUpdate(name));
        }
        self
    }

    /// Sets the initialization formula of `aux`.
    pub fn init(&mut self, aux: SymId, def: Definition) -> &mut Self {
        if self.init.insert(aux, def).is_some() {
            self.errors.push(ProgramError::DuplicateUpdate(format!("init {}", self.schema.name(aux))));
        }
        self
    }

    pub fn query(&mut self, sym: SymId) -> &mut Self {
        self.query = Some(sym);
        self
    }

    /// Validates and completes the table. Returns warnings for every
    /// defaulted update entry.
    pub fn build(&self) -> Result<(DynamicProgram, Vec<String>), ProgramError> {
        if let Some(e) = self.errors.first() {
            return Err(e.clone());
        }
        let schema = &self.schema;
        let query = self.query.ok_or(ProgramError::NoQuery)?;
        if schema.symbol(query).kind != Kind::Aux {
            return Err(ProgramError::NotAux(schema.name(query).to_string()));
        }
        let mut warnings = Vec::new();
        let mut rules = BTreeMap::new();
        for (&op, rule) in &self.rules {
            if schema.symbol(op.sym).kind != Kind::Input {
                return Err(ProgramError::NotInput(schema.name(op.sym).to_string()));
            }
            for &aux in rule.updates.keys() {
                if schema.symbol(aux).kind != Kind::Aux {
                    return Err(ProgramError::NotAux(schema.name(aux).to_string()));
                }
            }
        }
        for op in all_ops(schema) {
            let arity = schema.arity(op.sym);
            let mut rule = self.rules.get(&op).cloned().unwrap_or_else(|| Rule { params: default_params(arity), updates: BTreeMap::new() });
            for aux in schema.aux_ids() {
                if !rule.updates.contains_key(&aux) {
                    warnings.push(format!(
                        "no update for {} under {}; using the frame rule",
                        schema.name(aux),
                        op_name(schema, op)
                    ));
                    let head = fresh_vars("y", schema.arity(aux), &rule.params);
                    let body = Formula::Atom(aux, head.clone());
                    rule.updates.insert(aux, Definition { head, body });
                }
            }
            rules.insert(op, rule);
        }
        let mut init = self.init.clone();
        for &aux in init.keys() {
            if schema.symbol(aux).kind != Kind::Aux {
                return Err(ProgramError::NotAux(schema.name(aux).to_string()));
            }
        }
        for aux in schema.aux_ids() {
            init.entry(aux).or_insert_with(|| Definition { head: fresh_vars("y", schema.arity(aux), &[]), body: Formula::False });
        }
        let p = DynamicProgram::from_parts(schema.clone(), rules, init, query)?;
        Ok((p, warnings))
    }
}

fn default_params(arity: usize) -> Vec<Var> {
    (1..=arity).map(|i| format!("x{i}")).collect()
}

fn fresh_vars(prefix: &str, n: usize, avoid: &[Var]) -> Vec<Var> {
    let mut p = prefix.to_string();
    loop {
        let vs: Vec<Var> = (1..=n).map(|i| format!("{p}{i}")).collect();
        if vs.iter().all(|v| !avoid.contains(v)) {
            return vs;
        }
        p.push('_');
    }
}

pub fn op_name(schema: &Schema, op: Op) -> String {
    match op.kind {
        OpKind::Ins => format!("ins_{}", schema.name(op.sym)),
        OpKind::Del => format!("del_{}", schema.name(op.sym)),
    }
}

/// All operations in canonical order: per input symbol, insertion then deletion.
pub fn all_ops(schema: &Schema) -> Vec<Op> {
    schema.input_ids().into_iter().flat_map(|s| [Op::ins(s), Op::del(s)]).collect()
}

fn check_vars(what: &str, vars: &[Var]) -> Result<(), ProgramError> {
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].contains(v) {
            return Err(ProgramError::DuplicateVar { what: what.to_string(), var: v.clone() });
        }
    }
    Ok(())
}

impl DynamicProgram {
    /// Assembles a program from a complete table; validates totality,
    /// arities and variable scoping.
    pub fn from_parts(
        schema: Schema,
        rules: BTreeMap<Op, Rule>,
        init: BTreeMap<SymId, Definition>,
        query: SymId,
    ) -> Result<Self, ProgramError> {
        let mut crules = BTreeMap::new();
        for op in all_ops(&schema) {
            let rule = rules.get(&op).ok_or_else(|| ProgramError::DuplicateUpdate(format!("missing rule {}", op_name(&schema, op))))?;
            let what_op = op_name(&schema, op);
            if rule.params.len() != schema.arity(op.sym) {
                return Err(ProgramError::VarCount { what: what_op, expected: schema.arity(op.sym), found: rule.params.len() });
            }
            check_vars(&what_op, &rule.params)?;
            let mut list = Vec::new();
            for aux in schema.aux_ids() {
                let def = rule.updates.get(&aux).ok_or_else(|| {
                    ProgramError::DuplicateUpdate(format!("missing update {} under {}", schema.name(aux), what_op))
                })?;
                let what = format!("update of {} under {}", schema.name(aux), what_op);
                if def.head.len() != schema.arity(aux) {
                    return Err(ProgramError::VarCount { what, expected: schema.arity(aux), found: def.head.len() });
                }
                let mut vars = rule.params.clone();
                vars.extend(def.head.iter().cloned());
                check_vars(&what, &vars)?;
                def.body.check_arities(&schema)?;
                for v in def.body.free_vars() {
                    if !vars.contains(&v) {
                        return Err(ProgramError::FreeVariable { what, var: v });
                    }
                }
                list.push((aux, schema.arity(aux), Compiled::new(&def.body, &vars)?));
            }
            if rule.updates.len() != schema.aux_ids().len() {
                return Err(ProgramError::NotAux(what_op));
            }
            crules.insert(op, list);
        }
        if rules.len() != crules.len() {
            return Err(ProgramError::NotInput("rule on a non-input symbol".into()));
        }
        let mut cinit = Vec::new();
        for aux in schema.aux_ids() {
            let def = init.get(&aux).ok_or_else(|| ProgramError::DuplicateUpdate(format!("missing init {}", schema.name(aux))))?;
            let what = format!("initialization of {}", schema.name(aux));
            if def.head.len() != schema.arity(aux) {
                return Err(ProgramError::VarCount { what, expected: schema.arity(aux), found: def.head.len() });
            }
            check_vars(&what, &def.head)?;
            def.body.check_arities(&schema)?;
            for s in def.body.symbols() {
                if schema.symbol(s).kind == Kind::Aux {
                    return Err(ProgramError::InitMentionsAux { sym: schema.name(aux).into(), other: schema.name(s).into() });
                }
            }
            for v in def.body.free_vars() {
                if !def.head.contains(&v) {
                    return Err(ProgramError::FreeVariable { what, var: v });
                }
            }
            cinit.push((aux, schema.arity(aux), Compiled::new(&def.body, &def.head)?));
        }
        if init.len() != cinit.len() {
            return Err(ProgramError::NotAux("initialization of a non-auxiliary symbol".into()));
        }
        if schema.symbol(query).kind != Kind::Aux {
            return Err(ProgramError::NotAux(schema.name(query).to_string()));
        }
        Ok(DynamicProgram { schema, rules, init, query, compiled: CompiledProgram { rules: crules, init: cinit } })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rules(&self) -> &BTreeMap<Op, Rule> {
        &self.rules
    }

    pub fn rule(&self, op: Op) -> &Rule {
        &self.rules[&op]
    }

    pub fn update(&self, op: Op, aux: SymId) -> &Definition {
        &self.rules[&op].updates[&aux]
    }

    pub fn init_defs(&self) -> &BTreeMap<SymId, Definition> {
        &self.init
    }

    pub fn query(&self) -> SymId {
        self.query
    }

    pub fn input_ids(&self) -> Vec<SymId> {
        self.schema.input_ids()
    }

    pub fn aux_ids(&self) -> Vec<SymId> {
        self.schema.aux_ids()
    }

    /// Rebuilds a program with the same table but a different query symbol.
    pub fn with_query(&self, query: SymId) -> Result<Self, ProgramError> {
        DynamicProgram::from_parts(self.schema.clone(), self.rules.clone(), self.init.clone(), query)
    }

    /// Initial state on domain `1..=n`: empty input, aux from the init formulas.
    pub fn init_state(&self, n: usize) -> ProgramState {
        let mut s = Structure::empty(&self.schema, n);
        let empty = Structure::empty(&self.schema, n);
        let mut env = Vec::new();
        for (aux, arity, c) in &self.compiled.init {
            let mut rel = BTreeSet::new();
            for t in all_tuples(n, *arity) {
                env.clear();
                env.extend_from_slice(&t);
                if c.eval(&empty, &mut env) {
                    rel.insert(t);
                }
            }
            s.set_relation(*aux, rel);
        }
        ProgramState { structure: s }
    }

    /// One modification: the input changes by set semantics and every
    /// aux relation is recomputed from the pre-state.
    pub fn apply(&self, s: &ProgramState, d: &Modification) -> ProgramState {
        let pre = &s.structure;
        let n = pre.domain();
        debug_assert!(d.tuple.iter().all(|&e| e >= 1 && e as usize <= n), "modification outside domain");
        let mut post = pre.clone();
        match d.kind {
            OpKind::Ins => {
                post.insert(d.sym, d.tuple.clone());
            }
            OpKind::Del => {
                post.remove(d.sym, &d.tuple);
            }
        }
        let mut env: Vec<Elem> = Vec::new();
        let k = d.tuple.len();
        for (aux, arity, c) in &self.compiled.rules[&d.op()] {
            let mut rel = BTreeSet::new();
            for t in all_tuples(n, *arity) {
                env.clear();
                env.extend_from_slice(&d.tuple);
                env.extend_from_slice(&t);
                debug_assert_eq!(env.len(), k + arity);
                if c.eval(pre, &mut env) {
                    rel.insert(t);
                }
            }
            post.set_relation(*aux, rel);
        }
        ProgramState { structure: post }
    }

    pub fn apply_sequence(&self, s: &ProgramState, seq: &[Modification]) -> ProgramState {
        seq.iter().fold(s.clone(), |acc, d| self.apply(&acc, d))
    }

    /// Runs `seq` from the initial state of size `n`.
    pub fn run(&self, n: usize, seq: &[Modification]) -> ProgramState {
        self.apply_sequence(&self.init_state(n), seq)
    }

    pub fn classify(&self) -> FragmentProfile {
        let inputs = self.schema.input_ids();
        let auxs = self.schema.aux_ids();
        let quantifier_free = self
            .rules
            .values()
            .all(|r| r.updates.values().all(|d| d.body.quantifier_depth() == 0));
        FragmentProfile {
            max_input_arity: self.schema.max_arity(&inputs).max(1),
            max_aux_arity: self.schema.max_arity(&auxs),
            quantifier_free,
            query_arity: self.schema.arity(self.query),
        }
    }

    /// Maximum quantifier depth over update formulas.
    pub fn update_depth(&self) -> usize {
        self.rules.values().flat_map(|r| r.updates.values()).map(|d| d.body.quantifier_depth()).max().unwrap_or(0)
    }

    /// Maximum quantifier depth over initialization formulas.
    pub fn init_depth(&self) -> usize {
        self.init.values().map(|d| d.body.quantifier_depth()).max().unwrap_or(0)
    }

    /// All modifications over domain `1..=n` in canonical order.
    pub fn modifications(&self, n: usize) -> Vec<Modification> {
        all_modifications(&self.schema, n)
    }
}

/// Input arity `ℓ`, aux arity `m`, quantifier-freeness and query arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragmentProfile {
    pub max_input_arity: usize,
    pub max_aux_arity: usize,
    pub quantifier_free: bool,
    pub query_arity: usize,
}

impl fmt::Display for FragmentProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = if self.quantifier_free { "DynProp" } else { "DynFO" };
        write!(f, "{class}({},{}) query arity {}", self.max_input_arity, self.max_aux_arity, self.query_arity)
    }
}

/// A program state `(D, I, A)` stored as one structure over the full schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProgramState {
    pub structure: Structure,
}

impl ProgramState {
    pub fn domain(&self) -> usize {
        self.structure.domain()
    }

    /// The input part: relations of input symbols, in schema order.
    pub fn input(&self, schema: &Schema) -> Vec<&BTreeSet<Tuple>> {
        schema.input_ids().into_iter().map(|s| self.structure.relation(s)).collect()
    }

    /// The aux part, in schema order.
    pub fn aux(&self, schema: &Schema) -> Vec<&BTreeSet<Tuple>> {
        schema.aux_ids().into_iter().map(|s| self.structure.relation(s)).collect()
    }

    pub fn query_nonempty(&self, p: &DynamicProgram) -> bool {
        !self.structure.relation(p.query()).is_empty()
    }
}

/// All modifications over `1..=n`: per input symbol, insertions of every
/// tuple then deletions of every tuple.
pub fn all_modifications(schema: &Schema, n: usize) -> Vec<Modification> {
    let mut out = Vec::new();
    for s in schema.input_ids() {
        let ts = all_tuples(n, schema.arity(s));
        out.extend(ts.iter().map(|t| Modification::ins(s, t.clone())));
        out.extend(ts.iter().map(|t| Modification::del(s, t.clone())));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqMode {
    /// Pairwise distinct insertions only.
    InsertionsOnly,
    /// Any insertions and deletions, spurious ones included.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumError {
    #[error("sequence enumeration needs {needed} sequences, budget {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("{targets} colored elements do not fit in domain {n}")]
    TooManyTargets { targets: usize, n: usize },
    #[error("color {0} uses a symbol outside the unary list")]
    BadColor(Color),
}

/// Number of sequences `enumerate_sequences` would produce.
pub fn count_sequences(schema: &Schema, n: usize, max_len: usize, mode: SeqMode) -> u128 {
    let mods = all_modifications(schema, n);
    match mode {
        SeqMode::All => {
            let m = mods.len() as u128;
            (0..=max_len).fold((0u128, 1u128), |(acc, pw), _| (acc.saturating_add(pw), pw.saturating_mul(m))).0
        }
        SeqMode::InsertionsOnly => {
            let m = mods.iter().filter(|d| d.kind == OpKind::Ins).count() as u128;
            let mut total = 0u128;
            let mut perm = 1u128;
            for l in 0..=max_len as u128 {
                if l > m {
                    break;
                }
                total = total.saturating_add(perm);
                perm = perm.saturating_mul(m - l);
            }
            total
        }
    }
}

/// Exhaustive, duplicate-free list of sequences of length `0..=max_len`.
pub fn enumerate_sequences(
    schema: &Schema,
    n: usize,
    max_len: usize,
    mode: SeqMode,
    budget: u128,
) -> Result<Vec<Vec<Modification>>, EnumError> {
    let needed = count_sequences(schema, n, max_len, mode);
    if needed > budget {
        return Err(EnumError::Budget { needed, budget });
    }
    let mods: Vec<Modification> = match mode {
        SeqMode::All => all_modifications(schema, n),
        SeqMode::InsertionsOnly => all_modifications(schema, n).into_iter().filter(|d| d.kind == OpKind::Ins).collect(),
    };
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(mods: &[Modification], mode: SeqMode, max_len: usize, cur: &mut Vec<Modification>, out: &mut Vec<Vec<Modification>>) {
        out.push(cur.clone());
        if cur.len() == max_len {
            return;
        }
        for m in mods {
            if mode == SeqMode::InsertionsOnly && cur.contains(m) {
                continue;
            }
            cur.push(m.clone());
            rec(mods, mode, max_len, cur, out);
            cur.pop();
        }
    }
    rec(&mods, mode, max_len, &mut cur, &mut out);
    Ok(out)
}

/// Depth-first walk over all sequences up to `max_len`, sharing prefixes.
/// The visitor sees every sequence with its state and returns `false` to
/// stop the whole walk. Returns `false` iff stopped.
pub fn explore(
    p: &DynamicProgram,
    n: usize,
    max_len: usize,
    mode: SeqMode,
    visit: &mut dyn FnMut(&[Modification], &ProgramState) -> bool,
) -> bool {
    let mods: Vec<Modification> = match mode {
        SeqMode::All => p.modifications(n),
        SeqMode::InsertionsOnly => p.modifications(n).into_iter().filter(|d| d.kind == OpKind::Ins).collect(),
    };
    fn rec(
        p: &DynamicProgram,
        mods: &[Modification],
        mode: SeqMode,
        max_len: usize,
        cur: &mut Vec<Modification>,
        state: &ProgramState,
        visit: &mut dyn FnMut(&[Modification], &ProgramState) -> bool,
    ) -> bool {
        if !visit(cur, state) {
            return false;
        }
        if cur.len() == max_len {
            return true;
        }
        for m in mods {
            if mode == SeqMode::InsertionsOnly && cur.contains(m) {
                continue;
            }
            let next = p.apply(state, m);
            cur.push(m.clone());
            let go = rec(p, mods, mode, max_len, cur, &next, visit);
            cur.pop();
            if !go {
                return false;
            }
        }
        true
    }
    let init = p.init_state(n);
    rec(p, &mods, mode, max_len, &mut Vec::new(), &init, visit)
}

/// Searches for a sequence over some `n ≤ max_domain` of length at most
/// `max_len` reaching a state with non-empty query. Returns the witness.
pub fn search_nonempty(p: &DynamicProgram, max_domain: usize, max_len: usize) -> Option<(usize, Vec<Modification>)> {
    for n in 1..=max_domain {
        let mut found = None;
        explore(p, n, max_len, SeqMode::All, &mut |seq, st| {
            if st.query_nonempty(p) {
                found = Some(seq.to_vec());
                false
            } else {
                true
            }
        });
        if let Some(seq) = found {
            return Some((n, seq));
        }
    }
    None
}

/// Breadth-first search over distinct states of domain `n`, up to
/// `max_len` modifications, for a state satisfying `goal`. Returns a
/// shortest witness.
pub fn bfs_find(
    p: &DynamicProgram,
    n: usize,
    max_len: usize,
    goal: &mut dyn FnMut(&ProgramState) -> bool,
) -> Option<Vec<Modification>> {
    let mods = p.modifications(n);
    let init = p.init_state(n);
    let mut parent: HashMap<ProgramState, Option<(ProgramState, usize)>> = HashMap::new();
    parent.insert(init.clone(), None);
    let mut frontier = vec![init];
    let mut depth = 0;
    loop {
        for s in &frontier {
            if goal(s) {
                let mut seq = Vec::new();
                let mut cur = s.clone();
                while let Some(Some((prev, m))) = parent.get(&cur) {
                    seq.push(mods[*m].clone());
                    cur = prev.clone();
                }
                seq.reverse();
                return Some(seq);
            }
        }
        if depth == max_len || frontier.is_empty() {
            return None;
        }
        let mut next = Vec::new();
        for s in &frontier {
            for (i, m) in mods.iter().enumerate() {
                let t = p.apply(s, m);
                if !parent.contains_key(&t) {
                    parent.insert(t.clone(), Some((s.clone(), i)));
                    next.push(t);
                }
            }
        }
        frontier = next;
        depth += 1;
    }
}

/// [`bfs_find`] for a non-empty query over domains `1..=max_domain`.
pub fn bfs_nonempty(p: &DynamicProgram, max_domain: usize, max_len: usize) -> Option<(usize, Vec<Modification>)> {
    (1..=max_domain).find_map(|n| bfs_find(p, n, max_len, &mut |s| s.query_nonempty(p)).map(|seq| (n, seq)))
}

/// One normal-form insertion sequence. Element `i+1` receives color
/// `targets[i]` (a bit mask over `unary`); its insertions are contiguous
/// and follow `orders[color]`, which must list exactly the color's symbols.
/// With `block_order`, targets are first sorted so that equal colors form
/// consecutive blocks in color-index order.
pub fn normal_form_sequence(
    unary: &[SymId],
    n: usize,
    targets: &[Color],
    orders: &BTreeMap<Color, Vec<SymId>>,
    block_order: bool,
) -> Result<Vec<Modification>, EnumError> {
    if targets.len() > n {
        return Err(EnumError::TooManyTargets { targets: targets.len(), n });
    }
    let mut ts = targets.to_vec();
    if block_order {
        ts.sort_unstable();
    }
    let mut out = Vec::new();
    for (i, &c) in ts.iter().enumerate() {
        if c >> unary.len() != 0 || c == 0 {
            return Err(EnumError::BadColor(c));
        }
        let e = (i + 1) as Elem;
        let default = color_symbols(unary, c);
        let order = orders.get(&c).unwrap_or(&default);
        let mut check = order.clone();
        check.sort_unstable();
        let mut want = default.clone();
        want.sort_unstable();
        if check != want {
            return Err(EnumError::BadColor(c));
        }
        out.extend(order.iter().map(|&s| Modification::ins(s, vec![e])));
    }
    Ok(out)
}

/// Symbols of `unary` contained in color `c`, in list order.
pub fn color_symbols(unary: &[SymId], c: Color) -> Vec<SymId> {
    unary.iter().enumerate().filter(|(i, _)| c >> i & 1 == 1).map(|(_, &s)| s).collect()
}

/// Normal-form sequences for every choice of per-color insertion orders.
pub fn normal_form_sequences(
    unary: &[SymId],
    n: usize,
    targets: &[Color],
    block_order: bool,
) -> Result<Vec<Vec<Modification>>, EnumError> {
    let colors: Vec<Color> = targets.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let choices: Vec<Vec<Vec<SymId>>> = colors
        .iter()
        .map(|&c| {
            let syms = color_symbols(unary, c);
            syms.iter().copied().permutations(syms.len()).collect()
        })
        .collect();
    let mut out = Vec::new();
    for pick in choices.iter().multi_cartesian_product_or_unit() {
        let orders: BTreeMap<Color, Vec<SymId>> = colors.iter().copied().zip(pick.into_iter().cloned()).collect();
        out.push(normal_form_sequence(unary, n, targets, &orders, block_order)?);
    }
    Ok(out)
}

/// Cartesian product that yields one empty pick for zero factors.
trait ProductOrUnit<'a, T: 'a> {
    fn multi_cartesian_product_or_unit(self) -> Box<dyn Iterator<Item = Vec<&'a T>> + 'a>;
}

impl<'a, T: 'a> ProductOrUnit<'a, T> for std::slice::Iter<'a, Vec<T>> {
    fn multi_cartesian_product_or_unit(self) -> Box<dyn Iterator<Item = Vec<&'a T>> + 'a> {
        let v: Vec<&'a Vec<T>> = self.collect();
        if v.is_empty() {
            Box::new(std::iter::once(Vec::new()))
        } else {
            Box::new(v.into_iter().map(|x| x.iter()).multi_cartesian_product())
        }
    }
}

/// All words of proper colors (`1..2^|unary|`) of length at most `n`; with
/// `sorted` only non-decreasing words (color multisets in block order).
pub fn color_words(num_unary: usize, n: usize, sorted: bool) -> Vec<Vec<Color>> {
    let top = 1usize << num_unary;
    let mut out = Vec::new();
    fn rec(top: usize, n: usize, sorted: bool, cur: &mut Vec<Color>, out: &mut Vec<Vec<Color>>) {
        out.push(cur.clone());
        if cur.len() == n {
            return;
        }
        let lo = if sorted { cur.last().copied().unwrap_or(1) } else { 1 };
        for c in lo..top {
            cur.push(c);
            rec(top, n, sorted, cur, out);
            cur.pop();
        }
    }
    rec(top, n, sorted, &mut Vec::new(), &mut out);
    out
}

/// (N1): the modifications touching each element form a contiguous block.
pub fn satisfies_n1(seq: &[Modification]) -> bool {
    let mut closed: BTreeSet<Elem> = BTreeSet::new();
    let mut current: Option<Elem> = None;
    for m in seq {
        let Some(&e) = m.tuple.first() else { continue };
        if current != Some(e) {
            if closed.contains(&e) {
                return false;
            }
            if let Some(c) = current {
                closed.insert(c);
            }
            current = Some(e);
        }
    }
    true
}

/// (N2): elements with equal final color were colored with the same
/// operation order.
pub fn satisfies_n2(seq: &[Modification]) -> bool {
    let mut per_elem: BTreeMap<Elem, Vec<SymId>> = BTreeMap::new();
    for m in seq {
        if let Some(&e) = m.tuple.first() {
            per_elem.entry(e).or_default().push(m.sym);
        }
    }
    let mut per_color: BTreeMap<Vec<SymId>, Vec<SymId>> = BTreeMap::new();
    for order in per_elem.values() {
        let mut key = order.clone();
        key.sort_unstable();
        match per_color.get(&key) {
            Some(o) if o != order => return false,
            Some(_) => {}
            None => {
                per_color.insert(key, order.clone());
            }
        }
    }
    true
}

/// Block-order refinement: blocks appear in non-decreasing color order,
/// where a color is the bit mask over `unary`.
pub fn satisfies_block_order(seq: &[Modification], unary: &[SymId]) -> bool {
    let mut colors: Vec<(Elem, Color)> = Vec::new();
    for m in seq {
        let Some(&e) = m.tuple.first() else { continue };
        let bit = unary.iter().position(|&u| u == m.sym).map_or(0, |i| 1 << i);
        match colors.last_mut() {
            Some((le, c)) if *le == e => *c |= bit,
            _ => colors.push((e, bit)),
        }
    }
    colors.windows(2).all(|w| w[0].1 <= w[1].1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Symbol;

    fn u_schema() -> Schema {
        Schema::new(vec![Symbol::new("U", 1, Kind::Input)]).unwrap()
    }

    #[test]
    fn sequence_counts() {
        let sc = u_schema();
        let all = enumerate_sequences(&sc, 1, 1, SeqMode::All, 100).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.contains(&vec![Modification::ins(0, vec![1])]));
        assert!(all.contains(&vec![Modification::del(0, vec![1])]));
        let ins = enumerate_sequences(&sc, 2, 2, SeqMode::InsertionsOnly, 100).unwrap();
        assert_eq!(ins.iter().filter(|s| !s.is_empty()).count(), 4);
        assert_eq!(ins.len(), 5);
        assert_eq!(enumerate_sequences(&sc, 3, 0, SeqMode::All, 100).unwrap(), vec![Vec::<Modification>::new()]);
        assert_eq!(count_sequences(&sc, 2, 2, SeqMode::InsertionsOnly), 5);
        assert!(matches!(enumerate_sequences(&sc, 4, 6, SeqMode::All, 1000), Err(EnumError::Budget { .. })));
    }

    #[test]
    fn normal_form_examples() {
        let sc = u_schema();
        let seq = normal_form_sequence(&[0], 2, &[1, 1], &BTreeMap::new(), false).unwrap();
        assert_eq!(seq, vec![Modification::ins(0, vec![1]), Modification::ins(0, vec![2])]);
        let _ = sc;
        let uv = [0usize, 1usize];
        let orders: BTreeMap<Color, Vec<SymId>> = [(3, vec![0, 1])].into();
        let seq = normal_form_sequence(&uv, 1, &[3], &orders, false).unwrap();
        assert_eq!(seq, vec![Modification::ins(0, vec![1]), Modification::ins(1, vec![1])]);
        assert_eq!(normal_form_sequences(&uv, 1, &[3], false).unwrap().len(), 2);
        assert!(matches!(normal_form_sequence(&uv, 1, &[1, 2], &BTreeMap::new(), false), Err(EnumError::TooManyTargets { .. })));
    }

    #[test]
    fn color_word_counts() {
        // 3 proper colors, words of length <= 2: 1 + 3 + 9.
        assert_eq!(color_words(2, 2, false).len(), 13);
        // multisets: 1 + 3 + 6.
        assert_eq!(color_words(2, 2, true).len(), 10);
    }

    #[test]
    fn n1_n2_checks() {
        let a = Modification::ins(0, vec![1]);
        let b = Modification::ins(1, vec![1]);
        let c = Modification::ins(0, vec![2]);
        let d = Modification::ins(1, vec![2]);
        assert!(satisfies_n1(&[a.clone(), b.clone(), c.clone(), d.clone()]));
        assert!(!satisfies_n1(&[a.clone(), c.clone(), b.clone()]));
        assert!(satisfies_n2(&[a.clone(), b.clone(), c.clone(), d.clone()]));
        assert!(!satisfies_n2(&[a, b, d, c]));
    }
}
