//! Program-to-program compilers: reductions between emptiness and
//! consistency, translations of two-counter automata into dynamic
//! programs, and the maps from automaton runs to modification sequences.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::counter::{CaAction, CounterAutomaton};
use crate::dsl::parse_program;
use crate::dynprog::{all_ops, Definition, DynamicProgram, FragmentProfile, Modification, Op, OpKind, ProgramBuilder};
use crate::logic::{Elem, Formula, Kind, Schema, Symbol, SymId, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("the automaton has {0} counters, exactly 2 are needed")]
    Counters(usize),
    #[error("the automaton is not semi-deterministic at state {0}")]
    NotSemiDeterministic(String),
    #[error("the program is not quantifier-free")]
    NotQuantifierFree,
    #[error("the run does not replay from the initial configuration")]
    InvalidRun,
    #[error("the run needs {needed} elements, the domain has {n}")]
    DomainTooSmall { needed: usize, n: usize },
}

/// What a compiler produced and which guarantee it carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReport {
    pub input_fragment: FragmentProfile,
    pub output_fragment: FragmentProfile,
    /// Every source symbol with the target symbols that represent it.
    pub mapping: Vec<(String, Vec<String>)>,
    pub guarantee: &'static str,
    /// Fresh names that had to be changed to avoid clashes.
    pub renamed: Vec<(String, String)>,
}

impl ReductionReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "input-fragment: {}\noutput-fragment: {}\nguarantee: {}\n",
            self.input_fragment, self.output_fragment, self.guarantee
        );
        for (s, ts) in &self.mapping {
            out.push_str(&format!("map: {s} -> {}\n", ts.join(" ")));
        }
        for (a, b) in &self.renamed {
            out.push_str(&format!("renamed: {a} -> {b}\n"));
        }
        out
    }
}

/// Allocates fresh symbols, recording every forced rename.
struct Fresh {
    symbols: Vec<Symbol>,
    taken: BTreeSet<String>,
    renamed: Vec<(String, String)>,
}

impl Fresh {
    fn new(schema: &Schema) -> Self {
        Fresh {
            symbols: schema.symbols().to_vec(),
            taken: schema.symbols().iter().map(|s| s.name.clone()).collect(),
            renamed: Vec::new(),
        }
    }

    fn add(&mut self, base: &str, arity: usize, kind: Kind) -> SymId {
        let mut name = base.to_string();
        while self.taken.contains(&name) {
            name.push('_');
        }
        if name != base {
            self.renamed.push((base.to_string(), name.clone()));
        }
        self.taken.insert(name.clone());
        self.symbols.push(Symbol::new(name, arity, kind));
        self.symbols.len() - 1
    }

    fn schema(&self) -> Schema {
        Schema::new(self.symbols.clone()).expect("fresh names are distinct")
    }
}

fn vars(prefix: &str, n: usize) -> Vec<Var> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn fresh_vars(prefix: &str, n: usize, avoid: &[Var]) -> Vec<Var> {
    let mut p = prefix.to_string();
    loop {
        let vs = vars(&p, n);
        if vs.iter().all(|v| !avoid.contains(v)) {
            return vs;
        }
        p.push('_');
    }
}

fn atom(sym: SymId, vs: &[Var]) -> Formula {
    Formula::Atom(sym, vs.to_vec())
}

fn bit(sym: SymId) -> Formula {
    Formula::Atom(sym, Vec::new())
}

fn tuple_eq(a: &[Var], b: &[Var]) -> Formula {
    Formula::and_all(a.iter().zip(b).map(|(x, y)| Formula::Eq(x.clone(), y.clone())))
}

fn xor(a: Formula, b: Formula) -> Formula {
    Formula::not(Formula::iff(a, b))
}

/// The update body of `aux` under `op` with parameters and head renamed.
/// Capture-free for quantifier-free bodies.
fn instantiate(p: &DynamicProgram, op: Op, aux: SymId, params: &[Var], head: &[Var]) -> Formula {
    let rule = p.rule(op);
    let def = p.update(op, aux);
    let map: BTreeMap<Var, Var> = rule
        .params
        .iter()
        .cloned()
        .zip(params.iter().cloned())
        .chain(def.head.iter().cloned().zip(head.iter().cloned()))
        .collect();
    def.body.rename_free(&map)
}

fn built(b: &ProgramBuilder) -> DynamicProgram {
    b.build().unwrap_or_else(|e| panic!("compiled program is malformed: {e}")).0
}

fn identity_mapping(sc: &Schema) -> Vec<(String, Vec<String>)> {
    sc.symbols().iter().map(|s| (s.name.clone(), vec![s.name.clone()])).collect()
}

/// Adds a copy `Q'` of the query that receives the tuples of `Q` one
/// modification later and never loses any. The result is consistent iff
/// `p` is empty.
pub fn emptiness_to_consistency(p: &DynamicProgram) -> (DynamicProgram, ReductionReport) {
    let sc = p.schema();
    let q = p.query();
    let mut fresh = Fresh::new(sc);
    let qd = fresh.add(&format!("{}'", sc.name(q)), sc.arity(q), Kind::Aux);
    let target = fresh.schema();
    let mut b = ProgramBuilder::new(target.clone());
    for (&op, rule) in p.rules() {
        b.params_owned(op, rule.params.clone());
        for (&aux, def) in &rule.updates {
            b.update(op, aux, def.clone());
        }
        let head = fresh_vars("y", sc.arity(q), &rule.params);
        b.update(op, qd, Definition { head: head.clone(), body: Formula::or(atom(q, &head), atom(qd, &head)) });
    }
    for (&aux, def) in p.init_defs() {
        b.init(aux, def.clone());
    }
    b.query(qd);
    let out = built(&b);
    let mut mapping = identity_mapping(sc);
    mapping[q].1.push(target.name(qd).to_string());
    let report = ReductionReport {
        input_fragment: p.classify(),
        output_fragment: out.classify(),
        mapping,
        guarantee: "consistent iff the source program is empty",
        renamed: fresh.renamed,
    };
    (out, report)
}

/// Runs two copies of `p` on independent primed input copies. The fresh
/// query collects, one modification late, every tuple in exactly one
/// query copy while the two input copies agree. Empty iff `p` is
/// consistent.
pub fn consistency_to_emptiness_fo(p: &DynamicProgram) -> (DynamicProgram, ReductionReport) {
    let sc = p.schema();
    let q = p.query();
    let mut fresh = Fresh::new(sc);
    let copy: Vec<SymId> = sc.all_ids().into_iter().map(|s| fresh.add(&format!("{}'", sc.name(s)), sc.arity(s), sc.symbol(s).kind)).collect();
    let diff = fresh.add("Diff", sc.arity(q), Kind::Aux);
    let target = fresh.schema();
    let second = |s: SymId| if s < copy.len() { copy[s] } else { s };
    let mut b = ProgramBuilder::new(target.clone());
    for (&op, rule) in p.rules() {
        let op2 = Op { kind: op.kind, sym: copy[op.sym] };
        let head = fresh_vars("y", sc.arity(q), &rule.params);
        let equal = Formula::and_all(sc.input_ids().into_iter().map(|s| {
            let xs = fresh_vars("e", sc.arity(s), &head);
            let body = Formula::iff(atom(s, &xs), atom(copy[s], &xs));
            xs.iter().rev().fold(body, |f, x| Formula::forall(x, f))
        }));
        let collect = Formula::or(atom(diff, &head), Formula::and(equal, xor(atom(q, &head), atom(copy[q], &head))));
        b.params_owned(op, rule.params.clone());
        b.params_owned(op2, rule.params.clone());
        for (&aux, def) in &rule.updates {
            b.update(op, aux, def.clone());
            b.update(op2, copy[aux], Definition { head: def.head.clone(), body: def.body.map_symbols(&second) });
        }
        for o in [op, op2] {
            b.update(o, diff, Definition { head: head.clone(), body: collect.clone() });
        }
    }
    for (&aux, def) in p.init_defs() {
        b.init(aux, def.clone());
        b.init(copy[aux], def.clone());
    }
    b.query(diff);
    let out = built(&b);
    let mut mapping: Vec<(String, Vec<String>)> =
        sc.all_ids().into_iter().map(|s| (sc.name(s).to_string(), vec![sc.name(s).to_string(), target.name(copy[s]).to_string()])).collect();
    mapping[q].1.push(target.name(diff).to_string());
    let report = ReductionReport {
        input_fragment: p.classify(),
        output_fragment: out.classify(),
        mapping,
        guarantee: "empty iff the source program is consistent",
        renamed: fresh.renamed,
    };
    (out, report)
}

/// Splits a sequence of [`consistency_to_emptiness_fo`]`(source)` into the
/// two modification sequences of `source` it simulates.
pub fn split_tracks(source: &DynamicProgram, seq: &[Modification]) -> (Vec<Modification>, Vec<Modification>) {
    let n = source.schema().len();
    let (first, second): (Vec<_>, Vec<_>) = seq.iter().partition(|d| d.sym < n);
    let second = second.into_iter().map(|d| Modification { kind: d.kind, sym: d.sym - n, tuple: d.tuple.clone() }).collect();
    (first.into_iter().cloned().collect(), second)
}

/// One guarded alternative of an update. Aux symbols missing from
/// `values` keep their value.
struct Case {
    guard: Formula,
    values: BTreeMap<SymId, Formula>,
}

/// Installs the updates of `op` for a list of mutually exclusive cases:
/// every symbol takes the value of the case whose guard holds, and if no
/// guard holds everything is kept and the sticky `err` bit is set.
fn install_cases(b: &mut ProgramBuilder, op: Op, heads: &BTreeMap<SymId, Vec<Var>>, cases: &[Case], err: SymId) {
    let ok = Formula::or_all(cases.iter().map(|c| c.guard.clone()));
    let touched: BTreeSet<SymId> = cases.iter().flat_map(|c| c.values.keys().copied()).collect();
    for aux in touched {
        let head = &heads[&aux];
        let frame = atom(aux, head);
        let body = Formula::or(
            Formula::or_all(cases.iter().map(|c| Formula::and(c.guard.clone(), c.values.get(&aux).cloned().unwrap_or_else(|| frame.clone())))),
            Formula::and(Formula::not(ok.clone()), frame),
        );
        b.update(op, aux, Definition { head: head.clone(), body });
    }
    b.update(op, err, Definition { head: Vec::new(), body: Formula::or(bit(err), Formula::not(ok)) });
}

/// Protocol relations of one input symbol `S` in the quantifier-free
/// reduction.
#[derive(Clone, Copy)]
struct Protocol {
    /// Redundant modification of `S` on the second track.
    redundant: SymId,
    /// Insert-then-delete pair on the second track.
    pair: SymId,
    /// Announces a deletion that the second track performs early.
    early_del: SymId,
    /// Announces an insertion that the second track performs early.
    early_ins: SymId,
}

/// Quantifier-free variant: a single shared input database, two aux
/// copies, and protocol relations with which a sequence announces one
/// innocuous transformation that only the second copy performs. The
/// query collects, one modification late, the tuples in exactly one
/// query copy once the transformation is complete and no protocol error
/// occurred. Preserves quantifier-freeness and the arities.
pub fn consistency_to_emptiness_qf(p: &DynamicProgram) -> Result<(DynamicProgram, ReductionReport), CompileError> {
    if !p.classify().quantifier_free {
        return Err(CompileError::NotQuantifierFree);
    }
    let sc = p.schema();
    let q = p.query();
    let mut fresh = Fresh::new(sc);
    let mut protocol: BTreeMap<SymId, Protocol> = BTreeMap::new();
    for s in sc.input_ids() {
        let (name, k) = (sc.name(s).to_string(), sc.arity(s));
        let pr = Protocol {
            redundant: fresh.add(&format!("U_{name}"), k, Kind::Input),
            pair: fresh.add(&format!("I_{name}"), k, Kind::Input),
            early_del: fresh.add(&format!("T_{name}"), k, Kind::Input),
            early_ins: fresh.add(&format!("T'_{name}"), k, Kind::Input),
        };
        protocol.insert(s, pr);
    }
    let copy: BTreeMap<SymId, SymId> =
        sc.aux_ids().into_iter().map(|a| (a, fresh.add(&format!("{}'", sc.name(a)), sc.arity(a), Kind::Aux))).collect();
    let err = fresh.add("Err", 0, Kind::Aux);
    let done = fresh.add("Done", 0, Kind::Aux);
    let lo = fresh.add("Phase_lo", 0, Kind::Aux);
    let hi = fresh.add("Phase_hi", 0, Kind::Aux);
    let diff = fresh.add("Diff", sc.arity(q), Kind::Aux);
    let target = fresh.schema();

    let second = |s: SymId| copy.get(&s).copied().unwrap_or(s);
    let phase = |k: u8| {
        let l = if k & 1 == 1 { bit(lo) } else { Formula::not(bit(lo)) };
        let h = if k & 2 == 2 { bit(hi) } else { Formula::not(bit(hi)) };
        Formula::and(l, h)
    };
    let mut heads: BTreeMap<SymId, Vec<Var>> = BTreeMap::new();
    for a in sc.aux_ids() {
        heads.insert(a, vars("h", sc.arity(a)));
        heads.insert(copy[&a], vars("h", sc.arity(a)));
    }
    for s in [done, lo, hi] {
        heads.insert(s, Vec::new());
    }
    // Copy two after `op`, optionally seeing the announced modification.
    let track2 = |op: Op, params: &[Var], marked: bool| -> BTreeMap<SymId, Formula> {
        sc.aux_ids()
            .into_iter()
            .map(|a| {
                let mut f = instantiate(p, op, a, params, &heads[&a]);
                if marked {
                    f = f.subst_atoms(&|s, vs| {
                        protocol.get(&s).map(|m| {
                            Formula::and(Formula::or(atom(s, vs), atom(m.early_ins, vs)), Formula::not(atom(m.early_del, vs)))
                        })
                    });
                }
                (copy[&a], f.map_symbols(&second))
            })
            .collect()
    };
    let track1 = |op: Op, params: &[Var]| -> BTreeMap<SymId, Formula> {
        sc.aux_ids().into_iter().map(|a| (a, instantiate(p, op, a, params, &heads[&a]))).collect()
    };
    // `ins_S(x⃗) del_S(x⃗)` in one step on copy two.
    let pair2 = |s: SymId, params: &[Var]| -> BTreeMap<SymId, Formula> {
        sc.aux_ids()
            .into_iter()
            .map(|a| {
                let del = instantiate(p, Op::del(s), a, params, &heads[&a]);
                let composed = del.subst_atoms(&|t, vs| {
                    if t == s {
                        Some(Formula::or(atom(s, vs), tuple_eq(vs, params)))
                    } else if sc.symbol(t).kind == Kind::Aux {
                        Some(instantiate(p, Op::ins(s), t, params, vs))
                    } else {
                        None
                    }
                });
                (copy[&a], composed.map_symbols(&second))
            })
            .collect()
    };
    let next = |mut values: BTreeMap<SymId, Formula>, k: u8, finish: bool| {
        values.insert(lo, if k & 1 == 1 { Formula::True } else { Formula::False });
        values.insert(hi, if k & 2 == 2 { Formula::True } else { Formula::False });
        if finish {
            values.insert(done, Formula::True);
        }
        values
    };
    let open = Formula::and(phase(0), Formula::not(bit(done)));

    let mut b = ProgramBuilder::new(target.clone());
    for op in all_ops(&target) {
        let params = vars("p", target.arity(op.sym));
        b.params_owned(op, params.clone());
        let mut cases = Vec::new();
        if let Some(m) = protocol.get(&op.sym) {
            // A modification of the shared database.
            let (conflict, matched) = match op.kind {
                OpKind::Ins => (atom(m.early_del, &params), atom(m.early_ins, &params)),
                OpKind::Del => (atom(m.early_ins, &params), atom(m.early_del, &params)),
            };
            let mut both = track1(op, &params);
            both.extend(track2(op, &params, false));
            cases.push(Case { guard: phase(0), values: next(both, 0, false) });
            let mut marked = track1(op, &params);
            marked.extend(track2(op, &params, true));
            cases.push(Case { guard: Formula::and(phase(1), Formula::not(conflict)), values: next(marked, 2, false) });
            cases.push(Case { guard: Formula::and(phase(2), matched), values: next(track1(op, &params), 3, false) });
        } else if let Some((&s, m)) = protocol.iter().find(|(_, m)| [m.redundant, m.pair, m.early_del, m.early_ins].contains(&op.sym)) {
            let sx = || atom(s, &params);
            match op.kind {
                OpKind::Ins if op.sym == m.early_ins => {
                    cases.push(Case { guard: open.clone(), values: next(track2(Op::ins(s), &params, false), 1, false) })
                }
                OpKind::Ins if op.sym == m.early_del => {
                    cases.push(Case { guard: open.clone(), values: next(track2(Op::del(s), &params, false), 1, false) })
                }
                OpKind::Del if op.sym == m.early_ins || op.sym == m.early_del => cases.push(Case {
                    guard: Formula::and(phase(3), atom(op.sym, &params)),
                    values: next(BTreeMap::new(), 0, true),
                }),
                OpKind::Ins if op.sym == m.redundant => cases.push(Case {
                    guard: Formula::and(open.clone(), sx()),
                    values: next(track2(Op::ins(s), &params, false), 0, true),
                }),
                OpKind::Del if op.sym == m.redundant => cases.push(Case {
                    guard: Formula::and(open.clone(), Formula::not(sx())),
                    values: next(track2(Op::del(s), &params, false), 0, true),
                }),
                OpKind::Ins => cases.push(Case {
                    guard: Formula::and(open.clone(), Formula::not(sx())),
                    values: next(pair2(s, &params), 0, true),
                }),
                OpKind::Del => {}
            }
        }
        install_cases(&mut b, op, &heads, &cases, err);
        let hd = fresh_vars("h", sc.arity(q), &params);
        let ready = Formula::and_all([Formula::not(bit(err)), bit(done), phase(0)]);
        b.update(
            op,
            diff,
            Definition {
                head: hd.clone(),
                body: Formula::or(atom(diff, &hd), Formula::and(ready, xor(atom(q, &hd), atom(copy[&q], &hd)))),
            },
        );
    }
    for (&aux, def) in p.init_defs() {
        b.init(aux, def.clone());
        b.init(copy[&aux], def.clone());
    }
    b.query(diff);
    let out = built(&b);
    let mut mapping = Vec::new();
    for s in sc.all_ids() {
        let mut ts = vec![sc.name(s).to_string()];
        if let Some(m) = protocol.get(&s) {
            ts.extend([m.redundant, m.pair, m.early_del, m.early_ins].map(|t| target.name(t).to_string()));
        } else {
            ts.push(target.name(copy[&s]).to_string());
        }
        if s == q {
            ts.push(target.name(diff).to_string());
        }
        mapping.push((sc.name(s).to_string(), ts));
    }
    let report = ReductionReport {
        input_fragment: p.classify(),
        output_fragment: out.classify(),
        mapping,
        guarantee: "empty iff the source program is consistent",
        renamed: fresh.renamed,
    };
    Ok((out, report))
}

// Two-counter automata.

fn state_ok(m: &CounterAutomaton, q: usize) -> bool {
    let out = m.outgoing(q);
    match out.len() {
        0 | 1 => true,
        2 => matches!(
            (m.transitions[out[0]].action, m.transitions[out[1]].action),
            (CaAction::Dec(c), CaAction::IfZero(d)) | (CaAction::IfZero(d), CaAction::Dec(c)) if c == d
        ),
        _ => false,
    }
}

fn check_machine(m: &CounterAutomaton) -> Result<(), CompileError> {
    if m.counters.len() != 2 {
        return Err(CompileError::Counters(m.counters.len()));
    }
    match (0..m.states.len()).find(|&q| !state_ok(m, q)) {
        Some(q) => Err(CompileError::NotSemiDeterministic(m.states[q].clone())),
        None => Ok(()),
    }
}

fn or_s(items: impl IntoIterator<Item = String>) -> String {
    let v: Vec<String> = items.into_iter().collect();
    match v.len() {
        0 => "false".to_string(),
        1 => v.into_iter().next().unwrap(),
        _ => format!("({})", v.join(" || ")),
    }
}

fn state_bit(m: &CounterAutomaton, q: usize) -> String {
    format!("R_{}()", m.states[q])
}

/// State bits of the sources of `action` transitions into `q`.
fn sources(m: &CounterAutomaton, action: CaAction, q: usize) -> String {
    or_s(m.transitions.iter().filter(|t| t.action == action && t.to == q).map(|t| state_bit(m, t.from)))
}

/// State bits of the sources of `action` transitions into accepting states.
fn accepting_sources(m: &CounterAutomaton, action: CaAction) -> String {
    or_s(m.transitions.iter().filter(|t| t.action == action && m.accepting.contains(&t.to)).map(|t| state_bit(m, t.from)))
}

fn enabled(m: &CounterAutomaton, action: CaAction) -> Vec<usize> {
    (0..m.states.len()).filter(|&p| m.transitions.iter().any(|t| t.from == p && t.action == action)).collect()
}

fn lacking(m: &CounterAutomaton, action: CaAction) -> String {
    let has = enabled(m, action);
    or_s((0..m.states.len()).filter(|p| !has.contains(p)).map(|p| state_bit(m, p)))
}

fn program(text: &str) -> DynamicProgram {
    parse_program(text).unwrap_or_else(|e| panic!("generated program does not parse: {e:?}\n{text}")).0
}

/// Maintains a list of the elements of `C{i}` with non-emptiness bit `B{i}`.
fn list_updates(i: usize, kind: OpKind) -> String {
    let (c, first, last, list, b) = (format!("C{i}"), format!("First{i}"), format!("Last{i}"), format!("List{i}"), format!("B{i}"));
    match kind {
        OpKind::Ins => format!(
            "  {b}() := {c}(u) && {b}() || !{c}(u);\n\
             \x20 {first}(x) := {c}(u) && {first}(x) || !{c}(u) && (!{b}() && u = x || {b}() && {first}(x));\n\
             \x20 {last}(x) := {c}(u) && {last}(x) || !{c}(u) && u = x;\n\
             \x20 {list}(x, y) := {c}(u) && {list}(x, y) || !{c}(u) && ({list}(x, y) || {last}(x) && u = y);\n"
        ),
        OpKind::Del => format!(
            "  {b}() := !{c}(u) && {b}() || {c}(u) && !({first}(u) && {last}(u));\n\
             \x20 {first}(x) := !{c}(u) && {first}(x) || {c}(u) && ({first}(x) && x != u || {first}(u) && {list}(u, x));\n\
             \x20 {last}(x) := !{c}(u) && {last}(x) || {c}(u) && ({last}(x) && x != u || {last}(u) && {list}(x, u));\n\
             \x20 {list}(x, y) := !{c}(u) && {list}(x, y) || {c}(u) && x != u && y != u && ({list}(x, y) || {list}(x, u) && {list}(u, y));\n"
        ),
    }
}

/// Shared text of the direct simulations. With `lists`, emptiness of a
/// counter is read from a maintained list instead of a quantifier.
fn direct_simulation(m: &CounterAutomaton, lists: bool) -> String {
    let mut aux: Vec<String> = m.states.iter().map(|s| format!("R_{s}/0")).collect();
    aux.extend(["Err/0".to_string(), "Acc/0".to_string()]);
    if lists {
        for i in 1..=2 {
            aux.extend([format!("B{i}/0"), format!("First{i}/1"), format!("Last{i}/1"), format!("List{i}/2")]);
        }
    }
    let mut out = format!("schema {{\n  input C1/1, C2/1, Z1/0, Z2/0;\n  aux {};\n}}\n", aux.join(", "));
    out.push_str(&format!("init {} := true;\n", state_bit(m, m.initial)));
    if m.accepting.contains(&m.initial) {
        out.push_str("init Acc() := true;\n");
    }
    for i in 1..=2 {
        let c = i - 1;
        let nonempty = if lists { format!("B{i}()") } else { format!("(exists x. C{i}(x))") };
        let rules = [
            (format!("insert C{i}(u)"), CaAction::Inc(c), format!("!C{i}(u)"), format!("C{i}(u)"), Some(OpKind::Ins)),
            (format!("delete C{i}(u)"), CaAction::Dec(c), format!("C{i}(u)"), format!("!C{i}(u)"), Some(OpKind::Del)),
            (format!("insert Z{i}()"), CaAction::IfZero(c), format!("!{nonempty}"), nonempty.clone(), None),
            (format!("delete Z{i}()"), CaAction::IfZero(c), format!("!{nonempty}"), nonempty.clone(), None),
        ];
        for (head, action, applicable, wrong, list) in rules {
            out.push_str(&format!("on {head} {{\n"));
            for q in 0..m.states.len() {
                out.push_str(&format!("  {} := {applicable} && !Err() && {};\n", state_bit(m, q), sources(m, action, q)));
            }
            out.push_str(&format!("  Err() := Err() || {wrong} || {};\n", lacking(m, action)));
            out.push_str(&format!("  Acc() := {applicable} && !Err() && {};\n", accepting_sources(m, action)));
            if let (true, Some(kind)) = (lists, list) {
                out.push_str(&list_updates(i, kind));
            }
            out.push_str("}\n");
        }
    }
    out.push_str("query Acc;\n");
    out
}

/// Boolean first-order program with unary inputs `C1, C2` holding the
/// counter values and input bits `Z1, Z2` whose modifications are zero
/// tests. One aux bit per state, a sticky error bit and the query `Acc`.
pub fn compile_2ca_fo10_text(m: &CounterAutomaton) -> Result<String, CompileError> {
    check_machine(m)?;
    Ok(direct_simulation(m, false))
}

pub fn compile_2ca_fo10(m: &CounterAutomaton) -> Result<DynamicProgram, CompileError> {
    Ok(program(&compile_2ca_fo10_text(m)?))
}

/// Quantifier-free variant: each counter relation is kept in a list with
/// a non-emptiness bit `B{i}` that replaces the existential zero test.
pub fn compile_2ca_prop12_text(m: &CounterAutomaton) -> Result<String, CompileError> {
    check_machine(m)?;
    Ok(direct_simulation(m, true))
}

pub fn compile_2ca_prop12(m: &CounterAutomaton) -> Result<DynamicProgram, CompileError> {
    Ok(program(&compile_2ca_prop12_text(m)?))
}

/// One protocol step of the list-input simulation.
struct Step {
    guard: String,
    next: String,
    action: Option<CaAction>,
    nonempty: Option<(usize, String)>,
}

fn step(guard: String, next: impl Into<String>) -> Step {
    Step { guard, next: next.into(), action: None, nonempty: None }
}

/// Protocol modes of the list-input simulation, in declaration order.
fn modes() -> Vec<String> {
    let mut out: Vec<String> = (0..6).map(|k| format!("M_init{k}")).collect();
    out.push("M_idle".to_string());
    for i in 1..=2 {
        for kind in ["inc", "dec"] {
            out.extend((1..=5).map(|k| format!("M_{kind}{i}_{k}")));
        }
    }
    out
}

/// Input symbols of the list-input simulation per counter, in order.
pub const PROP20_INPUTS: [&str; 6] = ["List", "In", "Min", "Last", "NextLast", "Z"];

/// Boolean quantifier-free program whose aux schema has bits only; the
/// counters are encoded in binary input lists.
///
/// Per counter `i` the inputs are `List{i}/2`, `In{i}`, `Min{i}`,
/// `Last{i}`, `NextLast{i}` and the bit `Z{i}`. The counter value is the
/// number of `List{i}` edges. A one-hot mode records the protocol
/// position; any modification without a matching step sets the sticky
/// bit `Err`. The steps are:
///
/// * start: `+Min1(h) +Last1(h) +In1(h) +Min2(h) +Last2(h) +In2(h)`, the
///   last two of each triple on the element in `Min{i}`;
/// * increment on `a ∉ In{i}` with `b ∈ Last{i}`: `+NextLast(a)` (the
///   state moves), `+List(b,a)` (sets `NonEmpty{i}`), `-Last(b)`,
///   `+In(a)`, `+Last(a)`, `-NextLast(a)`;
/// * decrement with `a ∈ Last{i}` and `List(b,a)`: `+NextLast(b)` needs
///   `NonEmpty{i}`, `b ∈ In{i}` and `b ∉ Last{i}` (the state moves),
///   `-List(b,a)` (sets `NonEmpty{i}` to `b ∉ Min{i}`), `-In(a)`,
///   `-Last(a)`, `+Last(b)`, `-NextLast(b)`;
/// * zero test: `+Z{i}` or `-Z{i}` in idle mode without `NonEmpty{i}`.
///
/// `Acc` holds in idle mode in an accepting state without error.
pub fn compile_2ca_prop20_text(m: &CounterAutomaton) -> Result<String, CompileError> {
    check_machine(m)?;
    let mut ops: BTreeMap<(String, OpKind), Vec<Step>> = BTreeMap::new();
    let mut add = |sym: String, kind: OpKind, s: Step| ops.entry((sym, kind)).or_default().push(s);
    for k in 0..6 {
        let i = k / 3 + 1;
        let next = if k == 5 { "M_idle".to_string() } else { format!("M_init{}", k + 1) };
        let (sym, guard) = match k % 3 {
            0 => (format!("Min{i}"), format!("M_init{k}()")),
            1 => (format!("Last{i}"), format!("M_init{k}() && Min{i}(u)")),
            _ => (format!("In{i}"), format!("M_init{k}() && Min{i}(u)")),
        };
        add(sym, OpKind::Ins, step(guard, next));
    }
    for i in 1..=2 {
        let c = i - 1;
        let from = |a: CaAction| or_s(enabled(m, a).into_iter().map(|p| state_bit(m, p)));
        let inc = |k: usize| format!("M_inc{i}_{k}");
        let dec = |k: usize| format!("M_dec{i}_{k}");
        let nl = format!("NextLast{i}");
        add(
            nl.clone(),
            OpKind::Ins,
            Step {
                guard: format!("M_idle() && !In{i}(u) && {}", from(CaAction::Inc(c))),
                next: inc(1),
                action: Some(CaAction::Inc(c)),
                nonempty: None,
            },
        );
        add(
            nl.clone(),
            OpKind::Ins,
            Step {
                guard: format!("M_idle() && NonEmpty{i}() && In{i}(u) && !Last{i}(u) && {}", from(CaAction::Dec(c))),
                next: dec(1),
                action: Some(CaAction::Dec(c)),
                nonempty: None,
            },
        );
        for kind in [OpKind::Ins, OpKind::Del] {
            add(
                format!("Z{i}"),
                kind,
                Step {
                    guard: format!("M_idle() && !NonEmpty{i}() && {}", from(CaAction::IfZero(c))),
                    next: "M_idle".to_string(),
                    action: Some(CaAction::IfZero(c)),
                    nonempty: None,
                },
            );
        }
        let mut s = step(format!("{}() && Last{i}(u) && NextLast{i}(v)", inc(1)), inc(2));
        s.nonempty = Some((i, "true".to_string()));
        add(format!("List{i}"), OpKind::Ins, s);
        add(format!("Last{i}"), OpKind::Del, step(format!("{}() && Last{i}(u)", inc(2)), inc(3)));
        add(format!("In{i}"), OpKind::Ins, step(format!("{}() && NextLast{i}(u)", inc(3)), inc(4)));
        add(format!("Last{i}"), OpKind::Ins, step(format!("{}() && NextLast{i}(u)", inc(4)), inc(5)));
        add(nl.clone(), OpKind::Del, step(format!("{}() && NextLast{i}(u)", inc(5)), "M_idle"));
        let mut s = step(format!("{}() && NextLast{i}(u) && Last{i}(v) && List{i}(u, v)", dec(1)), dec(2));
        s.nonempty = Some((i, format!("!Min{i}(u)")));
        add(format!("List{i}"), OpKind::Del, s);
        add(format!("In{i}"), OpKind::Del, step(format!("{}() && Last{i}(u)", dec(2)), dec(3)));
        add(format!("Last{i}"), OpKind::Del, step(format!("{}() && Last{i}(u)", dec(3)), dec(4)));
        add(format!("Last{i}"), OpKind::Ins, step(format!("{}() && NextLast{i}(u)", dec(4)), dec(5)));
        add(nl, OpKind::Del, step(format!("{}() && NextLast{i}(u)", dec(5)), "M_idle"));
    }

    let modes = modes();
    let mut inputs = Vec::new();
    for i in 1..=2 {
        for (sym, ar) in PROP20_INPUTS.iter().zip([2, 1, 1, 1, 1, 0]) {
            inputs.push((format!("{sym}{i}"), ar));
        }
    }
    let mut aux: Vec<String> = modes.iter().map(|b| format!("{b}/0")).collect();
    aux.extend(m.states.iter().map(|s| format!("R_{s}/0")));
    aux.extend(["NonEmpty1/0", "NonEmpty2/0", "Err/0", "Acc/0"].map(String::from));
    let mut out = format!(
        "schema {{\n  input {};\n  aux {};\n}}\n",
        inputs.iter().map(|(s, a)| format!("{s}/{a}")).collect::<Vec<_>>().join(", "),
        aux.join(", ")
    );
    out.push_str(&format!("init M_init0() := true;\ninit {} := true;\n", state_bit(m, m.initial)));
    for (sym, ar) in &inputs {
        let params = match ar {
            2 => "(u, v)",
            1 => "(u)",
            _ => "()",
        };
        for kind in [OpKind::Ins, OpKind::Del] {
            let steps = ops.get(&(sym.clone(), kind)).map(Vec::as_slice).unwrap_or(&[]);
            let guards: Vec<String> = steps.iter().map(|s| format!("!Err() && {}", s.guard)).collect();
            let ok = or_s(guards.clone());
            let keep = |b: &str| format!("!{ok} && {b}");
            let word = if kind == OpKind::Ins { "insert" } else { "delete" };
            out.push_str(&format!("on {word} {sym}{params} {{\n"));
            let mut new_values: BTreeMap<String, String> = BTreeMap::new();
            for b in &modes {
                let set = or_s(steps.iter().zip(&guards).filter(|(s, _)| &s.next == b).map(|(_, g)| g.clone()));
                new_values.insert(format!("{b}()"), format!("({set} || {})", keep(&format!("{b}()"))));
            }
            for q in 0..m.states.len() {
                let rq = state_bit(m, q);
                let moved = or_s(steps.iter().zip(&guards).map(|(s, g)| match s.action {
                    Some(a) => format!("{g} && {}", sources(m, a, q)),
                    None => format!("{g} && {rq}"),
                }));
                new_values.insert(rq.clone(), format!("({moved} || {})", keep(&rq)));
            }
            for i in 1..=2 {
                let ne = format!("NonEmpty{i}()");
                if steps.iter().any(|s| matches!(&s.nonempty, Some((j, _)) if *j == i)) {
                    let v = or_s(steps.iter().zip(&guards).map(|(s, g)| match &s.nonempty {
                        Some((j, v)) if *j == i => format!("{g} && {v}"),
                        _ => format!("{g} && {ne}"),
                    }));
                    new_values.insert(ne.clone(), format!("({v} || {})", keep(&ne)));
                }
            }
            for (b, v) in &new_values {
                out.push_str(&format!("  {b} := {v};\n"));
            }
            out.push_str(&format!("  Err() := Err() || !{ok};\n"));
            let acc = or_s(m.accepting.iter().map(|&q| new_values[&state_bit(m, q)].clone()));
            out.push_str(&format!("  Acc() := {ok} && {} && {acc};\n", new_values["M_idle()"]));
            out.push_str("}\n");
        }
    }
    out.push_str("query Acc;\n");
    Ok(out)
}

pub fn compile_2ca_prop20(m: &CounterAutomaton) -> Result<DynamicProgram, CompileError> {
    Ok(program(&compile_2ca_prop20_text(m)?))
}

/// Consistent Boolean program over one unary input `U` whose query says
/// that the automaton accepts within `|U|` steps.
///
/// `Le` is the insertion order of every element ever inserted, stored
/// reflexively so that its field is `Le(x, x)`. `Ucur` holds the `|U|`
/// first elements of the order, `Umax` the first `m` where `m` is the
/// size of `U` before the last deletion, and the counters `C1, C2` are
/// prefixes of the order as well. A fresh element of `U` simulates one
/// step exactly when `Ucur = Umax`; otherwise the simulation is frozen.
/// `Uacc` stores `Ucur` of the first step that starts or ends in an
/// accepting state, and `Acc` holds iff `Uacc` is non-empty and
/// contained in `Ucur`.
pub fn compile_2ca_consistent_fo12_text(m: &CounterAutomaton) -> Result<String, CompileError> {
    check_machine(m)?;
    // Field, order and strict order after inserting `u`.
    let field = |z: &str| format!("(Le({z}, {z}) || {z} = u)");
    let le = |a: &str, b: &str| format!("(Le({a}, {b}) || !Le(u, u) && {b} = u && {})", field(a));
    let ucur_ins = |z: &str| {
        format!(
            "(U(u) && Ucur({z}) || !U(u) && (Ucur({z}) || {} && !Ucur({z}) && (forall w1. {} && !Ucur(w1) -> {})))",
            field(z),
            field("w1"),
            le(z, "w1")
        )
    };
    let ucur_del = |z: &str| format!("(Ucur({z}) && (!U(u) || (exists w1. Ucur(w1) && Le({z}, w1) && {z} != w1)))");
    let synced = "(forall w3. Ucur(w3) <-> Umax(w3))".to_string();
    let active = format!("(!U(u) && {synced})");
    let frozen = format!("(U(u) || !{synced})");
    let q = |p: usize| format!("Q_{}()", m.states[p]);
    let nonempty = |c: usize| format!("(exists w4. C{}(w4))", c + 1);
    // The state reached by the step from the current state into `target`.
    let reach = |target: usize| {
        or_s(m.transitions.iter().filter(|t| t.to == target).map(|t| match t.action {
            CaAction::Inc(_) => q(t.from),
            CaAction::Dec(c) => format!("{} && {}", q(t.from), nonempty(c)),
            CaAction::IfZero(c) => format!("{} && !{}", q(t.from), nonempty(c)),
        }))
    };
    let accepting_now = or_s(m.accepting.iter().map(|&p| q(p)).chain(m.accepting.iter().map(|&f| reach(f))));
    let uacc_ins = |z: &str| format!("(Uacc({z}) || !(exists w5. Uacc(w5)) && {active} && {accepting_now} && {})", ucur_ins(z));

    let mut aux = vec!["Le/2".to_string()];
    aux.extend(["Ucur/1", "Umax/1", "Uacc/1", "C1/1", "C2/1"].map(String::from));
    aux.extend(m.states.iter().map(|s| format!("Q_{s}/0")));
    aux.push("Acc/0".to_string());
    let mut out = format!("schema {{\n  input U/1;\n  aux {};\n}}\n", aux.join(", "));
    out.push_str(&format!("init {} := true;\n", q(m.initial)));
    out.push_str("on insert U(u) {\n");
    out.push_str(&format!("  Le(x, y) := {};\n", le("x", "y")));
    out.push_str(&format!("  Ucur(x) := {};\n", ucur_ins("x")));
    out.push_str(&format!("  Umax(x) := {active} && {} || !{active} && Umax(x);\n", ucur_ins("x")));
    for c in 0..2 {
        let ci = format!("C{}", c + 1);
        let counting: Vec<usize> = (0..m.states.len())
            .filter(|&p| m.transitions.iter().any(|t| t.from == p && matches!(t.action, CaAction::Inc(d) | CaAction::Dec(d) if d == c)))
            .collect();
        let keep = or_s(std::iter::once(frozen.clone()).chain((0..m.states.len()).filter(|p| !counting.contains(p)).map(q)));
        let grow = m.transitions.iter().filter(|t| t.action == CaAction::Inc(c)).map(|t| {
            format!("{} && {} && (forall w6. {} -> {ci}(w6) || {})", q(t.from), field("x"), field("w6"), le("x", "w6"))
        });
        let shrink = m
            .transitions
            .iter()
            .filter(|t| t.action == CaAction::Dec(c))
            .map(|t| format!("{} && {ci}(x) && (exists w6. {ci}(w6) && Le(x, w6) && x != w6)", q(t.from)));
        out.push_str(&format!("  {ci}(x) := {keep} && {ci}(x) || {active} && {};\n", or_s(grow.chain(shrink))));
    }
    for p in 0..m.states.len() {
        out.push_str(&format!("  {} := {frozen} && {} || {active} && {};\n", q(p), q(p), reach(p)));
    }
    out.push_str(&format!("  Uacc(x) := {};\n", uacc_ins("x")));
    out.push_str(&format!("  Acc() := (exists y. {}) && (forall y. {} -> {});\n", uacc_ins("y"), uacc_ins("y"), ucur_ins("y")));
    out.push_str("}\non delete U(u) {\n");
    out.push_str(&format!("  Ucur(x) := {};\n", ucur_del("x")));
    out.push_str(&format!("  Acc() := (exists y. Uacc(y)) && (forall y. Uacc(y) -> {});\n", ucur_del("y")));
    out.push_str("}\nquery Acc;\n");
    Ok(out)
}

pub fn compile_2ca_consistent_fo12(m: &CounterAutomaton) -> Result<DynamicProgram, CompileError> {
    Ok(program(&compile_2ca_consistent_fo12_text(m)?))
}

/// Input ids of [`compile_2ca_fo10`] and [`compile_2ca_prop12`].
pub const C_IDS: [SymId; 2] = [0, 1];
pub const Z_IDS: [SymId; 2] = [2, 3];

fn replay_checked(m: &CounterAutomaton, run: &[usize]) -> Result<u64, CompileError> {
    m.max_counter(run).ok_or(CompileError::InvalidRun)
}

fn need(needed: usize, n: usize) -> Result<(), CompileError> {
    if needed > n {
        Err(CompileError::DomainTooSmall { needed, n })
    } else {
        Ok(())
    }
}

/// The sequence of the direct simulations for `run`: an increment inserts
/// the smallest element missing from the counter relation, a decrement
/// deletes the smallest present one, and zero tests of a counter
/// alternately insert and delete its bit.
pub fn run_to_sequence(m: &CounterAutomaton, run: &[usize], n: usize) -> Result<Vec<Modification>, CompileError> {
    need(replay_checked(m, run)? as usize, n)?;
    let mut sets: [BTreeSet<Elem>; 2] = Default::default();
    let mut bits = [false; 2];
    let mut out = Vec::new();
    for &t in run {
        out.push(match m.transitions[t].action {
            CaAction::Inc(c) => {
                let e = (1..).find(|e| !sets[c].contains(e)).unwrap();
                sets[c].insert(e);
                Modification::ins(C_IDS[c], vec![e])
            }
            CaAction::Dec(c) => {
                let e = sets[c].pop_first().ok_or(CompileError::InvalidRun)?;
                Modification::del(C_IDS[c], vec![e])
            }
            CaAction::IfZero(c) => {
                bits[c] = !bits[c];
                if bits[c] {
                    Modification::ins(Z_IDS[c], vec![])
                } else {
                    Modification::del(Z_IDS[c], vec![])
                }
            }
        });
    }
    Ok(out)
}

/// Input id of `{name}{i}` in [`compile_2ca_prop20`], `i` in `1..=2`.
pub fn prop20_id(name: &str, i: usize) -> SymId {
    let k = PROP20_INPUTS.iter().position(|s| *s == name).unwrap_or_else(|| panic!("unknown input {name}"));
    (i - 1) * PROP20_INPUTS.len() + k
}

/// The protocol sequence of [`compile_2ca_prop20`] for `run`. Both lists
/// start at element 1; increments append the smallest element not in the
/// list.
pub fn run_to_sequence_prop20(m: &CounterAutomaton, run: &[usize], n: usize) -> Result<Vec<Modification>, CompileError> {
    need(replay_checked(m, run)? as usize + 1, n)?;
    let id = prop20_id;
    let mut out = Vec::new();
    let mut lists: [Vec<Elem>; 2] = [vec![1], vec![1]];
    for i in 1..=2 {
        out.extend([Modification::ins(id("Min", i), vec![1]), Modification::ins(id("Last", i), vec![1]), Modification::ins(id("In", i), vec![1])]);
    }
    let mut bits = [false; 2];
    for &t in run {
        match m.transitions[t].action {
            CaAction::Inc(c) => {
                let i = c + 1;
                let b = *lists[c].last().unwrap();
                let a = (1..).find(|e| !lists[c].contains(e)).unwrap();
                lists[c].push(a);
                out.extend([
                    Modification::ins(id("NextLast", i), vec![a]),
                    Modification::ins(id("List", i), vec![b, a]),
                    Modification::del(id("Last", i), vec![b]),
                    Modification::ins(id("In", i), vec![a]),
                    Modification::ins(id("Last", i), vec![a]),
                    Modification::del(id("NextLast", i), vec![a]),
                ]);
            }
            CaAction::Dec(c) => {
                let i = c + 1;
                let a = lists[c].pop().unwrap();
                let b = *lists[c].last().unwrap();
                out.extend([
                    Modification::ins(id("NextLast", i), vec![b]),
                    Modification::del(id("List", i), vec![b, a]),
                    Modification::del(id("In", i), vec![a]),
                    Modification::del(id("Last", i), vec![a]),
                    Modification::ins(id("Last", i), vec![b]),
                    Modification::del(id("NextLast", i), vec![b]),
                ]);
            }
            CaAction::IfZero(c) => {
                bits[c] = !bits[c];
                let z = id("Z", c + 1);
                out.push(if bits[c] { Modification::ins(z, vec![]) } else { Modification::del(z, vec![]) });
            }
        }
    }
    Ok(out)
}

/// The sequence of [`compile_2ca_consistent_fo12`] for `run`: one fresh
/// element per step, at least one.
pub fn run_to_sequence_fo12(m: &CounterAutomaton, run: &[usize], n: usize) -> Result<Vec<Modification>, CompileError> {
    replay_checked(m, run)?;
    let len = run.len().max(1);
    need(len, n)?;
    Ok((1..=len as Elem).map(|e| Modification::ins(0, vec![e])).collect())
}
