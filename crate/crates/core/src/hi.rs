//! History independence and consistency: the local conditions H1 to H3,
//! homogeneity and type functions, the small-model sweep over normal-form
//! insertion sequences, innocuous transformations and a seeded fuzzer.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynprog::{color_symbols, explore, format_sequence, DynamicProgram, Modification, OpKind, ProgramState, SeqMode};
use crate::emptiness::{emptiness_prop11, tuple_sunflower_bound, Verdict, Witness};
use crate::transforms::consistency_to_emptiness_qf;
use crate::wsts::CoverBudget;
use crate::logic::{all_tuples, atomic_type, count_atomic_types, AtomicType, Color, Formula, Kind, Schema, Symbol, SymId, Tuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    H1,
    H2,
    H3,
    Inhomogeneous,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::H1 => "H1",
            ViolationKind::H2 => "H2",
            ViolationKind::H3 => "H3",
            ViolationKind::Inhomogeneous => "inhomogeneous",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evidence {
    /// Two modification sequences applied to the same state that end in
    /// different instances of `relation`.
    Orders {
        left: Vec<Modification>,
        right: Vec<Modification>,
        relation: SymId,
        left_value: BTreeSet<Tuple>,
        right_value: BTreeSet<Tuple>,
    },
    /// Two tuples with the same input type and different aux types.
    Types { a: Tuple, b: Tuple },
}

/// A state reached by `prefix` over `1..=domain` that breaks a local
/// condition or homogeneity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiViolation {
    pub kind: ViolationKind,
    pub domain: usize,
    pub prefix: Vec<Modification>,
    pub evidence: Evidence,
}

impl HiViolation {
    /// Re-runs the prefix and checks that the discrepancy reappears.
    pub fn replays(&self, p: &DynamicProgram) -> bool {
        let s = p.run(self.domain, &self.prefix);
        match &self.evidence {
            Evidence::Orders { left, right, relation, left_value, right_value } => {
                let l = p.apply_sequence(&s, left);
                let r = p.apply_sequence(&s, right);
                left_value != right_value
                    && l.structure.relation(*relation) == left_value
                    && r.structure.relation(*relation) == right_value
            }
            Evidence::Types { a, b } => {
                let sc = p.schema();
                let (inputs, aux) = (sc.input_ids(), sc.aux_ids());
                atomic_type(&s.structure, a, &inputs, sc) == atomic_type(&s.structure, b, &inputs, sc)
                    && atomic_type(&s.structure, a, &aux, sc) != atomic_type(&s.structure, b, &aux, sc)
            }
        }
    }

    pub fn render(&self, schema: &Schema) -> String {
        let mut out = format!("violation: {}\ndomain: {}\nprefix: {}\n", self.kind, self.domain, format_sequence(schema, &self.prefix));
        match &self.evidence {
            Evidence::Orders { left, right, relation, left_value, right_value } => {
                out.push_str(&format!("left: {}\n", format_sequence(schema, left)));
                out.push_str(&format!("right: {}\n", format_sequence(schema, right)));
                out.push_str(&format!("relation: {}\n", schema.name(*relation)));
                out.push_str(&format!("left-value: {}\n", tuples_json(left_value)));
                out.push_str(&format!("right-value: {}\n", tuples_json(right_value)));
            }
            Evidence::Types { a, b } => {
                out.push_str(&format!("tuples: {a:?} {b:?}\n"));
            }
        }
        out
    }
}

fn tuples_json(r: &BTreeSet<Tuple>) -> String {
    serde_json::to_string(&r.iter().collect::<Vec<_>>()).expect("tuples serialize")
}

/// The differing relation of largest arity, the first one on ties.
fn first_difference(a: &ProgramState, b: &ProgramState) -> Option<SymId> {
    let arity = |s: SymId| a.structure.relation(s).iter().chain(b.structure.relation(s)).next().map_or(0, |t| t.len());
    (0..a.structure.relations().len())
        .filter(|&s| a.structure.relation(s) != b.structure.relation(s))
        .rev()
        .max_by_key(|&s| arity(s))
}

fn orders(
    kind: ViolationKind,
    s: &ProgramState,
    left: Vec<Modification>,
    right: Vec<Modification>,
    l: &ProgramState,
    r: &ProgramState,
) -> Option<HiViolation> {
    let rel = first_difference(l, r)?;
    Some(HiViolation {
        kind,
        domain: s.domain(),
        prefix: Vec::new(),
        evidence: Evidence::Orders {
            left,
            right,
            relation: rel,
            left_value: l.structure.relation(rel).clone(),
            right_value: r.structure.relation(rel).clone(),
        },
    })
}

/// Insertions of tuples over `1..=universe`.
fn insertions(schema: &Schema, universe: usize) -> Vec<Modification> {
    let mut out = Vec::new();
    for s in schema.input_ids() {
        out.extend(all_tuples(universe, schema.arity(s)).into_iter().map(|t| Modification::ins(s, t)));
    }
    out
}

/// H1 to H3 restricted to tuples over `1..=universe`. Elements above the
/// universe must be untouched, so permuting them fixes the state.
fn local_hi_within(p: &DynamicProgram, s: &ProgramState, universe: usize) -> Option<HiViolation> {
    let ins = insertions(p.schema(), universe);
    let after: Vec<ProgramState> = ins.iter().map(|d| p.apply(s, d)).collect();
    for i in 0..ins.len() {
        for j in i + 1..ins.len() {
            let l = p.apply(&after[i], &ins[j]);
            let r = p.apply(&after[j], &ins[i]);
            if l != r {
                let left = vec![ins[i].clone(), ins[j].clone()];
                let right = vec![ins[j].clone(), ins[i].clone()];
                return orders(ViolationKind::H1, s, left, right, &l, &r);
            }
        }
    }
    for (d, a) in ins.iter().zip(&after) {
        if !s.structure.contains(d.sym, &d.tuple) {
            let del = d.inverse();
            let back = p.apply(a, &del);
            if back != *s {
                return orders(ViolationKind::H2, s, Vec::new(), vec![d.clone(), del], s, &back);
            }
        }
    }
    for (d, a) in ins.iter().zip(&after) {
        if s.structure.contains(d.sym, &d.tuple) {
            if a != s {
                return orders(ViolationKind::H3, s, Vec::new(), vec![d.clone()], s, a);
            }
        } else {
            let del = d.inverse();
            let r = p.apply(s, &del);
            if r != *s {
                return orders(ViolationKind::H3, s, Vec::new(), vec![del], s, &r);
            }
        }
    }
    None
}

/// Checks H1 over all insertion pairs, H2 over all absent tuples and H3
/// over all tuples. The returned violation has an empty prefix.
#[allow(clippy::result_large_err)]
pub fn is_locally_hi(p: &DynamicProgram, s: &ProgramState) -> Result<(), HiViolation> {
    match local_hi_within(p, s, s.domain()) {
        None => Ok(()),
        Some(v) => Err(v),
    }
}

/// The map from realized input m-types to aux m-types of a homogeneous
/// state. Input types missing from the map are unrealized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeFunction {
    pub arity: usize,
    pub map: BTreeMap<AtomicType, AtomicType>,
}

impl TypeFunction {
    /// `None` stands for the unrealized value.
    pub fn get(&self, input: &AtomicType) -> Option<&AtomicType> {
        self.map.get(input)
    }
}

/// The maximal arity `m` used for types, at least 1.
pub fn type_arity(schema: &Schema) -> usize {
    schema.max_arity(&schema.all_ids()).max(1)
}

fn type_function_within(schema: &Schema, s: &ProgramState, universe: usize) -> Result<TypeFunction, (Tuple, Tuple)> {
    let m = type_arity(schema);
    let (inputs, aux) = (schema.input_ids(), schema.aux_ids());
    let mut map: BTreeMap<AtomicType, (AtomicType, Tuple)> = BTreeMap::new();
    for t in all_tuples(universe, m) {
        let it = atomic_type(&s.structure, &t, &inputs, schema);
        let at = atomic_type(&s.structure, &t, &aux, schema);
        match map.get(&it) {
            Some((prev, b)) if *prev != at => return Err((b.clone(), t)),
            Some(_) => {}
            None => {
                map.insert(it, (at, t));
            }
        }
    }
    Ok(TypeFunction { arity: m, map: map.into_iter().map(|(k, (v, _))| (k, v)).collect() })
}

/// The type function of `s`, or two tuples witnessing inhomogeneity.
pub fn type_function(schema: &Schema, s: &ProgramState) -> Result<TypeFunction, (Tuple, Tuple)> {
    type_function_within(schema, s, s.domain())
}

/// Whether tuples with equal input m-type always have equal aux m-type.
pub fn is_homogeneous(schema: &Schema, s: &ProgramState) -> Option<TypeFunction> {
    type_function(schema, s).ok()
}

/// Small-model constants for the normal-form sweep. Bits are accounted
/// for by simulating each 0-ary aux symbol with a unary one, which costs
/// one quantifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiBounds {
    pub q: usize,
    pub ell: usize,
    pub m: usize,
    pub big_l: u128,
    pub k: u128,
    pub t: u128,
    pub n: u128,
}

impl HiBounds {
    pub fn of(p: &DynamicProgram) -> HiBounds {
        let sc = p.schema();
        let has_bits = !sc.bits_of(&sc.aux_ids()).is_empty();
        let simulated = Schema::new(
            sc.symbols()
                .iter()
                .map(|s| {
                    let arity = if s.kind == Kind::Aux && s.arity == 0 { 1 } else { s.arity };
                    Symbol::new(s.name.clone(), arity, s.kind)
                })
                .collect(),
        )
        .expect("renaming arities keeps names distinct");
        let q = p.update_depth().max(p.init_depth()) + usize::from(has_bits);
        let ell = sc.input_ids().len();
        let m = type_arity(&simulated);
        let aux_types = count_atomic_types(&simulated, &simulated.aux_ids(), m);
        let in_types = count_atomic_types(&simulated, &simulated.input_ids(), m);
        let t = saturating_pow(aux_types.saturating_add(1), in_types);
        let big_l = if ell >= 127 { u128::MAX } else { (1u128 << ell) - 1 };
        let k = 3 + 2 * m as u128 + (ell as u128 + 1) * q as u128;
        let n = k.saturating_mul(2).saturating_add(t).saturating_mul(big_l.saturating_add(1));
        HiBounds { q, ell, m, big_l, k, t, n }
    }
}

fn saturating_pow(base: u128, exp: u128) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc == u128::MAX {
            break;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiBudget {
    pub max_domain: usize,
    pub max_states: u64,
}

impl Default for HiBudget {
    fn default() -> Self {
        HiBudget { max_domain: 64, max_states: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HiVerdict {
    Hi,
    NotHi(Box<HiViolation>),
    Unknown(String),
}

impl HiVerdict {
    pub fn is_hi(&self) -> bool {
        matches!(self, HiVerdict::Hi)
    }

    pub fn violation(&self) -> Option<&HiViolation> {
        match self {
            HiVerdict::NotHi(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiReport {
    pub verdict: HiVerdict,
    pub method: &'static str,
    pub bounds: Option<HiBounds>,
    /// Largest domain size whose sweep completed.
    pub swept: usize,
    pub states: u64,
    pub notes: Vec<String>,
}

impl HiReport {
    pub fn render(&self, schema: &Schema) -> String {
        let v = match &self.verdict {
            HiVerdict::Hi => "hi",
            HiVerdict::NotHi(_) => "not-hi",
            HiVerdict::Unknown(_) => "unknown",
        };
        let mut out = format!("verdict: {v}\nmethod: {}\nswept-domain: {}\nstates: {}\n", self.method, self.swept, self.states);
        if let Some(b) = &self.bounds {
            out.push_str(&format!("bound-k: {}\nbound-t: {}\nbound-l: {}\nbound-n: {}\n", b.k, b.t, b.big_l, b.n));
        }
        match &self.verdict {
            HiVerdict::Unknown(r) => out.push_str(&format!("reason: {r}\n")),
            HiVerdict::NotHi(w) => out.push_str(&w.render(schema)),
            HiVerdict::Hi => {}
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn certify(p: &DynamicProgram, v: HiViolation) -> HiVerdict {
    assert!(v.replays(p), "violation does not replay");
    HiVerdict::NotHi(Box::new(v))
}

/// Whether every update of every aux symbol is its frame rule, so the aux
/// relations keep their initial value forever.
pub fn aux_is_static(p: &DynamicProgram) -> bool {
    p.rules().values().all(|r| {
        r.updates.iter().all(|(&sym, d)| matches!(&d.body, Formula::Atom(s, vs) if *s == sym && *vs == d.head))
    })
}

/// Walks every normal-form insertion sequence over `1..=n`: bit insertions
/// first, then one block per element in order `1, 2, ...`, blocks sorted by
/// color, one fixed insertion order per color. Visits every prefix state
/// with the number of elements touched so far.
pub fn walk_normal_forms(
    p: &DynamicProgram,
    n: usize,
    visit: &mut dyn FnMut(&[Modification], &ProgramState, usize) -> bool,
) -> bool {
    let sc = p.schema();
    let inputs = sc.input_ids();
    let unary = sc.unary_of(&inputs);
    let bits = sc.bits_of(&inputs);
    let init = p.init_state(n);
    for mask in 0usize..1 << bits.len() {
        let chosen: Vec<SymId> = bits.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &b)| b).collect();
        let mut seq = Vec::new();
        let mut s = init.clone();
        for (i, &b) in chosen.iter().enumerate() {
            let d = Modification::ins(b, Vec::new());
            s = p.apply(&s, &d);
            seq.push(d);
            if i + 1 < chosen.len() && !visit(&seq, &s, 0) {
                return false;
            }
        }
        if !blocks(p, &unary, n, &mut seq, &s, 0, 1, &mut BTreeMap::new(), visit) {
            return false;
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn blocks(
    p: &DynamicProgram,
    unary: &[SymId],
    n: usize,
    seq: &mut Vec<Modification>,
    s: &ProgramState,
    touched: usize,
    min_color: Color,
    fixed: &mut BTreeMap<Color, Vec<SymId>>,
    visit: &mut dyn FnMut(&[Modification], &ProgramState, usize) -> bool,
) -> bool {
    if !visit(seq, s, touched) {
        return false;
    }
    if touched == n {
        return true;
    }
    let e = touched as u32 + 1;
    for c in min_color..1 << unary.len() {
        let fresh = !fixed.contains_key(&c);
        let choices: Vec<Vec<SymId>> = match fixed.get(&c) {
            Some(o) => vec![o.clone()],
            None => {
                let syms = color_symbols(unary, c);
                let k = syms.len();
                syms.into_iter().permutations(k).collect()
            }
        };
        for order in choices {
            if fresh {
                fixed.insert(c, order.clone());
            }
            let base = seq.len();
            let mut st = s.clone();
            let mut go = true;
            for (i, &sym) in order.iter().enumerate() {
                let d = Modification::ins(sym, vec![e]);
                st = p.apply(&st, &d);
                seq.push(d);
                if i + 1 < order.len() && !visit(seq, &st, touched + 1) {
                    go = false;
                    break;
                }
            }
            go = go && blocks(p, unary, n, seq, &st, touched + 1, c, fixed, visit);
            seq.truncate(base);
            if fresh {
                fixed.remove(&c);
            }
            if !go {
                return false;
            }
        }
    }
    true
}

/// Sweeps domain sizes up to the small-model bound over normal-form
/// insertion sequences, checking homogeneity and H1 to H3 at every state.
/// Programs with non-unary inputs are outside the fragment.
pub fn check_hi(p: &DynamicProgram, budget: HiBudget) -> HiReport {
    let sc = p.schema();
    let inputs = sc.input_ids();
    let mut report =
        HiReport { verdict: HiVerdict::Hi, method: "normal-form-sweep", bounds: None, swept: 0, states: 0, notes: Vec::new() };
    if sc.max_arity(&inputs) > 1 {
        report.verdict = HiVerdict::Unknown("fragment: input relations must have arity at most 1".into());
        return report;
    }
    let bounds = HiBounds::of(p);
    report.bounds = Some(bounds);
    if !sc.bits_of(&sc.aux_ids()).is_empty() {
        report.notes.push("aux bits counted as unary relations in the bound".into());
    }
    let m = type_arity(sc);
    let limit = bounds.n.min(budget.max_domain as u128) as usize;
    let mut states = 0u64;
    let mut out_of_budget = false;
    for n in 1..=limit {
        let mut found: Option<HiViolation> = None;
        walk_normal_forms(p, n, &mut |seq, s, touched| {
            states += 1;
            if states > budget.max_states {
                out_of_budget = true;
                return false;
            }
            let v = match type_function_within(sc, s, n.min(touched + m)) {
                Err((a, b)) => Some(HiViolation {
                    kind: ViolationKind::Inhomogeneous,
                    domain: n,
                    prefix: Vec::new(),
                    evidence: Evidence::Types { a, b },
                }),
                Ok(_) => local_hi_within(p, s, n.min(touched + 2)),
            };
            match v {
                Some(mut v) => {
                    v.prefix = seq.to_vec();
                    found = Some(v);
                    false
                }
                None => true,
            }
        });
        report.states = states;
        if let Some(v) = found {
            report.verdict = certify(p, v);
            return report;
        }
        if out_of_budget {
            break;
        }
        report.swept = n;
    }
    if !out_of_budget && report.swept as u128 == bounds.n {
        return report;
    }
    if aux_is_static(p) {
        report.method = "static-aux";
        report.notes.push("every update is a frame rule".into());
        return report;
    }
    report.verdict = HiVerdict::Unknown(format!("budget: swept n <= {} of bound {}", report.swept, bounds.n));
    report
}

/// Tuples per relation that suffice for the unary-aux procedure: the
/// sunflower bound for 2ℓ-tuples with `M² + 1` petals, `M` the number of
/// atomic 2ℓ-types. This bound is a reconstruction.
pub fn hi_prop_aux1_bound(p: &DynamicProgram) -> u128 {
    let sc = p.schema();
    let ell = sc.max_arity(&sc.input_ids()).max(1);
    let mm = count_atomic_types(sc, &sc.all_ids(), 2 * ell);
    match usize::try_from(mm.saturating_mul(mm).saturating_add(1)) {
        Ok(petals) => tuple_sunflower_bound(2 * ell, petals),
        Err(_) => u128::MAX,
    }
}

/// Bounded brute force over insertion sequences for quantifier-free
/// programs with aux arity at most 1.
pub fn check_hi_prop_aux1(p: &DynamicProgram, budget: HiBudget, max_len: usize) -> HiReport {
    let prof = p.classify();
    let mut report =
        HiReport { verdict: HiVerdict::Hi, method: "unary-aux-sweep", bounds: None, swept: 0, states: 0, notes: Vec::new() };
    if !prof.quantifier_free || prof.max_aux_arity > 1 {
        report.verdict =
            HiVerdict::Unknown(format!("fragment: needs quantifier-free updates and aux arity at most 1, got {prof}"));
        return report;
    }
    let bound = hi_prop_aux1_bound(p);
    report.notes.push(format!("reconstructed bound: {bound} tuples per relation"));
    let mut states = 0u64;
    let mut out_of_budget = false;
    for n in 1..=budget.max_domain {
        let mut found = None;
        explore(p, n, max_len, SeqMode::InsertionsOnly, &mut |seq, s| {
            states += 1;
            if states > budget.max_states {
                out_of_budget = true;
                return false;
            }
            if let Err(mut v) = is_locally_hi(p, s) {
                v.prefix = seq.to_vec();
                found = Some(v);
                return false;
            }
            true
        });
        report.states = states;
        if let Some(v) = found {
            report.verdict = certify(p, v);
            return report;
        }
        if out_of_budget {
            break;
        }
        report.swept = n;
    }
    if aux_is_static(p) {
        report.method = "static-aux";
        report.notes.push("every update is a frame rule".into());
        return report;
    }
    report.verdict =
        HiVerdict::Unknown(format!("budget: swept n <= {} with length <= {max_len}, bound not covered", report.swept));
    report
}

/// A minimal edit of a modification sequence that keeps the final input
/// database. Positions index into the sequence being transformed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Innocuous {
    /// Swap positions `i` and `i + 1`.
    Swap(usize),
    /// Remove `ins_S(a) del_S(a)` at `i` when `a` is absent before it.
    RemoveInsDelPair(usize),
    /// Remove an insertion of a present or a deletion of an absent tuple.
    RemoveNoop(usize),
    /// Insert `ins_S(a) del_S(a)` before position `i`, `a` absent there.
    InsertInsDelPair(usize, SymId, Tuple),
    /// Insert a modification that does not change the database.
    InsertNoop(usize, Modification),
}

impl Innocuous {
    pub fn apply(&self, alpha: &[Modification]) -> Vec<Modification> {
        let mut out = alpha.to_vec();
        match self {
            Innocuous::Swap(i) => out.swap(*i, i + 1),
            Innocuous::RemoveInsDelPair(i) => {
                out.drain(*i..i + 2);
            }
            Innocuous::RemoveNoop(i) => {
                out.remove(*i);
            }
            Innocuous::InsertInsDelPair(i, s, t) => {
                out.splice(*i..*i, [Modification::ins(*s, t.clone()), Modification::del(*s, t.clone())]);
            }
            Innocuous::InsertNoop(i, d) => out.insert(*i, d.clone()),
        }
        out
    }

    /// Start position and length of the replaced segment of `alpha`.
    fn span(&self) -> (usize, usize) {
        match self {
            Innocuous::Swap(i) | Innocuous::RemoveInsDelPair(i) => (*i, 2),
            Innocuous::RemoveNoop(i) => (*i, 1),
            Innocuous::InsertInsDelPair(i, ..) | Innocuous::InsertNoop(i, _) => (*i, 0),
        }
    }

    /// Checks the side condition against the database before the position.
    pub fn is_applicable(&self, alpha: &[Modification]) -> bool {
        let (i, w) = self.span();
        if i + w > alpha.len() {
            return false;
        }
        let db = database_after(&alpha[..i]);
        let present = |s: SymId, t: &Tuple| db.contains(&(s, t.clone()));
        match self {
            Innocuous::Swap(i) => {
                let (a, b) = (&alpha[*i], &alpha[i + 1]);
                !(a.sym == b.sym && a.tuple == b.tuple && a.kind != b.kind)
            }
            Innocuous::RemoveInsDelPair(i) => {
                let (a, b) = (&alpha[*i], &alpha[i + 1]);
                a.kind == OpKind::Ins && *b == a.inverse() && !present(a.sym, &a.tuple)
            }
            Innocuous::RemoveNoop(i) => is_noop(&alpha[*i], present(alpha[*i].sym, &alpha[*i].tuple)),
            Innocuous::InsertInsDelPair(_, s, t) => !present(*s, t),
            Innocuous::InsertNoop(_, d) => is_noop(d, present(d.sym, &d.tuple)),
        }
    }
}

fn is_noop(d: &Modification, present: bool) -> bool {
    (d.kind == OpKind::Ins) == present
}

/// The input database after `seq`, as (symbol, tuple) facts.
pub fn database_after(seq: &[Modification]) -> BTreeSet<(SymId, Tuple)> {
    let mut db = BTreeSet::new();
    for d in seq {
        match d.kind {
            OpKind::Ins => db.insert((d.sym, d.tuple.clone())),
            OpKind::Del => db.remove(&(d.sym, d.tuple.clone())),
        };
    }
    db
}

/// Applicable removals and swaps of `alpha`. Inverse transformations of a
/// longer sequence show up as forward ones there.
pub fn forward_innocuous(alpha: &[Modification]) -> Vec<Innocuous> {
    let mut out = Vec::new();
    let mut db = BTreeSet::new();
    for i in 0..alpha.len() {
        let d = &alpha[i];
        let present = db.contains(&(d.sym, d.tuple.clone()));
        if i + 1 < alpha.len() {
            let e = &alpha[i + 1];
            if !(d.sym == e.sym && d.tuple == e.tuple && d.kind != e.kind) {
                out.push(Innocuous::Swap(i));
            }
            if d.kind == OpKind::Ins && *e == d.inverse() && !present {
                out.push(Innocuous::RemoveInsDelPair(i));
            }
        }
        if is_noop(d, present) {
            out.push(Innocuous::RemoveNoop(i));
        }
        match d.kind {
            OpKind::Ins => db.insert((d.sym, d.tuple.clone())),
            OpKind::Del => db.remove(&(d.sym, d.tuple.clone())),
        };
    }
    out
}

/// Every applicable transformation of `alpha`, inverse variants included,
/// for modifications drawn from `mods`.
pub fn all_innocuous(alpha: &[Modification], mods: &[Modification]) -> Vec<Innocuous> {
    let mut out = forward_innocuous(alpha);
    for i in 0..=alpha.len() {
        let db = database_after(&alpha[..i]);
        for d in mods {
            let present = db.contains(&(d.sym, d.tuple.clone()));
            if d.kind == OpKind::Ins && !present {
                out.push(Innocuous::InsertInsDelPair(i, d.sym, d.tuple.clone()));
            }
            if is_noop(d, present) {
                out.push(Innocuous::InsertNoop(i, d.clone()));
            }
        }
    }
    out
}

/// Two sequences reaching the same database with different query values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyWitness {
    pub domain: usize,
    pub alpha: Vec<Modification>,
    pub transformation: Innocuous,
    pub beta: Vec<Modification>,
}

impl ConsistencyWitness {
    pub fn replays(&self, p: &DynamicProgram) -> bool {
        let q = p.query();
        database_after(&self.alpha) == database_after(&self.beta)
            && self.transformation.apply(&self.alpha) == self.beta
            && p.run(self.domain, &self.alpha).structure.relation(q)
                != p.run(self.domain, &self.beta).structure.relation(q)
    }

    pub fn render(&self, schema: &Schema) -> String {
        format!(
            "domain: {}\nalpha: {}\ntransformation: {:?}\nbeta: {}\n",
            self.domain,
            format_sequence(schema, &self.alpha),
            self.transformation,
            format_sequence(schema, &self.beta)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsistencyResult {
    Inconsistent(Box<ConsistencyWitness>),
    NoViolationFound { sequences: u64 },
}

impl ConsistencyResult {
    pub fn witness(&self) -> Option<&ConsistencyWitness> {
        match self {
            ConsistencyResult::Inconsistent(w) => Some(w),
            ConsistencyResult::NoViolationFound { .. } => None,
        }
    }
}

/// Compares the query after `alpha` with the query after every forward
/// transformation of it. `states[i]` is the state after `alpha[..i]`.
fn transformed_mismatch(
    p: &DynamicProgram,
    alpha: &[Modification],
    states: &[ProgramState],
    domain: usize,
) -> Option<ConsistencyWitness> {
    let q = p.query();
    let last = &states[alpha.len()];
    for th in forward_innocuous(alpha) {
        let beta = th.apply(alpha);
        let (i, w) = th.span();
        let replaced = &beta[i..beta.len() - (alpha.len() - i - w)];
        let mid = p.apply_sequence(&states[i], replaced);
        if mid == states[i + w] {
            continue;
        }
        let end = p.apply_sequence(&mid, &alpha[i + w..]);
        if end.structure.relation(q) != last.structure.relation(q) {
            let wit = ConsistencyWitness { domain, alpha: alpha.to_vec(), transformation: th, beta };
            debug_assert_eq!(database_after(&wit.alpha), database_after(&wit.beta));
            assert!(wit.replays(p), "consistency witness does not replay");
            return Some(wit);
        }
    }
    None
}

/// Depth-first walk over sequences keeping every prefix state.
fn walk_with_states(
    p: &DynamicProgram,
    mods: &[Modification],
    max_len: usize,
    seq: &mut Vec<Modification>,
    states: &mut Vec<ProgramState>,
    visit: &mut dyn FnMut(&[Modification], &[ProgramState]) -> bool,
) -> bool {
    if !visit(seq, states) {
        return false;
    }
    if seq.len() == max_len {
        return true;
    }
    for d in mods {
        let next = p.apply(states.last().expect("initial state"), d);
        seq.push(d.clone());
        states.push(next);
        let go = walk_with_states(p, mods, max_len, seq, states, visit);
        seq.pop();
        states.pop();
        if !go {
            return false;
        }
    }
    true
}

/// Whether some pair `(a, b)` of states, driven by a common suffix of at
/// most `budget` modifications, ends with different query relations.
fn pair_diverges(
    p: &DynamicProgram,
    mods: &[Modification],
    a: &ProgramState,
    b: &ProgramState,
    budget: usize,
    failed: &mut HashMap<(ProgramState, ProgramState), usize>,
) -> bool {
    let q = p.query();
    if a.structure.relation(q) != b.structure.relation(q) {
        return true;
    }
    if budget == 0 {
        return false;
    }
    let key = (a.clone(), b.clone());
    if failed.get(&key).is_some_and(|&r| r >= budget) {
        return false;
    }
    for d in mods {
        let (x, y) = (p.apply(a, d), p.apply(b, d));
        if x != y && pair_diverges(p, mods, &x, &y, budget - 1, failed) {
            return true;
        }
    }
    failed.insert(key, budget);
    false
}

/// Decides whether the sweep of [`check_consistency_bounded`] on domain
/// `n` finds a witness. A witness is a prefix reaching some state, a
/// local edit there and a common suffix, and the prefix can always be a
/// shortest one, so distinct states and state pairs suffice.
fn violation_within(p: &DynamicProgram, n: usize, len_max: usize) -> bool {
    let mods = p.modifications(n);
    let mut depth: HashMap<ProgramState, usize> = HashMap::new();
    let init = p.init_state(n);
    depth.insert(init.clone(), 0);
    let mut levels = vec![vec![init]];
    while levels.len() < len_max {
        let mut next = Vec::new();
        for s in levels.last().unwrap() {
            for d in &mods {
                let t = p.apply(s, d);
                if !depth.contains_key(&t) {
                    depth.insert(t.clone(), levels.len());
                    next.push(t);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    let mut failed = HashMap::new();
    for (i, level) in levels.iter().enumerate() {
        for s in level {
            let present = |d: &Modification| s.structure.contains(d.sym, &d.tuple);
            for a in &mods {
                let sa = p.apply(s, a);
                if is_noop(a, present(a)) && i < len_max && sa != *s && pair_diverges(p, &mods, &sa, s, len_max - i - 1, &mut failed) {
                    return true;
                }
                if i + 2 > len_max {
                    continue;
                }
                for b in &mods {
                    let sab = p.apply(&sa, b);
                    let opposite = a.sym == b.sym && a.tuple == b.tuple && a.kind != b.kind;
                    if !opposite {
                        let sba = p.apply(&p.apply(s, b), a);
                        if sab != sba && pair_diverges(p, &mods, &sab, &sba, len_max - i - 2, &mut failed) {
                            return true;
                        }
                    }
                    if a.kind == OpKind::Ins && *b == a.inverse() && !present(a) && sab != *s && pair_diverges(p, &mods, &sab, s, len_max - i - 2, &mut failed) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Searches sequences up to `len_max` over domains up to `n_max`, shortest
/// first, for a transformation changing the query.
pub fn check_consistency_bounded(p: &DynamicProgram, n_max: usize, len_max: usize) -> ConsistencyResult {
    if !(1..=n_max).any(|n| violation_within(p, n, len_max)) {
        let sequences = (1..=n_max)
            .map(|n| {
                let m = p.modifications(n).len() as u64;
                (0..=len_max as u32).map(|l| m.saturating_pow(l)).fold(0u64, u64::saturating_add)
            })
            .fold(0u64, u64::saturating_add);
        return ConsistencyResult::NoViolationFound { sequences };
    }
    check_consistency_sweep(p, n_max, len_max)
}

/// The plain enumeration behind [`check_consistency_bounded`], without
/// the state-based shortcut for the negative case.
pub fn check_consistency_sweep(p: &DynamicProgram, n_max: usize, len_max: usize) -> ConsistencyResult {
    let mut sequences = 0u64;
    for len in 0..=len_max {
        for n in 1..=n_max {
            let mods = p.modifications(n);
            let mut found = None;
            walk_with_states(p, &mods, len, &mut Vec::new(), &mut vec![p.init_state(n)], &mut |seq, states| {
                if seq.len() < len {
                    return true;
                }
                sequences += 1;
                found = transformed_mismatch(p, seq, states, n);
                found.is_none()
            });
            if let Some(w) = found {
                return ConsistencyResult::Inconsistent(Box::new(w));
            }
        }
    }
    ConsistencyResult::NoViolationFound { sequences }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzMode {
    Consistency,
    LocalHi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzBudget {
    pub max_domain: usize,
    /// Exhaustive phase: every sequence up to this length.
    pub bfs_depth: usize,
    /// Random phase: number of random sequences.
    pub random_runs: usize,
    pub max_len: usize,
}

impl Default for FuzzBudget {
    fn default() -> Self {
        FuzzBudget { max_domain: 3, bfs_depth: 3, random_runs: 200, max_len: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FuzzWitness {
    Hi(Box<HiViolation>),
    Inconsistent(Box<ConsistencyWitness>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzOutcome {
    pub witness: Option<FuzzWitness>,
    /// The random sequences tried, with their domain sizes.
    pub transcript: Vec<(usize, Vec<Modification>)>,
    pub checked: u64,
}

fn fuzz_check(p: &DynamicProgram, mode: FuzzMode, seq: &[Modification], states: &[ProgramState]) -> Option<FuzzWitness> {
    let s = states.last().expect("initial state");
    match mode {
        FuzzMode::LocalHi => is_locally_hi(p, s).err().map(|mut v| {
            v.prefix = seq.to_vec();
            assert!(v.replays(p), "violation does not replay");
            FuzzWitness::Hi(Box::new(v))
        }),
        FuzzMode::Consistency => {
            transformed_mismatch(p, seq, states, s.domain()).map(|w| FuzzWitness::Inconsistent(Box::new(w)))
        }
    }
}

fn fuzz_mods(p: &DynamicProgram, mode: FuzzMode, n: usize) -> Vec<Modification> {
    match mode {
        FuzzMode::LocalHi => p.modifications(n).into_iter().filter(|d| d.kind == OpKind::Ins).collect(),
        FuzzMode::Consistency => p.modifications(n),
    }
}

/// Exhaustive search up to `bfs_depth`, then seeded random sequences. In
/// local mode only insertion sequences are tried.
pub fn fuzz(p: &DynamicProgram, mode: FuzzMode, seed: u64, budget: FuzzBudget) -> FuzzOutcome {
    let mut out = FuzzOutcome { witness: None, transcript: Vec::new(), checked: 0 };
    for n in 1..=budget.max_domain {
        let mods = fuzz_mods(p, mode, n);
        let mut found = None;
        let mut checked = 0u64;
        walk_with_states(p, &mods, budget.bfs_depth, &mut Vec::new(), &mut vec![p.init_state(n)], &mut |seq, states| {
            checked += 1;
            found = fuzz_check(p, mode, seq, states);
            found.is_none()
        });
        out.checked += checked;
        if found.is_some() {
            out.witness = found;
            return out;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget.random_runs {
        let n = rng.gen_range(1..=budget.max_domain.max(1));
        let mods = fuzz_mods(p, mode, n);
        let len = rng.gen_range(0..=budget.max_len);
        let seq: Vec<Modification> = (0..len).map(|_| mods[rng.gen_range(0..mods.len())].clone()).collect();
        out.transcript.push((n, seq.clone()));
        let mut states = vec![p.init_state(n)];
        for d in &seq {
            let next = p.apply(states.last().expect("initial state"), d);
            states.push(next);
        }
        let checks: Vec<usize> = match mode {
            FuzzMode::LocalHi => (0..=len).collect(),
            FuzzMode::Consistency => vec![len],
        };
        for i in checks {
            out.checked += 1;
            if let Some(w) = fuzz_check(p, mode, &seq[..i], &states[..=i]) {
                out.witness = Some(w);
                return out;
            }
        }
    }
    out
}

/// Outcome of [`check_consistency_exact_prop11`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactConsistency {
    Consistent,
    /// A non-empty witness of the reduced program, if the procedure found one.
    Inconsistent(Option<Witness>),
    Unknown(String),
}

#[derive(Debug, Clone)]
pub struct ExactConsistencyReport {
    pub verdict: ExactConsistency,
    /// The program whose emptiness was decided.
    pub reduced: Option<DynamicProgram>,
    pub notes: Vec<String>,
}

/// Reduced programs with more unary symbols are not handed to the
/// coverability check.
pub const MAX_REDUCED_UNARY: usize = 6;

/// Decides consistency of a quantifier-free program with unary inputs and
/// unary aux relations: the reduction to emptiness stays in the fragment,
/// and the source is consistent iff the reduced program is empty.
pub fn check_consistency_exact_prop11(p: &DynamicProgram, budget: CoverBudget) -> ExactConsistencyReport {
    let unknown = |msg: String| ExactConsistencyReport { verdict: ExactConsistency::Unknown(msg), reduced: None, notes: Vec::new() };
    let prof = p.classify();
    if !prof.quantifier_free || prof.max_input_arity > 1 || prof.max_aux_arity > 1 {
        return unknown(format!("fragment: {prof} is outside DynProp(1,1)"));
    }
    let (q, report) = match consistency_to_emptiness_qf(p) {
        Ok(r) => r,
        Err(e) => return unknown(format!("fragment: {e}")),
    };
    let out = q.classify();
    assert!(
        out.quantifier_free && out.max_input_arity <= 1 && out.max_aux_arity <= 1,
        "the reduction left the fragment: {out}"
    );
    let unary = q.schema().unary_of(&q.schema().all_ids()).len();
    if unary > MAX_REDUCED_UNARY {
        return unknown(format!("budget: the reduced program has {unary} unary symbols, the automaton would have 2^{unary} counters"));
    }
    let r = emptiness_prop11(&q, budget);
    let verdict = match r.verdict {
        Verdict::Empty => ExactConsistency::Consistent,
        Verdict::NonEmpty(w) => {
            if let Some(w) = &w {
                assert!(w.replays(&q), "emptiness witness does not replay");
            }
            ExactConsistency::Inconsistent(w)
        }
        Verdict::Unknown(u) => ExactConsistency::Unknown(u.to_string()),
    };
    let mut notes = vec![format!("reduced program: {}", report.output_fragment)];
    notes.extend(r.notes);
    ExactConsistencyReport { verdict, reduced: Some(q), notes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn example1_h1_at_initial_state() {
        let p = corpus::load(corpus::EXAMPLE1);
        let s = p.init_state(2);
        let v = is_locally_hi(&p, &s).unwrap_err();
        assert_eq!(v.kind, ViolationKind::H1);
        let list = p.schema().lookup("List").unwrap();
        match &v.evidence {
            Evidence::Orders { relation, left_value, right_value, .. } => {
                assert_eq!(*relation, list);
                assert_eq!(*left_value, [vec![1, 2]].into());
                assert_eq!(*right_value, [vec![2, 1]].into());
            }
            e => panic!("{e:?}"),
        }
        assert!(v.replays(&p));
    }

    #[test]
    fn homogeneity_examples() {
        let p = crate::dsl::parse_program("schema { input U/1; aux R/1; }\nquery R;").unwrap().0;
        let init = p.init_state(2);
        let f = is_homogeneous(p.schema(), &init).unwrap();
        assert_eq!(f.map.len(), 1);
        assert!(f.map.values().all(|t| t.atoms.is_empty()));
        let mut s = init.clone();
        s.structure.insert(p.schema().lookup("R").unwrap(), vec![1]);
        assert_eq!(type_function(p.schema(), &s), Err((vec![1], vec![2])));

        let e = corpus::load(corpus::EXAMPLE1);
        let s = e.run(2, &[Modification::ins(0, vec![1]), Modification::ins(0, vec![2])]);
        assert_eq!(type_function(e.schema(), &s), Err((vec![1, 2], vec![2, 1])));
    }

    #[test]
    fn static_aux_detection() {
        assert!(aux_is_static(&corpus::load(corpus::CONST_AUX)));
        assert!(!aux_is_static(&corpus::load(corpus::COPY)));
    }

    #[test]
    fn bounds_formula() {
        let p = corpus::load(corpus::COPY);
        let b = HiBounds::of(&p);
        assert_eq!((b.q, b.ell, b.m, b.k, b.t, b.big_l, b.n), (0, 1, 1, 5, 9, 1, 38));
        let c = corpus::load(corpus::CONST_AUX);
        let b = HiBounds::of(&c);
        assert_eq!((b.q, b.k, b.t, b.n), (1, 7, 25, 78));
    }

    #[test]
    fn transformations_keep_database() {
        let alpha = vec![
            Modification::ins(0, vec![1]),
            Modification::del(0, vec![1]),
            Modification::ins(0, vec![2]),
            Modification::ins(0, vec![2]),
        ];
        let mods = vec![Modification::ins(0, vec![1]), Modification::del(0, vec![2])];
        let ths = all_innocuous(&alpha, &mods);
        assert!(ths.contains(&Innocuous::RemoveInsDelPair(0)));
        assert!(ths.contains(&Innocuous::RemoveNoop(3)));
        assert!(!ths.contains(&Innocuous::Swap(0)));
        for th in ths {
            assert!(th.is_applicable(&alpha), "{th:?}");
            assert_eq!(database_after(&th.apply(&alpha)), database_after(&alpha), "{th:?}");
        }
    }
}
