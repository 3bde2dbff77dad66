//! Transfer multicounter automata and backward coverability over
//! upward-closed sets represented by antichains of minimal vectors.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TmcaAction {
    Inc(usize),
    /// Enabled only if the counter is positive.
    Dec(usize),
    /// Total map on counters: `n'_c = Σ_{t(d) = c} n_d`.
    Transfer(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TmcaTransition {
    pub from: usize,
    pub action: TmcaAction,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tmca {
    pub state_names: Vec<String>,
    pub num_counters: usize,
    pub initial: usize,
    pub accepting: usize,
    pub transitions: Vec<TmcaTransition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub state: usize,
    pub counters: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WstsError {
    #[error("coverability budget exceeded: {0}")]
    Budget(String),
}

/// Resource limits for the backward fixpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverBudget {
    pub max_basis: usize,
    pub max_iterations: usize,
}

impl Default for CoverBudget {
    fn default() -> Self {
        CoverBudget { max_basis: 100_000, max_iterations: 10_000_000 }
    }
}

pub fn leq(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

impl Tmca {
    pub fn new(num_states: usize, num_counters: usize, initial: usize, accepting: usize) -> Self {
        Tmca {
            state_names: (0..num_states).map(|i| format!("s{i}")).collect(),
            num_counters,
            initial,
            accepting,
            transitions: Vec::new(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.state_names.push(name.into());
        self.state_names.len() - 1
    }

    pub fn add(&mut self, from: usize, action: TmcaAction, to: usize) {
        if let TmcaAction::Transfer(t) = &action {
            assert_eq!(t.len(), self.num_counters, "transfer must be total");
            assert!(t.iter().all(|&c| c < self.num_counters));
        }
        self.transitions.push(TmcaTransition { from, action, to });
    }

    /// Successor of `c` under transition `tr`, if enabled.
    pub fn fire(&self, c: &Configuration, tr: &TmcaTransition) -> Option<Configuration> {
        if tr.from != c.state {
            return None;
        }
        let mut v = c.counters.clone();
        match &tr.action {
            TmcaAction::Inc(i) => v[*i] += 1,
            TmcaAction::Dec(i) => {
                if v[*i] == 0 {
                    return None;
                }
                v[*i] -= 1;
            }
            TmcaAction::Transfer(t) => {
                let mut w = vec![0; v.len()];
                for (d, &target) in t.iter().enumerate() {
                    w[target] += v[d];
                }
                v = w;
            }
        }
        Some(Configuration { state: tr.to, counters: v })
    }

    /// All one-step successors.
    pub fn step(&self, c: &Configuration) -> Vec<Configuration> {
        self.transitions.iter().filter_map(|t| self.fire(c, t)).collect()
    }
}

/// Per-state antichains of minimal vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpwardSet {
    pub bases: Vec<Vec<Vec<u64>>>,
}

impl UpwardSet {
    pub fn empty(num_states: usize) -> Self {
        UpwardSet { bases: vec![Vec::new(); num_states] }
    }

    /// `(state, v)↑`.
    pub fn single(num_states: usize, state: usize, v: Vec<u64>) -> Self {
        let mut u = UpwardSet::empty(num_states);
        u.bases[state].push(v);
        u
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        self.bases[c.state].iter().any(|b| leq(b, &c.counters))
    }

    /// Adds `v` at `state` keeping the antichain minimal. Returns false if
    /// `v` was already covered.
    pub fn insert(&mut self, state: usize, v: Vec<u64>) -> bool {
        let basis = &mut self.bases[state];
        if basis.iter().any(|b| leq(b, &v)) {
            return false;
        }
        basis.retain(|b| !leq(&v, b));
        basis.push(v);
        true
    }

    pub fn size(&self) -> usize {
        self.bases.iter().map(|b| b.len()).sum()
    }

    pub fn is_antichain(&self) -> bool {
        self.bases.iter().all(|b| {
            b.iter().enumerate().all(|(i, x)| b.iter().enumerate().all(|(j, y)| i == j || !leq(x, y)))
        })
    }

    /// Sorted copy, for comparisons in tests.
    pub fn normalized(&self) -> UpwardSet {
        let mut u = self.clone();
        for b in &mut u.bases {
            b.sort();
        }
        u
    }
}

/// All ways to write `total` as an ordered sum of `parts` naturals.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Minimal predecessor vectors of `v↑` under one action.
pub fn pre_vectors(action: &TmcaAction, v: &[u64]) -> Vec<Vec<u64>> {
    match action {
        TmcaAction::Inc(c) => {
            let mut u = v.to_vec();
            u[*c] = u[*c].saturating_sub(1);
            vec![u]
        }
        TmcaAction::Dec(c) => {
            let mut u = v.to_vec();
            u[*c] += 1;
            vec![u]
        }
        TmcaAction::Transfer(t) => {
            let k = v.len();
            // For each target counter c, the counters d with t(d) = c.
            let mut pre: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (d, &c) in t.iter().enumerate() {
                pre[c].push(d);
            }
            let mut out: Vec<Vec<u64>> = vec![vec![0; k]];
            for c in 0..k {
                if v[c] == 0 {
                    continue;
                }
                if pre[c].is_empty() {
                    return Vec::new();
                }
                let comps = compositions(v[c], pre[c].len());
                let mut next = Vec::with_capacity(out.len() * comps.len());
                for base in &out {
                    for comp in &comps {
                        let mut u = base.clone();
                        for (i, &d) in pre[c].iter().enumerate() {
                            u[d] = comp[i];
                        }
                        next.push(u);
                    }
                }
                out = next;
            }
            out
        }
    }
}

/// Exact minimal basis of `{ c | some successor of c via tr is in target }`.
pub fn pre_basis(m: &Tmca, target: &UpwardSet, tr: &TmcaTransition) -> UpwardSet {
    let mut out = UpwardSet::empty(m.num_states());
    for v in &target.bases[tr.to] {
        for u in pre_vectors(&tr.action, v) {
            out.insert(tr.from, u);
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Node {
    state: usize,
    v: Vec<u64>,
    /// Index of the node this one is a predecessor of, with the transition.
    parent: Option<(usize, usize)>,
}

/// Outcome of a coverability query.
#[derive(Debug, Clone)]
pub enum Coverability {
    /// Some initial configuration covers the target; the path is the list
    /// of transition indices taken from `start`.
    Coverable { start: Configuration, path: Vec<usize> },
    /// The closed backward set contains no initial configuration.
    NotCoverable { invariant: UpwardSet },
}

impl Coverability {
    pub fn is_coverable(&self) -> bool {
        matches!(self, Coverability::Coverable { .. })
    }
}

/// Backward coverability: saturate `target` under predecessors, then test
/// the initial configurations. A positive answer comes with a path obtained
/// by following the derivation of the covering basis element.
pub fn coverable(
    m: &Tmca,
    initials: &[Configuration],
    target: &UpwardSet,
    budget: CoverBudget,
) -> Result<Coverability, WstsError> {
    let mut set = UpwardSet::empty(m.num_states());
    let mut nodes: Vec<Node> = Vec::new();
    // Which node each basis element came from, parallel to set.bases.
    let mut origin: Vec<Vec<usize>> = vec![Vec::new(); m.num_states()];
    let mut work: VecDeque<usize> = VecDeque::new();
    let mut by_target: Vec<Vec<usize>> = vec![Vec::new(); m.num_states()];
    for (i, t) in m.transitions.iter().enumerate() {
        by_target[t.to].push(i);
    }
    let insert = |set: &mut UpwardSet, origin: &mut Vec<Vec<usize>>, nodes: &mut Vec<Node>, node: Node| -> Option<usize> {
        let basis = &mut set.bases[node.state];
        if basis.iter().any(|b| leq(b, &node.v)) {
            return None;
        }
        let org = &mut origin[node.state];
        let mut i = 0;
        while i < basis.len() {
            if leq(&node.v, &basis[i]) {
                basis.swap_remove(i);
                org.swap_remove(i);
            } else {
                i += 1;
            }
        }
        basis.push(node.v.clone());
        let id = nodes.len();
        org.push(id);
        nodes.push(node);
        Some(id)
    };
    for (state, basis) in target.bases.iter().enumerate() {
        for v in basis {
            if let Some(id) = insert(&mut set, &mut origin, &mut nodes, Node { state, v: v.clone(), parent: None }) {
                work.push_back(id);
            }
        }
    }
    let mut iterations = 0usize;
    while let Some(id) = work.pop_front() {
        let (state, v) = (nodes[id].state, nodes[id].v.clone());
        // Skip elements that were superseded after being queued.
        if !set.bases[state].contains(&v) {
            continue;
        }
        for &ti in &by_target[state] {
            let tr = &m.transitions[ti];
            for u in pre_vectors(&tr.action, &v) {
                iterations += 1;
                if iterations > budget.max_iterations {
                    return Err(WstsError::Budget(format!("more than {} pre-image steps", budget.max_iterations)));
                }
                let node = Node { state: tr.from, v: u, parent: Some((id, ti)) };
                if let Some(nid) = insert(&mut set, &mut origin, &mut nodes, node) {
                    work.push_back(nid);
                    if set.size() > budget.max_basis {
                        return Err(WstsError::Budget(format!("basis exceeds {} elements", budget.max_basis)));
                    }
                }
            }
        }
    }
    debug_assert!(set.is_antichain());
    for start in initials {
        let Some(pos) = set.bases[start.state].iter().position(|b| leq(b, &start.counters)) else { continue };
        let mut node = origin[start.state][pos];
        let mut cur = start.clone();
        let mut path = Vec::new();
        while let Some((parent, ti)) = nodes[node].parent {
            cur = m.fire(&cur, &m.transitions[ti]).expect("derivation step must be enabled");
            path.push(ti);
            node = parent;
            debug_assert!(leq(&nodes[node].v, &cur.counters));
        }
        assert!(target.contains(&cur), "recovered path must reach the target");
        return Ok(Coverability::Coverable { start: start.clone(), path });
    }
    Ok(Coverability::NotCoverable { invariant: set })
}

/// Result of the forward oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardResult {
    Reached(Vec<usize>),
    /// Exhaustive: no cap or depth cut-off happened.
    Unreachable,
    Inconclusive,
}

/// Breadth-first forward search with counters capped and bounded depth.
pub fn forward_bfs(m: &Tmca, initials: &[Configuration], target: &UpwardSet, cap: u64, depth: usize) -> ForwardResult {
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut queue: VecDeque<(Configuration, Vec<usize>)> = VecDeque::new();
    for c in initials {
        if seen.insert(c.clone()) {
            queue.push_back((c.clone(), Vec::new()));
        }
    }
    let mut cut = false;
    while let Some((c, path)) = queue.pop_front() {
        if target.contains(&c) {
            return ForwardResult::Reached(path);
        }
        for (ti, tr) in m.transitions.iter().enumerate() {
            let Some(n) = m.fire(&c, tr) else { continue };
            if n.counters.iter().any(|&x| x > cap) || path.len() >= depth {
                if !seen.contains(&n) {
                    cut = true;
                }
                continue;
            }
            if seen.insert(n.clone()) {
                let mut p = path.clone();
                p.push(ti);
                queue.push_back((n, p));
            }
        }
    }
    if cut {
        ForwardResult::Inconclusive
    } else {
        ForwardResult::Unreachable
    }
}

impl fmt::Display for Tmca {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states {};", self.state_names.join(" "))?;
        writeln!(f, "init {};", self.state_names[self.initial])?;
        writeln!(f, "accept {};", self.state_names[self.accepting])?;
        writeln!(f, "counters {};", (0..self.num_counters).map(|i| format!("z{i}")).collect::<Vec<_>>().join(" "))?;
        for t in &self.transitions {
            let act = match &t.action {
                TmcaAction::Inc(c) => format!("inc z{c}"),
                TmcaAction::Dec(c) => format!("dec z{c}"),
                TmcaAction::Transfer(m) => {
                    format!("transfer {}", m.iter().enumerate().map(|(d, c)| format!("z{d}>z{c}")).collect::<Vec<_>>().join(","))
                }
            };
            writeln!(f, "{} {act} -> {}", self.state_names[t.from], self.state_names[t.to])?;
        }
        Ok(())
    }
}
