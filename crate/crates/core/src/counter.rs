//! Counter automata with increment, decrement and zero-test transitions.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use crate::dsl::{Cursor, Diagnostic, PResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaAction {
    Inc(usize),
    Dec(usize),
    IfZero(usize),
}

impl CaAction {
    pub fn counter(&self) -> usize {
        match *self {
            CaAction::Inc(c) | CaAction::Dec(c) | CaAction::IfZero(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaTransition {
    pub from: usize,
    pub action: CaAction,
    pub to: usize,
}

/// `(Q, C, Δ, q_i, F)` with named states and counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterAutomaton {
    pub states: Vec<String>,
    pub counters: Vec<String>,
    pub initial: usize,
    pub accepting: BTreeSet<usize>,
    pub transitions: Vec<CaTransition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaConfig {
    pub state: usize,
    pub counters: Vec<u64>,
}

/// A run as the list of transition indices taken from `(q_i, 0⃗)`.
pub type Run = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunSearch {
    Found(Run),
    /// No accepting run within the bounds. `capped` is set when some branch
    /// was cut off by the counter cap, so the answer is inconclusive.
    NotFound { capped: bool },
}

impl CounterAutomaton {
    /// Builds an automaton from names; panics on undeclared names.
    pub fn new(
        states: &[&str],
        counters: &[&str],
        initial: &str,
        accepting: &[&str],
        transitions: &[(&str, CaAction, &str)],
    ) -> Self {
        let st = |n: &str| states.iter().position(|s| *s == n).unwrap_or_else(|| panic!("unknown state {n}"));
        CounterAutomaton {
            states: states.iter().map(|s| s.to_string()).collect(),
            counters: counters.iter().map(|s| s.to_string()).collect(),
            initial: st(initial),
            accepting: accepting.iter().map(|a| st(a)).collect(),
            transitions: transitions.iter().map(|(f, a, t)| CaTransition { from: st(f), action: *a, to: st(t) }).collect(),
        }
    }

    pub fn initial_config(&self) -> CaConfig {
        CaConfig { state: self.initial, counters: vec![0; self.counters.len()] }
    }

    pub fn outgoing(&self, state: usize) -> Vec<usize> {
        (0..self.transitions.len()).filter(|&i| self.transitions[i].from == state).collect()
    }

    /// Every state has at most one outgoing transition, or exactly a
    /// `dec(c)` / `ifzero(c)` pair on the same counter.
    pub fn is_semi_deterministic(&self) -> bool {
        (0..self.states.len()).all(|q| {
            let out = self.outgoing(q);
            match out.len() {
                0 | 1 => true,
                2 => {
                    let (a, b) = (self.transitions[out[0]].action, self.transitions[out[1]].action);
                    matches!((a, b), (CaAction::Dec(c), CaAction::IfZero(d)) | (CaAction::IfZero(d), CaAction::Dec(c)) if c == d)
                }
                _ => false,
            }
        })
    }

    pub fn fire(&self, c: &CaConfig, t: usize) -> Option<CaConfig> {
        let tr = self.transitions[t];
        if tr.from != c.state {
            return None;
        }
        let mut counters = c.counters.clone();
        match tr.action {
            CaAction::Inc(i) => counters[i] += 1,
            CaAction::Dec(i) => {
                if counters[i] == 0 {
                    return None;
                }
                counters[i] -= 1;
            }
            CaAction::IfZero(i) => {
                if counters[i] != 0 {
                    return None;
                }
            }
        }
        Some(CaConfig { state: tr.to, counters })
    }

    /// All enabled transitions with their successor configurations.
    pub fn step(&self, c: &CaConfig) -> Vec<(usize, CaConfig)> {
        self.outgoing(c.state).into_iter().filter_map(|t| self.fire(c, t).map(|n| (t, n))).collect()
    }

    /// Replays a run from the initial configuration.
    pub fn replay(&self, run: &[usize]) -> Option<Vec<CaConfig>> {
        let mut cur = self.initial_config();
        let mut out = vec![cur.clone()];
        for &t in run {
            cur = self.fire(&cur, t)?;
            out.push(cur.clone());
        }
        Some(out)
    }

    pub fn is_accepting_run(&self, run: &[usize]) -> bool {
        self.replay(run).is_some_and(|cs| self.accepting.contains(&cs.last().unwrap().state))
    }

    /// Breadth-first search for a shortest accepting run of length at most
    /// `max_len` whose counters stay at or below `cap`.
    pub fn bounded_accepting_run(&self, max_len: usize, cap: u64) -> RunSearch {
        let start = self.initial_config();
        let mut seen: HashSet<CaConfig> = HashSet::new();
        let mut queue: VecDeque<(CaConfig, Run)> = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back((start, Vec::new()));
        let mut capped = false;
        while let Some((c, run)) = queue.pop_front() {
            if self.accepting.contains(&c.state) {
                debug_assert!(self.is_accepting_run(&run));
                return RunSearch::Found(run);
            }
            if run.len() == max_len {
                continue;
            }
            for (t, n) in self.step(&c) {
                if n.counters.iter().any(|&v| v > cap) {
                    capped = true;
                    continue;
                }
                if seen.insert(n.clone()) {
                    let mut r = run.clone();
                    r.push(t);
                    queue.push_back((n, r));
                }
            }
        }
        RunSearch::NotFound { capped }
    }

    /// Largest counter value along a run.
    pub fn max_counter(&self, run: &[usize]) -> Option<u64> {
        self.replay(run).map(|cs| cs.iter().flat_map(|c| c.counters.iter().copied()).max().unwrap_or(0))
    }
}

impl fmt::Display for CounterAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states {};", self.states.join(" "))?;
        writeln!(f, "init {};", self.states[self.initial])?;
        let acc: Vec<&str> = self.accepting.iter().map(|&a| self.states[a].as_str()).collect();
        writeln!(f, "accept {};", acc.join(" "))?;
        writeln!(f, "counters {};", self.counters.join(" "))?;
        for t in &self.transitions {
            let (kw, c) = match t.action {
                CaAction::Inc(c) => ("inc", c),
                CaAction::Dec(c) => ("dec", c),
                CaAction::IfZero(c) => ("ifzero", c),
            };
            writeln!(f, "{} {kw} {} -> {}", self.states[t.from], self.counters[c], self.states[t.to])?;
        }
        Ok(())
    }
}

fn name_list(c: &mut Cursor) -> PResult<Vec<(String, crate::dsl::Pos)>> {
    let mut out = Vec::new();
    while !c.eat_sym(";") {
        c.eat_sym(",");
        if c.is_sym(";") {
            continue;
        }
        out.push(c.name()?);
    }
    Ok(out)
}

/// Parses `states ...; init q; accept ...; counters ...;` followed by
/// transition lines `p inc c -> q`, `p dec c -> q`, `p ifzero c -> q`.
pub fn parse_ca(text: &str) -> Result<CounterAutomaton, Vec<Diagnostic>> {
    parse_ca_inner(text).map_err(|d| vec![d])
}

fn parse_ca_inner(text: &str) -> PResult<CounterAutomaton> {
    let mut c = Cursor::new(text)?;
    c.expect_kw("states")?;
    let states: Vec<String> = name_list(&mut c)?.into_iter().map(|x| x.0).collect();
    let lookup = |names: &[String], n: &str, pos, what: &str| -> PResult<usize> {
        names.iter().position(|s| s == n).ok_or_else(|| Diagnostic::error(pos, format!("unknown {what} {n}")))
    };
    c.expect_kw("init")?;
    let (q0, p0) = c.name()?;
    let initial = lookup(&states, &q0, p0, "state")?;
    c.expect_sym(";")?;
    c.expect_kw("accept")?;
    let mut accepting = BTreeSet::new();
    for (a, p) in name_list(&mut c)? {
        accepting.insert(lookup(&states, &a, p, "state")?);
    }
    c.expect_kw("counters")?;
    let counters: Vec<String> = name_list(&mut c)?.into_iter().map(|x| x.0).collect();
    let mut transitions = Vec::new();
    while !c.at_eof() {
        let (from, pf) = c.name()?;
        let from = lookup(&states, &from, pf, "state")?;
        let kpos = c.pos();
        let kw = c.name()?.0;
        let (cn, pc) = c.name()?;
        let ci = lookup(&counters, &cn, pc, "counter")?;
        let action = match kw.as_str() {
            "inc" => CaAction::Inc(ci),
            "dec" => CaAction::Dec(ci),
            "ifzero" => CaAction::IfZero(ci),
            _ => return Err(Diagnostic::error(kpos, format!("unknown action {kw}"))),
        };
        c.expect_sym("->")?;
        let (to, pt) = c.name()?;
        let to = lookup(&states, &to, pt, "state")?;
        c.eat_sym(";");
        transitions.push(CaTransition { from, action, to });
    }
    Ok(CounterAutomaton { states, counters, initial, accepting, transitions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use CaAction::*;

    #[test]
    fn semi_determinism() {
        let m = CounterAutomaton::new(&["a", "b"], &["c1"], "a", &["b"], &[("a", Inc(0), "b")]);
        assert!(m.is_semi_deterministic());
        let m = CounterAutomaton::new(&["a", "b"], &["c1"], "a", &["b"], &[("a", Dec(0), "b"), ("a", IfZero(0), "a")]);
        assert!(m.is_semi_deterministic());
        let m = CounterAutomaton::new(&["a", "b"], &["c1"], "a", &["b"], &[("a", Inc(0), "b"), ("a", Inc(0), "a")]);
        assert!(!m.is_semi_deterministic());
    }

    #[test]
    fn step_guards() {
        let m = CounterAutomaton::new(&["p", "q"], &["c"], "p", &[], &[("p", IfZero(0), "q"), ("p", Dec(0), "q")]);
        let z = CaConfig { state: 0, counters: vec![0] };
        assert_eq!(m.step(&z), vec![(0, CaConfig { state: 1, counters: vec![0] })]);
        let one = CaConfig { state: 0, counters: vec![1] };
        assert_eq!(m.step(&one), vec![(1, CaConfig { state: 1, counters: vec![0] })]);
    }

    #[test]
    fn bounded_search() {
        let m = CounterAutomaton::new(&["a", "b", "f"], &["c"], "a", &["f"], &[("a", Inc(0), "b"), ("b", Dec(0), "f")]);
        assert_eq!(m.bounded_accepting_run(10, 3), RunSearch::Found(vec![0, 1]));
        let none = CounterAutomaton::new(&["a", "b"], &["c"], "a", &[], &[("a", Inc(0), "b")]);
        assert_eq!(none.bounded_accepting_run(10, 3), RunSearch::NotFound { capped: false });
        // Needs counter value 5.
        let states = ["s0", "s1", "s2", "s3", "s4", "s5", "f"];
        let mut trs: Vec<(&str, CaAction, &str)> = (0..5).map(|i| (states[i], Inc(0), states[i + 1])).collect();
        trs.push(("s5", Dec(0), "f"));
        let deep = CounterAutomaton::new(&states, &["c"], "s0", &["f"], &trs);
        assert_eq!(deep.bounded_accepting_run(20, 3), RunSearch::NotFound { capped: true });
        assert!(matches!(deep.bounded_accepting_run(20, 5), RunSearch::Found(_)));
    }

    #[test]
    fn text_round_trip() {
        let m = CounterAutomaton::new(
            &["q0", "q1", "qf"],
            &["c1", "c2"],
            "q0",
            &["qf"],
            &[("q0", Inc(0), "q1"), ("q1", Dec(0), "q0"), ("q1", IfZero(0), "qf")],
        );
        let text = m.to_string();
        assert_eq!(parse_ca(&text).unwrap(), m);
        let bad = parse_ca("states a;\ninit a;\naccept;\ncounters c;\na inc d -> a\n").unwrap_err();
        assert_eq!((bad[0].line, bad[0].column), (5, 7));
    }
}
