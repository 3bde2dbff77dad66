use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynrel::corpus;
use dynrel::counter::{CaAction::*, CounterAutomaton, RunSearch};
use dynrel::dsl::{parse_program, print_program};
use dynrel::dynprog::{bfs_find, bfs_nonempty, DynamicProgram, Modification, ProgramState};
use dynrel::hi::{check_consistency_bounded, ConsistencyResult};
use dynrel::transforms::*;

const CONST_Q: &str = "schema { input U/1; aux Acc/0; }\ninit Acc() := true;\nquery Acc;";
const FALSE_Q: &str = "schema { input U/1; aux Acc/0; }\nquery Acc;";

fn load(text: &str) -> DynamicProgram {
    parse_program(text).unwrap().0
}

fn names(p: &DynamicProgram, ids: Vec<usize>) -> BTreeSet<String> {
    ids.into_iter().map(|s| p.schema().name(s).to_string()).collect()
}

fn bit(p: &DynamicProgram, s: &ProgramState, name: &str) -> bool {
    s.structure.bit(p.schema().lookup(name).unwrap())
}

fn accepts(p: &DynamicProgram, n: usize, seq: &[Modification]) -> bool {
    p.run(n, seq).query_nonempty(p)
}

fn one_inc() -> CounterAutomaton {
    CounterAutomaton::new(&["qi", "qf"], &["c1", "c2"], "qi", &["qf"], &[("qi", Inc(0), "qf")])
}

#[test]
fn emptiness_to_consistency_structure() {
    let e = corpus::load(corpus::EXAMPLE1);
    let (p, report) = emptiness_to_consistency(&e);
    let expected: BTreeSet<String> = ["First", "Last", "List", "Q", "Q'"].map(String::from).into();
    assert_eq!(names(&p, p.aux_ids()), expected);
    assert_eq!(p.schema().name(p.query()), "Q'");
    assert_eq!(report.output_fragment, p.classify());
    assert!(p.classify().quantifier_free);
    assert!(report.renamed.is_empty());

    let clash = load("schema { input U/1; aux Q/0, Q'/0; }\nquery Q;");
    let (p, report) = emptiness_to_consistency(&clash);
    assert_eq!(p.schema().name(p.query()), "Q'_");
    assert_eq!(report.renamed, vec![("Q'".to_string(), "Q'_".to_string())]);
}

#[test]
fn emptiness_to_consistency_semantics() {
    let (p, _) = emptiness_to_consistency(&load(FALSE_Q));
    assert!(matches!(check_consistency_bounded(&p, 3, 5), ConsistencyResult::NoViolationFound { .. }));

    // A non-empty witness followed by its own undo is inconsistent.
    let e = corpus::load(corpus::EXAMPLE1);
    let (p, _) = emptiness_to_consistency(&e);
    let alpha = vec![Modification::ins(0, vec![1])];
    assert!(accepts(&e, 1, &alpha));
    let mut undo = alpha.clone();
    undo.push(alpha[0].inverse());
    assert!(accepts(&p, 1, &undo));
    assert!(!accepts(&p, 1, &[]));
    let w = check_consistency_bounded(&p, 1, 2).witness().cloned().expect("inconsistent");
    assert!(w.replays(&p));
}

#[test]
fn consistency_to_emptiness_fo_examples() {
    let t = corpus::load(corpus::TOGGLE);
    let (p, report) = consistency_to_emptiness_fo(&t);
    let (n, seq) = bfs_nonempty(&p, 1, 5).expect("non-empty");
    let (a, b) = split_tracks(&t, &seq);
    assert_eq!(n, 1);
    assert!(a.len() != b.len());
    let prof = report.output_fragment;
    assert_eq!(prof.max_input_arity, t.classify().max_input_arity);
    assert_eq!(prof.max_aux_arity, t.classify().max_aux_arity);
    assert_eq!(prof.query_arity, 0);
    assert!(!prof.quantifier_free);
    // One step on one track against two on the other, then one more
    // modification for the delay.
    let witness = vec![
        Modification::ins(0, vec![1]),
        Modification::ins(2, vec![1]),
        Modification::ins(2, vec![1]),
        Modification::del(0, vec![1]),
    ];
    assert!(!accepts(&p, 1, &witness[..3]));
    assert!(accepts(&p, 1, &witness));

    let (c, _) = consistency_to_emptiness_fo(&load(CONST_Q));
    for n in 1..=2 {
        assert_eq!(bfs_find(&c, n, 4, &mut |s| s.query_nonempty(&c)), None);
    }
    let e = corpus::load(corpus::EXAMPLE1);
    let (p, report) = consistency_to_emptiness_fo(&e);
    assert_eq!(report.output_fragment.max_aux_arity, 2);
    assert_eq!(report.output_fragment.max_input_arity, 1);
    assert_eq!(p.schema().arity(p.query()), 0);
}

#[test]
fn consistency_to_emptiness_qf_examples() {
    let t = corpus::load(corpus::TOGGLE);
    let (p, report) = consistency_to_emptiness_qf(&t).unwrap();
    assert!(report.output_fragment.quantifier_free);
    assert_eq!(report.output_fragment.max_input_arity, 1);
    assert_eq!(report.output_fragment.max_aux_arity, 0);
    let u_u = p.schema().lookup("U_U").unwrap();
    // A redundant deletion on the second track.
    let seq = vec![Modification::del(u_u, vec![1]), Modification::ins(0, vec![1])];
    assert!(accepts(&p, 1, &seq));
    let (_, found) = bfs_nonempty(&p, 1, 2).expect("non-empty");
    assert_eq!(found.len(), 2);

    let (c, _) = consistency_to_emptiness_qf(&load(CONST_Q)).unwrap();
    for n in 1..=2 {
        assert_eq!(bfs_find(&c, n, 6, &mut |s| s.query_nonempty(&c)), None);
    }
    let f = corpus::load(corpus::EDGES_BIT);
    match consistency_to_emptiness_qf(&f) {
        Ok((p, r)) => {
            assert_eq!(r.output_fragment.max_input_arity, f.classify().max_input_arity);
            assert_eq!(r.output_fragment.max_aux_arity, f.classify().max_aux_arity);
            assert!(p.classify().quantifier_free);
        }
        Err(e) => assert_eq!(e, CompileError::NotQuantifierFree),
    }
}

#[test]
fn qf_protocol_violations_are_sinks() {
    let e = corpus::load(corpus::EXAMPLE1);
    let (p, _) = consistency_to_emptiness_qf(&e).unwrap();
    let id = |n: &str| p.schema().lookup(n).unwrap();
    let (u, uu, iu, t, t2) = (id("U"), id("U_U"), id("I_U"), id("T_U"), id("T'_U"));
    // Each prefix breaks the protocol at its last modification.
    let bad: Vec<Vec<Modification>> = vec![
        vec![Modification::del(iu, vec![1])],
        vec![Modification::del(t, vec![1])],
        vec![Modification::del(t2, vec![2])],
        vec![Modification::ins(uu, vec![1])],
        vec![Modification::ins(u, vec![1]), Modification::del(uu, vec![1])],
        vec![Modification::ins(u, vec![1]), Modification::ins(iu, vec![1])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(t2, vec![2])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(t, vec![2])],
        vec![Modification::ins(t2, vec![1]), Modification::del(u, vec![1])],
        vec![Modification::ins(t, vec![1]), Modification::ins(u, vec![1])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(uu, vec![1])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(u, vec![2]), Modification::ins(u, vec![2])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(u, vec![2]), Modification::del(u, vec![1])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(u, vec![2]), Modification::ins(u, vec![1]), Modification::ins(u, vec![2])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(u, vec![2]), Modification::ins(u, vec![1]), Modification::del(t, vec![1])],
        vec![Modification::del(uu, vec![1]), Modification::del(uu, vec![2])],
        vec![Modification::ins(iu, vec![1]), Modification::ins(iu, vec![2])],
        vec![Modification::del(uu, vec![1]), Modification::ins(t2, vec![1])],
        vec![Modification::ins(iu, vec![2]), Modification::ins(t, vec![1])],
        vec![Modification::ins(t2, vec![1]), Modification::ins(u, vec![2]), Modification::ins(u, vec![1]), Modification::del(t2, vec![1]), Modification::ins(t2, vec![2])],
    ];
    assert_eq!(bad.len(), 20);
    let mods = p.modifications(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for prefix in &bad {
        let mut s = p.run(2, prefix);
        assert!(bit(&p, &s, "Err"), "{prefix:?}");
        for _ in 0..12 {
            assert!(!s.query_nonempty(&p));
            s = p.apply(&s, &mods[rng.gen_range(0..mods.len())]);
            assert!(bit(&p, &s, "Err"));
        }
    }
}

#[test]
fn reductions_agree_with_bounded_consistency() {
    let mut checked = 0;
    for (name, src) in corpus::all() {
        if src.schema().max_arity(&src.input_ids()) > 1 || src.schema().input_ids().len() > 1 {
            continue;
        }
        let consistent = matches!(check_consistency_bounded(&src, 2, 4), ConsistencyResult::NoViolationFound { .. });
        let (fo, r) = consistency_to_emptiness_fo(&src);
        assert_eq!(r.input_fragment, src.classify());
        assert_eq!(r.output_fragment, fo.classify());
        let fo_nonempty = bfs_nonempty(&fo, 2, 9).is_some();
        if consistent {
            // The bounded sweep may miss long witnesses; only inconsistency is certain.
            assert!(!fo_nonempty || check_consistency_bounded(&src, 2, 8).witness().is_some(), "{name}");
        } else {
            assert!(fo_nonempty, "{name}");
        }
        if let Ok((qf, r)) = consistency_to_emptiness_qf(&src) {
            assert!(r.output_fragment.quantifier_free);
            let qf_nonempty = bfs_nonempty(&qf, 2, 8).is_some();
            if !consistent {
                assert!(qf_nonempty, "{name}");
            }
            if qf_nonempty {
                assert!(!consistent || check_consistency_bounded(&src, 2, 8).witness().is_some(), "{name}");
            }
        }
        let (ec, r) = emptiness_to_consistency(&src);
        assert_eq!(r.output_fragment.quantifier_free, src.classify().quantifier_free);
        assert_eq!(r.output_fragment, ec.classify());
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn fo10_examples() {
    let p = compile_2ca_fo10(&one_inc()).unwrap();
    assert!(accepts(&p, 1, &[Modification::ins(C_IDS[0], vec![1])]));
    assert!(!accepts(&p, 1, &[]));
    assert!(!accepts(&p, 1, &[Modification::ins(C_IDS[1], vec![1])]));
    let z = CounterAutomaton::new(&["qi", "qf"], &["c1", "c2"], "qi", &["qf"], &[("qi", IfZero(0), "qf")]);
    let p = compile_2ca_fo10(&z).unwrap();
    assert!(accepts(&p, 1, &[Modification::ins(Z_IDS[0], vec![])]));
    assert!(!accepts(&p, 1, &[Modification::ins(C_IDS[0], vec![1]), Modification::ins(Z_IDS[0], vec![])]));
    let prof = p.classify();
    assert_eq!((prof.max_input_arity, prof.max_aux_arity, prof.quantifier_free), (1, 0, false));

    let none = CounterAutomaton::new(&["qi", "q1"], &["c1", "c2"], "qi", &[], &[("qi", Inc(0), "q1"), ("q1", Inc(1), "qi")]);
    let p = compile_2ca_fo10(&none).unwrap();
    assert_eq!(bfs_nonempty(&p, 2, 8), None);

    let bad = CounterAutomaton::new(&["a", "b"], &["c1", "c2"], "a", &["b"], &[("a", Inc(0), "b"), ("a", Dec(0), "b")]);
    assert_eq!(compile_2ca_fo10(&bad), Err(CompileError::NotSemiDeterministic("a".to_string())));
    let one = CounterAutomaton::new(&["a"], &["c1"], "a", &["a"], &[]);
    assert_eq!(compile_2ca_prop12(&one), Err(CompileError::Counters(1)));
}

#[test]
fn run_to_sequence_examples() {
    let m = CounterAutomaton::new(&["a", "b", "c"], &["c1", "c2"], "a", &["c"], &[("a", Inc(0), "b"), ("b", Dec(0), "c")]);
    assert_eq!(run_to_sequence(&m, &[0, 1], 1).unwrap(), vec![Modification::ins(C_IDS[0], vec![1]), Modification::del(C_IDS[0], vec![1])]);
    let z = CounterAutomaton::new(&["a", "b", "c"], &["c1", "c2"], "a", &["c"], &[("a", IfZero(0), "b"), ("b", IfZero(0), "c")]);
    assert_eq!(run_to_sequence(&z, &[0, 1], 1).unwrap(), vec![Modification::ins(Z_IDS[0], vec![]), Modification::del(Z_IDS[0], vec![])]);
    assert_eq!(run_to_sequence(&m, &[], 1).unwrap(), vec![]);
    assert_eq!(run_to_sequence(&m, &[0, 1], 0), Err(CompileError::DomainTooSmall { needed: 1, n: 0 }));
    assert_eq!(run_to_sequence(&m, &[1], 3), Err(CompileError::InvalidRun));
}

#[test]
fn prop12_examples() {
    let p = compile_2ca_prop12(&one_inc()).unwrap();
    assert!(accepts(&p, 1, &[Modification::ins(C_IDS[0], vec![1])]));
    let prof = p.classify();
    assert_eq!((prof.max_input_arity, prof.max_aux_arity, prof.quantifier_free), (1, 2, true));

    let (_, m) = corpus::CA.iter().find(|(n, _)| *n == "m04_count_two").unwrap();
    let m = corpus::load_ca(m);
    let run = match m.bounded_accepting_run(6, 3) {
        RunSearch::Found(r) => r,
        r => panic!("{r:?}"),
    };
    let actions: Vec<_> = run.iter().map(|&t| m.transitions[t].action).collect();
    assert_eq!(actions, vec![Inc(0), Inc(0), Dec(0), Dec(0), IfZero(0)]);
    let seq = run_to_sequence(&m, &run, 2).unwrap();
    let p = compile_2ca_prop12(&m).unwrap();
    assert!(accepts(&p, 2, &seq));
    assert!(accepts(&compile_2ca_fo10(&m).unwrap(), 2, &seq));
    // The zero test too early is an error.
    assert!(!accepts(&p, 2, &[seq[0].clone(), seq[1].clone(), seq[2].clone(), seq[4].clone()]));
}

#[test]
fn prop20_examples() {
    let m = one_inc();
    let p = compile_2ca_prop20(&m).unwrap();
    let prof = p.classify();
    assert!(prof.quantifier_free);
    assert_eq!(prof.max_aux_arity, 0);
    assert_eq!(prof.max_input_arity, 2);
    for (i, name) in PROP20_INPUTS.iter().enumerate() {
        assert_eq!(p.schema().name(prop20_id(name, 1)), format!("{name}1"));
        assert_eq!(p.schema().name(prop20_id(name, 2)), format!("{name}2"));
        let _ = i;
    }
    let seq = run_to_sequence_prop20(&m, &[0], 2).unwrap();
    assert_eq!(seq.len(), 12);
    let init = &seq[..6];
    let s = p.run(2, &init[..3]);
    assert!(!bit(&p, &s, "Err"));
    let s = p.run(2, init);
    assert!(!bit(&p, &s, "Err") && bit(&p, &s, "M_idle"));
    assert!(accepts(&p, 2, &seq));
    assert!(!accepts(&p, 2, &seq[..11]));

    // Out of protocol: a rejecting sink.
    let mut wrong = init.to_vec();
    wrong.push(Modification::ins(prop20_id("Last", 1), vec![2]));
    let mut s = p.run(2, &wrong);
    assert!(bit(&p, &s, "Err"));
    for d in &seq[6..] {
        s = p.apply(&s, d);
        assert!(bit(&p, &s, "Err") && !s.query_nonempty(&p));
    }
    let mut skipped = seq.clone();
    skipped.remove(8);
    assert!(!accepts(&p, 2, &skipped));
    assert!(bit(&p, &p.run(2, &skipped), "Err"));

    // An accepting run of length 2, translated on four elements.
    let (_, text) = corpus::CA.iter().find(|(n, _)| *n == "m03_inc_dec").unwrap();
    let m = corpus::load_ca(text);
    let p = compile_2ca_prop20(&m).unwrap();
    let seq = run_to_sequence_prop20(&m, &[0, 1], 4).unwrap();
    assert!(accepts(&p, 4, &seq));
    for k in 6..seq.len() {
        assert!(!accepts(&p, 4, &seq[..k]), "prefix {k}");
    }
    // A decrement protocol on an empty counter is refused.
    let (_, text) = corpus::CA.iter().find(|(n, _)| *n == "m07_blocked_dec").unwrap();
    let m = corpus::load_ca(text);
    let p = compile_2ca_prop20(&m).unwrap();
    let mut s = p.run(4, &run_to_sequence_prop20(&m, &[], 4).unwrap());
    s = p.apply(&s, &Modification::ins(prop20_id("NextLast", 1), vec![1]));
    assert!(bit(&p, &s, "Err"));
}

#[test]
fn fo12_examples() {
    let imm = CounterAutomaton::new(&["qi"], &["c1", "c2"], "qi", &["qi"], &[]);
    let p = compile_2ca_consistent_fo12(&imm).unwrap();
    let prof = p.classify();
    assert_eq!((prof.max_input_arity, prof.max_aux_arity, prof.quantifier_free), (1, 2, false));
    assert!(!accepts(&p, 1, &[]));
    assert!(accepts(&p, 1, &[Modification::ins(0, vec![1])]));
    assert_eq!(bfs_nonempty(&p, 1, 1).unwrap().1, vec![Modification::ins(0, vec![1])]);

    let one = compile_2ca_consistent_fo12(&one_inc()).unwrap();
    let once = one.run(1, &[Modification::ins(0, vec![1])]);
    let regrown = one.run(1, &[Modification::ins(0, vec![1]), Modification::del(0, vec![1]), Modification::ins(0, vec![1])]);
    assert_eq!(once, regrown);
    assert!(once.query_nonempty(&one));
    assert!(!one.run(1, &[Modification::ins(0, vec![1]), Modification::del(0, vec![1])]).query_nonempty(&one));

    // The full sweep on representative machines, a smaller domain elsewhere.
    for (name, text) in corpus::CA {
        let n = if ["m01_inc_accept", "m04_count_two", "m08_two_counters"].contains(name) { 3 } else { 2 };
        let p = compile_2ca_consistent_fo12(&corpus::load_ca(text)).unwrap();
        assert!(matches!(check_consistency_bounded(&p, n, 6), ConsistencyResult::NoViolationFound { .. }), "{name}");
    }
}

#[test]
fn fo12_query_is_acceptance_within_size() {
    for (name, text) in corpus::CA {
        let m = corpus::load_ca(text);
        let p = compile_2ca_consistent_fo12(&m).unwrap();
        let shortest = match m.bounded_accepting_run(5, 5) {
            RunSearch::Found(r) => Some(r.len().max(1)),
            RunSearch::NotFound { .. } => None,
        };
        for k in 0..=5usize {
            let seq: Vec<Modification> = (1..=k as u32).map(|e| Modification::ins(0, vec![e])).collect();
            assert_eq!(accepts(&p, 5, &seq), shortest.is_some_and(|l| l <= k), "{name} k={k}");
        }
        if let Some(l) = shortest {
            let RunSearch::Found(run) = m.bounded_accepting_run(5, 5) else { unreachable!() };
            assert!(accepts(&p, 5, &run_to_sequence_fo12(&m, &run, 5).unwrap()), "{name}");
            assert_eq!(run_to_sequence_fo12(&m, &run, 5).unwrap().len(), l);
        }
    }
}

#[test]
fn fo10_round_trip_on_corpus() {
    for (name, text) in corpus::CA {
        let m = corpus::load_ca(text);
        let fo = compile_2ca_fo10(&m).unwrap();
        let prop = compile_2ca_prop12(&m).unwrap();
        let run = match m.bounded_accepting_run(6, 4) {
            RunSearch::Found(r) => Some(r),
            RunSearch::NotFound { .. } => None,
        };
        if let Some(run) = &run {
            assert!(m.max_counter(run).unwrap() <= 3, "{name}");
            let n = (m.max_counter(run).unwrap() as usize).max(1);
            let seq = run_to_sequence(&m, run, n).unwrap();
            assert_eq!(seq.len(), run.len());
            assert!(accepts(&fo, n, &seq), "{name}");
            assert!(accepts(&prop, n, &seq), "{name}");
        }
        let back = bfs_nonempty(&fo, 4, 6);
        assert_eq!(back.is_some(), run.is_some(), "{name}");
        if let (Some((_, seq)), Some(run)) = (&back, &run) {
            assert_eq!(seq.len(), run.len(), "{name}");
        }
    }
}

#[test]
fn compiled_programs_print_and_reparse() {
    for (_, text) in corpus::CA {
        let m = corpus::load_ca(text);
        for p in [
            compile_2ca_fo10(&m).unwrap(),
            compile_2ca_prop12(&m).unwrap(),
            compile_2ca_prop20(&m).unwrap(),
            compile_2ca_consistent_fo12(&m).unwrap(),
        ] {
            let again = load(&print_program(&p));
            assert_eq!(again, p);
        }
    }
    let e = corpus::load(corpus::EXAMPLE1);
    let (p, _) = consistency_to_emptiness_qf(&e).unwrap();
    assert_eq!(load(&print_program(&p)), p);
    let (p, _) = consistency_to_emptiness_fo(&e);
    assert_eq!(load(&print_program(&p)), p);
}
