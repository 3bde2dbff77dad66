use std::collections::BTreeSet;

use itertools::Itertools;
use proptest::prelude::*;

use dynrel::dsl::{parse_program, print_program};
use dynrel::dynprog::{Modification, SeqMode};
use dynrel::hi::{check_consistency_bounded, ConsistencyResult};
use dynrel::logic::{Elem, Kind, Schema, Structure, Symbol};
use dynrel::modulo::*;

fn schema(decls: &[(&str, usize)]) -> Schema {
    Schema::new(decls.iter().map(|(n, a)| Symbol::new(*n, *a, Kind::Input)).collect()).unwrap()
}

fn set(es: &[Elem]) -> BTreeSet<Elem> {
    es.iter().copied().collect()
}

fn structure(sc: &Schema, n: usize, facts: &[(usize, &[Elem])]) -> Structure {
    let mut s = Structure::empty(sc, n);
    for (sym, t) in facts {
        s.insert(*sym, t.to_vec());
    }
    s
}

fn parity(sc: &Schema, q: u32) -> ModuloExpression {
    parse_modexpr(sc, &format!("count [{{U(1)}}] mod 2 = {q}")).unwrap()
}

#[test]
fn set_type_examples() {
    let u = schema(&[("U", 1)]);
    let s = structure(&u, 2, &[(0, &[1])]);
    let t = set_type(&u, &s, &set(&[1]));
    assert_eq!(t.k(), 1);
    assert_eq!(t.types().len(), 1);
    assert_eq!(t.display(&u).to_string(), "[{U(1)}]");

    let e = schema(&[("E", 2)]);
    let s = structure(&e, 2, &[(0, &[1, 2])]);
    let t = set_type(&e, &s, &set(&[1, 2]));
    assert_eq!(t.display(&e).to_string(), "[{E(1,2)}, {E(2,1)}]");
    assert_eq!(t, set_type(&e, &structure(&e, 2, &[(0, &[2, 1])]), &set(&[1, 2])));

    let empty = set_type(&e, &Structure::empty(&e, 2), &set(&[1, 2]));
    assert!(empty.is_empty_type());
    assert_eq!(empty.types().len(), 1);
    assert!(ModuloExpression::simple(empty, 2, 0).is_err());
}

#[test]
fn count_and_eval_examples() {
    let u = schema(&[("U", 1)]);
    let s = structure(&u, 4, &[(0, &[1]), (0, &[2]), (0, &[4])]);
    assert!(eval_modexpr(&u, &s, &parity(&u, 1)));
    assert!(!eval_modexpr(&u, &s, &parity(&u, 0)));
    let e = schema(&[("E", 2), ("U", 1)]);
    let x = parse_modexpr(&e, "count [{E(1,2), E(2,1)}] mod 3 = 0 && !count [{E(1,1)}] mod 2 = 1").unwrap();
    assert!(eval_modexpr(&e, &Structure::empty(&e, 3), &x));
    for q in 0..3 {
        let y = parse_modexpr(&e, &format!("count [{{E(1,2)}}] mod 3 = {q}")).unwrap();
        assert_eq!(eval_modexpr(&e, &Structure::empty(&e, 3), &y), q == 0);
    }
}

#[test]
fn set_type_literals_are_validated() {
    let e = schema(&[("E", 2), ("U", 1)]);
    assert!(matches!(parse_modexpr(&e, "count [{E(1,2)}, {E(1,1)}] mod 2 = 0"), Err(ModuloError::Parse(_))));
    assert!(matches!(parse_modexpr(&e, "count [{E(1,2), U(1)}] mod 2 = 0"), Err(ModuloError::Parse(_))));
    assert!(matches!(parse_modexpr(&e, "count [{}] mod 2 = 0"), Err(ModuloError::Parse(_))));
    assert!(matches!(parse_modexpr(&e, "count [{U(1)}] mod 1 = 0"), Err(ModuloError::Parse(_))));
    assert!(matches!(parse_modexpr(&e, "count [{U(1)}] mod 2 = 2"), Err(ModuloError::Parse(_))));
    assert!(matches!(parse_modexpr(&e, "count [{V(1)}] mod 2 = 0"), Err(ModuloError::Parse(_))));
    match parse_modexpr(&e, "count [{U(1)}] mod 2 = 0 &&") {
        Err(ModuloError::Parse(d)) => assert_eq!((d.line, d.column), (1, 28)),
        r => panic!("{r:?}"),
    }
    // Listing part of a class gives the whole class.
    let a = parse_modexpr(&e, "count [{E(2,1), U(1)}] mod 2 = 0");
    assert!(a.is_err());
    let b = parse_modexpr(&e, "count [{E(2,1)}] mod 2 = 0").unwrap();
    let c = parse_modexpr(&e, "count [{E(1,2)}, {E(2,1)}] mod 2 = 0").unwrap();
    assert_eq!(b, c);
}

#[test]
fn expressions_print_and_reparse() {
    let e = schema(&[("E", 2), ("U", 1), ("Z", 0)]);
    for text in [
        "count [{U(1)}] mod 2 = 0",
        "count [{E(1,2), E(2,1)}] mod 3 = 1 || !count [{E(1,1), U(1)}] mod 2 = 1",
        "(count [{Z()}] mod 2 = 1 || count [{U(1)}] mod 4 = 3) && !(count [{E(1,2)}] mod 2 = 0 && count [{U(1)}] mod 2 = 1)",
    ] {
        let x = parse_modexpr(&e, text).unwrap();
        let printed = x.display(&e).to_string();
        assert_eq!(parse_modexpr(&e, &printed).unwrap(), x, "{printed}");
        let file = print_modexpr_file(&e, &x);
        let (sc, y) = parse_modexpr_file(&file).unwrap();
        assert_eq!(sc, e);
        assert_eq!(y, x);
    }
}

#[test]
fn compiled_parity_agrees() {
    let u = schema(&[("U", 1)]);
    let x = parity(&u, 0);
    let p = compile_modexpr(&u, &x).unwrap();
    let prof = p.classify();
    assert!(prof.quantifier_free);
    assert_eq!(prof.max_aux_arity, 0);
    for mode in [SeqMode::InsertionsOnly, SeqMode::All] {
        match equivalence_check_bounded(&p, &u, &x, 4, 5, mode).unwrap() {
            Equivalence::Agree { states } => assert!(states > 0),
            c => panic!("{c:?}"),
        }
    }
}

#[test]
fn compiled_self_loops_agree() {
    let e = schema(&[("E", 2)]);
    let x = parse_modexpr(&e, "count [{E(1,1)}] mod 3 = 1").unwrap();
    let p = compile_modexpr(&e, &x).unwrap();
    assert!(matches!(equivalence_check_bounded(&p, &e, &x, 4, 5, SeqMode::InsertionsOnly).unwrap(), Equivalence::Agree { .. }));
    assert!(matches!(equivalence_check_bounded(&p, &e, &x, 3, 4, SeqMode::All).unwrap(), Equivalence::Agree { .. }));
}

#[test]
fn compiled_programs_are_consistent() {
    let u = schema(&[("U", 1)]);
    let p = compile_modexpr(&u, &parity(&u, 1)).unwrap();
    assert!(matches!(check_consistency_bounded(&p, 3, 5), ConsistencyResult::NoViolationFound { .. }));
    let e = schema(&[("E", 2)]);
    let x = parse_modexpr(&e, "count [{E(1,1)}] mod 3 = 1").unwrap();
    let p = compile_modexpr(&e, &x).unwrap();
    assert!(matches!(check_consistency_bounded(&p, 3, 5), ConsistencyResult::NoViolationFound { .. }));
}

#[test]
fn compiled_programs_print_and_reparse() {
    let e = schema(&[("E", 2), ("U", 1)]);
    let x = parse_modexpr(&e, "count [{E(1,2)}] mod 2 = 1 && !count [{E(1,1), U(1)}] mod 3 = 0").unwrap();
    let p = compile_modexpr(&e, &x).unwrap();
    let text = print_program(&p);
    assert_eq!(parse_program(&text).unwrap().0, p);
}

const EVEN: &str = "schema { input U/1; aux P/0; }
init P() := true;
on insert U(a) { P() := (P() && U(a)) || (!P() && !U(a)); }
on delete U(a) { P() := (P() && !U(a)) || (!P() && U(a)); }
query P;";

#[test]
fn equivalence_counterexamples() {
    let u = schema(&[("U", 1)]);
    let even = parse_program(EVEN).unwrap().0;
    assert!(matches!(equivalence_check_bounded(&even, &u, &parity(&u, 0), 3, 4, SeqMode::All).unwrap(), Equivalence::Agree { .. }));
    match equivalence_check_bounded(&even, &u, &parity(&u, 1), 3, 4, SeqMode::All).unwrap() {
        Equivalence::Counterexample { domain, sequence, program, expression } => {
            assert_eq!((domain, program, expression), (1, true, false));
            assert!(sequence.is_empty());
        }
        a => panic!("{a:?}"),
    }
    let always = parse_program("schema { input U/1; aux P/0; }\ninit P() := true;\nquery P;").unwrap().0;
    match equivalence_check_bounded(&always, &u, &parity(&u, 0), 3, 4, SeqMode::All).unwrap() {
        Equivalence::Counterexample { domain, sequence, .. } => {
            assert_eq!(domain, 1);
            assert_eq!(sequence, vec![Modification::ins(0, vec![1])]);
        }
        a => panic!("{a:?}"),
    }
    let e = schema(&[("E", 2)]);
    assert!(matches!(equivalence_check_bounded(&even, &e, &parity(&u, 0), 1, 1, SeqMode::All), Err(ModuloError::SchemaMismatch { .. })));
}

#[test]
fn set_types_larger_than_the_arity_are_rejected() {
    let e = schema(&[("E", 2)]);
    let t: KType = [(0, vec![0, 1, 2])].into_iter().collect();
    let gamma = SetType::from_ktype(3, &t);
    let x = ModuloExpression::simple(gamma, 2, 0).unwrap();
    assert_eq!(compile_modexpr(&e, &x), Err(ModuloError::ArityTooLarge { k: 3, max: 2 }));
}

#[test]
fn normal_form_checkers() {
    let e = schema(&[("E", 2), ("U", 1), ("F", 2)]);
    let good = vec![Modification::ins(0, vec![1, 2]), Modification::ins(0, vec![3, 4]), Modification::ins(1, vec![1])];
    assert!(satisfies_m1(&good) && satisfies_m2(&e, &good));
    let split = vec![Modification::ins(0, vec![1, 2]), Modification::ins(1, vec![1]), Modification::ins(0, vec![2, 1])];
    assert!(!satisfies_m1(&split));
    let ascending = vec![Modification::ins(1, vec![1]), Modification::ins(0, vec![1, 2])];
    assert!(!satisfies_m1(&ascending));
    let unlike = vec![
        Modification::ins(0, vec![1, 2]),
        Modification::ins(2, vec![1, 2]),
        Modification::ins(2, vec![3, 4]),
        Modification::ins(0, vec![3, 4]),
    ];
    assert!(satisfies_m1(&unlike));
    // The second set inserts its two facts in the other order.
    assert!(!satisfies_m2(&e, &unlike));
    assert!(!satisfies_m1(&[Modification::del(1, vec![1])]));
}

#[test]
fn pumping_lengths() {
    assert_eq!(pumping_length(1), Some(2));
    assert_eq!(pumping_length(2), Some(24));
    assert_eq!(pumping_length(3), Some(40320));
    assert_eq!(pumping_length(7), None);
}

fn random_structure() -> impl Strategy<Value = (usize, Vec<(usize, Vec<Elem>)>)> {
    (1usize..=4).prop_flat_map(|n| {
        let e = n as Elem;
        let fact = prop_oneof![
            (1..=e, 1..=e).prop_map(|(a, b)| (0usize, vec![a, b])),
            (1..=e).prop_map(|a| (1usize, vec![a])),
            Just((2usize, vec![])),
        ];
        (Just(n), prop::collection::vec(fact, 0..10))
    })
}

fn build(sc: &Schema, n: usize, facts: &[(usize, Vec<Elem>)]) -> Structure {
    let mut s = Structure::empty(sc, n);
    for (sym, t) in facts {
        s.insert(*sym, t.clone());
    }
    s
}

fn mixed() -> Schema {
    schema(&[("E", 2), ("U", 1), ("Z", 0)])
}

proptest! {
    #[test]
    fn set_types_are_equal_or_disjoint((n, facts) in random_structure()) {
        let sc = mixed();
        let s = build(&sc, n, &facts);
        for k in 0..=2 {
            let types: Vec<SetType> = s.elements().combinations(k).map(|a| set_type(&sc, &s, &a.into_iter().collect())).collect();
            for (a, b) in types.iter().tuple_combinations() {
                prop_assert!(a == b || a.types().is_disjoint(b.types()));
            }
        }
    }

    #[test]
    fn eval_matches_brute_force((n, facts) in random_structure(), p in 2u32..4, q1 in 0u32..4, q2 in 0u32..4) {
        let sc = mixed();
        let s = build(&sc, n, &facts);
        let (q1, q2) = (q1 % p, q2 % p);
        let e1 = parse_modexpr(&sc, &format!("count [{{E(1,2)}}] mod {p} = {q1}")).unwrap();
        let e2 = parse_modexpr(&sc, &format!("count [{{U(1), E(1,1)}}] mod {p} = {q2}")).unwrap();
        let combo = ModuloExpression::and(e1.clone(), ModuloExpression::not(e2.clone()));
        let brute = |e: &ModuloExpression| {
            let (gamma, p, q) = e.simples()[0];
            let count = s.elements().powerset().filter(|a| &set_type(&sc, &s, &a.iter().copied().collect()) == gamma).count();
            count as u32 % p == q
        };
        prop_assert_eq!(eval_modexpr(&sc, &s, &combo), brute(&e1) && !brute(&e2));
    }

    #[test]
    fn set_normal_form_rebuilds_the_database((n, facts) in random_structure()) {
        let sc = mixed();
        let s = build(&sc, n, &facts);
        let seq = set_normal_form(&sc, &s);
        prop_assert!(satisfies_m1(&seq));
        prop_assert!(satisfies_m2(&sc, &seq));
        let mut rebuilt = Structure::empty(&sc, n);
        for m in &seq {
            prop_assert!(rebuilt.insert(m.sym, m.tuple.clone()));
        }
        prop_assert_eq!(rebuilt, s);
    }

    #[test]
    fn compiled_programs_follow_random_sequences(
        (n, facts) in random_structure(),
        dels in prop::collection::vec(any::<bool>(), 10),
    ) {
        let sc = mixed();
        let x = parse_modexpr(&sc, "count [{E(1,2)}] mod 2 = 1 || (count [{U(1)}] mod 3 = 2 && !count [{Z()}] mod 2 = 1)").unwrap();
        let p = compile_modexpr(&sc, &x).unwrap();
        let seq: Vec<Modification> = facts
            .iter()
            .zip(&dels)
            .map(|((sym, t), &d)| if d { Modification::del(*sym, t.clone()) } else { Modification::ins(*sym, t.clone()) })
            .collect();
        let st = p.run(n, &seq);
        prop_assert_eq!(st.structure.bit(p.query()), eval_modexpr(p.schema(), &st.structure, &x));
    }
}
