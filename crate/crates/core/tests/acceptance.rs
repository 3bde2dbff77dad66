//! End-to-end acceptance checks. Prints one `[PASS]` or `[FAIL]` line per
//! criterion and fails if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynrel::corpus;
use dynrel::counter::RunSearch;
use dynrel::dsl::{parse_program, parse_sequence, print_program, print_sequence};
use dynrel::dynprog::{
    bfs_nonempty, color_words, explore, normal_form_sequences, satisfies_n1, satisfies_n2, search_nonempty, DynamicProgram,
    SeqMode,
};
use dynrel::emptiness::{emptiness_prop11, erdos_rado_bound, sunflower_find, tuple_sunflower_bound, Verdict};
use dynrel::hi::{check_consistency_bounded, check_hi, Evidence, HiBounds, HiBudget, HiVerdict, ViolationKind};
use dynrel::logic::{Elem, Kind, Schema, Structure, Symbol, Tuple};
use dynrel::modulo::{
    compile_modexpr, equivalence_check_bounded, parse_modexpr, satisfies_m1, satisfies_m2, set_normal_form, Equivalence,
};
use dynrel::transforms::{
    compile_2ca_fo10, compile_2ca_prop12, consistency_to_emptiness_fo, consistency_to_emptiness_qf, emptiness_to_consistency,
    run_to_sequence,
};
use dynrel::wsts::{coverable, forward_bfs, Configuration, CoverBudget, ForwardResult, Tmca, TmcaAction, UpwardSet};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load(text: &str) -> DynamicProgram {
    parse_program(text).unwrap().0
}

/// Example 1 keeps `Q` equal to "U is non-empty" on every sequence.
fn criterion1() -> Outcome {
    let start = Instant::now();
    let p = corpus::load(corpus::EXAMPLE1);
    let u = p.schema().lookup("U").unwrap();
    let mut runs = 0u64;
    let mut bad = None;
    for n in 1..=4 {
        explore(&p, n, 6, SeqMode::All, &mut |seq, s| {
            runs += 1;
            if s.query_nonempty(&p) == s.structure.relation(u).is_empty() {
                bad = Some((n, seq.to_vec()));
                return false;
            }
            true
        });
    }
    if let Some((n, seq)) = bad {
        return Err(format!("disagreement on domain {n}: {}", print_sequence(p.schema(), n, &seq)));
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(60), || format!("took {t:?}"))?;
    Ok(format!("{runs} sequences, {t:.1?}"))
}

fn random_tmca(rng: &mut ChaCha8Rng) -> Tmca {
    let states = rng.gen_range(1..=3);
    let counters = rng.gen_range(1..=2);
    let mut m = Tmca::new(states, counters, 0, rng.gen_range(0..states));
    for _ in 0..rng.gen_range(0..=5) {
        let action = match rng.gen_range(0..3) {
            0 => TmcaAction::Inc(rng.gen_range(0..counters)),
            1 => TmcaAction::Dec(rng.gen_range(0..counters)),
            _ => TmcaAction::Transfer((0..counters).map(|_| rng.gen_range(0..counters)).collect()),
        };
        m.add(rng.gen_range(0..states), action, rng.gen_range(0..states));
    }
    m
}

/// Backward coverability agrees with a capped forward search.
fn criterion2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut conclusive, mut coverable_count) = (0, 0);
    for i in 0..200 {
        let m = random_tmca(&mut rng);
        // Cover a positive counter at the accepting state, so that the
        // target is not trivially the initial configuration.
        let mut v = vec![0; m.num_counters];
        v[0] = rng.gen_range(0..=2);
        let target = UpwardSet::single(m.num_states(), m.accepting, v);
        let init = [Configuration { state: m.initial, counters: vec![0; m.num_counters] }];
        let back = coverable(&m, &init, &target, CoverBudget::default()).map_err(|e| format!("instance {i}: {e}"))?;
        let fwd = forward_bfs(&m, &init, &target, 6, 12);
        if let dynrel::wsts::Coverability::Coverable { start, path } = &back {
            let mut c = start.clone();
            for &t in path {
                c = m.fire(&c, &m.transitions[t]).ok_or_else(|| format!("instance {i}: path does not fire\n{m}"))?;
            }
            check(target.contains(&c), || format!("instance {i}: path misses the target\n{m}"))?;
        }
        match fwd {
            ForwardResult::Inconclusive => continue,
            ForwardResult::Reached(_) => check(back.is_coverable(), || format!("instance {i}: missed\n{m}"))?,
            ForwardResult::Unreachable => check(!back.is_coverable(), || format!("instance {i}: spurious\n{m}"))?,
        }
        conclusive += 1;
        coverable_count += usize::from(back.is_coverable());
    }
    check(conclusive >= 100, || format!("only {conclusive} conclusive instances"))?;
    Ok(format!("{conclusive} conclusive of 200, {coverable_count} coverable"))
}

/// Emptiness of DynProp(1,1) against exhaustive search.
fn criterion3() -> Outcome {
    check(corpus::PROP11.len() == 20, || format!("corpus has {} programs", corpus::PROP11.len()))?;
    let (mut empty, mut nonempty) = (0, 0);
    for (name, text) in corpus::PROP11 {
        let p = corpus::load(text);
        let r = emptiness_prop11(&p, CoverBudget::default());
        let found = search_nonempty(&p, 3, 5);
        match (&r.verdict, &found) {
            (Verdict::NonEmpty(Some(w)), _) => {
                check(w.replays(&p), || format!("{name}: witness does not replay"))?;
                nonempty += 1;
            }
            (Verdict::Empty, None) => empty += 1,
            (v, f) => return Err(format!("{name}: {v:?} against search {f:?}")),
        }
    }
    Ok(format!("{empty} empty, {nonempty} non-empty"))
}

fn random_relation(rng: &mut ChaCha8Rng, ell: usize, size: usize, domain: u32) -> BTreeSet<Tuple> {
    let mut r = BTreeSet::new();
    while r.len() < size {
        r.insert((0..ell).map(|_| rng.gen_range(1..=domain)).collect());
    }
    r
}

/// Relations above the bound always contain a sunflower.
fn criterion4() -> Outcome {
    check(erdos_rado_bound(2, 3) == 8, || format!("N(2,3) = {}", erdos_rado_bound(2, 3)))?;
    check(tuple_sunflower_bound(1, 2) == 2, || format!("N̄(1,2) = {}", tuple_sunflower_bound(1, 2)))?;
    for ell in 1..=3usize {
        for p in 1..=3usize {
            let fact: u128 = (1..=ell as u128).product();
            let n = fact * (p as u128 - 1).pow(ell as u32);
            let nbar = (ell as u128).pow(ell as u32) * (p as u128).pow(ell as u32) * fact * fact;
            check(erdos_rado_bound(ell, p) == n && tuple_sunflower_bound(ell, p) == nbar, || format!("bounds at ({ell},{p})"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..50 {
        let ell = rng.gen_range(1..=3);
        let p = rng.gen_range(1..=3);
        let size = tuple_sunflower_bound(ell, p) as usize + 1;
        let domain = ((size * 2) as f64).powf(1.0 / ell as f64).ceil() as u32 + 2;
        let r = random_relation(&mut rng, ell, size, domain);
        let s = sunflower_find(&r, p).ok_or_else(|| format!("relation {i}: no sunflower (ell={ell}, p={p})"))?;
        check(s.petals.len() == p && s.is_valid() && s.petals.iter().all(|t| r.contains(t)), || {
            format!("relation {i}: invalid sunflower {s:?}")
        })?;
    }
    Ok("50 relations, spot values N(2,3)=8 and N̄(1,2)=2".into())
}

fn schema(syms: &[(&str, usize)]) -> Schema {
    Schema::new(syms.iter().map(|&(n, a)| Symbol::new(n, a, Kind::Input)).collect()).unwrap()
}

/// Compiled modulo expressions agree with direct evaluation.
fn criterion5() -> Outcome {
    let unary = schema(&[("U", 1)]);
    let edges = schema(&[("E", 2)]);
    let mixed = schema(&[("E", 2), ("U", 1), ("Z", 0)]);
    let cases = [
        (&unary, "count [{U(1)}] mod 2 = 0"),
        (&unary, "count [{U(1)}] mod 3 = 1 || count [{U(1)}] mod 2 = 1"),
        (&edges, "count [{E(1,2)}, {E(2,1)}] mod 2 = 1"),
        (&edges, "count [{E(1,1)}] mod 3 = 0 && !count [{E(1,2), E(2,1)}] mod 2 = 1"),
        (&mixed, "count [{E(1,2)}] mod 2 = 1 || (count [{U(1)}] mod 3 = 2 && !count [{Z()}] mod 2 = 1)"),
    ];
    let mut states = 0;
    for (sc, text) in cases {
        let e = parse_modexpr(sc, text).map_err(|e| format!("{text}: {e}"))?;
        let p = compile_modexpr(sc, &e).map_err(|e| format!("{text}: {e}"))?;
        let prof = p.classify();
        check(prof.quantifier_free && prof.max_aux_arity == 0, || format!("{text}: compiled to {prof}"))?;
        match equivalence_check_bounded(&p, sc, &e, 4, 5, SeqMode::InsertionsOnly).map_err(|e| format!("{text}: {e}"))? {
            Equivalence::Agree { states: s } => states += s,
            c => return Err(format!("{text}: {c:?}")),
        }
        if let Some(w) = check_consistency_bounded(&p, 3, 5).witness() {
            return Err(format!("{text}: inconsistent\n{}", w.render(p.schema())));
        }
    }
    Ok(format!("5 expressions, {states} states compared"))
}

/// Reductions between consistency and emptiness on the corpus.
fn criterion6() -> Outcome {
    let mut compared = 0;
    for (name, src) in corpus::all() {
        let sc = src.schema();
        // Cost cap: the reduced programs of binary or multi-symbol inputs
        // are beyond a desk-scale sweep.
        if sc.max_arity(&sc.input_ids()) > 1 || sc.input_ids().len() > 1 {
            continue;
        }
        let inconsistent = check_consistency_bounded(&src, 2, 4).witness().is_some();
        let inconsistent_long = || check_consistency_bounded(&src, 2, 8).witness().is_some();
        let (fo, _) = consistency_to_emptiness_fo(&src);
        let fo_nonempty = bfs_nonempty(&fo, 2, 9).is_some();
        check(!inconsistent || fo_nonempty, || format!("{name}: fo reduction misses the inconsistency"))?;
        check(!fo_nonempty || inconsistent || inconsistent_long(), || format!("{name}: fo reduction is spuriously non-empty"))?;
        if let Ok((qf, _)) = consistency_to_emptiness_qf(&src) {
            let qf_nonempty = bfs_nonempty(&qf, 2, 8).is_some();
            check(!inconsistent || qf_nonempty, || format!("{name}: qf reduction misses the inconsistency"))?;
            check(!qf_nonempty || inconsistent || inconsistent_long(), || format!("{name}: qf reduction is spuriously non-empty"))?;
        }
        compared += 1;
    }
    check(compared >= 10, || format!("only {compared} programs compared"))?;
    let mut mapped = Vec::new();
    for (name, src) in corpus::all() {
        if mapped.len() == 3 {
            break;
        }
        if bfs_nonempty(&src, 2, 3).is_none() {
            continue;
        }
        let (ec, _) = emptiness_to_consistency(&src);
        let w = check_consistency_bounded(&ec, 2, 4);
        let w = w.witness().ok_or_else(|| format!("{name}: no inconsistency in the reduced program"))?;
        check(w.replays(&ec), || format!("{name}: witness does not replay"))?;
        mapped.push(name);
    }
    check(mapped.len() == 3, || format!("only {} non-empty programs", mapped.len()))?;
    Ok(format!("{compared} programs compared, non-empty programs mapped: {}", mapped.join(", ")))
}

/// Counter automata and their compiled programs accept alike.
fn criterion7() -> Outcome {
    check(corpus::CA.len() == 10, || format!("{} automata", corpus::CA.len()))?;
    let mut accepting = 0;
    for (name, text) in corpus::CA {
        let m = corpus::load_ca(text);
        check(m.is_semi_deterministic(), || format!("{name}: not semi-deterministic"))?;
        let run = match m.bounded_accepting_run(6, 4) {
            RunSearch::Found(r) => Some(r),
            RunSearch::NotFound { .. } => None,
        };
        for (kind, p) in [("fo10", compile_2ca_fo10(&m)), ("prop12", compile_2ca_prop12(&m))] {
            let p = p.map_err(|e| format!("{name}/{kind}: {e}"))?;
            if let Some(run) = &run {
                let n = (m.max_counter(run).unwrap() as usize).max(1);
                let seq = run_to_sequence(&m, run, n).map_err(|e| format!("{name}/{kind}: {e}"))?;
                check(p.run(n, &seq).query_nonempty(&p), || format!("{name}/{kind}: translated run rejected"))?;
            }
            let back = bfs_nonempty(&p, 4, 6);
            check(back.is_some() == run.is_some(), || format!("{name}/{kind}: search {back:?} against run {run:?}"))?;
        }
        accepting += usize::from(run.is_some());
    }
    Ok(format!("10 automata, {accepting} with accepting runs of length <= 6"))
}

/// History independence verdicts and bounds.
fn criterion8() -> Outcome {
    let e = corpus::load(corpus::EXAMPLE1);
    let r = check_hi(&e, HiBudget::default());
    let v = r.verdict.violation().ok_or_else(|| format!("Example 1: {:?}", r.verdict))?;
    check(v.kind == ViolationKind::H1 && v.domain == 2 && v.prefix.is_empty(), || format!("{v:?}"))?;
    match &v.evidence {
        Evidence::Orders { left, right, .. } => check(left.len() == 2 && right.len() == 2, || format!("{v:?}"))?,
        ev => return Err(format!("{ev:?}")),
    }
    check(v.replays(&e), || "Example 1 witness does not replay".into())?;

    for (name, text) in [("const_aux", corpus::CONST_AUX), ("copy", corpus::COPY)] {
        let p = corpus::load(text);
        let r = check_hi(&p, HiBudget::default());
        let b = r.bounds.ok_or_else(|| format!("{name}: no bounds"))?;
        check(b.n == (2 * b.k + b.t) * (b.big_l + 1), || format!("{name}: {b:?}"))?;
        match &r.verdict {
            HiVerdict::Hi => {}
            HiVerdict::Unknown(_) => {
                check(r.render(p.schema()).contains(&format!("bound-n: {}", b.n)), || format!("{name}: bound not printed"))?
            }
            HiVerdict::NotHi(v) => return Err(format!("{name}: {v:?}")),
        }
    }
    let small = load("schema { input U/1; aux R/1; }\non insert U(a) { R(x) := R(x) || a = x; }\nquery R;");
    let b = HiBounds::of(&small);
    check((b.m, b.ell, b.q, b.k) == (1, 1, 0, 5), || format!("K spot value: {b:?}"))?;

    let mut replayed = 0;
    for (name, p) in corpus::all() {
        if let Some(v) = check_hi(&p, HiBudget { max_domain: 6, max_states: 20_000 }).verdict.violation() {
            check(v.replays(&p), || format!("{name}: witness does not replay"))?;
            replayed += 1;
        }
    }
    Ok(format!("K=5 at m=1, l=1, q=0; {replayed} violation witnesses replay"))
}

/// Normal-form generators produce sequences in normal form.
fn criterion9() -> Outcome {
    let colored = schema(&[("A", 1), ("B", 1), ("C", 1)]);
    let unary = colored.input_ids();
    let mut n_checked = 0;
    'outer: for n in 1..=4 {
        for targets in color_words(unary.len(), n, false) {
            for seq in normal_form_sequences(&unary, n, &targets, false).map_err(|e| e.to_string())? {
                check(satisfies_n1(&seq) && satisfies_n2(&seq), || print_sequence(&colored, n, &seq))?;
                n_checked += 1;
                if n_checked == 1000 {
                    break 'outer;
                }
            }
        }
    }
    check(n_checked == 1000, || format!("only {n_checked} colored sequences"))?;

    let mixed = schema(&[("E", 2), ("U", 1), ("Z", 0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..1000 {
        let n = rng.gen_range(1..=4usize);
        let mut db = Structure::empty(&mixed, n);
        for _ in 0..rng.gen_range(0..10) {
            let (a, b): (Elem, Elem) = (rng.gen_range(1..=n as Elem), rng.gen_range(1..=n as Elem));
            match rng.gen_range(0..3) {
                0 => db.insert(0, vec![a, b]),
                1 => db.insert(1, vec![a]),
                _ => db.insert(2, vec![]),
            };
        }
        let seq = set_normal_form(&mixed, &db);
        check(satisfies_m1(&seq) && satisfies_m2(&mixed, &seq), || format!("database {i}: {}", print_sequence(&mixed, n, &seq)))?;
        let mut rebuilt = Structure::empty(&mixed, n);
        for m in &seq {
            rebuilt.insert(m.sym, m.tuple.clone());
        }
        check(rebuilt == db, || format!("database {i}: not rebuilt"))?;
    }
    Ok("1000 colored sequences (N1, N2), 1000 set-type sequences (M1, M2)".into())
}

/// Printing and parsing are inverse, and malformed input is located.
fn criterion10() -> Outcome {
    let mut programs = 0;
    for (name, p) in corpus::all() {
        let (q, _) = parse_program(&print_program(&p)).map_err(|d| format!("{name}: {d:?}"))?;
        check(q == p, || format!("{name}: round trip differs"))?;
        let seq = bfs_nonempty(&p, 2, 3).map(|w| w.1).unwrap_or_default();
        let (n, back) = parse_sequence(p.schema(), &print_sequence(p.schema(), 2, &seq)).map_err(|d| format!("{name}: {d:?}"))?;
        check(n == 2 && back == seq, || format!("{name}: sequence round trip differs"))?;
        programs += 1;
    }
    for (name, text) in corpus::CA {
        let m = corpus::load_ca(text);
        let back = dynrel::counter::parse_ca(&m.to_string()).map_err(|d| format!("{name}: {d:?}"))?;
        check(back == m, || format!("{name}: automaton round trip differs"))?;
    }
    for (name, text) in corpus::MALFORMED {
        let ds = parse_program(text).err().ok_or_else(|| format!("{name}: accepted"))?;
        let d = ds.first().ok_or_else(|| format!("{name}: no diagnostic"))?;
        check(d.line >= 1 && d.column >= 1, || format!("{name}: {d}"))?;
    }
    Ok(format!("{programs} programs, {} automata, {} malformed fixtures", corpus::CA.len(), corpus::MALFORMED.len()))
}

fn main() {
    let criteria: [fn() -> Outcome; 10] =
        [criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8, criterion9, criterion10];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        match c() {
            Ok(detail) => println!("[PASS] criterion {}: {detail} ({:.1?})", i + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
