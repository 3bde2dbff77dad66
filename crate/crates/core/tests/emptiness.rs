use std::collections::BTreeSet;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynrel::corpus;
use dynrel::dynprog::search_nonempty;
use dynrel::emptiness::*;
use dynrel::logic::{equality_pattern, Tuple};
use dynrel::wsts::CoverBudget;

#[test]
fn prop11_corpus_agrees_with_search() {
    for (name, text) in corpus::PROP11 {
        let p = corpus::load(text);
        let r = emptiness_prop11(&p, CoverBudget::default());
        let found = search_nonempty(&p, 3, 5);
        match (&r.verdict, &found) {
            (Verdict::Empty, None) => {}
            (Verdict::NonEmpty(Some(w)), Some(_)) => assert!(w.replays(&p), "{name}"),
            other => panic!("{name}: {other:?}"),
        }
    }
}

#[test]
fn fo11_corpus_agrees_with_search() {
    for (name, text) in corpus::CONSISTENT {
        let p = corpus::load(text);
        let r = emptiness_consistent_fo11(&p, true, 100_000);
        let found = search_nonempty(&p, 3, 4);
        match (&r.verdict, &found) {
            (Verdict::Empty, None) => {}
            (Verdict::NonEmpty(Some(w)), Some(_)) => assert!(w.replays(&p), "{name}"),
            other => panic!("{name}: {other:?}"),
        }
    }
}

#[test]
fn prop_in1_witnesses_replay() {
    let mut checked = 0;
    for (name, p) in corpus::all() {
        let prof = p.classify();
        if !prof.quantifier_free || prof.max_input_arity > 1 || name.contains("unguarded") {
            continue;
        }
        let r = emptiness_consistent_prop_in1(&p, true, 1_000_000);
        if r.verdict.is_unknown() {
            continue;
        }
        // Consistent programs reach every database by insertions, so a
        // short witness means non-emptiness. For inconsistent corpus
        // programs only the witness direction is checked.
        if let Some(w) = r.verdict.witness() {
            assert!(w.replays(&p), "{name}");
        }
        if r.verdict.is_nonempty() {
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn prop_aux1_bounds_are_tuple_sunflower_bounds() {
    let p = corpus::load(corpus::EDGES_BIT);
    let b = prop_aux1_bounds(&p);
    assert_eq!(b.len(), 1);
    let m = dynrel::logic::count_atomic_types(p.schema(), &p.schema().all_ids(), 2);
    let petals = (m * m + 1) as usize;
    assert_eq!(*b.values().next().unwrap(), tuple_sunflower_bound(2, petals));
}

fn random_relation(rng: &mut ChaCha8Rng, ell: usize, size: usize, domain: u32) -> BTreeSet<Tuple> {
    let mut r = BTreeSet::new();
    while r.len() < size {
        r.insert((0..ell).map(|_| rng.gen_range(1..=domain)).collect());
    }
    r
}

fn brute_force(r: &BTreeSet<Tuple>, p: usize) -> bool {
    r.iter().combinations(p).any(|c| {
        let ell = c[0].len();
        if c.iter().any(|t| equality_pattern(t) != equality_pattern(c[0])) {
            return false;
        }
        let core: Vec<usize> = (0..ell).filter(|&j| c.iter().all(|t| t[j] == c[0][j])).collect();
        let off: Vec<BTreeSet<u32>> =
            c.iter().map(|t| (0..ell).filter(|j| !core.contains(j)).map(|j| t[j]).collect()).collect();
        off.iter().tuple_combinations().all(|(a, b)| a.is_disjoint(b))
    })
}

#[test]
fn sunflower_above_bound_always_found() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for ell in 1..=3 {
        for p in 1..=3 {
            let size = tuple_sunflower_bound(ell, p) as usize + 1;
            let domain = ((size * 2) as f64).powf(1.0 / ell as f64).ceil() as u32 + 2;
            for _ in 0..2 {
                let r = random_relation(&mut rng, ell, size, domain);
                let s = sunflower_find(&r, p).expect("sunflower above the bound");
                assert_eq!(s.petals.len(), p);
                assert!(s.is_valid());
                assert!(s.petals.iter().all(|t| r.contains(t)));
            }
        }
    }
}

#[test]
fn sunflower_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let size = tuple_sunflower_bound(2, 3) as usize + 1;
    let r = random_relation(&mut rng, 2, size, 14);
    assert!(brute_force(&r, 3));
    assert!(sunflower_find(&r, 3).unwrap().is_valid());
    for _ in 0..40 {
        let size = rng.gen_range(2..8);
        let r = random_relation(&mut rng, 2, size, 4);
        let p = rng.gen_range(2..=3);
        let found = sunflower_find(&r, p);
        assert_eq!(found.is_some(), brute_force(&r, p), "{r:?} p={p}");
        if let Some(s) = found {
            assert!(s.is_valid());
        }
    }
}
