mod common;

use common::*;
use dqg_core::{parse_causet, Causet, ElementSet, Growth};
use proptest::prelude::*;

/// Random causet on `1..=max` elements from a random upper-triangular relation.
fn arb_causet(max: usize) -> impl Strategy<Value = Causet> {
    (1..=max).prop_flat_map(|n| {
        let slots = n * (n - 1) / 2;
        (Just(n), proptest::collection::vec(proptest::bool::weighted(0.35), slots))
    })
    .prop_map(|(n, bits)| {
        let mut edges = Vec::new();
        let mut k = 0;
        for j in 0..n {
            for i in 0..j {
                if bits[k] {
                    edges.push((i, j));
                }
                k += 1;
            }
        }
        Causet::from_covers(n, &edges).unwrap()
    })
}

fn arb_causet_and_perm(max: usize) -> impl Strategy<Value = (Causet, Vec<usize>)> {
    arb_causet(max).prop_flat_map(|c| {
        let n = c.size();
        (Just(c), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_code_is_relabeling_invariant((c, perm) in arb_causet_and_perm(9)) {
        let relabeled = causet_of(&relabel(&relation_of(&c), &perm));
        prop_assert_eq!(c.canonical_code(), relabeled.canonical_code());
        prop_assert!(c.canonical_form().is_canonically_labeled());
        let form = c.canonical_form();
        prop_assert_eq!(form.canonical_code(), c.canonical_code());
    }

    #[test]
    fn literal_round_trips(c in arb_causet(9)) {
        let back = parse_causet(&c.to_literal()).unwrap();
        prop_assert_eq!(relation_of(&back), relation_of(&c));
    }

    #[test]
    fn offspring_multiplicities_count_antichains(c in arb_causet(7)) {
        let offspring = c.offspring().unwrap();
        let total: u32 = offspring.iter().map(|o| o.multiplicity).sum();
        let antichains = brute_antichain_count(&c);
        prop_assert_eq!(total as usize, antichains);
        prop_assert_eq!(c.offspring_count(), antichains);
        prop_assert!(offspring.len() >= 2);
        prop_assert!(offspring.len() <= antichains);
        prop_assert!(antichains > c.size());
        prop_assert!(antichains <= 1usize << c.size());
    }

    #[test]
    fn producers_match_chain_classes(c in arb_causet(8)) {
        prop_assume!(c.size() >= 2);
        prop_assert_eq!(c.producers().unwrap().len(), c.chain_equivalence_classes().len());
    }

    #[test]
    fn every_offspring_lists_parent_as_producer(c in arb_causet(7)) {
        for o in c.offspring().unwrap() {
            prop_assert!(o.child.producers().unwrap().contains(&c));
        }
    }

    #[test]
    fn extend_adds_one_maximal_element(c in arb_causet(7), mask in any::<u64>()) {
        let antichains = c.antichains();
        let a: ElementSet = antichains[(mask as usize) % antichains.len()];
        let child = c.extend(a).unwrap();
        prop_assert_eq!(child.size(), c.size() + 1);
        prop_assert_eq!(child.remove(c.size()), c.clone());
        prop_assert_eq!(child.below(c.size()).len(),
            (0..c.size()).filter(|&i| a.iter().any(|m| i == m || c.precedes(i, m))).count());
    }
}

#[test]
fn class_counts_match_brute_force() {
    let expected = [1, 2, 5, 16, 63];
    for (k, &e) in expected.iter().enumerate() {
        assert_eq!(brute_force_class_count(k + 1), e);
    }
}

#[test]
fn code_equality_matches_isomorphism_up_to_five() {
    for n in 1..=5 {
        let perms = permutations(n);
        let rels = naturally_labeled_posets(n);
        let keyed: Vec<(Vec<bool>, Causet)> =
            rels.iter().map(|r| (brute_canonical(r, &perms), causet_of(r))).collect();
        for (k1, c1) in &keyed {
            for (k2, c2) in &keyed {
                assert_eq!(k1 == k2, c1.canonical_code() == c2.canonical_code());
            }
        }
        let g = Growth::build(n).unwrap();
        let mut classes: Vec<_> = keyed.iter().map(|(k, _)| k.clone()).collect();
        classes.sort();
        classes.dedup();
        assert_eq!(g.level(n).unwrap().len(), classes.len());
        for (_, c) in &keyed {
            assert!(g.locate(c).is_ok());
        }
    }
}
