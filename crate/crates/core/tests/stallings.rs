mod common;

use common::*;
use endocert::stallings::{subgroup_graph, LabeledGraph};
use endocert::words::Word;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gens_strategy() -> impl Strategy<Value = Vec<Vec<i32>>> {
    let letter = (1..=2i32, any::<bool>()).prop_map(|(g, s)| if s { g } else { -g });
    prop::collection::vec(prop::collection::vec(letter, 1..=5), 1..=3)
        .prop_map(|gs| gs.into_iter().map(|g| naive_reduce(&g)).filter(|g| !g.is_empty()).collect())
}

fn graph(gens: &[Vec<i32>]) -> LabeledGraph {
    let ws: Vec<Word> = gens.iter().map(|g| word(g, 2)).collect();
    subgroup_graph(&ws, 2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generators_and_products_are_members(gens in gens_strategy(), picks in prop::collection::vec((0usize..3, any::<bool>()), 0..6)) {
        prop_assume!(!gens.is_empty());
        let g = graph(&gens);
        prop_assert!(g.is_folded());
        let mut w = Vec::new();
        for &(i, inv) in &picks {
            let x = &gens[i % gens.len()];
            w = concat(&[&w, &if inv { inverse(x) } else { x.clone() }]);
        }
        prop_assert!(g.membership(&word(&w, 2)));
    }

    #[test]
    fn folding_is_idempotent_and_rank_is_euler(gens in gens_strategy()) {
        prop_assume!(!gens.is_empty());
        let g = graph(&gens);
        let again = g.fold();
        prop_assert!(again.is_isomorphic_based(&g));
        let rank = g.edge_count() as i64 - g.vertex_count() as i64 + 1;
        prop_assert_eq!(g.rank() as i64, rank);
        prop_assert!(g.rank() <= gens.len());
    }

    #[test]
    fn membership_is_conjugation_invariant_in_the_core(gens in gens_strategy(), c in prop::collection::vec(1..=2i32, 1..4)) {
        prop_assume!(!gens.is_empty());
        let g = graph(&gens);
        // The free-homotopy core recognises every conjugate of a member.
        let conj: Vec<Word> = gens.iter().map(|x| word(&concat(&[&c, x, &inverse(&c)]), 2)).collect();
        let h = subgroup_graph(&conj, 2).unwrap();
        prop_assert_eq!(g.core(false).canonical_code(), h.core(false).canonical_code());
    }
}

#[test]
fn membership_agrees_with_product_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let words = all_words(2, 6);
    for _ in 0..40 {
        let n = rand::Rng::random_range(&mut rng, 1..=2);
        let gens: Vec<Vec<i32>> = (0..n).map(|_| random_reduced(&mut rng, 2, 1, 4)).collect();
        let g = graph(&gens);
        let members = product_closure(&gens, 5, 6);
        for w in &words {
            let m = g.membership(&word(w, 2));
            assert!(!members.contains(w) || m, "{gens:?} {w:?}");
            assert_eq!(m, wedge_membership(&gens, w), "{gens:?} {w:?}");
        }
    }
}

#[test]
fn whole_group_and_trivial_group() {
    let all = subgroup_graph(&[Word::parse("a", 2).unwrap(), Word::parse("b", 2).unwrap()], 2).unwrap();
    assert_eq!(all.vertex_count(), 1);
    assert_eq!(all.rank(), 2);
    let triv = subgroup_graph(&[Word::parse("aA", 2).unwrap()], 2).unwrap();
    assert_eq!(triv.rank(), 0);
    assert!(!triv.membership(&Word::parse("a", 2).unwrap()));
}
