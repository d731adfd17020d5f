mod common;

use decomp_core::enumeration::sample_uniform;
use decomp_core::input_tree::mutate;
use decomp_core::InputTree;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_tree(n: usize, m: usize, seed: u64) -> InputTree {
    sample_uniform(n, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// The same tree with its nodes stored in a shuffled order.
fn shuffled(tree: &InputTree, seed: u64) -> InputTree {
    let mut order: Vec<usize> = (0..tree.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slot = vec![0; tree.len()];
    for (new, &old) in order.iter().enumerate() {
        slot[old] = new;
    }
    let parts = order
        .iter()
        .map(|&old| {
            let node = &tree.nodes()[old];
            (node.inputs.clone(), node.states.clone(), node.parent.map(|p| slot[p]))
        })
        .collect();
    InputTree::from_parts(tree.n_states(), tree.m_inputs(), parts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sampled_trees_are_valid(n in 1usize..7, m in 2usize..5, seed in any::<u64>()) {
        let t = random_tree(n, m, seed);
        prop_assert!(t.is_valid());
        prop_assert!(!t.is_undecomposed());
    }

    #[test]
    fn notation_round_trips(n in 1usize..7, m in 2usize..5, seed in any::<u64>()) {
        let t = random_tree(n, m, seed);
        let back: InputTree = t.to_string().parse().unwrap();
        prop_assert_eq!(back.key().unwrap(), t.key().unwrap());
    }

    #[test]
    fn key_ignores_node_storage_order(n in 1usize..7, m in 2usize..5, seed in any::<u64>(), perm in any::<u64>()) {
        let t = random_tree(n, m, seed);
        let s = shuffled(&t, perm);
        prop_assert!(s.is_valid());
        prop_assert_eq!(s.key().unwrap().to_bytes(), t.key().unwrap().to_bytes());
        prop_assert_eq!(common::signature(&s.canonical()), common::signature(&t));
    }

    #[test]
    fn subsystem_inputs_partition_the_complement(n in 1usize..7, m in 2usize..5, seed in any::<u64>()) {
        let t = random_tree(n, m, seed);
        for id in 0..t.len() {
            let sub = t.subsystem_of(id).unwrap();
            let mut all: Vec<usize> = sub.inputs.iter().chain(&sub.cascaded).chain(&sub.decoupled).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
            let mut xs: Vec<usize> = sub.states.iter().chain(&sub.fixed_states).copied().collect();
            xs.sort_unstable();
            prop_assert_eq!(xs, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn mutation_preserves_validity(n in 1usize..7, m in 2usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = sample_uniform(n, m, &mut rng).unwrap();
        for _ in 0..20 {
            t = mutate(&t, &mut rng);
            prop_assert!(t.is_valid(), "{}", t);
        }
    }

    #[test]
    fn parameter_count_sums_node_tables(n in 1usize..6, m in 2usize..5, seed in any::<u64>(), pts in 2usize..9) {
        let t = random_tree(n, m, seed);
        let points: Vec<usize> = (0..n).map(|i| pts + i).collect();
        let expect: u128 = (0..t.len())
            .map(|id| {
                let sub = t.subsystem_of(id).unwrap();
                sub.inputs.len() as u128 * sub.states.iter().map(|&x| points[x] as u128).product::<u128>()
            })
            .sum();
        prop_assert_eq!(t.parameter_count(&points), expect);
    }
}
