mod common;

use decomp_core::lqr::FitnessEvaluator;
use decomp_core::search::{
    dominates, leaf_splits, run_ga, run_mcts, run_pareto, run_random, uct_minimizers, Budget, MctsSearch, MemoTable,
    SearchConfig, SearchContext,
};
use decomp_core::systems::{synthetic_separable, toy_2x2, Block};
use decomp_core::InputTree;
use proptest::prelude::*;

fn config(seed: u64, budget: Budget) -> SearchConfig {
    SearchConfig {
        seed,
        budget,
        deterministic: true,
        ..SearchConfig::default()
    }
}

#[test]
fn root_of_two_by_two_has_eight_children() {
    let kids = leaf_splits(&InputTree::undecomposed(2, 2));
    assert_eq!(kids.len(), 8);
    let mut keys: Vec<_> = kids.iter().map(|t| t.key().unwrap().to_bytes()).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 8);
    assert!(kids.iter().all(|t| t.is_valid()));
}

#[test]
fn single_state_node_splits_only_into_cascades() {
    let kids = leaf_splits(&InputTree::undecomposed(1, 2));
    assert_eq!(kids.len(), 2);
    assert!(kids.iter().all(|t| t.nodes().iter().any(|n| n.parent.is_some())));
}

#[test]
fn terminal_trees_have_no_splits() {
    let t: InputTree = "[(u1|x1), (u2|x2)]".parse().unwrap();
    assert!(leaf_splits(&t).is_empty());
}

#[test]
fn exhausted_mcts_reaches_exhaustive_minimum() {
    let model = toy_2x2();
    let ev = FitnessEvaluator::new(&model).unwrap();
    let (best_tree, best, count) = common::exhaustive_best(&ev);
    assert_eq!(count, 8);
    let memo = MemoTable::new();
    let ctx = SearchContext::new(&model.name, &ev, &memo);
    let mut cfg = config(1, Budget::steps(10_000));
    cfg.check_invariants = true;
    let report = run_mcts(&ctx, &cfg).unwrap();
    let stats = report.mcts.clone().unwrap();
    assert!(stats.exhausted);
    assert_eq!(stats.root_q, best.f);
    assert_eq!(report.best.tree, best_tree.to_string());
    assert_eq!(report.unique, 8);
    assert_eq!(stats.invariant_violations, 0);
    assert!(stats.invariant_checks > 0);
}

#[test]
fn mcts_backup_holds_after_every_rollout() {
    let model = synthetic_separable(&Block::parse_list("di+2int").unwrap(), 0.2, 1.0);
    let ev = FitnessEvaluator::new(&model).unwrap();
    let memo = MemoTable::new();
    let ctx = SearchContext::new(&model.name, &ev, &memo);
    let mut search = MctsSearch::new(&ctx, &config(4, Budget::steps(1))).unwrap();
    for _ in 0..300 {
        if search.is_exhausted() {
            break;
        }
        let path = search.rollout().unwrap();
        for &id in &path {
            assert!(search.backup_holds(id));
        }
        // Root-to-leaf path never passes through an exhausted node below the root
        // except possibly the node that just became exhausted.
        for &id in &path[1..path.len() - 1] {
            let node = &search.nodes()[id];
            assert!(node.visits >= 2);
        }
    }
    assert_eq!(search.stats.exhausted_reselections, 0);
}

#[test]
fn ga_finds_global_minimum_on_toy() {
    let model = toy_2x2();
    let ev = FitnessEvaluator::new(&model).unwrap();
    let (best_tree, _, _) = common::exhaustive_best(&ev);
    for seed in 0..3 {
        let memo = MemoTable::new();
        let ctx = SearchContext::new(&model.name, &ev, &memo);
        let report = run_ga(&ctx, &config(seed, Budget::steps(20))).unwrap();
        assert_eq!(report.best.tree, best_tree.to_string(), "seed {seed}");
    }
}

#[test]
fn ga_is_reproducible() {
    let model = synthetic_separable(&Block::parse_list("di+2int").unwrap(), 0.2, 1.0);
    let ev = FitnessEvaluator::new(&model).unwrap();
    let run = || {
        let memo = MemoTable::new();
        let ctx = SearchContext::new(&model.name, &ev, &memo);
        serde_json::to_string(&run_ga(&ctx, &config(9, Budget::seconds(1.0))).unwrap()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn ga_zero_budget_returns_initial_best() {
    let model = toy_2x2();
    let ev = FitnessEvaluator::new(&model).unwrap();
    let memo = MemoTable::new();
    let ctx = SearchContext::new(&model.name, &ev, &memo);
    let report = run_ga(&ctx, &config(2, Budget::steps(0))).unwrap();
    assert_eq!(report.steps, 0);
    assert!(report.unique <= 8);
}

#[test]
fn ga_recovers_separable_block_tree() {
    let model = synthetic_separable(&Block::parse_list("3di").unwrap(), 0.0, 1.0);
    let ev = FitnessEvaluator::new(&model).unwrap();
    let memo = MemoTable::new();
    let ctx = SearchContext::new(&model.name, &ev, &memo);
    let report = run_ga(&ctx, &config(5, Budget::steps(100))).unwrap();
    assert!(report.best.metrics.err_lqr <= 1e-10);
    let truth = model.ground_truth.clone().unwrap();
    let truth_comp = ev.evaluate(&truth).unwrap().f_comp;
    assert_eq!(report.best.tree, truth.to_string());
    assert_eq!(report.best.metrics.f_comp, truth_comp);
}

#[test]
fn random_search_counts_and_reproduces() {
    let model = toy_2x2();
    let ev = FitnessEvaluator::new(&model).unwrap();
    let (best_tree, _, _) = common::exhaustive_best(&ev);
    let run = || {
        let memo = MemoTable::new();
        let ctx = SearchContext::new(&model.name, &ev, &memo);
        run_random(&ctx, &config(3, Budget::steps(10_000))).unwrap()
    };
    let a = run();
    assert!(a.unique as u64 <= a.steps);
    assert_eq!(a.best.tree, best_tree.to_string());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run()).unwrap());
}

#[test]
fn pareto_front_is_non_dominated_and_keeps_undecomposed() {
    let model = toy_2x2();
    let ev = FitnessEvaluator::new(&model).unwrap();
    let memo = MemoTable::new();
    let ctx = SearchContext::new(&model.name, &ev, &memo);
    let mut cfg = config(6, Budget::steps(10));
    cfg.population = 20;
    let front = run_pareto(&ctx, &cfg).unwrap();
    let undecomposed = InputTree::undecomposed(2, 2).to_string();
    assert!(front.members.iter().any(|m| m.tree == undecomposed));
    for a in &front.members {
        for b in &front.members {
            assert!(!dominates((a.f_err, a.f_comp), (b.f_err, b.f_comp)));
        }
    }
    assert!(front.members.windows(2).all(|w| w[0].f_err <= w[1].f_err));
}

#[test]
fn pareto_on_separable_system_prefers_block_tree() {
    let model = synthetic_separable(&Block::parse_list("2di").unwrap(), 0.0, 1.0);
    let ev = FitnessEvaluator::new(&model).unwrap();
    let memo = MemoTable::new();
    let ctx = SearchContext::new(&model.name, &ev, &memo);
    let mut cfg = config(8, Budget::steps(30));
    cfg.population = 30;
    let front = run_pareto(&ctx, &cfg).unwrap();
    let first = &front.members[0];
    assert_eq!(first.f_err, 0.0);
    assert!(first.f_comp < 1.0);
    assert_eq!(first.tree, model.ground_truth.clone().unwrap().to_string());
    let undecomposed = InputTree::undecomposed(4, 2).to_string();
    assert!(front.members.iter().all(|m| m.tree != undecomposed));
}

#[test]
fn memo_second_request_does_not_evaluate() {
    let model = toy_2x2();
    let ev = FitnessEvaluator::new(&model).unwrap();
    let memo = MemoTable::new();
    let tree: InputTree = "[(u1|x1), (u2|x2)]".parse().unwrap();
    let a = memo.evaluate(&ev, &tree).unwrap();
    let b = memo.evaluate(&ev, &tree).unwrap();
    assert_eq!((memo.hits(), memo.misses()), (1, 1));
    assert_eq!(a.f.to_bits(), b.f.to_bits());
}

proptest! {
    #[test]
    fn uct_argmin_invariant_under_common_shift(
        qs in prop::collection::vec(-50i32..50, 2..10),
        visits in 1u64..100,
        parent in 1u64..1000,
        shift in -100i32..100,
    ) {
        let base: Vec<(f64, u64)> = qs.iter().map(|&q| (q as f64, visits)).collect();
        let moved: Vec<(f64, u64)> = qs.iter().map(|&q| ((q + shift) as f64, visits)).collect();
        prop_assert_eq!(uct_minimizers(&base, parent), uct_minimizers(&moved, parent));
    }
}
