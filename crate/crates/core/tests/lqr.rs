mod common;

use decomp_core::enumeration::enumerate_all;
use decomp_core::lqr::{decomposed_gains, solve_discounted_lqr, FitnessEvaluator};
use decomp_core::systems::{linear_model, synthetic_separable, Block};
use decomp_core::InputTree;
use nalgebra::DMatrix;

#[test]
fn block_tree_gain_equals_joint_gain() {
    for spec in ["2di", "di+int", "3int", "2di+int"] {
        let model = synthetic_separable(&Block::parse_list(spec).unwrap(), 0.0, 1.0);
        let ev = FitnessEvaluator::new(&model).unwrap();
        let tree = model.ground_truth.clone().unwrap();
        let gains = decomposed_gains(&tree, &ev.lin, &ev.q, &ev.r, ev.discount).unwrap();
        let (_, joint) = solve_discounted_lqr(&ev.lin.a, &ev.lin.b, &ev.q, &ev.r, ev.discount).unwrap();
        assert!((&gains.k - &joint).norm() <= 1e-8, "{spec}");
        assert!(ev.value_error(&tree).unwrap() <= 1e-10, "{spec}");
    }
}

#[test]
fn optimal_value_is_symmetric_and_positive() {
    for seed in 0..20 {
        let model = common::random_linear(4, 2, seed);
        let ev = FitnessEvaluator::new(&model).unwrap();
        let p = &ev.optimal.p;
        assert!((p - p.transpose()).norm() <= 1e-10 * p.norm());
        let eig = p.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e >= -1e-8), "{eig}");
    }
}

#[test]
fn value_error_is_zero_only_for_undecomposed_and_never_negative() {
    for seed in 0..5 {
        let model = common::random_linear(3, 3, seed);
        let ev = FitnessEvaluator::new(&model).unwrap();
        assert_eq!(ev.value_error(&InputTree::undecomposed(3, 3)).unwrap(), 0.0);
        for tree in enumerate_all(3, 3, 1000).unwrap() {
            let m = ev.evaluate(&tree).unwrap();
            assert!(m.err_lqr >= 0.0, "{tree}: {}", m.err_lqr);
            assert_eq!(m.f, m.f_err * m.f_comp);
        }
    }
}

#[test]
fn unstabilised_decomposition_scores_infinite_error() {
    // x1 is unstable and only u2 reaches it; decoupling u2 onto x2 leaves
    // x1 uncontrolled.
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let mut model = linear_model("unstable", a, b);
    model.discount = 0.1;
    let ev = FitnessEvaluator::new(&model).unwrap();
    let bad: InputTree = "[(u1|x1), (u2|x2)]".parse().unwrap();
    let m = ev.evaluate(&bad).unwrap();
    assert!(m.err_lqr.is_infinite());
    assert_eq!(m.f_err, 1.0);
    let good: InputTree = "[(u1|x2), (u2|x1)]".parse().unwrap();
    assert!(ev.value_error(&good).unwrap().is_finite());
}
