use decomp_core::dp::{
    basin_sweep, io, simulate, solve_decomposition, solve_policy, Axis, BasinSlice, DecoupledInputs, LinearFeedback,
    SimOptions, SolveOptions,
};
use decomp_core::lqr::{linearize, solve_discounted_lqr};
use decomp_core::systems::{
    integrator, linear_model, pendulum_model, synthetic_separable, Block, PendulumParams, SystemModel,
};
use decomp_core::InputTree;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Positive root of `p^2 + lambda p - 1 = 0`: the discounted Riccati
/// solution of `x' = u` with unit weights.
fn scalar_riccati(lambda: f64) -> f64 {
    (-lambda + (lambda * lambda + 4.0).sqrt()) / 2.0
}

fn solve_integrator(points: usize) -> decomp_core::dp::PolicyAssembly {
    let model = integrator();
    let grid = model.grid.clone().with_state_points(points);
    solve_decomposition(&model, &InputTree::undecomposed(1, 1), &grid, SolveOptions::default()).unwrap()
}

#[test]
fn scalar_value_close_to_lqr() {
    let p = scalar_riccati(0.1);
    assert!((p * 0.25 - 0.2378).abs() < 1e-4);
    for (points, tol) in [(101, 0.05), (201, 0.01)] {
        let asm = solve_integrator(points);
        let v = asm.value_at(&[0.5]);
        let rel = (v - p * 0.25).abs() / (p * 0.25);
        assert!(rel < tol, "{points} points: V(0.5) = {v}, relative error {rel}");
        assert!(asm.stats[0].converged);
    }
}

#[test]
fn scalar_value_agrees_on_random_interior_points() {
    let p = scalar_riccati(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xs: Vec<f64> = (0..100)
        .map(|_| {
            // Away from the goal, where the value is at least a quarter of
            // its maximum over the box.
            let r: f64 = rng.gen_range(0.5..1.0);
            if rng.gen() { r } else { -r }
        })
        .collect();
    for (points, tol) in [(101, 0.05), (201, 0.01)] {
        let asm = solve_integrator(points);
        let worst = xs
            .iter()
            .map(|&x| (asm.value_at(&[x]) - p * x * x).abs() / (p * x * x))
            .fold(0.0, f64::max);
        assert!(worst < tol, "{points} points: worst relative error {worst}");
    }
}

#[test]
fn value_changes_shrink_after_first_round() {
    let asm = solve_integrator(101);
    let stats = &asm.stats[0];
    assert!(stats.value_changes.len() > 1);
    assert!(stats.monotonicity_violations(1e-9).is_empty(), "{:?}", stats.value_changes);
}

#[test]
fn policies_stay_within_limits() {
    let model = pendulum_model(PendulumParams::default());
    let grid = model.grid.clone().with_state_points(21);
    let asm = solve_decomposition(&model, &InputTree::undecomposed(2, 1), &grid, SolveOptions::default()).unwrap();
    let lim = PendulumParams::default().torque_limit;
    assert!(asm.policies[0].actions.iter().all(|u| u.abs() <= lim));
}

fn separable_pair() -> SystemModel {
    synthetic_separable(&Block::parse_list("2di").unwrap(), 0.0, 1.0)
}

#[test]
fn separable_solve_is_bit_identical_to_block_solves() {
    let model = separable_pair();
    let tree = model.ground_truth.clone().unwrap();
    let joint = solve_decomposition(&model, &tree, &model.grid, SolveOptions::default()).unwrap();

    let block = Block::parse_list("di").unwrap()[0].kind.model();
    let alone = solve_decomposition(&block, &InputTree::undecomposed(2, 1), &block.grid, SolveOptions::default()).unwrap();
    for pol in &joint.policies {
        let other = &alone.policies[0];
        assert_eq!(pol.value.len(), other.value.len());
        assert!(pol.value.iter().zip(&other.value).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(pol.actions.iter().zip(&other.actions).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn separable_tables_match_joint_solve() {
    let model = separable_pair();
    let grid = model.grid.clone().with_state_points(11).with_action_samples(5);
    let tree = model.ground_truth.clone().unwrap();
    let split = solve_decomposition(&model, &tree, &grid, SolveOptions::default()).unwrap();
    let joint = solve_decomposition(&model, &InputTree::undecomposed(4, 2), &grid, SolveOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|i| rng.gen_range(model.state_lower[i]..model.state_upper[i]) * 0.8).collect();
        let (a, b) = (split.value_at(&x), joint.value_at(&x));
        worst = worst.max((a - b).abs() / (1.0 + b.abs()));
    }
    assert!(worst < 0.05, "worst relative gap {worst}");
}

#[test]
fn parameter_count_of_two_decoupled_tables() {
    let model = separable_pair();
    let grid = model.grid.clone().with_state_points(31);
    let tree = model.ground_truth.clone().unwrap();
    assert_eq!(tree.parameter_count(&grid.state_points()), 1922);
    let asm = solve_decomposition(&model, &tree, &grid, SolveOptions::default()).unwrap();
    assert_eq!(asm.parameter_count(), 1922);
}

#[test]
fn children_are_solved_first() {
    let a = DMatrix::from_fn(4, 4, |i, j| if i == j { -1.0 } else { 0.1 * (i + j) as f64 });
    let model = linear_model("four", a, DMatrix::identity(4, 4));
    let grid = model.grid.clone().with_state_points(5).with_action_samples(3);
    let tree: InputTree = "[(u2,u3|x2,x3) -> [(u1|x4), (u4|x1)]]".parse().unwrap();
    let asm = solve_decomposition(&model, &tree, &grid, SolveOptions::default()).unwrap();
    let order: Vec<Vec<usize>> = asm.policies.iter().map(|p| p.inputs.clone()).collect();
    let parent = order.iter().position(|u| u == &vec![1, 2]).unwrap();
    assert_eq!(parent, 2, "{order:?}");
    assert_eq!(asm.policies[parent].states, vec![0, 1, 2, 3]);
    assert_eq!(asm.parameter_count(), 5 + 5 + 2 * 625);
}

#[test]
fn decoupled_input_modes_differ_only_with_nonzero_trim() {
    let model = separable_pair();
    let tree = model.ground_truth.clone().unwrap();
    let grid = model.grid.clone().with_state_points(9).with_action_samples(5);
    let trim = solve_decomposition(&model, &tree, &grid, SolveOptions::default()).unwrap();
    let zero = solve_decomposition(
        &model,
        &tree,
        &grid,
        SolveOptions {
            decoupled: DecoupledInputs::Zero,
        },
    )
    .unwrap();
    // Trim inputs are zero here, so both modes agree.
    assert_eq!(trim.policies, zero.policies);
}

#[test]
fn goal_start_stays_at_goal() {
    let model = pendulum_model(PendulumParams::default());
    let lin = linearize(&model).unwrap();
    let (_, k) = solve_discounted_lqr(&lin.a, &lin.b, &model.q, &model.r, model.discount).unwrap();
    let ctrl = LinearFeedback::new(&model, k);
    let traj = simulate(&model, &ctrl, &model.goal_state, &SimOptions::default()).unwrap();
    assert!(traj.converged);
    assert!(traj.states.iter().all(|x| x == &model.goal_state));
    assert!(traj.inputs.iter().all(|u| u == &model.goal_input));

    let grid = model.grid.clone().with_state_points(21);
    let asm = solve_decomposition(&model, &InputTree::undecomposed(2, 1), &grid, SolveOptions::default()).unwrap();
    let traj = simulate(&model, &asm, &model.goal_state, &SimOptions::default()).unwrap();
    assert!(traj.diverged.is_none());
}

#[test]
fn scalar_lqr_response_is_exponential() {
    let model = integrator();
    let p = scalar_riccati(0.1);
    let ctrl = LinearFeedback::new(&model, DMatrix::from_element(1, 1, p));
    let opts = SimOptions {
        duration: 5.0,
        dt: 0.01,
        ..SimOptions::default()
    };
    let traj = simulate(&model, &ctrl, &[0.5], &opts).unwrap();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        assert!((x[0] - 0.5 * (-p * t).exp()).abs() < 1e-8, "t = {t}");
    }
    assert!(traj.converged);
}

#[test]
fn unstable_gain_diverges() {
    let model = integrator();
    let ctrl = LinearFeedback::new(&model, DMatrix::from_element(1, 1, -1.0));
    let traj = simulate(&model, &ctrl, &[0.5], &SimOptions::default()).unwrap();
    let d = traj.diverged.expect("diverges");
    assert!(d.time > 0.0 && d.time < 10.0);
    assert!(!traj.converged);
}

#[test]
fn lqr_basin_of_stable_linear_system_is_full() {
    let model = synthetic_separable(&Block::parse_list("2int").unwrap(), 0.0, 1.0);
    let lin = linearize(&model).unwrap();
    let (_, k) = solve_discounted_lqr(&lin.a, &lin.b, &model.q, &model.r, model.discount).unwrap();
    let slice = BasinSlice {
        dims: (0, 1),
        axes: (Axis::new(-1.0, 1.0, 11), Axis::new(-1.0, 1.0, 11)),
        base: model.goal_state.clone(),
    };
    let field = basin_sweep(&model, &LinearFeedback::new(&model, k), &slice, &SimOptions::default()).unwrap();
    assert_eq!(field.fraction(), 1.0);
}

#[test]
fn pendulum_basin_is_nontrivial() {
    let model = pendulum_model(PendulumParams::default());
    let grid = model.grid.clone();
    let asm = solve_decomposition(&model, &InputTree::undecomposed(2, 1), &grid, SolveOptions::default()).unwrap();
    let slice = BasinSlice {
        dims: (0, 1),
        axes: (Axis::new(-3.0, 3.0, 13), Axis::new(-8.0, 8.0, 9)),
        base: model.goal_state.clone(),
    };
    let field = basin_sweep(&model, &asm, &slice, &SimOptions::default()).unwrap();
    let frac = field.fraction();
    eprintln!("pendulum basin fraction {frac}");
    assert!(frac > 0.0 && frac < 1.0, "fraction {frac}");
    // The goal sits on the slice at the centre.
    assert!(field.at(6, 4));
}

#[test]
fn policy_file_round_trip() {
    let model = separable_pair();
    let tree = model.ground_truth.clone().unwrap();
    let grid = model.grid.clone().with_state_points(7).with_action_samples(3);
    let asm = solve_decomposition(&model, &tree, &grid, SolveOptions::default()).unwrap();
    let artifact = io::ArtifactHeader {
        tool_version: "test".into(),
        seed: Some(5),
        config_digest: "abc".into(),
    };
    let mut buf = Vec::new();
    io::write_policy(&mut buf, &artifact, &model, &grid, &asm).unwrap();
    assert_eq!(&buf[..8], io::MAGIC);
    let (header, back) = io::read_policy(&mut buf.as_slice()).unwrap();
    assert_eq!(header.artifact, artifact);
    assert_eq!(header.parameter_count, asm.parameter_count());
    assert_eq!(back.policies, asm.policies);
    assert_eq!(back.tree, asm.tree);

    buf[8] = 9;
    assert!(io::read_policy(&mut buf.as_slice()).is_err());
}

#[test]
fn trajectory_csv_columns() {
    let model = integrator();
    let ctrl = LinearFeedback::new(&model, DMatrix::from_element(1, 1, 1.0));
    let opts = SimOptions {
        duration: 0.1,
        dt: 0.05,
        ..SimOptions::default()
    };
    let traj = simulate(&model, &ctrl, &[0.5], &opts).unwrap();
    let mut out = Vec::new();
    io::write_trajectory_csv(&mut out, &io::ArtifactHeader::default(), &model, &traj).unwrap();
    let text = String::from_utf8(out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t,x1,u1");
    assert_eq!(rows.len(), 4);
}

#[test]
fn solve_policy_requires_lower_policies() {
    let model = separable_pair();
    let tree: InputTree = "[(u1|x1,x2) -> [(u2|x3,x4)]]".parse().unwrap();
    let parent = tree.nodes().iter().position(|n| n.parent.is_none()).unwrap();
    assert!(solve_policy(&model, &tree, parent, &model.grid, &[], SolveOptions::default()).is_err());
}
