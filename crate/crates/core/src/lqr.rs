//! Goal-point linearisation, discounted LQR, the LQR value-error estimate of
//! a decomposition and the fitness used by the search engines.
//!
//! Discounting with rate `lambda` is folded into the spectral shift
//! `A - (lambda/2) I` for both the Riccati and the Lyapunov equations.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::dp::GridSpec;
use crate::error::{Error, Result};
use crate::input_tree::InputTree;
use crate::linalg::{is_hurwitz, solve_care, solve_lyapunov};
use crate::systems::{finite_difference_jacobians, SystemModel, TRIM_TOLERANCE};

/// Relative size, against `tr(P* M)`, below which a value error is treated
/// as solver round-off and reported as exactly zero.
pub const ERR_ROUNDOFF: f64 = 1e-11;

/// `x' ~ A (x - x^d) + B (u - u^d)` around the goal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub goal_state: Vec<f64>,
    pub goal_input: Vec<f64>,
}

impl LinearModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn m_inputs(&self) -> usize {
        self.b.ncols()
    }
}

/// Linearises `model` at its goal pair, preferring analytic Jacobians.
pub fn linearize(model: &SystemModel) -> Result<LinearModel> {
    let residual = model.trim_residual()?;
    if !(residual <= TRIM_TOLERANCE) {
        return Err(Error::NotAnEquilibrium {
            residual,
            tolerance: TRIM_TOLERANCE,
        });
    }
    let (x, u) = (&model.goal_state, &model.goal_input);
    let (a, b) = match model.dynamics.jacobians(x, u) {
        Some(j) => j,
        None => finite_difference_jacobians(model.dynamics.as_ref(), x, u)?,
    };
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Dynamics("non-finite Jacobian at the goal".into()));
    }
    Ok(LinearModel {
        a,
        b,
        goal_state: x.clone(),
        goal_input: u.clone(),
    })
}

/// `V(x) = (x - x^d)^T P (x - x^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticValue {
    pub p: DMatrix<f64>,
}

impl QuadraticValue {
    pub fn value(&self, x: &[f64], goal: &[f64]) -> f64 {
        let d = DVector::from_iterator(x.len(), x.iter().zip(goal).map(|(a, b)| a - b));
        (d.transpose() * &self.p * &d)[(0, 0)]
    }
}

fn shifted(a: &DMatrix<f64>, discount: f64) -> DMatrix<f64> {
    a - DMatrix::identity(a.nrows(), a.ncols()) * (discount / 2.0)
}

/// Discounted infinite-horizon LQR: value matrix `P` and gain
/// `K = R^-1 B^T P`.
pub fn solve_discounted_lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    discount: f64,
) -> Result<(QuadraticValue, DMatrix<f64>)> {
    if !(discount >= 0.0) {
        return Err(Error::Config(format!("discount must be non-negative, got {discount}")));
    }
    let p = solve_care(&shifted(a, discount), b, q, r)?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Dimension("R is singular".into()))?;
    let k = r_inv * b.transpose() * &p;
    Ok((QuadraticValue { p }, k))
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Gain of one tree node over its subsystem states.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGain {
    pub node: usize,
    pub inputs: Vec<usize>,
    pub states: Vec<usize>,
    pub gain: DMatrix<f64>,
}

/// Full feedback gain assembled from the per-node LQR gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainAssembly {
    pub k: DMatrix<f64>,
    pub nodes: Vec<NodeGain>,
    /// Set when some subsystem had no stabilising solution; its rows of `k`
    /// are then zero.
    pub unstable: Option<String>,
}

/// Computes node gains child first. Cascaded gains are substituted into each
/// subsystem (with their control cost added to the state cost), decoupled
/// inputs and complement states sit at the goal.
pub fn decomposed_gains(
    tree: &InputTree,
    lin: &LinearModel,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    discount: f64,
) -> Result<GainAssembly> {
    let (n, m) = (lin.n_states(), lin.m_inputs());
    if tree.n_states() != n || tree.m_inputs() != m {
        return Err(Error::Dimension(format!(
            "tree is for {}x{}, system is {n}x{m}",
            tree.n_states(),
            tree.m_inputs()
        )));
    }
    tree.ensure_valid()?;
    let mut k = DMatrix::zeros(m, n);
    let mut nodes = Vec::with_capacity(tree.len());
    let mut unstable = None;
    for id in tree.child_first_order() {
        let sub = tree.subsystem_of(id)?;
        let xs = &sub.states;
        let own = &sub.inputs;
        let casc = &sub.cascaded;
        let k_c = select(&k, casc, xs);
        let a_r = select(&lin.a, xs, xs) - select(&lin.b, xs, casc) * &k_c;
        let q_r = select(q, xs, xs) + k_c.transpose() * select(r, casc, casc) * &k_c;
        let q_r = (&q_r + q_r.transpose()) * 0.5;
        let b_r = select(&lin.b, xs, own);
        let r_r = select(r, own, own);
        let gain = match solve_discounted_lqr(&a_r, &b_r, &q_r, &r_r, discount) {
            Ok((_, gain)) => gain,
            Err(Error::Unstabilizable(msg)) => {
                unstable.get_or_insert(format!("node {}: {msg}", id));
                DMatrix::zeros(own.len(), xs.len())
            }
            Err(e) => return Err(e),
        };
        for (i, &u) in own.iter().enumerate() {
            for (j, &x) in xs.iter().enumerate() {
                k[(u, x)] = gain[(i, j)];
            }
        }
        nodes.push(NodeGain {
            node: id,
            inputs: own.clone(),
            states: xs.clone(),
            gain,
        });
    }
    Ok(GainAssembly { k, nodes, unstable })
}

/// Second moment about `goal` of the uniform distribution on the box.
pub fn second_moment(lower: &[f64], upper: &[f64], goal: &[f64]) -> DMatrix<f64> {
    let n = lower.len();
    let offset = DVector::from_fn(n, |i, _| (lower[i] + upper[i]) / 2.0 - goal[i]);
    let mut m = &offset * offset.transpose();
    for i in 0..n {
        let w = upper[i] - lower[i];
        m[(i, i)] += w * w / 12.0;
    }
    m
}

/// Value matrix of the closed loop `u - u^d = -K (x - x^d)`, or `None` when
/// the discounted closed loop is not stable.
pub fn closed_loop_value(
    lin: &LinearModel,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    discount: f64,
) -> Option<DMatrix<f64>> {
    let a_cl = shifted(&(&lin.a - &lin.b * k), discount);
    if !is_hurwitz(&a_cl) {
        return None;
    }
    let c = q + k.transpose() * r * k;
    solve_lyapunov(&a_cl, &c).ok()
}

/// Suboptimality and compute-cost scores of one decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionMetrics {
    #[serde(serialize_with = "ser_extended")]
    pub err_lqr: f64,
    pub f_err: f64,
    pub f_comp: f64,
    pub f: f64,
}

/// JSON has no infinity; it is written as the string `"inf"`.
pub(crate) fn ser_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    }
}

impl DecompositionMetrics {
    pub fn new(err_lqr: f64, f_comp: f64) -> Self {
        let f_err = if err_lqr.is_finite() { 1.0 - (-err_lqr).exp() } else { 1.0 };
        DecompositionMetrics {
            err_lqr,
            f_err,
            f_comp,
            f: f_err * f_comp,
        }
    }
}

/// `flops(decomposition) / flops(undecomposed)` under the policy-iteration
/// cost model.
pub fn compute_cost_ratio(tree: &InputTree, grid: &GridSpec) -> Result<f64> {
    let (n, m) = (tree.n_states(), tree.m_inputs());
    grid.validate(n, m)?;
    let node_flops = |states: &[usize], inputs: &[usize]| -> f64 {
        let cells: f64 = states.iter().map(|&x| grid.states[x].count as f64).product();
        let actions: f64 = inputs.iter().map(|&u| grid.inputs[u].count as f64).product();
        let per_cell = grid.flops.eval_cost * grid.eval_iterations as f64 + grid.flops.update_cost * actions;
        grid.policy_iterations as f64 * cells * per_cell * 2f64.powi(states.len() as i32)
    };
    let all_states: Vec<usize> = (0..n).collect();
    let all_inputs: Vec<usize> = (0..m).collect();
    let joint = node_flops(&all_states, &all_inputs);
    let mut total = 0.0;
    for id in 0..tree.len() {
        let sub = tree.subsystem_of(id)?;
        total += node_flops(&sub.states, &sub.inputs);
    }
    Ok(total / joint)
}

/// Reusable fitness evaluation for one model: the linearisation, the optimal
/// value matrix and the box second moment are computed once.
#[derive(Debug, Clone)]
pub struct FitnessEvaluator {
    pub lin: LinearModel,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub discount: f64,
    pub grid: GridSpec,
    pub optimal: QuadraticValue,
    pub moment: DMatrix<f64>,
    optimal_trace: f64,
}

impl FitnessEvaluator {
    pub fn new(model: &SystemModel) -> Result<Self> {
        Self::with_grid(model, model.grid.clone())
    }

    pub fn with_grid(model: &SystemModel, grid: GridSpec) -> Result<Self> {
        let lin = linearize(model)?;
        let moment = second_moment(&model.state_lower, &model.state_upper, &model.goal_state);
        Self::from_parts(lin, model.q.clone(), model.r.clone(), model.discount, moment, grid)
    }

    pub fn from_parts(
        lin: LinearModel,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        discount: f64,
        moment: DMatrix<f64>,
        grid: GridSpec,
    ) -> Result<Self> {
        let (optimal, _) = solve_discounted_lqr(&lin.a, &lin.b, &q, &r, discount)?;
        let optimal_trace = (&optimal.p * &moment).trace();
        Ok(FitnessEvaluator {
            lin,
            q,
            r,
            discount,
            grid,
            optimal,
            moment,
            optimal_trace,
        })
    }

    pub fn n_states(&self) -> usize {
        self.lin.n_states()
    }

    pub fn m_inputs(&self) -> usize {
        self.lin.m_inputs()
    }

    /// `err_lqr = tr((P_delta - P*) M)`, `+inf` when the decomposition does
    /// not stabilise the linearisation.
    pub fn value_error(&self, tree: &InputTree) -> Result<f64> {
        if tree.is_undecomposed() {
            tree.ensure_valid()?;
            return Ok(0.0);
        }
        let gains = decomposed_gains(tree, &self.lin, &self.q, &self.r, self.discount)?;
        if gains.unstable.is_some() {
            return Ok(f64::INFINITY);
        }
        let Some(p) = closed_loop_value(&self.lin, &gains.k, &self.q, &self.r, self.discount) else {
            return Ok(f64::INFINITY);
        };
        let err = ((&p - &self.optimal.p) * &self.moment).trace();
        if !err.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(if err <= ERR_ROUNDOFF * self.optimal_trace.abs() { 0.0 } else { err })
    }

    pub fn evaluate(&self, tree: &InputTree) -> Result<DecompositionMetrics> {
        let err = self.value_error(tree)?;
        let f_comp = compute_cost_ratio(tree, &self.grid)?;
        Ok(DecompositionMetrics::new(err, f_comp))
    }
}

/// Value error of `tree` on the linearisation with the uniform box `[lower, upper]`.
pub fn value_error_estimate(
    tree: &InputTree,
    lin: &LinearModel,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    discount: f64,
    lower: &[f64],
    upper: &[f64],
) -> Result<f64> {
    let moment = second_moment(lower, upper, &lin.goal_state);
    let grid = trivial_grid(lin.n_states(), lin.m_inputs());
    FitnessEvaluator::from_parts(lin.clone(), q.clone(), r.clone(), discount, moment, grid)?.value_error(tree)
}

fn trivial_grid(n: usize, m: usize) -> GridSpec {
    use crate::dp::{Axis, CostRule, FlopModel};
    GridSpec {
        states: vec![Axis::new(-1.0, 1.0, 2); n],
        inputs: vec![Axis::new(-1.0, 1.0, 2); m],
        time_step: 1.0,
        policy_iterations: 1,
        eval_iterations: 1,
        tolerance: 0.0,
        cost_rule: CostRule::default(),
        flops: FlopModel::default(),
    }
}

/// Full metrics of `tree` on `model` with `grid` for the compute-cost part.
pub fn fitness(tree: &InputTree, model: &SystemModel, grid: &GridSpec) -> Result<DecompositionMetrics> {
    FitnessEvaluator::with_grid(model, grid.clone())?.evaluate(tree)
}
