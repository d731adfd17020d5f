use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interp::{Lattice, Stencil};
use super::{CostRule, GridSpec};
use crate::error::{Error, Result};
use crate::input_tree::InputTree;
use crate::systems::{quad_form_on, SystemModel};

/// Value given to decoupled complement inputs while solving a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoupledInputs {
    /// Hold them at the trim input `u^d`.
    #[default]
    Trim,
    /// Hold them at literal zero.
    Zero,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    pub decoupled: DecoupledInputs,
}

/// Lookup-table policy for the inputs of one tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub node: usize,
    /// Subsystem states, ascending; one lattice axis each.
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    pub lattice: Lattice,
    /// Value per cell.
    pub value: Vec<f64>,
    /// `inputs.len()` values per cell, cell-major.
    pub actions: Vec<f64>,
}

impl TabularPolicy {
    pub fn cells(&self) -> usize {
        self.lattice.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.actions.len()
    }

    fn project(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.states.iter().map(|&s| x[s]));
    }

    /// Interpolated value at a full state vector.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let mut p = Vec::with_capacity(self.states.len());
        self.project(x, &mut p);
        self.lattice.interpolate(&self.value, &p)
    }

    /// Writes this node's inputs into the full input vector `u`.
    pub fn control_into(&self, x: &[f64], u: &mut [f64]) {
        let mut p = Vec::with_capacity(self.states.len());
        let mut s = Stencil::default();
        self.project(x, &mut p);
        self.lattice.stencil(&p, &mut s);
        let k = self.inputs.len();
        for (j, &i) in self.inputs.iter().enumerate() {
            u[i] = Lattice::apply_strided(&s, &self.actions, k, j);
        }
    }
}

/// Convergence record of one policy-iteration run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub node: usize,
    pub rounds: usize,
    pub converged: bool,
    /// Max-norm value change per round.
    pub value_changes: Vec<f64>,
    /// Largest action change per improvement sweep.
    pub policy_changes: Vec<f64>,
    pub seconds: f64,
}

impl SolveStats {
    /// Rounds after the first where the value change grew by more than `slack`
    /// (relative to the previous change).
    pub fn monotonicity_violations(&self, slack: f64) -> Vec<usize> {
        self.value_changes
            .windows(2)
            .enumerate()
            .skip(1)
            .filter(|(_, w)| w[1] > w[0] + slack * (1.0 + w[0]))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Everything fixed while solving one node.
struct NodeProblem<'a> {
    model: &'a SystemModel,
    lower: Vec<&'a TabularPolicy>,
    lattice: Lattice,
    states: Vec<usize>,
    inputs: Vec<usize>,
    /// Cost is charged on these inputs: own plus cascaded, ascending.
    cost_inputs: Vec<usize>,
    /// One lattice of samples per own input.
    samples: Vec<Vec<f64>>,
    n_actions: usize,
    base_state: Vec<f64>,
    base_input: Vec<f64>,
    h: f64,
    gamma: f64,
    rule: CostRule,
}

/// Scratch buffers reused across cells by one worker.
#[derive(Default)]
struct Scratch {
    x: Vec<f64>,
    u: Vec<f64>,
    dx: Vec<f64>,
    foot: Vec<f64>,
    p: Vec<f64>,
    stencil: Stencil,
}

/// Stage cost and foot-point stencil of one (cell, action) pair.
struct Backup {
    stage: f64,
    stencil: Stencil,
}

impl NodeProblem<'_> {
    fn action_values(&self, mut a: usize, out: &mut [f64]) {
        for d in (0..self.samples.len()).rev() {
            let k = self.samples[d].len();
            out[d] = self.samples[d][a % k];
            a /= k;
        }
    }

    /// Sets up `s.x` and `s.u` for `cell` with all non-own inputs filled in.
    fn load_cell(&self, cell: usize, s: &mut Scratch) {
        s.x.clone_from(&self.base_state);
        s.u.clone_from(&self.base_input);
        s.p.resize(self.states.len(), 0.0);
        self.lattice.point(cell, &mut s.p);
        for (k, &i) in self.states.iter().enumerate() {
            s.x[i] = s.p[k];
        }
        for pol in &self.lower {
            pol.control_into(&s.x, &mut s.u);
        }
        self.model.saturate(&mut s.u);
    }

    /// Stage cost of `action` at the loaded cell; leaves the foot-point
    /// stencil in `s.stencil`.
    fn backup(&self, mut action: usize, s: &mut Scratch) -> Result<f64> {
        for d in (0..self.samples.len()).rev() {
            let k = self.samples[d].len();
            s.u[self.inputs[d]] = self.samples[d][action % k];
            action /= k;
        }
        s.dx.resize(s.x.len(), 0.0);
        self.model.dynamics.eval(&s.x, &s.u, &mut s.dx)?;
        if s.dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dynamics(format!(
                "{}: non-finite dynamics at x = {:?}, u = {:?}",
                self.model.name, s.x, s.u
            )));
        }
        s.foot.clear();
        s.foot.extend(s.x.iter().zip(&s.dx).map(|(x, d)| x + self.h * d));
        let c_u = quad_form_on(&self.model.r, &s.u, &self.model.goal_input, &self.cost_inputs);
        let c_now = quad_form_on(&self.model.q, &s.x, &self.model.goal_state, &self.states) + c_u;
        let stage = match self.rule {
            CostRule::Rectangle => c_now * self.h,
            CostRule::Trapezoid => {
                let c_next = quad_form_on(&self.model.q, &s.foot, &self.model.goal_state, &self.states) + c_u;
                (c_now + self.gamma * c_next) * self.h / 2.0
            }
        };
        for (k, &i) in self.states.iter().enumerate() {
            s.p[k] = s.foot[i];
        }
        self.lattice.stencil(&s.p, &mut s.stencil);
        Ok(stage)
    }

    fn initial_action(&self) -> usize {
        // Nearest samples to the trim input.
        let mut a = 0;
        for (d, &i) in self.inputs.iter().enumerate() {
            let target = self.model.goal_input[i];
            let best = self.samples[d]
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - target).abs().total_cmp(&(y.1 - target).abs()))
                .map(|(k, _)| k)
                .unwrap_or(0);
            a = a * self.samples[d].len() + best;
        }
        a
    }
}

/// Solves the subsystem of `node` by policy iteration. `lower` must hold the
/// solved policies of every node strictly below `node`.
pub fn solve_policy(
    model: &SystemModel,
    tree: &InputTree,
    node: usize,
    grid: &GridSpec,
    lower: &[TabularPolicy],
    options: SolveOptions,
) -> Result<(TabularPolicy, SolveStats)> {
    let started = Instant::now();
    let (n, m) = (model.n_states(), model.m_inputs());
    if tree.n_states() != n || tree.m_inputs() != m {
        return Err(Error::Dimension(format!(
            "tree is for {} states and {} inputs, model {} has {n} and {m}",
            tree.n_states(),
            tree.m_inputs(),
            model.name
        )));
    }
    grid.validate(n, m)?;
    let sub = tree.subsystem_of(node)?;
    for &x in &sub.states {
        let a = grid.states[x];
        if !(a.lower <= model.goal_state[x] && model.goal_state[x] <= a.upper) {
            return Err(Error::Grid(format!(
                "goal {} = {} lies outside the grid [{}, {}]",
                model.state_name(x),
                model.goal_state[x],
                a.lower,
                a.upper
            )));
        }
    }
    let mut lower_refs = Vec::new();
    for &u in &sub.cascaded {
        let pol = lower
            .iter()
            .find(|p| p.inputs.contains(&u))
            .ok_or_else(|| Error::Config(format!("no lower policy for cascaded input u{}", u + 1)))?;
        if !lower_refs.iter().any(|p: &&TabularPolicy| std::ptr::eq(*p, pol)) {
            lower_refs.push(pol);
        }
    }

    let mut base_input = model.goal_input.clone();
    if options.decoupled == DecoupledInputs::Zero {
        for &u in &sub.decoupled {
            base_input[u] = 0.0;
        }
    }
    let samples: Vec<Vec<f64>> = sub
        .inputs
        .iter()
        .map(|&u| {
            grid.inputs[u]
                .points()
                .into_iter()
                .map(|v| v.clamp(model.input_lower[u], model.input_upper[u]))
                .collect()
        })
        .collect();
    let mut cost_inputs: Vec<usize> = sub.inputs.iter().chain(&sub.cascaded).copied().collect();
    cost_inputs.sort_unstable();
    let problem = NodeProblem {
        model,
        lower: lower_refs,
        lattice: Lattice::new(sub.states.iter().map(|&x| grid.states[x]).collect()),
        states: sub.states.clone(),
        inputs: sub.inputs.clone(),
        cost_inputs,
        n_actions: samples.iter().map(Vec::len).product(),
        samples,
        base_state: model.goal_state.clone(),
        base_input,
        h: grid.time_step,
        gamma: (-model.discount * grid.time_step).exp(),
        rule: grid.cost_rule,
    };
    let cells = problem.lattice.len();

    let mut policy = vec![problem.initial_action(); cells];
    let mut value = vec![0.0; cells];
    let mut stats = SolveStats {
        node,
        ..SolveStats::default()
    };

    for round in 0..grid.policy_iterations {
        // Evaluation: freeze stage costs and stencils of the current policy.
        let backups: Vec<Backup> = (0..cells)
            .into_par_iter()
            .map_init(Scratch::default, |s, c| {
                problem.load_cell(c, s);
                let stage = problem.backup(policy[c], s)?;
                Ok(Backup {
                    stage,
                    stencil: s.stencil.clone(),
                })
            })
            .collect::<Result<_>>()?;
        let before = value.clone();
        let mut eval_converged = false;
        for _ in 0..grid.eval_iterations {
            let next: Vec<f64> = backups
                .par_iter()
                .map(|b| b.stage + problem.gamma * Lattice::apply(&b.stencil, &value))
                .collect();
            let delta = max_abs_diff(&next, &value);
            let scale = next.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            value = next;
            if delta <= 1e-12 * scale {
                eval_converged = true;
                break;
            }
        }
        stats.value_changes.push(max_abs_diff(&value, &before));

        // Improvement: keep the current action unless another is strictly better.
        let improved: Vec<(usize, f64)> = (0..cells)
            .into_par_iter()
            .map_init(Scratch::default, |s, c| -> Result<(usize, f64)> {
                problem.load_cell(c, s);
                let score = |s: &mut Scratch, a: usize| -> Result<f64> {
                    let stage = problem.backup(a, s)?;
                    Ok(stage + problem.gamma * Lattice::apply(&s.stencil, &value))
                };
                let current = policy[c];
                let mut best = (current, score(s, current)?);
                for a in 0..problem.n_actions {
                    if a == current {
                        continue;
                    }
                    let q = score(s, a)?;
                    if q < best.1 - 1e-12 * (1.0 + best.1.abs()) {
                        best = (a, q);
                    }
                }
                let mut old = vec![0.0; problem.inputs.len()];
                let mut new = vec![0.0; problem.inputs.len()];
                problem.action_values(current, &mut old);
                problem.action_values(best.0, &mut new);
                Ok((best.0, max_abs_diff(&old, &new)))
            })
            .collect::<Result<_>>()?;
        let change = improved.iter().fold(0.0f64, |a, &(_, d)| a.max(d));
        for (p, (a, _)) in policy.iter_mut().zip(&improved) {
            *p = *a;
        }
        stats.policy_changes.push(change);
        stats.rounds = round + 1;
        if change <= grid.tolerance && eval_converged {
            stats.converged = true;
            break;
        }
    }

    let k = problem.inputs.len();
    let mut actions = vec![0.0; cells * k];
    for (c, &a) in policy.iter().enumerate() {
        problem.action_values(a, &mut actions[c * k..(c + 1) * k]);
    }
    stats.seconds = started.elapsed().as_secs_f64();
    Ok((
        TabularPolicy {
            node,
            states: problem.states,
            inputs: problem.inputs,
            lattice: problem.lattice,
            value,
            actions,
        },
        stats,
    ))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Sub-policies of a whole tree reassembled into one full-state controller.
#[derive(Debug, Clone)]
pub struct PolicyAssembly {
    pub tree: InputTree,
    /// Child-first solve order.
    pub policies: Vec<TabularPolicy>,
    pub stats: Vec<SolveStats>,
    pub goal_input: Vec<f64>,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
}

impl PolicyAssembly {
    pub fn parameter_count(&self) -> u128 {
        self.policies.iter().map(|p| p.parameter_count() as u128).sum()
    }

    pub fn solve_order(&self) -> Vec<usize> {
        self.policies.iter().map(|p| p.node).collect()
    }

    pub fn total_seconds(&self) -> f64 {
        self.stats.iter().map(|s| s.seconds).sum()
    }

    /// All `m` inputs at full state `x`, saturated.
    pub fn control(&self, x: &[f64], u: &mut [f64]) {
        u.copy_from_slice(&self.goal_input);
        for p in &self.policies {
            p.control_into(x, u);
        }
        for (i, v) in u.iter_mut().enumerate() {
            *v = v.clamp(self.input_lower[i], self.input_upper[i]);
        }
    }

    /// Value estimate of the root-level nodes summed, meaningful when the
    /// tree is undecomposed or exactly separable.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.policies
            .iter()
            .filter(|p| self.tree.nodes()[p.node].parent.is_none())
            .map(|p| p.value_at(x))
            .sum()
    }
}

/// Solves every node of `tree`, leaves first.
pub fn solve_decomposition(
    model: &SystemModel,
    tree: &InputTree,
    grid: &GridSpec,
    options: SolveOptions,
) -> Result<PolicyAssembly> {
    tree.ensure_valid()?;
    let mut policies = Vec::with_capacity(tree.len());
    let mut stats = Vec::with_capacity(tree.len());
    for node in tree.child_first_order() {
        let (policy, s) = solve_policy(model, tree, node, grid, &policies, options)?;
        policies.push(policy);
        stats.push(s);
    }
    Ok(PolicyAssembly {
        tree: tree.clone(),
        policies,
        stats,
        goal_input: model.goal_input.clone(),
        input_lower: model.input_lower.clone(),
        input_upper: model.input_upper.clone(),
    })
}
