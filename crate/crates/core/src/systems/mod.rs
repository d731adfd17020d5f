//! Benchmark dynamical systems and their control-problem data.
//!
//! A [`SystemModel`] bundles nonlinear dynamics `x' = f(x, u)` with the goal
//! pair `(x^d, u^d)`, quadratic cost weights, discount rate, input limits, the
//! state box and a default grid. Models are looked up by name through
//! [`registry::build`].

mod biped;
pub mod config;
mod linear;
mod manipulator;
mod pendulum;
mod quadcopter;
pub mod registry;
mod separable;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dp::GridSpec;
use crate::error::{Error, Result};
use crate::input_tree::InputTree;

pub use biped::{biped_model, BipedDynamics, BipedParams, ContactBreak};
pub use linear::{double_integrator, integrator, linear_model, toy_2x2, LinearDynamics};
pub use manipulator::{manipulator_model, ManipulatorDynamics, ManipulatorParams};
pub use pendulum::{pendulum_model, PendulumDynamics, PendulumParams};
pub use quadcopter::{quadcopter_model, rotor_forces, QuadcopterDynamics, QuadcopterParams};
pub use separable::{synthetic_separable, Block, BlockKind, CompositeDynamics};

/// Trim residual accepted at the goal pair.
pub const TRIM_TOLERANCE: f64 = 1e-6;

/// Continuous-time dynamics `x' = f(x, u)`.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn n_states(&self) -> usize;
    fn m_inputs(&self) -> usize;

    /// Writes `f(x, u)` into `dx`. Fails outside the model's domain.
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()>;

    /// Analytic `(df/dx, df/du)` when available.
    fn jacobians(&self, _x: &[f64], _u: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    /// Reason why a simulated state should count as failed, if any
    /// (lost contact, attitude singularity, ...).
    fn domain_violation(&self, _x: &[f64]) -> Option<String> {
        None
    }
}

/// An optimal-control problem on a nonlinear system.
#[derive(Clone)]
pub struct SystemModel {
    pub name: String,
    pub dynamics: Arc<dyn Dynamics>,
    pub goal_state: Vec<f64>,
    pub goal_input: Vec<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Discount rate `lambda` in 1/s.
    pub discount: f64,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub grid: GridSpec,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    /// A decomposition known to be exact, for synthetic systems.
    pub ground_truth: Option<InputTree>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("n", &self.n_states())
            .field("m", &self.m_inputs())
            .field("discount", &self.discount)
            .finish_non_exhaustive()
    }
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

impl SystemModel {
    pub fn n_states(&self) -> usize {
        self.dynamics.n_states()
    }

    pub fn m_inputs(&self) -> usize {
        self.dynamics.m_inputs()
    }

    pub fn f(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; self.n_states()];
        self.dynamics.eval(x, u, &mut dx)?;
        Ok(dx)
    }

    /// Running cost `(x-x^d)^T Q (x-x^d) + (u-u^d)^T R (u-u^d)`.
    pub fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        quad_form(&self.q, x, &self.goal_state) + quad_form(&self.r, u, &self.goal_input)
    }

    pub fn trim_residual(&self) -> Result<f64> {
        let dx = self.f(&self.goal_state, &self.goal_input)?;
        Ok(dx.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Clamps `u` into the input limits.
    pub fn saturate(&self, u: &mut [f64]) {
        for (i, v) in u.iter_mut().enumerate() {
            *v = v.clamp(self.input_lower[i], self.input_upper[i]);
        }
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.state_names[i]
    }

    pub fn input_name(&self, i: usize) -> &str {
        &self.input_names[i]
    }

    /// Checks dimensions and the model invariants: trim, limits containing
    /// `u^d`, box containing `x^d`, `Q` positive semidefinite, `R` positive
    /// definite, and a valid grid.
    pub fn check(&self) -> Result<()> {
        let (n, m) = (self.n_states(), self.m_inputs());
        let dims = [
            ("goal state", self.goal_state.len(), n),
            ("goal input", self.goal_input.len(), m),
            ("input lower", self.input_lower.len(), m),
            ("input upper", self.input_upper.len(), m),
            ("state lower", self.state_lower.len(), n),
            ("state upper", self.state_upper.len(), n),
            ("state names", self.state_names.len(), n),
            ("input names", self.input_names.len(), m),
        ];
        for (what, got, want) in dims {
            if got != want {
                return Err(Error::Dimension(format!("{}: {what} has length {got}, expected {want}", self.name)));
            }
        }
        if self.q.shape() != (n, n) || self.r.shape() != (m, m) {
            return Err(Error::Dimension(format!("{}: Q or R has the wrong shape", self.name)));
        }
        if !(self.discount >= 0.0 && self.discount.is_finite()) {
            return Err(Error::Config(format!("{}: discount must be a finite non-negative rate", self.name)));
        }
        for i in 0..m {
            let (lo, hi, d) = (self.input_lower[i], self.input_upper[i], self.goal_input[i]);
            if !(lo <= d && d <= hi) {
                return Err(Error::Config(format!(
                    "{}: trim input {} = {d} outside limits [{lo}, {hi}]",
                    self.name, self.input_names[i]
                )));
            }
        }
        for i in 0..n {
            let (lo, hi, d) = (self.state_lower[i], self.state_upper[i], self.goal_state[i]);
            if !(lo <= d && d <= hi) {
                return Err(Error::Config(format!(
                    "{}: goal {} = {d} outside the state box [{lo}, {hi}]",
                    self.name, self.state_names[i]
                )));
            }
        }
        let sym = |a: &DMatrix<f64>| (a - a.transpose()).norm() <= 1e-12 * (1.0 + a.norm());
        if !sym(&self.q) || !sym(&self.r) {
            return Err(Error::Config(format!("{}: Q and R must be symmetric", self.name)));
        }
        let q_min = self.q.clone().symmetric_eigenvalues().min();
        if q_min < -1e-12 * (1.0 + self.q.norm()) {
            return Err(Error::Config(format!("{}: Q is not positive semidefinite", self.name)));
        }
        if m > 0 && self.r.clone().symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::Config(format!("{}: R is not positive definite", self.name)));
        }
        self.grid.validate(n, m)?;
        let residual = self.trim_residual()?;
        if !(residual <= TRIM_TOLERANCE) {
            return Err(Error::NotAnEquilibrium {
                residual,
                tolerance: TRIM_TOLERANCE,
            });
        }
        Ok(())
    }
}

fn quad_form(w: &DMatrix<f64>, v: &[f64], center: &[f64]) -> f64 {
    let k = v.len();
    let mut acc = 0.0;
    for i in 0..k {
        let di = v[i] - center[i];
        if di == 0.0 {
            continue;
        }
        for j in 0..k {
            acc += di * w[(i, j)] * (v[j] - center[j]);
        }
    }
    acc
}

/// Quadratic form restricted to `idx` (ascending), summed in index order.
pub(crate) fn quad_form_on(w: &DMatrix<f64>, v: &[f64], center: &[f64], idx: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &i in idx {
        let di = v[i] - center[i];
        for &j in idx {
            acc += di * w[(i, j)] * (v[j] - center[j]);
        }
    }
    acc
}

/// Fills in the common fields of a model from its per-variable defaults.
pub(crate) struct ModelSpec {
    pub name: String,
    pub goal_state: Vec<f64>,
    pub goal_input: Vec<f64>,
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub discount: f64,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub points: usize,
    pub actions: usize,
    pub time_step: f64,
}

impl ModelSpec {
    pub fn new(name: &str, n: usize, m: usize) -> Self {
        ModelSpec {
            name: name.to_string(),
            goal_state: vec![0.0; n],
            goal_input: vec![0.0; m],
            q_diag: vec![1.0; n],
            r_diag: vec![1.0; m],
            discount: 3.0,
            input_lower: vec![-1.0; m],
            input_upper: vec![1.0; m],
            state_lower: vec![-1.0; n],
            state_upper: vec![1.0; n],
            state_names: names("x", n),
            input_names: names("u", m),
            points: 21,
            actions: 11,
            time_step: 0.02,
        }
    }

    pub fn build(self, dynamics: Arc<dyn Dynamics>) -> SystemModel {
        use crate::dp::{Axis, CostRule, FlopModel};
        let grid = GridSpec {
            states: (0..self.state_lower.len())
                .map(|i| Axis::new(self.state_lower[i], self.state_upper[i], self.points))
                .collect(),
            inputs: (0..self.input_lower.len())
                .map(|i| Axis::new(self.input_lower[i], self.input_upper[i], self.actions))
                .collect(),
            time_step: self.time_step,
            policy_iterations: 50,
            eval_iterations: 100,
            tolerance: 1e-6,
            cost_rule: CostRule::default(),
            flops: FlopModel::default(),
        };
        SystemModel {
            name: self.name,
            dynamics,
            goal_state: self.goal_state,
            goal_input: self.goal_input,
            q: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.q_diag)),
            r: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.r_diag)),
            discount: self.discount,
            input_lower: self.input_lower,
            input_upper: self.input_upper,
            state_lower: self.state_lower,
            state_upper: self.state_upper,
            grid,
            state_names: self.state_names,
            input_names: self.input_names,
            ground_truth: None,
        }
    }
}

/// Central-difference Jacobians of `f` at `(x, u)` with per-coordinate steps
/// `max(1e-6, 1e-6 |v_i|)`.
pub fn finite_difference_jacobians(
    dynamics: &dyn Dynamics,
    x: &[f64],
    u: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = (dynamics.n_states(), dynamics.m_inputs());
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        let h = (1e-6 * x[i].abs()).max(1e-6);
        xp[i] = x[i] + h;
        dynamics.eval(&xp, u, &mut plus)?;
        xp[i] = x[i] - h;
        dynamics.eval(&xp, u, &mut minus)?;
        xp[i] = x[i];
        for r in 0..n {
            a[(r, i)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    let mut up = u.to_vec();
    for j in 0..m {
        let h = (1e-6 * u[j].abs()).max(1e-6);
        up[j] = u[j] + h;
        dynamics.eval(x, &up, &mut plus)?;
        up[j] = u[j] - h;
        dynamics.eval(x, &up, &mut minus)?;
        up[j] = u[j];
        for r in 0..n {
            b[(r, j)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    Ok((a, b))
}

pub(crate) fn check_dims(what: &str, x: &[f64], u: &[f64], n: usize, m: usize) -> Result<()> {
    if x.len() != n || u.len() != m {
        return Err(Error::Dimension(format!(
            "{what}: got {} states and {} inputs, expected {n} and {m}",
            x.len(),
            u.len()
        )));
    }
    if x.iter().chain(u).any(|v| !v.is_finite()) {
        return Err(Error::Dynamics(format!("{what}: non-finite state or input")));
    }
    Ok(())
}
