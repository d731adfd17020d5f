use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform lattice `lower..=upper` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, count: usize) -> Self {
        Axis { lower, upper, count }
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.upper
        } else {
            self.lower + self.spacing() * i as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    fn check(&self, what: &str) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) {
            return Err(Error::Grid(format!("{what}: bounds must be finite")));
        }
        if self.upper <= self.lower {
            return Err(Error::Grid(format!("{what}: upper bound must exceed lower bound")));
        }
        if self.count < 2 {
            return Err(Error::Grid(format!("{what}: at least 2 points required")));
        }
        Ok(())
    }
}

/// Operation-count constants of the policy-iteration cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopModel {
    /// Cost of one policy-evaluation backup per cell.
    pub eval_cost: f64,
    /// Cost of scoring one action during policy improvement.
    pub update_cost: f64,
}

impl Default for FlopModel {
    fn default() -> Self {
        FlopModel {
            eval_cost: 1.0,
            update_cost: 1.0,
        }
    }
}

/// Quadrature of the running cost over one backup step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostRule {
    /// `c(x, u) h`.
    Rectangle,
    /// `(c(x, u) + e^{-lambda h} c(x', u)) h / 2` with `x'` the Euler foot point.
    #[default]
    Trapezoid,
}

/// Discretisation used by policy iteration and by the compute-cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// One axis per state variable.
    pub states: Vec<Axis>,
    /// One action lattice per input, normally spanning its limits.
    pub inputs: Vec<Axis>,
    /// Backup time step `h` in seconds.
    pub time_step: f64,
    /// Maximum policy-improvement rounds.
    pub policy_iterations: usize,
    /// Evaluation sweeps per round.
    pub eval_iterations: usize,
    /// Stop once the largest policy change falls below this.
    pub tolerance: f64,
    #[serde(default)]
    pub cost_rule: CostRule,
    #[serde(default)]
    pub flops: FlopModel,
}

impl GridSpec {
    pub fn validate(&self, n_states: usize, m_inputs: usize) -> Result<()> {
        if self.states.len() != n_states {
            return Err(Error::Grid(format!(
                "{} state axes for {n_states} states",
                self.states.len()
            )));
        }
        if self.inputs.len() != m_inputs {
            return Err(Error::Grid(format!(
                "{} action lattices for {m_inputs} inputs",
                self.inputs.len()
            )));
        }
        for (i, a) in self.states.iter().enumerate() {
            a.check(&format!("state axis x{}", i + 1))?;
        }
        for (i, a) in self.inputs.iter().enumerate() {
            a.check(&format!("action lattice u{}", i + 1))?;
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(Error::Grid("time step must be positive".into()));
        }
        if self.policy_iterations == 0 || self.eval_iterations == 0 {
            return Err(Error::Grid("iteration limits must be positive".into()));
        }
        Ok(())
    }

    pub fn state_points(&self) -> Vec<usize> {
        self.states.iter().map(|a| a.count).collect()
    }

    pub fn action_samples(&self) -> Vec<usize> {
        self.inputs.iter().map(|a| a.count).collect()
    }

    /// Same grid with every state axis set to `points` points.
    pub fn with_state_points(mut self, points: usize) -> Self {
        for a in &mut self.states {
            a.count = points;
        }
        self
    }

    /// Same grid with every action lattice set to `samples` samples.
    pub fn with_action_samples(mut self, samples: usize) -> Self {
        for a in &mut self.inputs {
            a.count = samples;
        }
        self
    }
}
