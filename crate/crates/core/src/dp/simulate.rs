use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Axis, PolicyAssembly};
use crate::error::{Error, Result};
use crate::systems::SystemModel;

/// A state-feedback law `u = pi(x)`.
pub trait Controller: Sync {
    /// Writes all inputs for state `x` into `u`.
    fn control(&self, x: &[f64], u: &mut [f64]);
}

impl Controller for PolicyAssembly {
    fn control(&self, x: &[f64], u: &mut [f64]) {
        PolicyAssembly::control(self, x, u)
    }
}

/// `u = u^d - K (x - x^d)`.
#[derive(Debug, Clone)]
pub struct LinearFeedback {
    pub gain: DMatrix<f64>,
    pub goal_state: Vec<f64>,
    pub goal_input: Vec<f64>,
}

impl LinearFeedback {
    pub fn new(model: &SystemModel, gain: DMatrix<f64>) -> Self {
        LinearFeedback {
            gain,
            goal_state: model.goal_state.clone(),
            goal_input: model.goal_input.clone(),
        }
    }
}

impl Controller for LinearFeedback {
    fn control(&self, x: &[f64], u: &mut [f64]) {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = self.goal_input[i]
                - (0..x.len())
                    .map(|j| self.gain[(i, j)] * (x[j] - self.goal_state[j]))
                    .sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub duration: f64,
    pub dt: f64,
    /// Convergence threshold on `sqrt((x-x^d)^T Q (x-x^d))` at the final time.
    pub tolerance: f64,
    /// The state box is dilated by this multiple of its width on each side;
    /// leaving the dilated box counts as divergence.
    pub margin: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            duration: 10.0,
            dt: 0.01,
            tolerance: 0.05,
            margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub time: f64,
    pub reason: String,
}

/// A sampled closed-loop run; `inputs[k]` is the saturated control at `states[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub converged: bool,
    pub diverged: Option<Divergence>,
    /// Weighted distance to the goal at the last sample.
    pub final_error: f64,
}

fn weighted_error(model: &SystemModel, x: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(&model.goal_state).map(|(a, b)| a - b).collect();
    let mut acc = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            acc += d[i] * model.q[(i, j)] * d[j];
        }
    }
    acc.max(0.0).sqrt()
}

fn check_state(model: &SystemModel, x: &[f64], margin: f64) -> Option<String> {
    if x.iter().any(|v| !v.is_finite()) {
        return Some("non-finite state".into());
    }
    for (i, &v) in x.iter().enumerate() {
        let (lo, hi) = (model.state_lower[i], model.state_upper[i]);
        let w = margin * (hi - lo);
        if v < lo - w || v > hi + w {
            return Some(format!("{} = {v} left the state box", model.state_name(i)));
        }
    }
    model.dynamics.domain_violation(x)
}

/// Closed-loop vector field with the controller saturated.
fn closed_loop(model: &SystemModel, controller: &dyn Controller, x: &[f64], u: &mut [f64]) -> Result<Vec<f64>> {
    controller.control(x, u);
    model.saturate(u);
    model.f(x, u)
}

fn rk4_step(model: &SystemModel, controller: &dyn Controller, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let mut u = vec![0.0; model.m_inputs()];
    let shift = |k: &[f64], s: f64| -> Vec<f64> { (0..n).map(|i| x[i] + s * k[i]).collect() };
    let k1 = closed_loop(model, controller, x, &mut u)?;
    let k2 = closed_loop(model, controller, &shift(&k1, dt / 2.0), &mut u)?;
    let k3 = closed_loop(model, controller, &shift(&k2, dt / 2.0), &mut u)?;
    let k4 = closed_loop(model, controller, &shift(&k3, dt), &mut u)?;
    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates `x' = f(x, sat(pi(x)))` with fixed-step RK4.
pub fn simulate(model: &SystemModel, controller: &dyn Controller, x0: &[f64], options: &SimOptions) -> Result<Trajectory> {
    let (n, m) = (model.n_states(), model.m_inputs());
    if x0.len() != n {
        return Err(Error::Dimension(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial state must be finite".into()));
    }
    if !(options.dt > 0.0 && options.duration >= 0.0) {
        return Err(Error::Config("simulation needs dt > 0 and duration >= 0".into()));
    }
    let steps = (options.duration / options.dt).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        converged: false,
        diverged: None,
        final_error: f64::INFINITY,
    };
    let mut x = x0.to_vec();
    let mut u = vec![0.0; m];
    for k in 0..=steps {
        let t = k as f64 * options.dt;
        controller.control(&x, &mut u);
        model.saturate(&mut u);
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.inputs.push(u.clone());
        if let Some(reason) = check_state(model, &x, options.margin) {
            traj.diverged = Some(Divergence { time: t, reason });
            return Ok(traj);
        }
        if k == steps {
            break;
        }
        x = match rk4_step(model, controller, &x, options.dt) {
            Ok(next) => next,
            Err(e) => {
                traj.diverged = Some(Divergence {
                    time: t + options.dt,
                    reason: e.to_string(),
                });
                return Ok(traj);
            }
        };
    }
    traj.final_error = weighted_error(model, &x);
    traj.converged = traj.final_error < options.tolerance;
    Ok(traj)
}

/// A 2-D slice of initial conditions: two varied coordinates, the rest fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSlice {
    pub dims: (usize, usize),
    pub axes: (Axis, Axis),
    /// Full state supplying the fixed coordinates.
    pub base: Vec<f64>,
}

/// Converged flag per slice point, row-major with the second axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinField {
    pub slice: BasinSlice,
    pub converged: Vec<bool>,
}

impl BasinField {
    pub fn at(&self, i: usize, j: usize) -> bool {
        self.converged[i * self.slice.axes.1.count + j]
    }

    pub fn fraction(&self) -> f64 {
        self.converged.iter().filter(|&&c| c).count() as f64 / self.converged.len() as f64
    }
}

/// Simulates from every point of `slice` and records which runs converge.
pub fn basin_sweep(
    model: &SystemModel,
    controller: &dyn Controller,
    slice: &BasinSlice,
    options: &SimOptions,
) -> Result<BasinField> {
    let n = model.n_states();
    let (a, b) = slice.dims;
    if slice.base.len() != n || a >= n || b >= n || a == b {
        return Err(Error::Dimension(format!("basin slice does not fit a {n}-state model")));
    }
    let (xa, xb) = (slice.axes.0.points(), slice.axes.1.points());
    let points: Vec<(f64, f64)> = xa.iter().flat_map(|&p| xb.iter().map(move |&q| (p, q))).collect();
    let converged = points
        .par_iter()
        .map(|&(p, q)| {
            let mut x0 = slice.base.clone();
            x0[a] = p;
            x0[b] = q;
            simulate(model, controller, &x0, options).map(|t| t.converged)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(BasinField {
        slice: slice.clone(),
        converged,
    })
}
