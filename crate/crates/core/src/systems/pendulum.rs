use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_dims, Dynamics, ModelSpec, SystemModel};
use crate::error::Result;

/// Torque-driven pendulum, angle measured from upright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub damping: f64,
    pub gravity: f64,
    pub torque_limit: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            mass: 1.0,
            length: 1.0,
            damping: 0.1,
            gravity: 9.81,
            torque_limit: 5.0,
        }
    }
}

/// States `(theta, theta')`, input torque:
/// `m l^2 theta'' = m g l sin(theta) - b theta' + u`.
#[derive(Debug, Clone)]
pub struct PendulumDynamics {
    pub params: PendulumParams,
}

impl Dynamics for PendulumDynamics {
    fn n_states(&self) -> usize {
        2
    }

    fn m_inputs(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()> {
        check_dims("pendulum", x, u, 2, 1)?;
        let p = &self.params;
        let inertia = p.mass * p.length * p.length;
        dx[0] = x[1];
        dx[1] = (p.gravity / p.length) * x[0].sin() + (u[0] - p.damping * x[1]) / inertia;
        Ok(())
    }

    fn jacobians(&self, x: &[f64], _u: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let p = &self.params;
        let inertia = p.mass * p.length * p.length;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, (p.gravity / p.length) * x[0].cos(), -p.damping / inertia]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0 / inertia]);
        Some((a, b))
    }
}

pub fn pendulum_model(params: PendulumParams) -> SystemModel {
    let mut spec = ModelSpec::new("pendulum", 2, 1);
    spec.state_names = vec!["th".into(), "dth".into()];
    spec.input_names = vec!["tau".into()];
    spec.q_diag = vec![1.0, 0.1];
    spec.r_diag = vec![0.05];
    spec.input_lower = vec![-params.torque_limit];
    spec.input_upper = vec![params.torque_limit];
    spec.state_lower = vec![-PI, -8.0];
    spec.state_upper = vec![PI, 8.0];
    spec.points = 41;
    spec.actions = 21;
    spec.time_step = 0.02;
    spec.build(Arc::new(PendulumDynamics { params }))
}
