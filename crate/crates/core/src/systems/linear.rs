use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_dims, Dynamics, ModelSpec, SystemModel};
use crate::error::Result;

/// `x' = A (x - x0) + B (u - u0)`.
#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
}

impl LinearDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let (n, m) = (a.nrows(), b.ncols());
        LinearDynamics {
            a,
            b,
            x0: vec![0.0; n],
            u0: vec![0.0; m],
        }
    }
}

impl Dynamics for LinearDynamics {
    fn n_states(&self) -> usize {
        self.a.nrows()
    }

    fn m_inputs(&self) -> usize {
        self.b.ncols()
    }

    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()> {
        let (n, m) = (self.n_states(), self.m_inputs());
        check_dims("linear", x, u, n, m)?;
        for (r, out) in dx.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for c in 0..n {
                acc += self.a[(r, c)] * (x[c] - self.x0[c]);
            }
            for c in 0..m {
                acc += self.b[(r, c)] * (u[c] - self.u0[c]);
            }
            *out = acc;
        }
        Ok(())
    }

    fn jacobians(&self, _x: &[f64], _u: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((self.a.clone(), self.b.clone()))
    }
}

/// A linear system with goal at the origin, unit box and unit cost weights.
pub fn linear_model(name: &str, a: DMatrix<f64>, b: DMatrix<f64>) -> SystemModel {
    let spec = ModelSpec::new(name, a.nrows(), b.ncols());
    spec.build(Arc::new(LinearDynamics::new(a, b)))
}

/// `x' = u` on `[-1, 1]` with `Q = R = 1` and `lambda = 0.1`.
pub fn integrator() -> SystemModel {
    let mut spec = ModelSpec::new("integrator", 1, 1);
    spec.discount = 0.1;
    spec.points = 101;
    spec.actions = 51;
    spec.time_step = 0.04;
    let b = DMatrix::from_element(1, 1, 1.0);
    let mut model = spec.build(Arc::new(LinearDynamics::new(DMatrix::zeros(1, 1), b)));
    model.grid.policy_iterations = 100;
    model.grid.eval_iterations = 200;
    model
}

/// `x1' = x2, x2' = u`.
pub fn double_integrator() -> SystemModel {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let mut spec = ModelSpec::new("double-integrator", 2, 1);
    spec.state_names = vec!["q".into(), "v".into()];
    spec.input_lower = vec![-2.0];
    spec.input_upper = vec![2.0];
    spec.discount = 1.0;
    spec.points = 31;
    spec.actions = 21;
    spec.time_step = 0.05;
    spec.build(Arc::new(LinearDynamics::new(a, b)))
}

/// A coupled two-state, two-input linear system.
pub fn toy_2x2() -> SystemModel {
    let a = DMatrix::from_row_slice(2, 2, &[0.2, 1.0, 0.5, -0.3]);
    let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.2, 1.0]);
    let mut spec = ModelSpec::new("toy-2x2", 2, 2);
    spec.discount = 0.5;
    spec.q_diag = vec![1.0, 2.0];
    spec.r_diag = vec![0.5, 1.0];
    spec.input_lower = vec![-3.0, -3.0];
    spec.input_upper = vec![3.0, 3.0];
    spec.build(Arc::new(LinearDynamics::new(a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toys_pass_model_checks() {
        for m in [integrator(), double_integrator(), toy_2x2()] {
            m.check().unwrap_or_else(|e| panic!("{}: {e}", m.name));
        }
        assert_eq!(integrator().f(&[0.3], &[0.5]).unwrap(), vec![0.5]);
    }
}
