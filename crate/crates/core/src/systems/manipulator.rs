//! Fully actuated planar serial chain with point masses at the distal end of
//! every link. Joint angles are relative; the first one is measured from
//! upright, so the goal (all zeros) is the inverted configuration.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_dims, Dynamics, ModelSpec, SystemModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorParams {
    pub masses: Vec<f64>,
    pub lengths: Vec<f64>,
    pub torque_limits: Vec<f64>,
    pub gravity: f64,
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        ManipulatorParams {
            masses: vec![5.4, 1.8, 0.6, 0.2],
            lengths: vec![0.2, 0.5, 0.25, 0.125],
            torque_limits: vec![24.0, 15.0, 7.5, 1.0],
            gravity: 9.81,
        }
    }
}

/// States `(theta_1..k, theta'_1..k)`, one torque per joint.
#[derive(Debug, Clone)]
pub struct ManipulatorDynamics {
    pub params: ManipulatorParams,
}

impl ManipulatorDynamics {
    fn links(&self) -> usize {
        self.params.masses.len()
    }

    fn absolute_angles(theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t;
                Some(*acc)
            })
            .collect()
    }

    /// Positional Jacobian of mass `k`: rows (horizontal, vertical).
    fn jacobian(&self, phi: &[f64], k: usize) -> DMatrix<f64> {
        let l = &self.params.lengths;
        let mut j = DMatrix::zeros(2, self.links());
        for i in 0..=k {
            for jj in i..=k {
                j[(0, i)] += l[jj] * phi[jj].cos();
                j[(1, i)] -= l[jj] * phi[jj].sin();
            }
        }
        j
    }

    pub fn mass_matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        let phi = Self::absolute_angles(theta);
        let n = self.links();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            let j = self.jacobian(&phi, k);
            m += j.transpose() * &j * self.params.masses[k];
        }
        m
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let n = self.links();
        let (theta, dtheta) = x.split_at(n);
        let phi = Self::absolute_angles(theta);
        let dq = DVector::from_column_slice(dtheta);
        let kinetic = 0.5 * (dq.transpose() * self.mass_matrix(theta) * &dq)[(0, 0)];
        let mut height = 0.0;
        let mut potential = 0.0;
        for k in 0..n {
            height += self.params.lengths[k] * phi[k].cos();
            potential += self.params.masses[k] * self.params.gravity * height;
        }
        kinetic + potential
    }
}

impl Dynamics for ManipulatorDynamics {
    fn n_states(&self) -> usize {
        2 * self.links()
    }

    fn m_inputs(&self) -> usize {
        self.links()
    }

    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()> {
        let n = self.links();
        check_dims("manipulator", x, u, 2 * n, n)?;
        let (theta, dtheta) = x.split_at(n);
        let phi = Self::absolute_angles(theta);
        let dphi = Self::absolute_angles(dtheta);
        let l = &self.params.lengths;
        let g = self.params.gravity;

        let mut mass = DMatrix::zeros(n, n);
        let mut rhs = DVector::from_column_slice(u);
        let mut bias = [0.0; 2];
        for k in 0..n {
            let j = self.jacobian(&phi, k);
            let mk = self.params.masses[k];
            mass += j.transpose() * &j * mk;
            // Velocity-product acceleration of mass k.
            bias[0] -= l[k] * dphi[k] * dphi[k] * phi[k].sin();
            bias[1] -= l[k] * dphi[k] * dphi[k] * phi[k].cos();
            for i in 0..n {
                rhs[i] -= mk * (j[(0, i)] * bias[0] + j[(1, i)] * bias[1]);
                rhs[i] -= mk * g * j[(1, i)];
            }
        }
        let acc = mass
            .cholesky()
            .ok_or_else(|| Error::Dynamics("manipulator: singular mass matrix".into()))?
            .solve(&rhs);
        dx[..n].copy_from_slice(dtheta);
        dx[n..].copy_from_slice(acc.as_slice());
        Ok(())
    }
}

pub fn manipulator_model(params: ManipulatorParams) -> SystemModel {
    let links = params.masses.len();
    let mut spec = ModelSpec::new("manip4", 2 * links, links);
    spec.state_names = (1..=links)
        .map(|i| format!("th{i}"))
        .chain((1..=links).map(|i| format!("dth{i}")))
        .collect();
    spec.input_names = (1..=links).map(|i| format!("tau{i}")).collect();
    let vel = 3.0;
    spec.state_lower = (0..links).map(|_| -PI).chain((0..links).map(|_| -vel)).collect();
    spec.state_upper = (0..links).map(|_| PI).chain((0..links).map(|_| vel)).collect();
    spec.q_diag = (0..links).map(|_| 1.0).chain((0..links).map(|_| 0.1)).collect();
    spec.r_diag = params.torque_limits.iter().map(|t| 1.0 / (t * t)).collect();
    spec.input_lower = params.torque_limits.iter().map(|t| -t).collect();
    spec.input_upper = params.torque_limits.clone();
    spec.actions = 9;
    spec.time_step = 0.02;
    let mut model = spec.build(Arc::new(ManipulatorDynamics { params }));
    for i in 0..links {
        model.grid.states[i].count = 13;
        model.grid.states[links + i].count = 17;
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dynamics() -> ManipulatorDynamics {
        ManipulatorDynamics {
            params: ManipulatorParams::default(),
        }
    }

    #[test]
    fn upright_and_hanging_are_equilibria() {
        let model = manipulator_model(ManipulatorParams::default());
        model.check().unwrap();
        let hanging = [PI, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let dx = model.f(&hanging, &[0.0; 4]).unwrap();
        assert!(dx.iter().all(|v| v.abs() < 1e-12), "{dx:?}");
    }

    #[test]
    fn mass_matrix_is_spd() {
        let d = dynamics();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let th: Vec<f64> = (0..4).map(|_| rng.gen_range(-PI..PI)).collect();
            let m = d.mass_matrix(&th);
            assert!((&m - m.transpose()).norm() < 1e-12);
            assert!(m.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn single_link_matches_pendulum() {
        let d = ManipulatorDynamics {
            params: ManipulatorParams {
                masses: vec![2.0],
                lengths: vec![0.5],
                torque_limits: vec![1.0],
                gravity: 9.81,
            },
        };
        let mut dx = [0.0; 2];
        d.eval(&[0.3, 0.7], &[0.2], &mut dx).unwrap();
        let expected = 9.81 / 0.5 * 0.3f64.sin() + 0.2 / (2.0 * 0.25);
        assert!((dx[1] - expected).abs() < 1e-12);
    }
}
