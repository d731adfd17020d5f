//! Quadcopter rigid body with Z-Y-X Euler angles. The horizontal position is
//! not part of the state since the vehicle only has to come to rest.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{check_dims, Dynamics, ModelSpec, SystemModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadcopterParams {
    pub mass: f64,
    /// Principal moments of inertia `(I_xx, I_yy, I_zz)`.
    pub inertia: [f64; 3],
    /// Rotor arm length.
    pub arm: f64,
    /// Rotor moment per unit thrust.
    pub moment_coeff: f64,
    pub gravity: f64,
    pub goal_height: f64,
}

impl Default for QuadcopterParams {
    fn default() -> Self {
        QuadcopterParams {
            mass: 0.5,
            inertia: [4.86e-3, 4.86e-3, 8.8e-3],
            arm: 0.225,
            moment_coeff: 0.0383,
            gravity: 9.81,
            goal_height: 1.0,
        }
    }
}

/// States `(z, phi, theta, psi, x', y', z', phi', theta', psi')`; inputs
/// `(T, F_phi, F_theta, F_psi)`.
#[derive(Debug, Clone)]
pub struct QuadcopterDynamics {
    pub params: QuadcopterParams,
}

/// Pitch beyond which the Euler-rate map is treated as singular.
const PITCH_LIMIT: f64 = PI / 2.0 - 1e-2;

impl Dynamics for QuadcopterDynamics {
    fn n_states(&self) -> usize {
        10
    }

    fn m_inputs(&self) -> usize {
        4
    }

    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()> {
        check_dims("quadcopter", x, u, 10, 4)?;
        let p = &self.params;
        let (phi, theta, psi) = (x[1], x[2], x[3]);
        let rates = Vector3::new(x[7], x[8], x[9]);
        let (sf, cf) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();
        if ct.abs() < 1e-9 {
            return Err(Error::Dynamics("quadcopter: Euler-angle singularity".into()));
        }
        let (thrust, f_phi, f_theta, f_psi) = (u[0], u[1], u[2], u[3]);
        let a = thrust / p.mass;

        dx[0] = x[6];
        dx[1] = rates[0];
        dx[2] = rates[1];
        dx[3] = rates[2];
        dx[4] = a * (cp * st * cf + sp * sf);
        dx[5] = a * (sp * st * cf - cp * sf);
        dx[6] = a * ct * cf - p.gravity;

        // Body rates nu = W eta', Euler rates from the rigid-body equations.
        let w = Matrix3::new(1.0, 0.0, -st, 0.0, cf, ct * sf, 0.0, -sf, ct * cf);
        let (dphi, dtheta) = (rates[0], rates[1]);
        let w_dot = Matrix3::new(
            0.0,
            0.0,
            -ct * dtheta,
            0.0,
            -sf * dphi,
            -st * sf * dtheta + ct * cf * dphi,
            0.0,
            -cf * dphi,
            -st * cf * dtheta - ct * sf * dphi,
        );
        let inertia = Vector3::from(p.inertia);
        let nu = w * rates;
        let i_nu = inertia.component_mul(&nu);
        let torque = Vector3::new(p.arm * f_phi, p.arm * f_theta, p.moment_coeff * f_psi);
        let nu_dot = (torque - nu.cross(&i_nu)).component_div(&inertia);
        let w_inv = w
            .try_inverse()
            .ok_or_else(|| Error::Dynamics("quadcopter: Euler-angle singularity".into()))?;
        let eta_dd = w_inv * (nu_dot - w_dot * rates);
        dx[7] = eta_dd[0];
        dx[8] = eta_dd[1];
        dx[9] = eta_dd[2];
        Ok(())
    }

    fn jacobians(&self, x: &[f64], u: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        // Closed form only at level, non-rotating attitude (the goal set).
        if x[1..4].iter().chain(&x[7..10]).any(|v| *v != 0.0) {
            return None;
        }
        let p = &self.params;
        let thrust = u[0];
        let mut a = DMatrix::zeros(10, 10);
        let mut b = DMatrix::zeros(10, 4);
        a[(0, 6)] = 1.0;
        a[(1, 7)] = 1.0;
        a[(2, 8)] = 1.0;
        a[(3, 9)] = 1.0;
        a[(4, 2)] = thrust / p.mass;
        a[(5, 1)] = -thrust / p.mass;
        // Attitude sensitivity of the Euler-rate map under nonzero torque.
        let t = [
            p.arm * u[1] / p.inertia[0],
            p.arm * u[2] / p.inertia[1],
            p.moment_coeff * u[3] / p.inertia[2],
        ];
        a[(7, 2)] = t[2];
        a[(8, 1)] = -t[2];
        a[(9, 1)] = t[1];
        b[(6, 0)] = 1.0 / p.mass;
        b[(7, 1)] = p.arm / p.inertia[0];
        b[(8, 2)] = p.arm / p.inertia[1];
        b[(9, 3)] = p.moment_coeff / p.inertia[2];
        Some((a, b))
    }

    fn domain_violation(&self, x: &[f64]) -> Option<String> {
        (x[2].abs() > PITCH_LIMIT).then(|| format!("pitch {:.4} rad near the Euler-angle singularity", x[2]))
    }
}

/// Rotor forces `(F_1, F_2, F_3, F_4)` for `(T, F_phi, F_theta, F_psi)`, the
/// inverse of `T = sum F_i`, `F_phi = F_4 - F_2`, `F_theta = F_3 - F_1`,
/// `F_psi = F_2 + F_4 - F_1 - F_3`.
pub fn rotor_forces(u: &[f64]) -> [f64; 4] {
    let (t, f_phi, f_theta, f_psi) = (u[0], u[1], u[2], u[3]);
    let odd = (t - f_psi) / 2.0;
    let even = (t + f_psi) / 2.0;
    [
        (odd - f_theta) / 2.0,
        (even - f_phi) / 2.0,
        (odd + f_theta) / 2.0,
        (even + f_phi) / 2.0,
    ]
}

pub fn quadcopter_model(params: QuadcopterParams) -> SystemModel {
    let mg = params.mass * params.gravity;
    let mut spec = ModelSpec::new("quadcopter", 10, 4);
    spec.state_names = ["z", "phi", "th", "psi", "dx", "dy", "dz", "dphi", "dth", "dpsi"]
        .map(String::from)
        .to_vec();
    spec.input_names = ["T", "F_phi", "F_th", "F_psi"].map(String::from).to_vec();
    let mut goal = vec![0.0; 10];
    goal[0] = params.goal_height;
    let half = [0.5, PI / 4.0, PI / 4.0, PI / 2.0, 1.5, 1.5, 1.5, 3.0, 3.0, 3.0];
    spec.state_lower = goal.iter().zip(half).map(|(g, h)| g - h).collect();
    spec.state_upper = goal.iter().zip(half).map(|(g, h)| g + h).collect();
    spec.q_diag = half.iter().map(|h| 1.0 / (h * h)).collect();
    let limits = [mg, 0.25 * mg, 0.25 * mg, 0.125 * mg];
    spec.r_diag = limits.iter().map(|l| 1.0 / (l * l)).collect();
    spec.input_lower = vec![0.0, -0.25 * mg, -0.25 * mg, -0.125 * mg];
    spec.input_upper = vec![2.0 * mg, 0.25 * mg, 0.25 * mg, 0.125 * mg];
    spec.goal_state = goal;
    spec.goal_input = vec![mg, 0.0, 0.0, 0.0];
    spec.points = 11;
    spec.actions = 7;
    spec.time_step = 0.02;
    spec.build(Arc::new(QuadcopterDynamics { params }))
}
