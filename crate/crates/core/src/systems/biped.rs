//! Planar biped in double stance: a rigid torso on two massless telescopic
//! legs with fixed footholds. The right foot is the origin, the left foot
//! sits `d_f` behind it. The centre of mass is described in polar
//! coordinates `(l_r, alpha_r)` about the right foot.

use std::sync::Arc;

use super::{check_dims, Dynamics, ModelSpec, SystemModel};
use crate::error::{Error, Result};

/// What happens when a leg is stretched beyond its rest length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContactBreak {
    /// Report the state as failed during simulation.
    #[default]
    Diverge,
    /// The leg stops transmitting force and torque.
    DropForces,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipedParams {
    pub mass: f64,
    pub inertia: f64,
    /// Hip to centre-of-mass distance.
    pub hip_offset: f64,
    /// Distance between the footholds.
    pub foot_spacing: f64,
    pub rest_length: f64,
    pub gravity: f64,
    /// Goal height of the centre of mass.
    pub goal_height: f64,
    pub contact_break: ContactBreak,
}

impl Default for BipedParams {
    fn default() -> Self {
        BipedParams {
            mass: 72.0,
            inertia: 3.0,
            hip_offset: 0.2,
            foot_spacing: 0.5,
            rest_length: 1.15,
            gravity: 9.81,
            goal_height: 1.05,
            contact_break: ContactBreak::Diverge,
        }
    }
}

/// States `(l_r, alpha_r, x', z', theta, theta')`; inputs
/// `(F_l, F_r, tau_l, tau_r)`.
#[derive(Debug, Clone)]
pub struct BipedDynamics {
    pub params: BipedParams,
}

impl BipedDynamics {
    /// Left-leg length and angle for a right-leg configuration.
    pub fn left_leg(&self, l_r: f64, alpha_r: f64) -> Result<(f64, f64)> {
        let d_f = self.params.foot_spacing;
        let sq = l_r * l_r + d_f * d_f + 2.0 * l_r * d_f * alpha_r.cos();
        if !(l_r > 0.0) || !(sq > 0.0) {
            return Err(Error::Dynamics(format!("biped: degenerate leg geometry (l_r = {l_r})")));
        }
        let l_l = sq.sqrt();
        let ratio = l_r * alpha_r.sin() / l_l;
        if !(-1.0..=1.0).contains(&ratio) {
            return Err(Error::Dynamics("biped: left leg angle undefined".into()));
        }
        Ok((l_l, ratio.asin()))
    }

    /// Goal state and trim input: centre of mass midway between the feet at
    /// the goal height, symmetric static leg forces, zero hip torque.
    pub fn trim(&self) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let x = -p.foot_spacing / 2.0;
        let l_r = x.hypot(p.goal_height);
        let alpha_r = p.goal_height.atan2(x);
        let force = p.mass * p.gravity / (2.0 * alpha_r.sin());
        (vec![l_r, alpha_r, 0.0, 0.0, 0.0, 0.0], vec![force, force, 0.0, 0.0])
    }
}

impl Dynamics for BipedDynamics {
    fn n_states(&self) -> usize {
        6
    }

    fn m_inputs(&self) -> usize {
        4
    }

    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()> {
        check_dims("biped", x, u, 6, 4)?;
        let p = &self.params;
        let (l_r, a_r, vx, vz, th, dth) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        let (l_l, a_l) = self.left_leg(l_r, a_r)?;
        let (mut f_l, mut f_r, mut t_l, mut t_r) = (u[0], u[1], u[2], u[3]);
        if p.contact_break == ContactBreak::DropForces {
            if l_l > p.rest_length {
                f_l = 0.0;
                t_l = 0.0;
            }
            if l_r > p.rest_length {
                f_r = 0.0;
                t_r = 0.0;
            }
        }
        let (s_r, c_r) = a_r.sin_cos();
        let (s_l, c_l) = a_l.sin_cos();
        dx[0] = vx * c_r + vz * s_r;
        dx[1] = (-vx * s_r + vz * c_r) / l_r;
        dx[2] = (f_r * c_r + t_r / l_r * s_r + f_l * c_l + t_l / l_l * s_l) / p.mass;
        dx[3] = (f_r * s_r - t_r / l_r * c_r + f_l * s_l - t_l / l_l * c_l) / p.mass - p.gravity;
        dx[4] = dth;
        let d = p.hip_offset;
        dx[5] = (t_r * (1.0 + d / l_r * (a_r - th).sin())
            + f_r * d * (a_r - th).cos()
            + t_l * (1.0 + d / l_l * (a_l - th).sin())
            + f_l * d * (a_l - th).cos())
            / p.inertia;
        Ok(())
    }

    fn domain_violation(&self, x: &[f64]) -> Option<String> {
        if self.params.contact_break != ContactBreak::Diverge {
            return None;
        }
        let l0 = self.params.rest_length;
        match self.left_leg(x[0], x[1]) {
            Err(e) => Some(e.to_string()),
            Ok((l_l, _)) if l_l > l0 => Some(format!("left leg lost contact (length {l_l:.4} > {l0})")),
            Ok(_) if x[0] > l0 => Some(format!("right leg lost contact (length {:.4} > {l0})", x[0])),
            Ok(_) => None,
        }
    }
}

pub fn biped_model(params: BipedParams) -> SystemModel {
    let dynamics = BipedDynamics { params };
    let (goal_state, goal_input) = dynamics.trim();
    let mg = params.mass * params.gravity;
    let torque = 0.25 * mg / params.rest_length;

    let mut spec = ModelSpec::new("biped", 6, 4);
    spec.state_names = ["l_r", "alpha_r", "dx", "dz", "th", "dth"].map(String::from).to_vec();
    spec.input_names = ["F_l", "F_r", "tau_l", "tau_r"].map(String::from).to_vec();
    let half = [0.1, 0.25, 0.4, 0.4, 0.5, 2.0];
    spec.state_lower = goal_state.iter().zip(half).map(|(g, h)| g - h).collect();
    spec.state_upper = goal_state.iter().zip(half).map(|(g, h)| g + h).collect();
    spec.q_diag = half.iter().map(|h| 1.0 / (h * h)).collect();
    spec.r_diag = vec![4.0 / (mg * mg), 4.0 / (mg * mg), 1.0 / (torque * torque), 1.0 / (torque * torque)];
    spec.input_lower = vec![0.0, 0.0, -torque, -torque];
    spec.input_upper = vec![3.0 * mg, 3.0 * mg, torque, torque];
    spec.goal_state = goal_state;
    spec.goal_input = goal_input;
    spec.points = 15;
    spec.actions = 9;
    spec.time_step = 0.02;
    spec.build(Arc::new(dynamics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trim_is_static() {
        let model = biped_model(BipedParams::default());
        model.check().unwrap();
        let dx = model.f(&model.goal_state, &model.goal_input).unwrap();
        assert!(dx.iter().all(|v| v.abs() < 1e-9), "{dx:?}");
    }

    #[test]
    fn free_fall() {
        let model = biped_model(BipedParams::default());
        let dx = model.f(&model.goal_state, &[0.0; 4]).unwrap();
        let p = BipedParams::default();
        assert_eq!(p.mass * dx[3], -p.mass * p.gravity);
        assert_eq!(dx[2], 0.0);
        assert_eq!(dx[5], 0.0);
    }

    #[test]
    fn symmetric_pose_has_equal_legs() {
        let dyn_ = BipedDynamics {
            params: BipedParams::default(),
        };
        let l_r = 1.08;
        let alpha_r = (-0.5f64 / (2.0 * l_r)).acos();
        let (l_l, alpha_l) = dyn_.left_leg(l_r, alpha_r).unwrap();
        assert!((l_l - l_r).abs() < 1e-12);
        assert!((alpha_l - (std::f64::consts::PI - alpha_r)).abs() < 1e-12);
    }

    #[test]
    fn stretched_leg_is_flagged() {
        let model = biped_model(BipedParams::default());
        let mut x = model.goal_state.clone();
        assert!(model.dynamics.domain_violation(&x).is_none());
        x[0] = 1.2;
        assert!(model.dynamics.domain_violation(&x).is_some());
        assert!(model.f(&[-0.1, 1.0, 0.0, 0.0, 0.0, 0.0], &[0.0; 4]).is_err());
    }
}
