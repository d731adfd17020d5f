//! Models by name, with configuration overrides.

use super::config::Config;
use super::*;
use crate::dp::CostRule;

/// Names accepted by [`build`]; `sep-<blocks>` takes a block list such as
/// `2di`, `3pend` or `di+pend`.
pub const MODEL_NAMES: &[&str] = &[
    "biped",
    "manip4",
    "quadcopter",
    "pendulum",
    "integrator",
    "double-integrator",
    "toy-2x2",
    "sep-<blocks>",
];

/// Keys understood by every model; `param.*` keys are model specific.
const COMMON_KEYS: &[&str] = &[
    "discount",
    "q",
    "r",
    "state.lower",
    "state.upper",
    "input.lower",
    "input.upper",
    "grid.points",
    "grid.actions",
    "grid.time_step",
    "grid.policy_iterations",
    "grid.eval_iterations",
    "grid.tolerance",
    "grid.cost_rule",
    "flops.eval",
    "flops.update",
];

/// Key prefixes that belong to the caller rather than the model.
const FOREIGN_PREFIXES: &[&str] = &["search.", "solve.", "simulate.", "basin."];

pub fn build_default(name: &str) -> Result<SystemModel> {
    build(name, &Config::default())
}

/// Builds the named model and applies `config` overrides. Unknown keys are
/// rejected.
pub fn build(name: &str, config: &Config) -> Result<SystemModel> {
    let params = config.with_prefix("param.");
    let (model, param_keys): (SystemModel, &[&str]) = match name {
        "biped" => (biped_model(biped_params(&params)?), &[
            "mass",
            "inertia",
            "hip_offset",
            "foot_spacing",
            "rest_length",
            "goal_height",
            "contact_break",
        ]),
        "manip4" => (manipulator_model(manipulator_params(&params)?), &["masses", "lengths", "torque_limits"]),
        "quadcopter" => (quadcopter_model(quadcopter_params(&params)?), &[
            "mass",
            "inertia",
            "arm",
            "moment_coeff",
            "goal_height",
        ]),
        "pendulum" => (pendulum_model(pendulum_params(&params)?), &["mass", "length", "damping", "torque_limit"]),
        "integrator" => (integrator(), &[]),
        "double-integrator" => (double_integrator(), &[]),
        "toy-2x2" => (toy_2x2(), &[]),
        _ => match name.strip_prefix("sep-") {
            Some(spec) => {
                let blocks = Block::parse_list(spec)?;
                let coupling = params.f64("coupling")?.unwrap_or(0.0);
                let discount = config.f64("discount")?.unwrap_or(1.0);
                let mut model = synthetic_separable(&blocks, coupling, discount);
                model.name = name.to_string();
                (model, &["coupling"])
            }
            None => return Err(Error::UnknownModel(name.to_string())),
        },
    };
    for key in config.keys() {
        let known = COMMON_KEYS.contains(&key)
            || FOREIGN_PREFIXES.iter().any(|p| key.starts_with(p))
            || key.strip_prefix("param.").is_some_and(|k| param_keys.contains(&k));
        if !known {
            return Err(Error::Config(format!("unknown key '{key}' for model {name}")));
        }
    }
    let mut model = model;
    apply_overrides(&mut model, config)?;
    model.check()?;
    Ok(model)
}

fn apply_overrides(model: &mut SystemModel, c: &Config) -> Result<()> {
    let (n, m) = (model.n_states(), model.m_inputs());
    if let Some(v) = c.f64("discount")? {
        model.discount = v;
    }
    if let Some(v) = c.list_of("q", n)? {
        model.q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v));
    }
    if let Some(v) = c.list_of("r", m)? {
        model.r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v));
    }
    if let Some(v) = c.list_of("state.lower", n)? {
        for (i, x) in v.into_iter().enumerate() {
            model.state_lower[i] = x;
            model.grid.states[i].lower = x;
        }
    }
    if let Some(v) = c.list_of("state.upper", n)? {
        for (i, x) in v.into_iter().enumerate() {
            model.state_upper[i] = x;
            model.grid.states[i].upper = x;
        }
    }
    if let Some(v) = c.list_of("input.lower", m)? {
        for (i, x) in v.into_iter().enumerate() {
            model.input_lower[i] = x;
            model.grid.inputs[i].lower = x;
        }
    }
    if let Some(v) = c.list_of("input.upper", m)? {
        for (i, x) in v.into_iter().enumerate() {
            model.input_upper[i] = x;
            model.grid.inputs[i].upper = x;
        }
    }
    if let Some(v) = c.list_of("grid.points", n)? {
        for (axis, p) in model.grid.states.iter_mut().zip(v) {
            axis.count = as_count("grid.points", p)?;
        }
    }
    if let Some(v) = c.list_of("grid.actions", m)? {
        for (axis, p) in model.grid.inputs.iter_mut().zip(v) {
            axis.count = as_count("grid.actions", p)?;
        }
    }
    if let Some(v) = c.f64("grid.time_step")? {
        model.grid.time_step = v;
    }
    if let Some(v) = c.usize("grid.policy_iterations")? {
        model.grid.policy_iterations = v;
    }
    if let Some(v) = c.usize("grid.eval_iterations")? {
        model.grid.eval_iterations = v;
    }
    if let Some(v) = c.f64("grid.tolerance")? {
        model.grid.tolerance = v;
    }
    if let Some(v) = c.get("grid.cost_rule") {
        model.grid.cost_rule = match v {
            "rectangle" => CostRule::Rectangle,
            "trapezoid" => CostRule::Trapezoid,
            _ => return Err(Error::Config(format!("grid.cost_rule: expected rectangle or trapezoid, got '{v}'"))),
        };
    }
    if let Some(v) = c.f64("flops.eval")? {
        model.grid.flops.eval_cost = v;
    }
    if let Some(v) = c.f64("flops.update")? {
        model.grid.flops.update_cost = v;
    }
    Ok(())
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 0.0 {
        return Err(Error::Config(format!("{key}: counts must be whole numbers, got {v}")));
    }
    Ok(v as usize)
}

fn biped_params(c: &Config) -> Result<BipedParams> {
    let mut p = BipedParams::default();
    if let Some(v) = c.f64("mass")? {
        p.mass = v;
    }
    if let Some(v) = c.f64("inertia")? {
        p.inertia = v;
    }
    if let Some(v) = c.f64("hip_offset")? {
        p.hip_offset = v;
    }
    if let Some(v) = c.f64("foot_spacing")? {
        p.foot_spacing = v;
    }
    if let Some(v) = c.f64("rest_length")? {
        p.rest_length = v;
    }
    if let Some(v) = c.f64("goal_height")? {
        p.goal_height = v;
    }
    if let Some(v) = c.get("contact_break") {
        p.contact_break = match v {
            "diverge" => super::biped::ContactBreak::Diverge,
            "drop" => super::biped::ContactBreak::DropForces,
            _ => return Err(Error::Config(format!("param.contact_break: expected diverge or drop, got '{v}'"))),
        };
    }
    Ok(p)
}

fn manipulator_params(c: &Config) -> Result<ManipulatorParams> {
    let mut p = ManipulatorParams::default();
    if let Some(v) = c.list("masses")? {
        p.masses = v;
    }
    let k = p.masses.len();
    if let Some(v) = c.list_of("lengths", k)? {
        p.lengths = v;
    }
    if let Some(v) = c.list_of("torque_limits", k)? {
        p.torque_limits = v;
    }
    if p.lengths.len() != k || p.torque_limits.len() != k {
        return Err(Error::Config("param.masses, lengths and torque_limits must have equal length".into()));
    }
    Ok(p)
}

fn quadcopter_params(c: &Config) -> Result<QuadcopterParams> {
    let mut p = QuadcopterParams::default();
    if let Some(v) = c.f64("mass")? {
        p.mass = v;
    }
    if let Some(v) = c.list_of("inertia", 3)? {
        p.inertia = [v[0], v[1], v[2]];
    }
    if let Some(v) = c.f64("arm")? {
        p.arm = v;
    }
    if let Some(v) = c.f64("moment_coeff")? {
        p.moment_coeff = v;
    }
    if let Some(v) = c.f64("goal_height")? {
        p.goal_height = v;
    }
    Ok(p)
}

fn pendulum_params(c: &Config) -> Result<PendulumParams> {
    let mut p = PendulumParams::default();
    if let Some(v) = c.f64("mass")? {
        p.mass = v;
    }
    if let Some(v) = c.f64("length")? {
        p.length = v;
    }
    if let Some(v) = c.f64("damping")? {
        p.damping = v;
    }
    if let Some(v) = c.f64("torque_limit")? {
        p.torque_limit = v;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_model_builds() {
        for name in ["biped", "manip4", "quadcopter", "pendulum", "integrator", "double-integrator", "toy-2x2", "sep-2di", "sep-3pend", "sep-di+pend"] {
            let m = build_default(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(m.name, name);
        }
        assert!(matches!(build_default("nope"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn overrides_apply_and_are_validated() {
        let c = Config::parse("discount = 2\ngrid.points = 7\nparam.mass = 80\nsearch.seed = 3").unwrap();
        let m = build("biped", &c).unwrap();
        assert_eq!(m.discount, 2.0);
        assert!(m.grid.states.iter().all(|a| a.count == 7));
        assert!((m.goal_input[0] - 80.0 * 9.81 / (2.0 * m.goal_state[1].sin())).abs() < 1e-9);
        assert!(build("biped", &Config::parse("colour = red").unwrap()).is_err());
        assert!(build("biped", &Config::parse("param.arm = 1").unwrap()).is_err());
        assert!(build("toy-2x2", &Config::parse("q = 1,2,3").unwrap()).is_err());
        // A box that excludes the goal violates the model invariants.
        assert!(build("toy-2x2", &Config::parse("state.lower = 0.5").unwrap()).is_err());
    }
}
