//! Block-diagonal compositions of small systems. Without coupling the
//! decomposition that gives every block its own root-level node is exact.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{
    double_integrator, integrator, pendulum_model, Dynamics, PendulumParams, SystemModel,
};
use crate::error::{Error, Result};
use crate::input_tree::InputTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Integrator,
    DoubleIntegrator,
    Pendulum,
}

impl BlockKind {
    pub fn model(self) -> SystemModel {
        match self {
            BlockKind::Integrator => integrator(),
            BlockKind::DoubleIntegrator => double_integrator(),
            BlockKind::Pendulum => pendulum_model(PendulumParams::default()),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            BlockKind::Integrator => "int",
            BlockKind::DoubleIntegrator => "di",
            BlockKind::Pendulum => "pend",
        }
    }
}

/// One block of a separable system.
#[derive(Debug, Clone)]
pub struct Block {
    pub kind: BlockKind,
}

impl Block {
    /// Parses `2di+pend`-style block lists.
    pub fn parse_list(spec: &str) -> Result<Vec<Block>> {
        let mut out = Vec::new();
        for token in spec.split('+') {
            let token = token.trim();
            let digits: String = token.chars().take_while(|c| c.is_ascii_digit()).collect();
            let count = if digits.is_empty() {
                1
            } else {
                digits
                    .parse::<usize>()
                    .map_err(|_| Error::UnknownModel(format!("sep-{spec}")))?
            };
            let kind = match &token[digits.len()..] {
                "int" => BlockKind::Integrator,
                "di" => BlockKind::DoubleIntegrator,
                "pend" => BlockKind::Pendulum,
                _ => return Err(Error::UnknownModel(format!("sep-{spec}: unknown block '{token}'"))),
            };
            out.extend((0..count).map(|_| Block { kind }));
        }
        if out.is_empty() {
            return Err(Error::UnknownModel(format!("sep-{spec}")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct CompositeDynamics {
    parts: Vec<(Arc<dyn Dynamics>, usize, usize)>,
    n: usize,
    m: usize,
    /// Each block's last state derivative gains `coupling` times the first
    /// state of the next block.
    pub coupling: f64,
}

impl Dynamics for CompositeDynamics {
    fn n_states(&self) -> usize {
        self.n
    }

    fn m_inputs(&self) -> usize {
        self.m
    }

    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()> {
        super::check_dims("composite", x, u, self.n, self.m)?;
        for (d, xo, uo) in &self.parts {
            let (bn, bm) = (d.n_states(), d.m_inputs());
            d.eval(&x[*xo..xo + bn], &u[*uo..uo + bm], &mut dx[*xo..xo + bn])?;
        }
        if self.coupling != 0.0 && self.parts.len() > 1 {
            for (b, (d, xo, _)) in self.parts.iter().enumerate() {
                let next = self.parts[(b + 1) % self.parts.len()].1;
                dx[xo + d.n_states() - 1] += self.coupling * x[next];
            }
        }
        Ok(())
    }

    fn jacobians(&self, x: &[f64], u: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let mut a = DMatrix::zeros(self.n, self.n);
        let mut b = DMatrix::zeros(self.n, self.m);
        for (d, xo, uo) in &self.parts {
            let (bn, bm) = (d.n_states(), d.m_inputs());
            let (ba, bb) = d.jacobians(&x[*xo..xo + bn], &u[*uo..uo + bm])?;
            a.view_mut((*xo, *xo), (bn, bn)).copy_from(&ba);
            b.view_mut((*xo, *uo), (bn, bm)).copy_from(&bb);
        }
        if self.coupling != 0.0 && self.parts.len() > 1 {
            for (i, (d, xo, _)) in self.parts.iter().enumerate() {
                let next = self.parts[(i + 1) % self.parts.len()].1;
                a[(xo + d.n_states() - 1, next)] += self.coupling;
            }
        }
        Some((a, b))
    }

    fn domain_violation(&self, x: &[f64]) -> Option<String> {
        self.parts
            .iter()
            .find_map(|(d, xo, _)| d.domain_violation(&x[*xo..xo + d.n_states()]))
    }
}

/// Block-diagonal composition of `blocks` with common discount `discount`.
/// The block-matching decoupled tree is stored as the model's ground truth.
pub fn synthetic_separable(blocks: &[Block], coupling: f64, discount: f64) -> SystemModel {
    let models: Vec<SystemModel> = blocks.iter().map(|b| b.kind.model()).collect();
    let name = format!(
        "sep-{}",
        blocks.iter().map(|b| b.kind.tag()).collect::<Vec<_>>().join("+")
    );
    let n: usize = models.iter().map(|m| m.n_states()).sum();
    let m: usize = models.iter().map(|m| m.m_inputs()).sum();

    let mut parts = Vec::new();
    let mut q = DMatrix::zeros(n, n);
    let mut r = DMatrix::zeros(m, m);
    let mut tree_parts = Vec::new();
    let mut first = models[0].clone();
    let (mut xo, mut uo) = (0, 0);
    let cat = |dst: &mut Vec<f64>, src: &[f64]| dst.extend_from_slice(src);
    let (mut gs, mut gi, mut il, mut iu, mut sl, mut su) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    let (mut sn, mut inn, mut s_axes, mut i_axes) = (vec![], vec![], vec![], vec![]);
    for (k, model) in models.iter().enumerate() {
        let (bn, bm) = (model.n_states(), model.m_inputs());
        parts.push((model.dynamics.clone(), xo, uo));
        q.view_mut((xo, xo), (bn, bn)).copy_from(&model.q);
        r.view_mut((uo, uo), (bm, bm)).copy_from(&model.r);
        cat(&mut gs, &model.goal_state);
        cat(&mut gi, &model.goal_input);
        cat(&mut il, &model.input_lower);
        cat(&mut iu, &model.input_upper);
        cat(&mut sl, &model.state_lower);
        cat(&mut su, &model.state_upper);
        sn.extend(model.state_names.iter().map(|s| format!("{s}_{}", k + 1)));
        inn.extend(model.input_names.iter().map(|s| format!("{s}_{}", k + 1)));
        s_axes.extend(model.grid.states.iter().copied());
        i_axes.extend(model.grid.inputs.iter().copied());
        tree_parts.push(((uo..uo + bm).collect(), (xo..xo + bn).collect(), None));
        xo += bn;
        uo += bm;
    }
    first.name = name;
    first.dynamics = Arc::new(CompositeDynamics {
        parts,
        n,
        m,
        coupling,
    });
    first.goal_state = gs;
    first.goal_input = gi;
    first.q = q;
    first.r = r;
    first.discount = discount;
    first.input_lower = il;
    first.input_upper = iu;
    first.state_lower = sl;
    first.state_upper = su;
    first.state_names = sn;
    first.input_names = inn;
    first.grid.states = s_axes;
    first.grid.inputs = i_axes;
    first.ground_truth = Some(InputTree::from_parts(n, m, tree_parts).canonical());
    first
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_block_lists() {
        let b = Block::parse_list("2di+pend").unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[2].kind, BlockKind::Pendulum);
        assert!(Block::parse_list("2foo").is_err());
    }

    #[test]
    fn composition_dimensions_and_truth() {
        let model = synthetic_separable(&Block::parse_list("3pend").unwrap(), 0.0, 1.0);
        assert_eq!((model.n_states(), model.m_inputs()), (6, 3));
        model.check().unwrap();
        assert_eq!(model.ground_truth.as_ref().unwrap().to_string(), "[(u1|x1,x2), (u2|x3,x4), (u3|x5,x6)]");
    }
}
