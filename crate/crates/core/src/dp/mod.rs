//! Grid-based policy iteration for subsystems, decomposition-aware policy
//! assembly, closed-loop simulation and basin-of-attraction sweeps.

mod grid;
mod interp;
pub mod io;
mod policy;
mod simulate;

pub use grid::{Axis, CostRule, FlopModel, GridSpec};
pub use interp::{Lattice, Stencil};
pub use policy::{
    solve_decomposition, solve_policy, DecoupledInputs, PolicyAssembly, SolveOptions, SolveStats, TabularPolicy,
};
pub use simulate::{
    basin_sweep, simulate, BasinField, BasinSlice, Controller, Divergence, LinearFeedback, SimOptions, Trajectory,
};
