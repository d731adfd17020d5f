//! Policy decomposition toolkit.
//!
//! Decompositions of an optimal-control problem are represented as
//! [`InputTree`]s. The crate counts, enumerates and samples them, scores them
//! with an LQR-based suboptimality estimate and a compute-cost model, searches
//! the decomposition space (genetic algorithm, Monte-Carlo tree search,
//! random sampling, Pareto fronts), and computes the resulting lookup-table
//! policies by grid-based policy iteration.

pub mod dp;
pub mod enumeration;
pub mod error;
pub mod input_tree;
pub mod linalg;
pub mod lqr;
pub mod search;
pub mod systems;

pub use error::{Error, Result};
pub use input_tree::{InputTree, TreeKey};
pub use systems::SystemModel;
