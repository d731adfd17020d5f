//! Searches over input-trees for low-fitness decompositions: a genetic
//! algorithm, Monte-Carlo tree search, uniform random sampling and an
//! NSGA-II Pareto search over `(F_err, F_comp)`. All engines share a
//! [`MemoTable`] so no decomposition is scored twice.
//!
//! Budgets are either wall-clock seconds or a number of steps (GA and Pareto
//! generations, MCTS rollouts, random draws). In deterministic mode a
//! seconds budget is converted to steps at a fixed per-engine rate and no
//! wall-clock time is recorded, so equal seeds give identical reports.

mod ga;
mod mcts;
mod memo;
mod pareto;
mod random;

use std::cmp::Ordering;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input_tree::InputTree;
use crate::lqr::{DecompositionMetrics, FitnessEvaluator};

pub use ga::run_ga;
pub use mcts::{leaf_splits, run_mcts, uct_minimizers, uct_score, MctsNode, MctsSearch, MctsStats};
pub use memo::MemoTable;
pub use pareto::{dominates, run_pareto, ParetoFront, ParetoMember};
pub use random::run_random;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ga,
    Mcts,
    Random,
    Pareto,
}

impl Method {
    /// Steps granted per budget second in deterministic mode.
    pub fn steps_per_second(self) -> f64 {
        match self {
            Method::Ga | Method::Pareto => 20.0,
            Method::Mcts => 2000.0,
            Method::Random => 5000.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Ga => "ga",
            Method::Mcts => "mcts",
            Method::Random => "random",
            Method::Pareto => "pareto",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ga" => Ok(Method::Ga),
            "mcts" => Ok(Method::Mcts),
            "random" => Ok(Method::Random),
            "pareto" => Ok(Method::Pareto),
            _ => Err(Error::Config(format!("unknown search method '{s}'"))),
        }
    }
}

/// Stop after whichever limit is reached first.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Budget {
    pub seconds: Option<f64>,
    pub steps: Option<u64>,
}

impl Budget {
    pub fn seconds(s: f64) -> Self {
        Budget {
            seconds: Some(s),
            steps: None,
        }
    }

    pub fn steps(n: u64) -> Self {
        Budget {
            seconds: None,
            steps: Some(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub budget: Budget,
    /// Single-threaded, step-budgeted, no wall-clock in reports.
    pub deterministic: bool,
    pub population: usize,
    pub elite_fraction: f64,
    pub tournament: usize,
    /// Per-expansion child limit for MCTS; `None` keeps every split.
    pub mcts_child_cap: Option<usize>,
    /// Re-check the MCTS backup invariant after every rollout.
    pub check_invariants: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            budget: Budget::seconds(10.0),
            deterministic: false,
            population: 100,
            elite_fraction: 0.1,
            tournament: 3,
            mcts_child_cap: None,
            check_invariants: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("population size must be at least 2".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::Config("elite fraction must lie in (0, 1)".into()));
        }
        if self.tournament == 0 {
            return Err(Error::Config("tournament size must be positive".into()));
        }
        if self.budget.seconds.is_none() && self.budget.steps.is_none() {
            return Err(Error::Config("a seconds or steps budget is required".into()));
        }
        if let Some(s) = self.budget.seconds {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config("budget seconds must be finite and non-negative".into()));
            }
        }
        if self.mcts_child_cap == Some(0) {
            return Err(Error::Config("MCTS child cap must be positive".into()));
        }
        Ok(())
    }

    /// Effective MCTS child cap for a system with `m` inputs.
    pub fn child_cap(&self, m: usize) -> Option<usize> {
        self.mcts_child_cap.or(if m <= 4 { None } else { Some(256) })
    }
}

/// A scored decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tree: InputTree,
    pub key: Vec<u8>,
    pub metrics: DecompositionMetrics,
}

impl Candidate {
    pub fn evaluate(tree: InputTree, memo: &MemoTable, evaluator: &FitnessEvaluator) -> Result<Self> {
        debug_assert!(tree.is_valid());
        let key = tree.key()?.to_bytes();
        let metrics = memo.get_or_insert_with(key.clone(), || evaluator.evaluate(&tree))?;
        Ok(Candidate { tree, key, metrics })
    }
}

/// Total order used for selection: `F`, then `F_comp`, then key bytes.
pub fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    a.metrics
        .f
        .total_cmp(&b.metrics.f)
        .then(a.metrics.f_comp.total_cmp(&b.metrics.f_comp))
        .then_with(|| a.key.cmp(&b.key))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub step: u64,
    /// Wall-clock time, absent in deterministic mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
    pub unique: usize,
    pub best_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestTree {
    pub tree: String,
    #[serde(flatten)]
    pub metrics: DecompositionMetrics,
    pub parameter_count: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub method: Method,
    pub model: String,
    pub seed: u64,
    pub deterministic: bool,
    pub steps: u64,
    pub unique: usize,
    pub memo_hits: u64,
    pub memo_misses: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
    pub best: BestTree,
    pub history: Vec<HistoryPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcts: Option<MctsStats>,
}

/// Budget bookkeeping and best-so-far history shared by the engines.
pub(crate) struct Progress {
    started: Instant,
    deterministic: bool,
    max_steps: Option<u64>,
    max_seconds: Option<f64>,
    pub steps: u64,
    pub history: Vec<HistoryPoint>,
    best_f: f64,
}

impl Progress {
    pub fn new(config: &SearchConfig, method: Method) -> Self {
        let mut max_steps = config.budget.steps;
        let mut max_seconds = config.budget.seconds;
        if config.deterministic {
            if let Some(s) = max_seconds.take() {
                let converted = (s * method.steps_per_second()).ceil() as u64;
                max_steps = Some(max_steps.map_or(converted, |n| n.min(converted)));
            }
        }
        Progress {
            started: Instant::now(),
            deterministic: config.deterministic,
            max_steps,
            max_seconds,
            steps: 0,
            history: Vec::new(),
            best_f: f64::INFINITY,
        }
    }

    pub fn done(&self) -> bool {
        if self.max_steps.is_some_and(|n| self.steps >= n) {
            return true;
        }
        self.max_seconds
            .is_some_and(|s| self.started.elapsed().as_secs_f64() >= s)
    }

    pub fn seconds(&self) -> Option<f64> {
        (!self.deterministic).then(|| self.started.elapsed().as_secs_f64())
    }

    /// Records a history point when `best_f` improves.
    pub fn observe(&mut self, best_f: f64, unique: usize) {
        if best_f < self.best_f || self.history.is_empty() {
            self.best_f = best_f;
            self.history.push(HistoryPoint {
                step: self.steps,
                seconds: self.seconds(),
                unique,
                best_f,
            });
        }
    }
}

/// Everything an engine needs: the scored model and the shared cache.
pub struct SearchContext<'a> {
    pub model_name: String,
    pub evaluator: &'a FitnessEvaluator,
    pub memo: &'a MemoTable,
    pub points: Vec<usize>,
}

impl<'a> SearchContext<'a> {
    pub fn new(model_name: &str, evaluator: &'a FitnessEvaluator, memo: &'a MemoTable) -> Self {
        SearchContext {
            model_name: model_name.to_string(),
            evaluator,
            memo,
            points: evaluator.grid.state_points(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.evaluator.n_states()
    }

    pub fn m_inputs(&self) -> usize {
        self.evaluator.m_inputs()
    }

    pub(crate) fn evaluate(&self, tree: InputTree) -> Result<Candidate> {
        Candidate::evaluate(tree, self.memo, self.evaluator)
    }

    /// Scores a batch, in parallel unless `sequential`.
    pub(crate) fn evaluate_all(&self, trees: Vec<InputTree>, sequential: bool) -> Result<Vec<Candidate>> {
        if sequential {
            trees.into_iter().map(|t| self.evaluate(t)).collect()
        } else {
            use rayon::prelude::*;
            trees.into_par_iter().map(|t| self.evaluate(t)).collect()
        }
    }

    pub(crate) fn report(
        &self,
        method: Method,
        config: &SearchConfig,
        progress: Progress,
        best: &Candidate,
        mcts: Option<MctsStats>,
    ) -> SearchReport {
        SearchReport {
            method,
            model: self.model_name.clone(),
            seed: config.seed,
            deterministic: config.deterministic,
            steps: progress.steps,
            unique: self.memo.unique(),
            memo_hits: self.memo.hits(),
            memo_misses: self.memo.misses(),
            seconds: progress.seconds(),
            best: BestTree {
                tree: best.tree.to_string(),
                metrics: best.metrics,
                parameter_count: best.tree.parameter_count(&self.points),
            },
            history: progress.history,
            mcts,
        }
    }
}

/// The system must admit at least one proper decomposition.
pub(crate) fn check_searchable(ctx: &SearchContext) -> Result<()> {
    if ctx.m_inputs() < 2 {
        return Err(Error::NoDecompositions { m: ctx.m_inputs() });
    }
    Ok(())
}
