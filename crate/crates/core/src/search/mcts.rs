use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_searchable, rank, Candidate, Method, Progress, SearchConfig, SearchContext, SearchReport};
use crate::error::Result;
use crate::input_tree::InputTree;

/// Exploration-adjusted score of a child (lower is more attractive).
pub fn uct_score(q: f64, parent_visits: u64, child_visits: u64) -> f64 {
    q - (2.0 * ((parent_visits + 1) as f64).ln() / child_visits as f64).sqrt()
}

/// Indices attaining the minimum UCT score among `(q, visits)` pairs.
pub fn uct_minimizers(children: &[(f64, u64)], parent_visits: u64) -> Vec<usize> {
    let scores: Vec<f64> = children
        .iter()
        .map(|&(q, n)| uct_score(q, parent_visits, n))
        .collect();
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    (0..scores.len()).filter(|&i| scores[i] == best).collect()
}

fn subsets(items: &[usize], mask: u64) -> (Vec<usize>, Vec<usize>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, &v) in items.iter().enumerate() {
        if mask >> i & 1 == 1 {
            a.push(v);
        } else {
            b.push(v);
        }
    }
    (a, b)
}

/// Every tree obtained by splitting one leaf in two, either as two siblings
/// (each keeping at least one state) or as a parent with one child (the
/// child keeping at least one state).
pub fn leaf_splits(tree: &InputTree) -> Vec<InputTree> {
    let nodes = tree.nodes();
    let base: Vec<(Vec<usize>, Vec<usize>, Option<usize>)> = nodes
        .iter()
        .map(|n| (n.inputs.clone(), n.states.clone(), n.parent))
        .collect();
    let mut out = Vec::new();
    for (id, node) in nodes.iter().enumerate() {
        if !tree.is_leaf(id) || node.inputs.len() < 2 {
            continue;
        }
        let (us, xs) = (&node.inputs, &node.states);
        let (nu, nx) = (us.len() as u32, xs.len() as u32);
        for umask in 1..(1u64 << nu) - 1 {
            let (ua, ub) = subsets(us, umask);
            for xmask in 0..1u64 << nx {
                let (xa, xb) = subsets(xs, xmask);
                let mut push = |child_parent: Option<usize>| {
                    let mut parts = base.clone();
                    parts[id] = (ua.clone(), xa.clone(), node.parent);
                    parts.push((ub.clone(), xb.clone(), child_parent));
                    let t = InputTree::from_parts(tree.n_states(), tree.m_inputs(), parts).canonical();
                    debug_assert!(t.is_valid(), "split produced an invalid tree");
                    out.push(t);
                };
                // Siblings: unordered, so the first input stays in part `a`.
                if umask & 1 == 1 && !xa.is_empty() && !xb.is_empty() {
                    push(node.parent);
                }
                // Cascade: part `a` on top.
                if !xb.is_empty() {
                    push(Some(id));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct MctsNode {
    pub tree: InputTree,
    pub parent: Option<usize>,
    /// Own fitness; `+inf` for the undecomposed root, which is not a candidate.
    pub fitness: f64,
    /// Best fitness in the sub-tree, own included.
    pub q: f64,
    pub visits: u64,
    pub children: Option<Vec<usize>>,
    pub terminal: bool,
    pub exhausted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MctsStats {
    pub nodes: usize,
    pub exhausted: bool,
    pub root_q: f64,
    pub invariant_checks: u64,
    pub invariant_violations: u64,
    /// Selections that landed on an already exhausted node.
    pub exhausted_reselections: u64,
}

/// Incremental MCTS state, exposed so callers can inspect the search tree
/// between rollouts.
pub struct MctsSearch<'c, 'a> {
    ctx: &'c SearchContext<'a>,
    nodes: Vec<MctsNode>,
    rng: ChaCha8Rng,
    cap: Option<usize>,
    check: bool,
    pub stats: MctsStats,
    best: Option<Candidate>,
}

impl<'c, 'a> MctsSearch<'c, 'a> {
    pub fn new(ctx: &'c SearchContext<'a>, config: &SearchConfig) -> Result<Self> {
        config.validate()?;
        check_searchable(ctx)?;
        let root = MctsNode {
            tree: InputTree::undecomposed(ctx.n_states(), ctx.m_inputs()),
            parent: None,
            fitness: f64::INFINITY,
            q: f64::INFINITY,
            visits: 1,
            children: None,
            terminal: false,
            exhausted: false,
        };
        Ok(MctsSearch {
            ctx,
            nodes: vec![root],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            cap: config.child_cap(ctx.m_inputs()),
            check: config.check_invariants,
            stats: MctsStats::default(),
            best: None,
        })
    }

    pub fn nodes(&self) -> &[MctsNode] {
        &self.nodes
    }

    pub fn is_exhausted(&self) -> bool {
        self.nodes[0].exhausted
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.best.as_ref()
    }

    fn children_of(&mut self, id: usize) -> Vec<usize> {
        if let Some(c) = &self.nodes[id].children {
            return c.clone();
        }
        let mut trees = leaf_splits(&self.nodes[id].tree);
        if let Some(cap) = self.cap {
            if trees.len() > cap {
                let mut keep = sample(&mut self.rng, trees.len(), cap).into_vec();
                keep.sort_unstable();
                trees = keep.into_iter().map(|i| trees[i].clone()).collect();
            }
        }
        let first = self.nodes.len();
        for tree in trees {
            self.nodes.push(MctsNode {
                tree,
                parent: Some(id),
                fitness: f64::NAN,
                q: f64::NAN,
                visits: 0,
                children: None,
                terminal: false,
                exhausted: false,
            });
        }
        let ids: Vec<usize> = (first..self.nodes.len()).collect();
        self.nodes[id].children = Some(ids.clone());
        if ids.is_empty() {
            self.nodes[id].terminal = true;
        }
        ids
    }

    fn select(&mut self, id: usize) -> Option<usize> {
        let children = self.children_of(id);
        let live: Vec<usize> = children.into_iter().filter(|&c| !self.nodes[c].exhausted).collect();
        if live.is_empty() {
            return None;
        }
        // Unvisited children score -inf.
        let fresh: Vec<usize> = live.iter().copied().filter(|&c| self.nodes[c].visits == 0).collect();
        let pool = if fresh.is_empty() {
            let stats: Vec<(f64, u64)> = live.iter().map(|&c| (self.nodes[c].q, self.nodes[c].visits)).collect();
            uct_minimizers(&stats, self.nodes[id].visits)
                .into_iter()
                .map(|i| live[i])
                .collect()
        } else {
            fresh
        };
        let pick = pool[self.rng.gen_range(0..pool.len())];
        if self.nodes[pick].exhausted {
            self.stats.exhausted_reselections += 1;
        }
        Some(pick)
    }

    fn expand(&mut self, id: usize) -> Result<()> {
        let cand = self.ctx.evaluate(self.nodes[id].tree.clone())?;
        let node = &mut self.nodes[id];
        node.fitness = cand.metrics.f;
        node.q = cand.metrics.f;
        node.visits = 1;
        let tree = &node.tree;
        node.terminal = (0..tree.len()).all(|i| !tree.is_leaf(i) || tree.nodes()[i].inputs.len() < 2);
        node.exhausted = node.terminal;
        if self.best.as_ref().is_none_or(|b| rank(&cand, b).is_lt()) {
            self.best = Some(cand);
        }
        Ok(())
    }

    fn children_q(&self, id: usize) -> f64 {
        self.nodes[id].children.as_ref().map_or(f64::INFINITY, |c| {
            c.iter()
                .filter(|&&k| self.nodes[k].visits > 0)
                .map(|&k| self.nodes[k].q)
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// One selection-expansion-backup pass. Returns the visited path, root first.
    pub fn rollout(&mut self) -> Result<Vec<usize>> {
        let mut path = vec![0];
        let mut cur = 0;
        let mut expanded = None;
        while let Some(next) = self.select(cur) {
            path.push(next);
            if self.nodes[next].visits == 0 {
                self.expand(next)?;
                expanded = Some(next);
                break;
            }
            cur = next;
        }
        // Backup from the deepest node towards the root.
        for &id in path.iter().rev() {
            if expanded != Some(id) {
                self.nodes[id].visits += 1;
            }
            let q = self.nodes[id].fitness.min(self.children_q(id));
            self.nodes[id].q = q;
            let done = self.nodes[id].terminal
                || self.nodes[id]
                    .children
                    .as_ref()
                    .is_some_and(|c| c.iter().all(|&k| self.nodes[k].exhausted));
            self.nodes[id].exhausted = done;
        }
        if self.check {
            for &id in &path {
                self.stats.invariant_checks += 1;
                if !self.backup_holds(id) {
                    self.stats.invariant_violations += 1;
                }
            }
        }
        Ok(path)
    }

    /// `Q = min(own F, children Q)` at `id`.
    pub fn backup_holds(&self, id: usize) -> bool {
        let node = &self.nodes[id];
        let expect = node.fitness.min(self.children_q(id));
        node.q == expect
    }

    pub fn finish(mut self) -> (Option<Candidate>, MctsStats) {
        self.stats.nodes = self.nodes.len();
        self.stats.exhausted = self.is_exhausted();
        self.stats.root_q = self.nodes[0].q;
        (self.best, self.stats)
    }
}

/// Monte-Carlo tree search from the undecomposed tree; one step is one rollout.
/// Stops early once the whole search tree is explored.
pub fn run_mcts(ctx: &SearchContext, config: &SearchConfig) -> Result<SearchReport> {
    let mut search = MctsSearch::new(ctx, config)?;
    let mut progress = Progress::new(config, Method::Mcts);
    while !search.is_exhausted() && (progress.steps == 0 || !progress.done()) {
        search.rollout()?;
        progress.steps += 1;
        if let Some(b) = search.best() {
            progress.observe(b.metrics.f, ctx.memo.unique());
        }
    }
    let (best, stats) = search.finish();
    let best = best.expect("at least one rollout expands a decomposition");
    Ok(ctx.report(Method::Mcts, config, progress, &best, Some(stats)))
}
