//! Single-operator mutations of input-trees.

use rand::seq::SliceRandom;
use rand::Rng;

use super::InputTree;

/// Number of operator draws attempted before a mutation gives up and returns
/// the tree unchanged.
pub const MUTATION_RETRIES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationOp {
    /// Exchange one state variable between two nodes.
    SwapStates,
    /// Move one state variable to another node.
    MoveState,
    /// Re-attach a sub-tree under another node or the virtual root.
    MoveSubtree,
    /// Merge the nodes of two decoupled inputs.
    Couple,
    /// Split the node of two coupled inputs.
    Decouple,
}

/// Mutates `tree` with exactly one operator. The three structural operators
/// are each drawn with probability 1/4; otherwise two distinct inputs are
/// drawn and coupled or decoupled depending on whether they currently share a
/// node. Draws without a valid application are retried up to
/// [`MUTATION_RETRIES`] times, after which the input tree is returned.
pub fn mutate<R: Rng + ?Sized>(tree: &InputTree, rng: &mut R) -> InputTree {
    mutate_traced(tree, rng).0
}

/// [`mutate`], also reporting the operator that produced the result.
pub fn mutate_traced<R: Rng + ?Sized>(tree: &InputTree, rng: &mut R) -> (InputTree, Option<MutationOp>) {
    for _ in 0..MUTATION_RETRIES {
        let p: f64 = rng.gen();
        let attempt = if p < 0.25 {
            swap_states(tree, rng).map(|t| (t, MutationOp::SwapStates))
        } else if p < 0.5 {
            move_state(tree, rng).map(|t| (t, MutationOp::MoveState))
        } else if p < 0.75 {
            move_subtree(tree, rng).map(|t| (t, MutationOp::MoveSubtree))
        } else {
            let m = tree.m_inputs();
            if m < 2 {
                None
            } else {
                let a = rng.gen_range(0..m);
                let mut b = rng.gen_range(0..m - 1);
                if b >= a {
                    b += 1;
                }
                let (na, nb) = (tree.node_of_input(a), tree.node_of_input(b));
                if na == nb {
                    decouple(tree, a, b, rng).map(|t| (t, MutationOp::Decouple))
                } else {
                    couple(tree, a, b, rng).map(|t| (t, MutationOp::Couple))
                }
            }
        };
        if let Some((t, op)) = attempt {
            return (t, Some(op));
        }
    }
    (tree.clone(), None)
}

/// Applies one specific operator, choosing its operands uniformly among the
/// applications that exist. Returns `None` when the operator cannot produce a
/// valid tree within the retry budget.
pub fn apply_op<R: Rng + ?Sized>(tree: &InputTree, op: MutationOp, rng: &mut R) -> Option<InputTree> {
    for _ in 0..MUTATION_RETRIES {
        let out = match op {
            MutationOp::SwapStates => swap_states(tree, rng),
            MutationOp::MoveState => move_state(tree, rng),
            MutationOp::MoveSubtree => move_subtree(tree, rng),
            MutationOp::Couple | MutationOp::Decouple => {
                let m = tree.m_inputs();
                let pairs: Vec<(usize, usize)> = (0..m)
                    .flat_map(|a| (0..m).map(move |b| (a, b)))
                    .filter(|&(a, b)| a != b)
                    .filter(|&(a, b)| {
                        let same = tree.node_of_input(a) == tree.node_of_input(b);
                        same == (op == MutationOp::Decouple)
                    })
                    .collect();
                let &(a, b) = pairs.choose(rng)?;
                if op == MutationOp::Decouple {
                    decouple(tree, a, b, rng)
                } else {
                    couple(tree, a, b, rng)
                }
            }
        };
        if out.is_some() {
            return out;
        }
    }
    None
}

/// Mutable scratch copy of a tree; removed nodes are tombstoned.
struct Work {
    n: usize,
    m: usize,
    inputs: Vec<Vec<usize>>,
    states: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    alive: Vec<bool>,
}

impl Work {
    fn from(tree: &InputTree) -> Self {
        let nodes = tree.nodes();
        Work {
            n: tree.n_states(),
            m: tree.m_inputs(),
            inputs: nodes.iter().map(|x| x.inputs.clone()).collect(),
            states: nodes.iter().map(|x| x.states.clone()).collect(),
            parent: nodes.iter().map(|x| x.parent).collect(),
            alive: vec![true; nodes.len()],
        }
    }

    fn has_children(&self, id: usize) -> bool {
        (0..self.parent.len()).any(|c| self.alive[c] && self.parent[c] == Some(id))
    }

    /// Fills empty leaves from their nearest non-empty ancestor. Returns
    /// `None` when some empty leaf has no such ancestor.
    fn repair<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<()> {
        loop {
            let empty_leaf = (0..self.parent.len())
                .find(|&id| self.alive[id] && self.states[id].is_empty() && !self.has_children(id));
            let Some(leaf) = empty_leaf else {
                return Some(());
            };
            let mut cur = self.parent[leaf];
            loop {
                let p = cur?;
                if !self.states[p].is_empty() {
                    let k = rng.gen_range(0..self.states[p].len());
                    let x = self.states[p].remove(k);
                    self.states[leaf].push(x);
                    break;
                }
                cur = self.parent[p];
            }
        }
    }

    fn finish<R: Rng + ?Sized>(mut self, rng: &mut R) -> Option<InputTree> {
        self.repair(rng)?;
        let mut new_id = vec![usize::MAX; self.alive.len()];
        let mut next = 0;
        for (id, &a) in self.alive.iter().enumerate() {
            if a {
                new_id[id] = next;
                next += 1;
            }
        }
        let parts = (0..self.alive.len())
            .filter(|&id| self.alive[id])
            .map(|id| {
                (
                    std::mem::take(&mut self.inputs[id]),
                    std::mem::take(&mut self.states[id]),
                    self.parent[id].map(|p| new_id[p]),
                )
            })
            .collect();
        let tree = InputTree::from_parts(self.n, self.m, parts);
        tree.is_valid().then(|| tree.canonical())
    }
}

fn swap_states<R: Rng + ?Sized>(tree: &InputTree, rng: &mut R) -> Option<InputTree> {
    let holders: Vec<usize> = (0..tree.len()).filter(|&i| !tree.nodes()[i].states.is_empty()).collect();
    if holders.len() < 2 {
        return None;
    }
    let picked: Vec<usize> = holders.choose_multiple(rng, 2).copied().collect();
    let (a, b) = (picked[0], picked[1]);
    let mut w = Work::from(tree);
    let ia = rng.gen_range(0..w.states[a].len());
    let ib = rng.gen_range(0..w.states[b].len());
    let xa = w.states[a][ia];
    w.states[a][ia] = w.states[b][ib];
    w.states[b][ib] = xa;
    w.finish(rng)
}

fn move_state<R: Rng + ?Sized>(tree: &InputTree, rng: &mut R) -> Option<InputTree> {
    if tree.len() < 2 || tree.n_states() == 0 {
        return None;
    }
    let x = rng.gen_range(0..tree.n_states());
    let src = tree.node_of_state(x)?;
    let mut dst = rng.gen_range(0..tree.len() - 1);
    if dst >= src {
        dst += 1;
    }
    let mut w = Work::from(tree);
    w.states[src].retain(|&s| s != x);
    w.states[dst].push(x);
    w.finish(rng)
}

fn move_subtree<R: Rng + ?Sized>(tree: &InputTree, rng: &mut R) -> Option<InputTree> {
    let v = rng.gen_range(0..tree.len());
    let current = tree.nodes()[v].parent;
    let mut targets: Vec<Option<usize>> = Vec::new();
    if current.is_some() {
        targets.push(None);
    }
    for w in 0..tree.len() {
        if w != v && !tree.is_descendant(w, v) && current != Some(w) {
            targets.push(Some(w));
        }
    }
    let &target = targets.choose(rng)?;
    let mut w = Work::from(tree);
    w.parent[v] = target;
    w.finish(rng)
}

fn couple<R: Rng + ?Sized>(tree: &InputTree, a: usize, b: usize, rng: &mut R) -> Option<InputTree> {
    let na = tree.node_of_input(a)?;
    let nb = tree.node_of_input(b)?;
    if na == nb {
        return None;
    }
    // The merged node takes the shallower position; an ancestor is always shallower.
    let (keep, gone) = if tree.depth(nb) < tree.depth(na) { (nb, na) } else { (na, nb) };
    let mut w = Work::from(tree);
    let moved_inputs = std::mem::take(&mut w.inputs[gone]);
    let moved_states = std::mem::take(&mut w.states[gone]);
    w.inputs[keep].extend(moved_inputs);
    w.states[keep].extend(moved_states);
    for c in 0..w.parent.len() {
        if w.parent[c] == Some(gone) {
            w.parent[c] = Some(keep);
        }
    }
    w.alive[gone] = false;
    w.finish(rng)
}

fn decouple<R: Rng + ?Sized>(tree: &InputTree, a: usize, b: usize, rng: &mut R) -> Option<InputTree> {
    let node = tree.node_of_input(a)?;
    if tree.node_of_input(b)? != node {
        return None;
    }
    let mut w = Work::from(tree);
    let new = w.parent.len();
    let (mut keep_in, mut new_in) = (vec![a], vec![b]);
    for &u in &tree.nodes()[node].inputs {
        if u != a && u != b {
            if rng.gen_bool(0.5) {
                keep_in.push(u);
            } else {
                new_in.push(u);
            }
        }
    }
    let (mut keep_x, mut new_x) = (Vec::new(), Vec::new());
    for &x in &tree.nodes()[node].states {
        if rng.gen_bool(0.5) {
            keep_x.push(x);
        } else {
            new_x.push(x);
        }
    }
    w.inputs[node] = keep_in;
    w.states[node] = keep_x;
    w.inputs.push(new_in);
    w.states.push(new_x);
    w.parent.push(tree.nodes()[node].parent);
    w.alive.push(true);
    for &c in &tree.nodes()[node].children {
        if rng.gen_bool(0.5) {
            w.parent[c] = Some(new);
        }
    }
    w.finish(rng)
}
