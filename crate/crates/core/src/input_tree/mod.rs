//! Input-trees: the representation of a policy decomposition.
//!
//! Every node of an input-tree (besides the implicit virtual root) holds a
//! disjoint group of inputs and a disjoint group of state variables. Inputs on
//! the same branch are cascaded, inputs on sibling branches are decoupled. The
//! subsystem that a node solves spans the state variables of its whole
//! sub-tree.
//!
//! Indices are zero-based everywhere in code; the text notation uses the
//! one-based labels `u1..um` and `x1..xn`.

mod key;
mod mutate;
mod notation;

pub use key::TreeKey;
pub use mutate::{apply_op, mutate, mutate_traced, MutationOp, MUTATION_RETRIES};
pub use notation::{parse_tree, parse_tree_sized};

use crate::error::{Error, Result};

/// One non-root node of an input-tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub inputs: Vec<usize>,
    pub states: Vec<usize>,
    /// `None` means the node hangs off the virtual root.
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// A decomposition of a system with `n_states` states and `m_inputs` inputs.
///
/// Node ids are positions in [`InputTree::nodes`]. Trees are immutable once
/// built; every edit produces a new tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputTree {
    n_states: usize,
    m_inputs: usize,
    nodes: Vec<TreeNode>,
}

/// Result of [`InputTree::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

/// The subsystem characterised by the sub-tree below one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsystem {
    pub node: usize,
    /// Inputs optimised at this node.
    pub inputs: Vec<usize>,
    /// Union of the state sets over the sub-tree, ascending.
    pub states: Vec<usize>,
    /// Complement inputs whose policies are substituted (strictly below the node).
    pub cascaded: Vec<usize>,
    /// Complement inputs frozen at their goal value.
    pub decoupled: Vec<usize>,
    /// Complement states, held at the goal.
    pub fixed_states: Vec<usize>,
}

impl InputTree {
    /// Builds a tree from `(inputs, states, parent)` triples. Children lists
    /// are derived from the parent links. No validation is performed; call
    /// [`InputTree::validate`] or use [`InputTree::try_new`].
    pub fn from_parts(
        n_states: usize,
        m_inputs: usize,
        parts: Vec<(Vec<usize>, Vec<usize>, Option<usize>)>,
    ) -> Self {
        let mut nodes: Vec<TreeNode> = parts
            .into_iter()
            .map(|(mut inputs, mut states, parent)| {
                inputs.sort_unstable();
                states.sort_unstable();
                TreeNode {
                    inputs,
                    states,
                    parent,
                    children: Vec::new(),
                }
            })
            .collect();
        for id in 0..nodes.len() {
            if let Some(p) = nodes[id].parent {
                if p < nodes.len() {
                    nodes[p].children.push(id);
                }
            }
        }
        InputTree {
            n_states,
            m_inputs,
            nodes,
        }
    }

    /// Like [`InputTree::from_parts`], but rejects trees that fail validation.
    pub fn try_new(
        n_states: usize,
        m_inputs: usize,
        parts: Vec<(Vec<usize>, Vec<usize>, Option<usize>)>,
    ) -> Result<Self> {
        let tree = Self::from_parts(n_states, m_inputs, parts);
        tree.ensure_valid()?;
        Ok(tree)
    }

    /// The undecomposed system: one node holding every input and state.
    pub fn undecomposed(n_states: usize, m_inputs: usize) -> Self {
        Self::from_parts(
            n_states,
            m_inputs,
            vec![((0..m_inputs).collect(), (0..n_states).collect(), None)],
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn m_inputs(&self) -> usize {
        self.m_inputs
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Result<&TreeNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes attached to the virtual root.
    pub fn root_children(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].parent.is_none())
            .collect()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// True for the single-node tree that couples every input.
    pub fn is_undecomposed(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Node holding input `u`.
    pub fn node_of_input(&self, u: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.inputs.contains(&u))
    }

    /// Node holding state variable `x`.
    pub fn node_of_state(&self, x: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.states.contains(&x))
    }

    /// Number of edges between `id` and the virtual root (root children have depth 1).
    pub fn depth(&self, id: usize) -> usize {
        let mut d = 1;
        let mut cur = self.nodes[id].parent;
        while let Some(p) = cur {
            d += 1;
            cur = self.nodes[p].parent;
        }
        d
    }

    /// All nodes strictly below `id`, in pre-order.
    pub fn descendants(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.nodes[id].children.iter().rev().copied().collect();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.nodes[c].children.iter().rev().copied());
        }
        out
    }

    /// True when `a` lies strictly below `b`.
    pub fn is_descendant(&self, a: usize, b: usize) -> bool {
        let mut cur = self.nodes[a].parent;
        while let Some(p) = cur {
            if p == b {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    /// Child-first (post-order) node ordering: every node appears after all
    /// of its descendants, siblings in canonical order.
    pub fn child_first_order(&self) -> Vec<usize> {
        fn visit(tree: &InputTree, id: usize, out: &mut Vec<usize>) {
            for &c in &tree.nodes[id].children {
                visit(tree, c, out);
            }
            out.push(id);
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        for r in self.root_children() {
            visit(self, r, &mut out);
        }
        out
    }

    /// The subsystem solved at `node`.
    pub fn subsystem_of(&self, node: usize) -> Result<Subsystem> {
        let this = self.node(node)?;
        let below = self.descendants(node);
        let mut states: Vec<usize> = this.states.clone();
        let mut cascaded = Vec::new();
        for &d in &below {
            states.extend_from_slice(&self.nodes[d].states);
            cascaded.extend_from_slice(&self.nodes[d].inputs);
        }
        states.sort_unstable();
        cascaded.sort_unstable();
        let decoupled = (0..self.m_inputs)
            .filter(|u| !this.inputs.contains(u) && !cascaded.contains(u))
            .collect();
        let fixed_states = (0..self.n_states).filter(|x| !states.contains(x)).collect();
        Ok(Subsystem {
            node,
            inputs: this.inputs.clone(),
            states,
            cascaded,
            decoupled,
            fixed_states,
        })
    }

    /// Checks every structural rule and reports the first violation.
    pub fn validate(&self) -> Validation {
        match self.first_violation() {
            None => Validation {
                valid: true,
                diagnostics: Vec::new(),
            },
            Some(msg) => Validation {
                valid: false,
                diagnostics: vec![msg],
            },
        }
    }

    pub fn is_valid(&self) -> bool {
        self.first_violation().is_none()
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        match self.first_violation() {
            None => Ok(()),
            Some(msg) => Err(Error::InvalidTree(msg)),
        }
    }

    fn first_violation(&self) -> Option<String> {
        let n_nodes = self.nodes.len();
        if n_nodes == 0 {
            return Some("tree has no nodes".into());
        }
        if self.m_inputs == 0 {
            return Some("system has no inputs".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if node.inputs.is_empty() {
                return Some(format!("node {id} has an empty input set"));
            }
            if let Some(p) = node.parent {
                if p >= n_nodes {
                    return Some(format!("node {id} has unknown parent {p}"));
                }
                if p == id {
                    return Some(format!("node {id} is its own parent"));
                }
                if !self.nodes[p].children.contains(&id) {
                    return Some(format!("node {id} missing from children of its parent {p}"));
                }
            }
            for &c in &node.children {
                if c >= n_nodes || self.nodes[c].parent != Some(id) {
                    return Some(format!("child link {id} -> {c} is not mirrored by a parent link"));
                }
            }
            if let Some(&u) = node.inputs.iter().find(|&&u| u >= self.m_inputs) {
                return Some(format!("node {id} references input {u} outside 0..{}", self.m_inputs));
            }
            if let Some(&x) = node.states.iter().find(|&&x| x >= self.n_states) {
                return Some(format!("node {id} references state {x} outside 0..{}", self.n_states));
            }
        }
        // Every parent chain must reach the virtual root.
        for id in 0..n_nodes {
            let mut cur = self.nodes[id].parent;
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > n_nodes {
                    return Some(format!("cycle through node {id}"));
                }
                cur = self.nodes[p].parent;
            }
        }
        let mut input_owner = vec![None; self.m_inputs];
        let mut state_owner = vec![None; self.n_states];
        for (id, node) in self.nodes.iter().enumerate() {
            for &u in &node.inputs {
                if let Some(other) = input_owner[u] {
                    return Some(format!("input u{} appears in nodes {other} and {id}", u + 1));
                }
                input_owner[u] = Some(id);
            }
            for &x in &node.states {
                if let Some(other) = state_owner[x] {
                    return Some(format!("state x{} appears in nodes {other} and {id}", x + 1));
                }
                state_owner[x] = Some(id);
            }
        }
        if let Some(u) = input_owner.iter().position(Option::is_none) {
            return Some(format!("input u{} is not assigned to any node", u + 1));
        }
        if let Some(x) = state_owner.iter().position(Option::is_none) {
            return Some(format!("state x{} is not assigned to any node", x + 1));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if node.children.is_empty() && node.states.is_empty() {
                return Some(format!("leaf node {id} has no state variables"));
            }
        }
        None
    }

    /// Canonical form: inputs and states ascending, children ordered by their
    /// smallest input, nodes renumbered in pre-order.
    pub fn canonical(&self) -> InputTree {
        let min_input = |id: usize| self.nodes[id].inputs.first().copied().unwrap_or(usize::MAX);
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut roots = self.root_children();
        roots.sort_by_key(|&r| min_input(r));
        let mut stack: Vec<usize> = roots.into_iter().rev().collect();
        while let Some(id) = stack.pop() {
            order.push(id);
            let mut ch = self.nodes[id].children.clone();
            ch.sort_by_key(|&c| min_input(c));
            stack.extend(ch.into_iter().rev());
        }
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let parts = order
            .iter()
            .map(|&old| {
                let n = &self.nodes[old];
                (n.inputs.clone(), n.states.clone(), n.parent.map(|p| new_id[p]))
            })
            .collect();
        // Children are pushed in new-id order, which is the sorted pre-order.
        InputTree::from_parts(self.n_states, self.m_inputs, parts)
    }

    /// Parameter count of the lookup tables for this decomposition:
    /// sum over nodes of `|u_i| * prod(points over x_i)`.
    pub fn parameter_count(&self, points: &[usize]) -> u128 {
        (0..self.nodes.len())
            .map(|id| {
                let sub = self.subsystem_of(id).expect("node exists");
                let cells: u128 = sub.states.iter().map(|&x| points[x] as u128).product();
                sub.inputs.len() as u128 * cells
            })
            .sum()
    }
}

impl std::fmt::Display for InputTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&notation::format_tree(self))
    }
}

impl std::str::FromStr for InputTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_tree(s)
    }
}
