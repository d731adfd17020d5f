use super::InputTree;
use crate::error::Result;

/// Input-indexed encoding of an input-tree.
///
/// Row `j` of the connectivity matrix marks the other inputs sharing `u_j`'s
/// node and the inputs of that node's parent. Row `j` of the state-dependence
/// matrix marks the state variables held by `u_j`'s node. Both matrices are
/// independent of node numbering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeKey {
    m: usize,
    n: usize,
    connectivity: Vec<bool>,
    state_dependence: Vec<bool>,
}

impl TreeKey {
    pub fn of(tree: &InputTree) -> Result<Self> {
        tree.ensure_valid()?;
        Ok(Self::of_unchecked(tree))
    }

    /// Builds the key without validating; callers must pass a valid tree.
    pub(crate) fn of_unchecked(tree: &InputTree) -> Self {
        let m = tree.m_inputs();
        let n = tree.n_states();
        let mut connectivity = vec![false; m * m];
        let mut state_dependence = vec![false; m * n];
        for node in tree.nodes() {
            let parent_inputs: &[usize] = match node.parent {
                Some(p) => &tree.nodes()[p].inputs,
                None => &[],
            };
            for &j in &node.inputs {
                for &k in &node.inputs {
                    if k != j {
                        connectivity[j * m + k] = true;
                    }
                }
                for &k in parent_inputs {
                    connectivity[j * m + k] = true;
                }
                for &x in &node.states {
                    state_dependence[j * n + x] = true;
                }
            }
        }
        TreeKey {
            m,
            n,
            connectivity,
            state_dependence,
        }
    }

    pub fn m_inputs(&self) -> usize {
        self.m
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn connectivity(&self, row: usize, col: usize) -> bool {
        self.connectivity[row * self.m + col]
    }

    pub fn state_dependence(&self, row: usize, col: usize) -> bool {
        self.state_dependence[row * self.n + col]
    }

    /// Connectivity matrix as 0/1 rows.
    pub fn connectivity_rows(&self) -> Vec<Vec<u8>> {
        self.connectivity
            .chunks(self.m)
            .map(|r| r.iter().map(|&b| b as u8).collect())
            .collect()
    }

    /// State-dependence matrix as 0/1 rows.
    pub fn state_dependence_rows(&self) -> Vec<Vec<u8>> {
        if self.n == 0 {
            return vec![Vec::new(); self.m];
        }
        self.state_dependence
            .chunks(self.n)
            .map(|r| r.iter().map(|&b| b as u8).collect())
            .collect()
    }

    /// Canonical byte string: `m` and `n` as little-endian u16, then the bits
    /// of C followed by S in row-major order, packed MSB-first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let bits = self.connectivity.iter().chain(self.state_dependence.iter());
        let n_bits = self.connectivity.len() + self.state_dependence.len();
        let mut out = Vec::with_capacity(4 + n_bits.div_ceil(8));
        out.extend_from_slice(&(self.m as u16).to_le_bytes());
        out.extend_from_slice(&(self.n as u16).to_le_bytes());
        let mut byte = 0u8;
        for (i, &b) in bits.enumerate() {
            if b {
                byte |= 0x80 >> (i % 8);
            }
            if i % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        if !n_bits.is_multiple_of(8) {
            out.push(byte);
        }
        out
    }
}

impl InputTree {
    /// Memoization key of a valid tree.
    pub fn key(&self) -> Result<TreeKey> {
        TreeKey::of(self)
    }
}
