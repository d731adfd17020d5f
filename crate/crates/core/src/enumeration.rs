//! Counting, exhaustive enumeration and uniform sampling of input-trees.
//!
//! A decomposition splits the `m` inputs into `r >= 2` groups, arranges the
//! groups as a rooted forest under the virtual root (encoded as a Prüfer code
//! on `r + 1` labels, the last one being the root), and assigns every state
//! variable to a group so that no leaf is empty. The single-node undecomposed
//! tree is not counted as a decomposition.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::input_tree::InputTree;

/// Default refusal threshold for [`enumerate_all`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of surjections from an `a`-set onto a `b`-set.
pub fn surjections(a: u32, b: u32) -> BigUint {
    if b == 0 {
        return if a == 0 { BigUint::one() } else { BigUint::zero() };
    }
    let mut acc = BigInt::zero();
    for c in 0..b {
        let term = BigInt::from(binomial(b as u64, c as u64)) * BigInt::from(b - c).pow(a);
        if c % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc.to_biguint().expect("surjection count is non-negative")
}

fn factorial(n: u32) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, i| acc * i)
}

/// Ways to split `m` labelled inputs into exactly `r` unlabelled groups.
pub fn input_partitions(m: u32, r: u32) -> BigUint {
    surjections(m, r) / factorial(r)
}

/// Rooted forests on `r` labelled groups with exactly `k` leaves.
pub fn forest_shapes(r: u32, k: u32) -> BigUint {
    if k == 0 || k > r {
        return BigUint::zero();
    }
    binomial(r as u64, k as u64) * (surjections(r - 1, r - k) + surjections(r - 1, r - k + 1))
}

/// Assignments of `n` states to a forest of `r` groups with `k` leaves such
/// that every leaf receives at least one state.
pub fn state_assignments(n: u32, r: u32, k: u32) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    (0..=n - k)
        .map(|i| binomial(n as u64, i as u64) * surjections(n - i, k) * BigUint::from(r - k).pow(i))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RkCount {
    pub r: u32,
    pub k: u32,
    #[serde(serialize_with = "ser_big")]
    pub count: BigUint,
}

/// Decomposition count `N(n, m)` with its per-(groups, leaves) contributions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecompositionCount {
    pub n: u32,
    pub m: u32,
    #[serde(serialize_with = "ser_big")]
    pub total: BigUint,
    pub per_r_k: Vec<RkCount>,
}

fn ser_big<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl DecompositionCount {
    /// Contribution of all trees with `r` input groups.
    pub fn for_groups(&self, r: u32) -> BigUint {
        self.per_r_k.iter().filter(|e| e.r == r).map(|e| e.count.clone()).sum()
    }
}

pub fn count_decompositions(n: u32, m: u32) -> Result<DecompositionCount> {
    if m < 2 {
        return Err(Error::NoDecompositions { m: m as usize });
    }
    let mut per_r_k = Vec::new();
    for r in 2..=m {
        let partitions = input_partitions(m, r);
        for k in 1..=r {
            let count = &partitions * forest_shapes(r, k) * state_assignments(n, r, k);
            per_r_k.push(RkCount { r, k, count });
        }
    }
    let total = per_r_k.iter().map(|e| e.count.clone()).sum();
    Ok(DecompositionCount { n, m, total, per_r_k })
}

/// All set partitions of `0..m` into exactly `r` blocks, as restricted-growth
/// strings (block label per element).
fn partitions_rgs(m: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, used: usize, m: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m - i < r - used {
            return;
        }
        if i == m {
            if used == r {
                out.push(cur.clone());
            }
            return;
        }
        for label in 0..used {
            cur.push(label);
            rec(i + 1, used, m, r, cur, out);
            cur.pop();
        }
        if used < r {
            cur.push(used);
            rec(i + 1, used + 1, m, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, 0, m, r, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Decodes a Prüfer code over labels `0..=r` (label `r` is the virtual root)
/// into parent links for the `r` group nodes.
fn prufer_to_parents(code: &[usize], r: usize) -> Vec<Option<usize>> {
    let n_vertices = r + 1;
    debug_assert_eq!(code.len() + 2, n_vertices);
    let mut degree = vec![1usize; n_vertices];
    for &c in code {
        degree[c] += 1;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_vertices];
    for &c in code {
        let leaf = (0..n_vertices).find(|&v| degree[v] == 1).expect("a leaf exists");
        adj[leaf].push(c);
        adj[c].push(leaf);
        degree[leaf] -= 1;
        degree[c] -= 1;
    }
    let rest: Vec<usize> = (0..n_vertices).filter(|&v| degree[v] == 1).collect();
    adj[rest[0]].push(rest[1]);
    adj[rest[1]].push(rest[0]);

    let mut parent = vec![None; r];
    let mut seen = vec![false; n_vertices];
    let mut queue = std::collections::VecDeque::from([r]);
    seen[r] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = if v == r { None } else { Some(v) };
                queue.push_back(w);
            }
        }
    }
    parent
}

fn build_tree(n: usize, m: usize, blocks: &[usize], parents: &[Option<usize>], labels: &[usize]) -> InputTree {
    let r = parents.len();
    let parts = (0..r)
        .map(|g| {
            let inputs = (0..m).filter(|&u| blocks[u] == g).collect();
            let states = (0..n).filter(|&x| labels[x] == g).collect();
            (inputs, states, parents[g])
        })
        .collect();
    InputTree::from_parts(n, m, parts).canonical()
}

/// Lazily yields every decomposition of an `(n, m)` system exactly once.
pub struct Enumeration {
    n: usize,
    m: usize,
    skeletons: Vec<(Vec<usize>, Vec<Option<usize>>, Vec<bool>)>,
    skeleton: usize,
    labels: Vec<usize>,
    started: bool,
}

impl Enumeration {
    fn advance_labels(&mut self) -> bool {
        let r = self.skeletons[self.skeleton].1.len();
        for x in 0..self.n {
            self.labels[x] += 1;
            if self.labels[x] < r {
                return true;
            }
            self.labels[x] = 0;
        }
        false
    }
}

impl Iterator for Enumeration {
    type Item = InputTree;

    fn next(&mut self) -> Option<InputTree> {
        loop {
            if self.skeleton >= self.skeletons.len() {
                return None;
            }
            if self.started {
                if !self.advance_labels() {
                    self.skeleton += 1;
                    self.labels.iter_mut().for_each(|l| *l = 0);
                    self.started = false;
                    continue;
                }
            } else {
                self.started = true;
            }
            let (blocks, parents, is_leaf) = &self.skeletons[self.skeleton];
            let leaves_filled = is_leaf
                .iter()
                .enumerate()
                .filter(|&(_, &leaf)| leaf)
                .all(|(g, _)| self.labels.contains(&g));
            if leaves_filled {
                return Some(build_tree(self.n, self.m, blocks, parents, &self.labels));
            }
        }
    }
}

/// Streams all decompositions. Refuses when `N(n, m)` exceeds `cap`.
pub fn enumerate_all(n: usize, m: usize, cap: u64) -> Result<Enumeration> {
    let count = count_decompositions(n as u32, m as u32)?;
    if count.total > BigUint::from(cap) {
        return Err(Error::EnumerationCap {
            count: count.total.to_string(),
            cap,
        });
    }
    let mut skeletons = Vec::new();
    for r in 2..=m {
        let shapes: Vec<Vec<Option<usize>>> = prufer_codes(r).map(|code| prufer_to_parents(&code, r)).collect();
        for blocks in partitions_rgs(m, r) {
            for parents in &shapes {
                let mut is_leaf = vec![true; r];
                for p in parents.iter().flatten() {
                    is_leaf[*p] = false;
                }
                skeletons.push((blocks.clone(), parents.clone(), is_leaf));
            }
        }
    }
    Ok(Enumeration {
        n,
        m,
        skeletons,
        skeleton: 0,
        labels: vec![0; n],
        started: false,
    })
}

/// All sequences of length `r - 1` over `0..=r`.
fn prufer_codes(r: usize) -> impl Iterator<Item = Vec<usize>> {
    let len = r - 1;
    let base = r + 1;
    let total = base.pow(len as u32);
    (0..total).map(move |mut idx| {
        let mut code = vec![0; len];
        for slot in code.iter_mut() {
            *slot = idx % base;
            idx /= base;
        }
        code
    })
}

/// Uniformly samples one of the `r`-block partitions of `0..m` by unranking
/// restricted-growth strings.
fn sample_partition<R: Rng + ?Sized>(m: usize, r: usize, rng: &mut R) -> Vec<usize> {
    // completions[i][j]: ways to label positions i.. given j blocks opened.
    let mut completions = vec![vec![0u128; r + 2]; m + 1];
    completions[m][r] = 1;
    for i in (0..m).rev() {
        for j in 0..=r {
            let reuse = j as u128 * completions[i + 1][j];
            let open = if j < r { completions[i + 1][j + 1] } else { 0 };
            completions[i][j] = reuse + open;
        }
    }
    let mut index = rng.gen_range(0..completions[0][0]);
    let mut labels = Vec::with_capacity(m);
    let mut used = 0;
    for i in 0..m {
        let per_label = completions[i + 1][used];
        let reuse_total = used as u128 * per_label;
        if index < reuse_total {
            labels.push((index / per_label) as usize);
            index %= per_label;
        } else {
            index -= reuse_total;
            labels.push(used);
            used += 1;
        }
    }
    labels
}

fn weights_of(values: &[BigUint]) -> Vec<f64> {
    let max = values.iter().max().cloned().unwrap_or_default();
    let max_f = max.to_f64().unwrap_or(f64::MAX);
    values
        .iter()
        .map(|v| {
            let f = v.to_f64().unwrap_or(f64::MAX);
            if max_f.is_finite() && max_f > 0.0 { f / max_f } else { f }
        })
        .collect()
}

/// Draws one decomposition uniformly from all `N(n, m)`.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<InputTree> {
    if m < 2 {
        return Err(Error::NoDecompositions { m });
    }
    if n == 0 {
        return Err(Error::InvalidTree("a system needs at least one state".into()));
    }
    let count = count_decompositions(n as u32, m as u32)?;

    // Number of groups, proportional to the outer summand.
    let rs: Vec<u32> = (2..=m as u32).collect();
    let r_weights = weights_of(&rs.iter().map(|&r| count.for_groups(r)).collect::<Vec<_>>());
    let r = rs[WeightedIndex::new(&r_weights).expect("some r has decompositions").sample(rng)] as usize;

    let blocks = sample_partition(m, r, rng);

    // Leaf count, proportional to the inner summand.
    let ks: Vec<u32> = (1..=r as u32).collect();
    let k_weights = weights_of(
        &ks.iter()
            .map(|&k| forest_shapes(r as u32, k) * state_assignments(n as u32, r as u32, k))
            .collect::<Vec<_>>(),
    );
    let k = ks[WeightedIndex::new(&k_weights).expect("some k is feasible").sample(rng)] as usize;

    let parents = sample_forest(r, k, rng);
    let mut is_leaf = vec![true; r];
    for p in parents.iter().flatten() {
        is_leaf[*p] = false;
    }
    let labels = loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..r)).collect();
        if (0..r).filter(|&g| is_leaf[g]).all(|g| labels.contains(&g)) {
            break labels;
        }
    };
    Ok(build_tree(n, m, &blocks, &parents, &labels))
}

/// Uniform rooted forest on `r` labelled groups with exactly `k` leaves: the
/// Prüfer code uses exactly the `r - k` non-leaf group labels, plus possibly
/// the root label.
fn sample_forest<R: Rng + ?Sized>(r: usize, k: usize, rng: &mut R) -> Vec<Option<usize>> {
    let len = r - 1;
    let mut non_leaves: Vec<usize> = sample_indices(rng, r, r - k).into_vec();
    let without_root = surjections(len as u32, (r - k) as u32);
    let with_root = surjections(len as u32, (r - k + 1) as u32);
    let w = weights_of(&[without_root, with_root]);
    if WeightedIndex::new(&w).expect("forest exists").sample(rng) == 1 {
        non_leaves.push(r);
    }
    let symbols = non_leaves;
    let code = loop {
        let code: Vec<usize> = (0..len).map(|_| symbols[rng.gen_range(0..symbols.len())]).collect();
        if symbols.iter().all(|s| code.contains(s)) {
            break code;
        }
    };
    prufer_to_parents(&code, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    /// Onto maps from `0..a` to `0..b` by brute force.
    fn surjections_brute(a: u32, b: u32) -> u64 {
        let total = (b as u64).pow(a);
        (0..total)
            .filter(|&idx| {
                let mut hit = vec![false; b as usize];
                let mut i = idx;
                for _ in 0..a {
                    hit[(i % b as u64) as usize] = true;
                    i /= b as u64;
                }
                hit.iter().all(|&h| h)
            })
            .count() as u64
    }

    #[test]
    fn surjection_values() {
        for a in 1..7 {
            assert_eq!(surjections(a, 1), BigUint::one());
            assert_eq!(surjections(a, a), factorial(a));
        }
        assert_eq!(surjections(3, 2), BigUint::from(6u32));
        assert_eq!(surjections(0, 0), BigUint::one());
        assert_eq!(surjections(3, 0), BigUint::zero());
        assert_eq!(surjections(2, 3), BigUint::zero());
        for a in 1..6 {
            for b in 1..5 {
                assert_eq!(surjections(a, b), BigUint::from(surjections_brute(a, b)), "({a},{b})");
            }
        }
    }

    #[test]
    fn small_counts() {
        assert_eq!(count_decompositions(1, 2).unwrap().total, BigUint::from(2u32));
        assert_eq!(count_decompositions(2, 2).unwrap().total, BigUint::from(8u32));
        assert!(matches!(count_decompositions(3, 1), Err(Error::NoDecompositions { m: 1 })));
        let c = count_decompositions(4, 3).unwrap();
        let sum: BigUint = c.per_r_k.iter().map(|e| e.count.clone()).sum();
        assert_eq!(sum, c.total);
    }

    #[test]
    fn forest_shapes_match_prufer_enumeration() {
        for r in 2..6usize {
            let mut by_leaves = HashMap::new();
            for code in prufer_codes(r) {
                let parents = prufer_to_parents(&code, r);
                let mut leaf = vec![true; r];
                for p in parents.iter().flatten() {
                    leaf[*p] = false;
                }
                *by_leaves.entry(leaf.iter().filter(|&&l| l).count()).or_insert(0u64) += 1;
            }
            for k in 1..=r {
                assert_eq!(
                    forest_shapes(r as u32, k as u32),
                    BigUint::from(*by_leaves.get(&k).unwrap_or(&0)),
                    "r={r} k={k}"
                );
            }
        }
    }

    #[test]
    fn enumeration_small_cases() {
        let trees: Vec<_> = enumerate_all(1, 2, 100).unwrap().collect();
        assert_eq!(trees.len(), 2);
        for t in &trees {
            assert_eq!(t.len(), 2, "{t}");
            assert!(t.is_valid());
        }
        let keys: HashSet<_> = enumerate_all(2, 2, 100).unwrap().map(|t| t.key().unwrap().to_bytes()).collect();
        assert_eq!(keys.len(), 8);
    }

    #[test]
    fn enumeration_respects_cap() {
        match enumerate_all(4, 4, 1000) {
            Err(Error::EnumerationCap { count, cap }) => {
                assert_eq!(count, "19388");
                assert_eq!(cap, 1000);
            }
            other => panic!("{:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn partition_sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..15_000 {
            *counts.entry(sample_partition(4, 2, &mut rng)).or_default() += 1;
        }
        // S(4,2) = 7 partitions, expected ~2143 each.
        assert_eq!(counts.len(), 7);
        for c in counts.values() {
            assert!((*c as f64 - 15_000.0 / 7.0).abs() < 200.0, "{counts:?}");
        }
    }

    #[test]
    fn samples_are_valid_and_seed_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| sample_uniform(5, 4, &mut rng).unwrap().to_string()).collect::<Vec<_>>()
        };
        let a = draw(9);
        assert_eq!(a, draw(9));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let t = sample_uniform(3, 4, &mut rng).unwrap();
            assert!(t.is_valid(), "{t}");
            assert!(!t.is_undecomposed());
        }
    }

    #[test]
    fn one_state_two_inputs_only_cascades() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts: HashMap<String, usize> = HashMap::new();
        for _ in 0..4000 {
            *counts.entry(sample_uniform(1, 2, &mut rng).unwrap().to_string()).or_default() += 1;
        }
        assert_eq!(counts.len(), 2, "{counts:?}");
        for c in counts.values() {
            assert!((*c as f64 - 2000.0).abs() < 3.0 * 1000f64.sqrt(), "{counts:?}");
        }
    }
}
