#![allow(dead_code)]

use decomp_core::enumeration::enumerate_all;
use decomp_core::lqr::{DecompositionMetrics, FitnessEvaluator};
use decomp_core::search::{rank, Candidate};
use decomp_core::systems::{linear_model, SystemModel};
use decomp_core::InputTree;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best decomposition by brute force, scored without any cache.
pub fn exhaustive_best(evaluator: &FitnessEvaluator) -> (InputTree, DecompositionMetrics, usize) {
    let (n, m) = (evaluator.n_states(), evaluator.m_inputs());
    let mut best: Option<Candidate> = None;
    let mut count = 0;
    for tree in enumerate_all(n, m, 100_000).unwrap() {
        count += 1;
        let metrics = evaluator.evaluate(&tree).unwrap();
        let key = tree.key().unwrap().to_bytes();
        let c = Candidate { tree, key, metrics };
        if best.as_ref().is_none_or(|b| rank(&c, b).is_lt()) {
            best = Some(c);
        }
    }
    let b = best.unwrap();
    (b.tree, b.metrics, count)
}

/// A random coupled linear system with `n` states and `m` inputs.
pub fn random_linear(n: usize, m: usize, seed: u64) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |i, j| {
        let v: f64 = rng.gen_range(-1.0..1.0);
        if i == j { v - 0.5 } else { 0.6 * v }
    });
    let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let mut model = linear_model(&format!("random-{n}x{m}-{seed}"), a, b);
    model.discount = 0.5;
    model
}

/// A decomposition described only by input membership: sorted
/// `(inputs, states, parent inputs)` triples.
pub type Signature = Vec<(Vec<usize>, Vec<usize>, Option<Vec<usize>>)>;

pub fn signature(tree: &InputTree) -> Signature {
    let nodes = tree.nodes();
    let mut sig: Signature = nodes
        .iter()
        .map(|n| (n.inputs.clone(), n.states.clone(), n.parent.map(|p| nodes[p].inputs.clone())))
        .collect();
    sig.sort();
    sig
}

/// Set partitions of `0..m` as restricted-growth strings.
fn partitions(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; m];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur[i] = b;
            rec(i + 1, max.max(b), cur, out);
        }
    }
    if m > 0 {
        rec(1, 0, &mut cur, &mut out);
    }
    out
}

/// Every decomposition of an `n`-state, `m`-input system by brute force over
/// input partitions, parent maps and state labellings, without using the
/// library's validator. The undecomposed tree is excluded.
pub fn brute_force_decompositions(n: usize, m: usize) -> Vec<Signature> {
    let mut out = Vec::new();
    for rgs in partitions(m) {
        let r = rgs.iter().max().unwrap() + 1;
        if r < 2 {
            continue;
        }
        let groups: Vec<Vec<usize>> = (0..r).map(|g| (0..m).filter(|&u| rgs[u] == g).collect()).collect();
        // parent[g] == r means the virtual root.
        for pcode in 0..(r + 1).pow(r as u32) {
            let parent: Vec<usize> = (0..r).map(|g| pcode / (r + 1).pow(g as u32) % (r + 1)).collect();
            let acyclic = (0..r).all(|g| {
                let mut cur = g;
                for _ in 0..=r {
                    if cur == r {
                        return true;
                    }
                    cur = parent[cur];
                }
                false
            });
            if !acyclic {
                continue;
            }
            let leaf: Vec<bool> = (0..r).map(|g| !parent.contains(&g)).collect();
            for scode in 0..r.pow(n as u32) {
                let label: Vec<usize> = (0..n).map(|x| scode / r.pow(x as u32) % r).collect();
                if (0..r).any(|g| leaf[g] && !label.contains(&g)) {
                    continue;
                }
                let mut sig: Signature = (0..r)
                    .map(|g| {
                        let states = (0..n).filter(|&x| label[x] == g).collect();
                        let p = (parent[g] < r).then(|| groups[parent[g]].clone());
                        (groups[g].clone(), states, p)
                    })
                    .collect();
                sig.sort();
                out.push(sig);
            }
        }
    }
    out
}
