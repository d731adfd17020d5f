use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ga::offspring;
use super::{check_searchable, Candidate, Method, Progress, SearchConfig, SearchContext};
use crate::enumeration::sample_uniform;
use crate::error::Result;
use crate::input_tree::InputTree;

/// `a` is no worse in both `(F_err, F_comp)` and strictly better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

fn objectives(c: &Candidate) -> (f64, f64) {
    (c.metrics.f_err, c.metrics.f_comp)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoMember {
    pub tree: String,
    pub f_err: f64,
    pub f_comp: f64,
    #[serde(serialize_with = "crate::lqr::ser_extended")]
    pub err_lqr: f64,
    pub parameter_count: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoFront {
    pub model: String,
    pub seed: u64,
    pub generations: u64,
    pub unique: usize,
    /// Mutually non-dominated, by increasing `F_err`.
    pub members: Vec<ParetoMember>,
}

/// Non-dominated fronts, best first, as index lists into `pop`.
fn non_dominated_sort(pop: &[Candidate]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let obj: Vec<(f64, f64)> = pop.iter().map(objectives).collect();
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(obj[i], obj[j]) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        fronts.push(current);
        current = next;
    }
    fronts
}

fn crowding(pop: &[Candidate], front: &[usize]) -> Vec<f64> {
    let mut dist = vec![0.0; front.len()];
    if front.len() <= 2 {
        return vec![f64::INFINITY; front.len()];
    }
    for k in 0..2 {
        let value = |i: usize| if k == 0 { pop[front[i]].metrics.f_err } else { pop[front[i]].metrics.f_comp };
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let (lo, hi) = (value(order[0]), value(order[front.len() - 1]));
        dist[order[0]] = f64::INFINITY;
        dist[order[front.len() - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..front.len() - 1 {
                dist[order[w]] += (value(order[w + 1]) - value(order[w - 1])) / (hi - lo);
            }
        }
    }
    dist
}

/// Rank and crowding distance per member of `pop`.
fn assign(pop: &[Candidate]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in non_dominated_sort(pop).iter().enumerate() {
        for (k, d) in front.iter().zip(crowding(pop, front)) {
            rank[*k] = r;
            crowd[*k] = d;
        }
    }
    (rank, crowd)
}

fn crowded_cmp(a: usize, b: usize, rank: &[usize], crowd: &[f64]) -> Ordering {
    rank[a].cmp(&rank[b]).then(crowd[b].total_cmp(&crowd[a]))
}

/// NSGA-II over `(F_err, F_comp)` with the GA mutation operators. The
/// undecomposed tree seeds the population. Every evaluated decomposition is
/// archived and the returned front is the non-dominated set of the archive.
pub fn run_pareto(ctx: &SearchContext, config: &SearchConfig) -> Result<ParetoFront> {
    config.validate()?;
    check_searchable(ctx)?;
    let (n, m) = (ctx.n_states(), ctx.m_inputs());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut progress = Progress::new(config, Method::Pareto);
    let size = config.population;

    let mut archive: HashMap<Vec<u8>, Candidate> = HashMap::new();
    let mut trees = vec![InputTree::undecomposed(n, m)];
    for _ in 1..size {
        trees.push(sample_uniform(n, m, &mut rng)?);
    }
    let mut pop = dedup(ctx.evaluate_all(trees, config.deterministic)?);
    for c in &pop {
        archive.entry(c.key.clone()).or_insert_with(|| c.clone());
    }

    while !progress.done() {
        let (rank, crowd) = assign(&pop);
        let mut children = Vec::with_capacity(size);
        for _ in 0..size {
            let a = rng.gen_range(0..pop.len());
            let b = rng.gen_range(0..pop.len());
            let parent = if crowded_cmp(b, a, &rank, &crowd).is_lt() { b } else { a };
            children.push(offspring(&pop[parent].tree, &mut rng));
        }
        let children = ctx.evaluate_all(children, config.deterministic)?;
        for c in &children {
            archive.entry(c.key.clone()).or_insert_with(|| c.clone());
        }
        let mut merged = pop;
        merged.extend(children);
        let merged = dedup(merged);

        let mut next = Vec::with_capacity(size);
        for front in non_dominated_sort(&merged) {
            if next.len() + front.len() <= size {
                next.extend(front.iter().map(|&i| merged[i].clone()));
                continue;
            }
            let d = crowding(&merged, &front);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then_with(|| merged[front[a]].key.cmp(&merged[front[b]].key)));
            for &k in order.iter().take(size - next.len()) {
                next.push(merged[front[k]].clone());
            }
            break;
        }
        pop = next;
        progress.steps += 1;
    }

    let mut all: Vec<Candidate> = archive.into_values().collect();
    all.sort_by(|a, b| a.key.cmp(&b.key));
    let first = non_dominated_sort(&all).into_iter().next().unwrap_or_default();
    let mut members: Vec<&Candidate> = first.iter().map(|&i| &all[i]).collect();
    members.sort_by(|a, b| {
        a.metrics
            .f_err
            .total_cmp(&b.metrics.f_err)
            .then(a.metrics.f_comp.total_cmp(&b.metrics.f_comp))
            .then_with(|| a.key.cmp(&b.key))
    });
    Ok(ParetoFront {
        model: ctx.model_name.clone(),
        seed: config.seed,
        generations: progress.steps,
        unique: ctx.memo.unique(),
        members: members
            .into_iter()
            .map(|c| ParetoMember {
                tree: c.tree.to_string(),
                f_err: c.metrics.f_err,
                f_comp: c.metrics.f_comp,
                err_lqr: c.metrics.err_lqr,
                parameter_count: c.tree.parameter_count(&ctx.points),
            })
            .collect(),
    })
}

/// Drops repeated decompositions, keeping first occurrences.
fn dedup(pop: Vec<Candidate>) -> Vec<Candidate> {
    let mut seen = HashSet::new();
    pop.into_iter().filter(|c| seen.insert(c.key.clone())).collect()
}
