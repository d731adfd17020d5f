use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_searchable, rank, Candidate, Method, Progress, SearchConfig, SearchContext, SearchReport};
use crate::enumeration::sample_uniform;
use crate::error::Result;
use crate::input_tree::{mutate, InputTree};

/// Tournament pick: the best of `size` uniform draws.
pub(crate) fn tournament<'a, R: Rng>(pop: &'a [Candidate], size: usize, rng: &mut R) -> &'a Candidate {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..size {
        let other = &pop[rng.gen_range(0..pop.len())];
        if rank(other, best).is_lt() {
            best = other;
        }
    }
    best
}

/// A mutated copy of `parent`, never the undecomposed tree.
pub(crate) fn offspring<R: Rng>(parent: &InputTree, rng: &mut R) -> InputTree {
    let child = mutate(parent, rng);
    if child.is_undecomposed() {
        parent.clone()
    } else {
        child
    }
}

/// Genetic search: uniformly sampled initial population, tournament
/// selection, elitism and single-operator mutation.
pub fn run_ga(ctx: &SearchContext, config: &SearchConfig) -> Result<SearchReport> {
    config.validate()?;
    check_searchable(ctx)?;
    let (n, m) = (ctx.n_states(), ctx.m_inputs());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut progress = Progress::new(config, Method::Ga);
    let size = config.population;
    let elites = ((size as f64 * config.elite_fraction).ceil() as usize).clamp(1, size - 1);

    let initial = (0..size)
        .map(|_| sample_uniform(n, m, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut pop = ctx.evaluate_all(initial, config.deterministic)?;
    pop.sort_by(rank);
    let mut best = pop[0].clone();
    progress.observe(best.metrics.f, ctx.memo.unique());

    while !progress.done() {
        let mut children = Vec::with_capacity(size - elites);
        for _ in elites..size {
            let parent = tournament(&pop, config.tournament, &mut rng);
            children.push(offspring(&parent.tree, &mut rng));
        }
        let mut next: Vec<Candidate> = pop[..elites].to_vec();
        next.extend(ctx.evaluate_all(children, config.deterministic)?);
        next.sort_by(rank);
        pop = next;
        progress.steps += 1;
        if rank(&pop[0], &best).is_lt() {
            best = pop[0].clone();
        }
        progress.observe(best.metrics.f, ctx.memo.unique());
    }
    Ok(ctx.report(Method::Ga, config, progress, &best, None))
}
