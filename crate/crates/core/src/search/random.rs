use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_searchable, rank, Method, Progress, SearchConfig, SearchContext, SearchReport};
use crate::enumeration::sample_uniform;
use crate::error::Result;

/// Uniform random sampling baseline; one step is one draw.
pub fn run_random(ctx: &SearchContext, config: &SearchConfig) -> Result<SearchReport> {
    config.validate()?;
    check_searchable(ctx)?;
    let (n, m) = (ctx.n_states(), ctx.m_inputs());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut progress = Progress::new(config, Method::Random);
    let mut best = ctx.evaluate(sample_uniform(n, m, &mut rng)?)?;
    progress.steps = 1;
    progress.observe(best.metrics.f, ctx.memo.unique());
    while !progress.done() {
        let c = ctx.evaluate(sample_uniform(n, m, &mut rng)?)?;
        progress.steps += 1;
        if rank(&c, &best).is_lt() {
            best = c;
        }
        progress.observe(best.metrics.f, ctx.memo.unique());
    }
    Ok(ctx.report(Method::Random, config, progress, &best, None))
}
