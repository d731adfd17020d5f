use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use decomp_core::dp::{self, io, Axis, BasinSlice, PolicyAssembly, SimOptions, SolveOptions};
use decomp_core::enumeration::{count_decompositions, enumerate_all, sample_uniform};
use decomp_core::input_tree::parse_tree_sized;
use decomp_core::lqr::FitnessEvaluator;
use decomp_core::search::{
    run_ga, run_mcts, run_pareto, run_random, Budget, MemoTable, Method, SearchConfig, SearchContext,
};
use decomp_core::systems::{registry, SystemModel};
use decomp_core::InputTree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::output::{Context, Stamped};
use crate::{Cli, Command, Failure, SearchArgs, SimArgs};

pub fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(w) = cli.workers.filter(|&w| w > 0) {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let ctx = Context::load(cli.config.as_deref(), cli.out_dir, cli.workers)?;
    match cli.command {
        Command::Count(d) => count(&ctx, d.n, d.m),
        Command::Enumerate { dims, cap } => {
            let mut text = String::new();
            for tree in enumerate_all(dims.n as usize, dims.m as usize, cap)? {
                text.push_str(&tree.to_string());
                text.push('\n');
            }
            ctx.emit(None, text.as_bytes())
        }
        Command::Sample { dims, count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut text = String::new();
            for _ in 0..count {
                text.push_str(&sample_uniform(dims.n as usize, dims.m as usize, &mut rng)?.to_string());
                text.push('\n');
            }
            ctx.emit(None, text.as_bytes())
        }
        Command::Estimate { model, tree, out } => estimate(&ctx, &model, &tree, out.as_deref()),
        Command::Search { model, method, search } => {
            let method: Method = method.parse()?;
            if method == Method::Pareto {
                return pareto(&ctx, &model, &search);
            }
            search_cmd(&ctx, &model, method, &search)
        }
        Command::Pareto { model, search } => pareto(&ctx, &model, &search),
        Command::Solve {
            model,
            tree,
            out,
            points,
            actions,
            decoupled,
            seed,
        } => {
            let model = build_model(&ctx, &model)?;
            let tree = match tree {
                Some(t) => parse_tree_sized(&t, model.n_states(), model.m_inputs())?,
                None => InputTree::undecomposed(model.n_states(), model.m_inputs()),
            };
            let mut grid = model.grid.clone();
            if let Some(p) = points {
                grid = grid.with_state_points(p);
            }
            if let Some(a) = actions {
                grid = grid.with_action_samples(a);
            }
            let assembly = dp::solve_decomposition(&model, &tree, &grid, SolveOptions { decoupled })?;
            let mut bytes = Vec::new();
            io::write_policy(&mut bytes, &ctx.artifact(Some(seed)), &model, &grid, &assembly)?;
            ctx.emit(Some(&out), &bytes)?;
            let summary = json!({
                "model": model.name,
                "tree": assembly.tree.to_string(),
                "parameter_count": assembly.parameter_count().to_string(),
                "converged": assembly.stats.iter().all(|s| s.converged),
                "out": ctx.resolve(&out),
            });
            ctx.emit_json(None, &summary)
        }
        Command::Simulate { policy, x0, out, sim } => {
            let (model, assembly, artifact) = load_policy(&ctx, &policy)?;
            if x0.len() != model.n_states() {
                return Err(Failure::usage(format!(
                    "--x0 has {} values, the model has {} states",
                    x0.len(),
                    model.n_states()
                )));
            }
            let traj = dp::simulate(&model, &assembly, &x0, &sim_options(&sim, &model, &assembly)?)?;
            let mut bytes = Vec::new();
            io::write_trajectory_csv(&mut bytes, &artifact, &model, &traj)?;
            ctx.emit(out.as_deref(), &bytes)?;
            if out.is_some() {
                ctx.emit_json(
                    None,
                    &json!({
                        "converged": traj.converged,
                        "diverged": traj.diverged,
                        "final_error": traj.final_error,
                        "samples": traj.times.len(),
                    }),
                )?;
            }
            Ok(())
        }
        Command::Basin {
            policy,
            slice,
            resolution,
            base,
            out,
            sim,
        } => {
            let (model, assembly, artifact) = load_policy(&ctx, &policy)?;
            if slice.len() != 2 {
                return Err(Failure::usage("--slice takes exactly two state variables"));
            }
            let dims = (state_index(&model, &slice[0])?, state_index(&model, &slice[1])?);
            if dims.0 == dims.1 {
                return Err(Failure::usage("--slice needs two different state variables"));
            }
            if resolution < 2 {
                return Err(Failure::usage("--resolution must be at least 2"));
            }
            let base = if base.is_empty() { model.goal_state.clone() } else { base };
            if base.len() != model.n_states() {
                return Err(Failure::usage(format!("--base needs {} values", model.n_states())));
            }
            let axis = |i: usize| Axis::new(model.state_lower[i], model.state_upper[i], resolution);
            let slice = BasinSlice {
                dims,
                axes: (axis(dims.0), axis(dims.1)),
                base,
            };
            let field = dp::basin_sweep(&model, &assembly, &slice, &sim_options(&sim, &model, &assembly)?)?;
            let mut bytes = Vec::new();
            io::write_basin_csv(&mut bytes, &artifact, &model, &field)?;
            ctx.emit(out.as_deref(), &bytes)?;
            if out.is_some() {
                ctx.emit_json(None, &json!({ "converged_fraction": field.fraction() }))?;
            }
            Ok(())
        }
    }
}

fn count(ctx: &Context, n: u32, m: u32) -> Result<(), Failure> {
    let c = count_decompositions(n, m)?;
    let mut text = format!("{}\n", c.total);
    text.push_str("r k count\n");
    for e in &c.per_r_k {
        text.push_str(&format!("{} {} {}\n", e.r, e.k, e.count));
    }
    ctx.emit(None, text.as_bytes())
}

fn build_model(ctx: &Context, name: &str) -> Result<SystemModel, Failure> {
    Ok(registry::build(name, &ctx.config)?)
}

fn estimate(ctx: &Context, model: &str, tree: &str, out: Option<&Path>) -> Result<(), Failure> {
    let model = build_model(ctx, model)?;
    let tree = parse_tree_sized(tree, model.n_states(), model.m_inputs())?;
    let ev = FitnessEvaluator::new(&model)?;
    let metrics = ev.evaluate(&tree)?;
    #[derive(Serialize)]
    struct Body<'a> {
        model: &'a str,
        tree: String,
        #[serde(flatten)]
        metrics: decomp_core::lqr::DecompositionMetrics,
        parameter_count: u128,
    }
    let header = ctx.artifact(None);
    let body = Body {
        model: &model.name,
        tree: tree.to_string(),
        metrics,
        parameter_count: tree.parameter_count(&model.grid.state_points()),
    };
    ctx.emit_json(out, &Stamped { header: &header, body })
}

fn search_config(ctx: &Context, args: &SearchArgs) -> Result<SearchConfig, Failure> {
    let c = ctx.config.with_prefix("search.");
    for key in c.keys() {
        if !["population", "elite_fraction", "tournament", "mcts_child_cap"].contains(&key) {
            return Err(Failure::usage(format!("unknown configuration key 'search.{key}'")));
        }
    }
    let defaults = SearchConfig::default();
    let budget = match (args.budget_seconds, args.budget_steps) {
        (None, None) => defaults.budget,
        (seconds, steps) => Budget { seconds, steps },
    };
    let config = SearchConfig {
        seed: args.seed,
        budget,
        deterministic: ctx.deterministic,
        population: args.population.or(c.usize("population")?).unwrap_or(defaults.population),
        elite_fraction: c.f64("elite_fraction")?.unwrap_or(defaults.elite_fraction),
        tournament: c.usize("tournament")?.unwrap_or(defaults.tournament),
        mcts_child_cap: c.usize("mcts_child_cap")?,
        check_invariants: false,
    };
    config.validate()?;
    Ok(config)
}

fn search_cmd(ctx: &Context, model: &str, method: Method, args: &SearchArgs) -> Result<(), Failure> {
    let config = search_config(ctx, args)?;
    let model = build_model(ctx, model)?;
    let ev = FitnessEvaluator::new(&model)?;
    let memo = MemoTable::new();
    let sctx = SearchContext::new(&model.name, &ev, &memo);
    let report = match method {
        Method::Ga => run_ga(&sctx, &config)?,
        Method::Mcts => run_mcts(&sctx, &config)?,
        Method::Random => run_random(&sctx, &config)?,
        Method::Pareto => unreachable!("handled by the pareto command"),
    };
    let header = ctx.artifact(Some(config.seed));
    ctx.emit_json(args.out.as_deref(), &Stamped { header: &header, body: report })
}

fn pareto(ctx: &Context, model: &str, args: &SearchArgs) -> Result<(), Failure> {
    let config = search_config(ctx, args)?;
    let model = build_model(ctx, model)?;
    let ev = FitnessEvaluator::new(&model)?;
    let memo = MemoTable::new();
    let sctx = SearchContext::new(&model.name, &ev, &memo);
    let front = run_pareto(&sctx, &config)?;
    let header = ctx.artifact(Some(config.seed));
    ctx.emit_json(args.out.as_deref(), &Stamped { header: &header, body: front })
}

/// Reads a policy file and rebuilds its model under the current
/// configuration, which must match the one the policy was solved with.
fn load_policy(ctx: &Context, path: &Path) -> Result<(SystemModel, PolicyAssembly, io::ArtifactHeader), Failure> {
    let file = File::open(path).map_err(|e| Failure::runtime("io", format!("cannot open {}: {e}", path.display())))?;
    let (header, assembly) = io::read_policy(&mut BufReader::new(file))?;
    let digest = ctx.config_digest();
    if header.artifact.config_digest != digest {
        return Err(Failure::usage(format!(
            "policy was solved under configuration {}, current configuration is {digest}; pass the same --config",
            header.artifact.config_digest
        )));
    }
    let model = build_model(ctx, &header.model)?;
    Ok((model, assembly, header.artifact))
}

/// Weighted length of one cell diagonal of the finest table in `assembly`.
/// Grid policies have a dead band of about this size around the goal.
fn cell_tolerance(model: &SystemModel, assembly: &PolicyAssembly) -> f64 {
    let mut spacing = vec![0.0f64; model.n_states()];
    for policy in &assembly.policies {
        for (&x, axis) in policy.states.iter().zip(&policy.lattice.axes) {
            let h = axis.spacing();
            spacing[x] = if spacing[x] == 0.0 { h } else { spacing[x].min(h) };
        }
    }
    (0..spacing.len())
        .map(|i| (0..spacing.len()).map(|j| spacing[i] * model.q[(i, j)] * spacing[j]).sum::<f64>())
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

fn sim_options(args: &SimArgs, model: &SystemModel, assembly: &PolicyAssembly) -> Result<SimOptions, Failure> {
    let tolerance = args.tolerance.unwrap_or_else(|| cell_tolerance(model, assembly));
    if !(args.duration > 0.0 && args.dt > 0.0 && args.dt <= args.duration && tolerance >= 0.0) {
        return Err(Failure::usage("need 0 < --dt <= --duration and --tolerance >= 0"));
    }
    Ok(SimOptions {
        duration: args.duration,
        dt: args.dt,
        tolerance,
        ..SimOptions::default()
    })
}

/// Accepts a state name or `x<k>` with `k` counted from 1.
fn state_index(model: &SystemModel, name: &str) -> Result<usize, Failure> {
    if let Some(i) = model.state_names.iter().position(|s| s == name) {
        return Ok(i);
    }
    name.strip_prefix('x')
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 1 && k <= model.n_states())
        .map(|k| k - 1)
        .ok_or_else(|| Failure::usage(format!("unknown state variable '{name}' for model {}", model.name)))
}
