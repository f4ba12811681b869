use std::collections::btree_map::{BTreeMap, Entry};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde_json::json;
use turnover::dynamics::fmt_float;
use turnover::luba::{
    default_max_bid, distance_trend, exponential_prior, fit_chi, fit_chi_by_size, generate_synthetic,
    luba_nash, luba_turnover_equilibrium, per_auction_distances, AuctionDataset, FitOptions,
    IngestMode, LubaGame, LubaSolver, ProductIndex, SolvedDistribution, DEFAULT_BETA_PRIOR,
    DEFAULT_CHI,
};
use turnover::SimplexDistribution;

use super::Context;
use crate::args::{
    Format, IndexArg, IngestArg, LubaCommand, LubaEquilibriumArgs, LubaFitArgs, LubaGenerateArgs,
    LubaNashArgs, LubaTrendArgs, ModelArg,
};
use crate::error::{invalid, CliResult};
use crate::output::Output;

pub fn run(ctx: &Context, action: LubaCommand) -> CliResult<()> {
    match action {
        LubaCommand::Equilibrium(a) => equilibrium(ctx, a),
        LubaCommand::Nash(a) => nash(ctx, a),
        LubaCommand::Fit(a) => fit(ctx, a),
        LubaCommand::Generate(a) => generate(ctx, a),
        LubaCommand::Trend(a) => trend(ctx, a),
    }
}

fn solver(step: &mut Option<f64>, eps: &mut Option<f64>, t_max: &mut Option<f64>) -> LubaSolver {
    let d = LubaSolver::default();
    LubaSolver {
        step: *step.get_or_insert(d.step),
        eps: *eps.get_or_insert(d.eps),
        t_max: *t_max.get_or_insert(d.t_max),
        ..d
    }
}

fn index(arg: &mut Option<IndexArg>) -> ProductIndex {
    match *arg.get_or_insert(IndexArg::Corrected) {
        IndexArg::Corrected => ProductIndex::Corrected,
        IndexArg::Literal => ProductIndex::Literal,
    }
}

fn ingest(arg: &mut Option<IngestArg>) -> IngestMode {
    match *arg.get_or_insert(IngestArg::Strict) {
        IngestArg::Strict => IngestMode::Strict,
        IngestArg::Lenient => IngestMode::Lenient,
    }
}

fn players(n: Option<u32>) -> CliResult<u32> {
    n.ok_or_else(|| invalid("--n is required"))
}

fn read_dataset(path: Option<&Path>, mode: IngestMode) -> CliResult<AuctionDataset> {
    let path = path.ok_or_else(|| invalid("--data is required"))?;
    let file = File::open(path).map_err(|e| invalid(format!("data file {}: {e}", path.display())))?;
    Ok(AuctionDataset::read_csv(BufReader::new(file), mode)?)
}

fn write_distribution(out: &mut Output, format: Format, solved: &SolvedDistribution) -> CliResult<()> {
    match format {
        Format::Csv => out.write_with("distribution.csv", |w| {
            writeln!(w, "bid,probability,payoff")?;
            for (i, (x, p)) in solved.distribution.weights().iter().zip(&solved.payoffs).enumerate() {
                writeln!(w, "{},{},{}", i + 1, fmt_float(*x), fmt_float(*p))?;
            }
            Ok(())
        }),
        Format::Json => out.write_json("distribution.json", solved),
    }
}

fn equilibrium(ctx: &Context, mut a: LubaEquilibriumArgs) -> CliResult<()> {
    let n = players(a.n)?;
    let chi = *a.chi.get_or_insert(DEFAULT_CHI);
    let beta = *a.beta.get_or_insert(DEFAULT_BETA_PRIOR);
    let max_bid = *a.max_bid.get_or_insert_with(|| default_max_bid(beta));
    let game = LubaGame::new(n, max_bid)?.with_index(index(&mut a.index));
    let solver = solver(&mut a.step, &mut a.eps, &mut a.t_max);
    let solved = luba_turnover_equilibrium(&game, chi, beta, &solver)?;

    let mut out = ctx.output()?;
    write_distribution(&mut out, ctx.format, &solved)?;
    out.write_json(
        "summary.json",
        &json!({ "n": n, "max_bid": max_bid, "chi": chi, "beta": beta,
                 "residual": solved.residual, "time": solved.time }),
    )?;
    out.finish("luba equilibrium", ctx.manifest_config(&a))
}

fn nash(ctx: &Context, mut a: LubaNashArgs) -> CliResult<()> {
    let n = players(a.n)?;
    let beta = *a.beta.get_or_insert(DEFAULT_BETA_PRIOR);
    let max_bid = *a.max_bid.get_or_insert_with(|| default_max_bid(beta));
    let game = LubaGame::new(n, max_bid)?.with_index(index(&mut a.index));
    let solver = solver(&mut a.step, &mut a.eps, &mut a.t_max);
    let solved = luba_nash(&game, &solver)?;

    let mut out = ctx.output()?;
    write_distribution(&mut out, ctx.format, &solved)?;
    out.write_json(
        "summary.json",
        &json!({ "n": n, "max_bid": max_bid, "residual": solved.residual, "time": solved.time }),
    )?;
    out.finish("luba nash", ctx.manifest_config(&a))
}

/// Model bid distribution for `game`.
fn model(
    game: &LubaGame,
    which: ModelArg,
    chi: f64,
    beta: f64,
    solver: &LubaSolver,
) -> CliResult<SimplexDistribution> {
    Ok(match which {
        ModelArg::Turnover => luba_turnover_equilibrium(game, chi, beta, solver)?.distribution,
        ModelArg::Nash => luba_nash(game, solver)?.distribution,
        ModelArg::Prior => exponential_prior(beta, game.max_bid())?,
    })
}

fn generate(ctx: &Context, mut a: LubaGenerateArgs) -> CliResult<()> {
    let n = players(a.n)?;
    let auctions = *a.auctions.get_or_insert(30);
    let which = *a.model.get_or_insert(ModelArg::Turnover);
    if which == ModelArg::Turnover {
        a.chi.get_or_insert(DEFAULT_CHI);
    } else if a.chi.is_some() {
        return Err(invalid("--chi only applies to --model turnover"));
    }
    let beta = *a.beta.get_or_insert(DEFAULT_BETA_PRIOR);
    let max_bid = *a.max_bid.get_or_insert_with(|| default_max_bid(beta));
    let game = LubaGame::new(n, max_bid)?.with_index(index(&mut a.index));
    let solver = solver(&mut a.step, &mut a.eps, &mut a.t_max);
    let dist = model(&game, which, a.chi.unwrap_or(DEFAULT_CHI), beta, &solver)?;
    let data = generate_synthetic(&game, &dist, auctions, ctx.seed)?;

    let mut out = ctx.output()?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    out.write("auctions.csv", buf)?;
    out.write_json(
        "summary.json",
        &json!({ "n": n, "auctions": auctions, "max_bid": max_bid, "seed": ctx.seed,
                 "total_players": data.total_players() }),
    )?;
    out.finish("luba generate", ctx.manifest_config(&a))
}

fn fit(ctx: &Context, mut a: LubaFitArgs) -> CliResult<()> {
    let mode = ingest(&mut a.ingest);
    let data = read_dataset(a.data.as_deref(), mode)?;
    let d = FitOptions::default();
    let opts = FitOptions {
        beta_prior: *a.beta.get_or_insert(d.beta_prior),
        chi_lower: *a.chi_lower.get_or_insert(d.chi_lower),
        chi_upper: *a.chi_upper.get_or_insert(d.chi_upper),
        rel_width: *a.rel_width.get_or_insert(d.rel_width),
        max_bid: a.max_bid,
        compute_nash: *a.nash.get_or_insert(true),
        workers: ctx.workers,
        solver: solver(&mut a.step, &mut a.eps, &mut a.t_max),
    };
    let by_size = *a.by_size.get_or_insert(false);

    let mut out = ctx.output()?;
    let result = fit_chi(&data, &opts)?;
    a.max_bid = Some(result.max_bid);
    if ctx.format == Format::Csv {
        out.write_with("per_auction.csv", |w| {
            writeln!(w, "id,n,d_turn,d_nash")?;
            for f in &result.per_auction {
                let nash = f.d_nash.map(fmt_float).unwrap_or_default();
                writeln!(w, "{},{},{},{}", f.id, f.n, fmt_float(f.d_turn), nash)?;
            }
            Ok(())
        })?;
    }
    out.write_json("fit.json", &result)?;
    if by_size {
        let fits = fit_chi_by_size(&data, &opts)?;
        let rows: Vec<_> = fits
            .iter()
            .map(|(n, f)| json!({ "n": n, "fit": f }))
            .collect();
        out.write_json("fit_by_size.json", &rows)?;
        if ctx.format == Format::Csv {
            out.write_with("fit_by_size.csv", |w| {
                writeln!(w, "n,auctions,chi_hat,at_bound,d_turn,d_nash,d_expected")?;
                for (n, f) in &fits {
                    let nash = f.d_nash.map(fmt_float).unwrap_or_default();
                    writeln!(
                        w,
                        "{n},{},{},{},{},{nash},{}",
                        f.per_auction.len(),
                        fmt_float(f.chi_hat),
                        f.at_bound,
                        fmt_float(f.d_turn),
                        fmt_float(f.d_expected)
                    )?;
                }
                Ok(())
            })?;
        }
    }
    out.finish("luba fit", ctx.manifest_config(&a))
}

fn trend(ctx: &Context, mut a: LubaTrendArgs) -> CliResult<()> {
    let mode = ingest(&mut a.ingest);
    let data = read_dataset(a.data.as_deref(), mode)?;
    let which = *a.model.get_or_insert(ModelArg::Turnover);
    if which == ModelArg::Turnover {
        a.chi.get_or_insert(DEFAULT_CHI);
    } else if a.chi.is_some() {
        return Err(invalid("--chi only applies to --model turnover"));
    }
    let beta = *a.beta.get_or_insert(DEFAULT_BETA_PRIOR);
    let observed = data.max_bid().unwrap_or(0) as usize;
    let max_bid = *a.max_bid.get_or_insert_with(|| default_max_bid(beta).max(observed));
    let solver = solver(&mut a.step, &mut a.eps, &mut a.t_max);

    let empirical = data.empirical(max_bid);
    let mut models = BTreeMap::new();
    for e in &empirical {
        if let Entry::Vacant(slot) = models.entry(e.n_players) {
            let game = LubaGame::new(e.n_players, max_bid)?;
            slot.insert(model(&game, which, a.chi.unwrap_or(DEFAULT_CHI), beta, &solver)?);
        }
    }
    let distances = per_auction_distances(&empirical, &models)?;
    let t = distance_trend(&distances)?;

    let mut out = ctx.output()?;
    if ctx.format == Format::Csv {
        out.write_with("distances.csv", |w| {
            writeln!(w, "index,id,n,d")?;
            for (i, (e, d)) in empirical.iter().zip(&distances).enumerate() {
                writeln!(w, "{i},{},{},{}", e.id, e.n_players, fmt_float(*d))?;
            }
            Ok(())
        })?;
    }
    out.write_json(
        "trend.json",
        &json!({
            "slope": t.slope,
            "slope_stderr": t.slope_stderr,
            "intercept": t.intercept,
            "auctions": t.n,
            "within_two_stderr": t.slope.abs() <= 2.0 * t.slope_stderr,
            "distances": distances,
        }),
    )?;
    out.finish("luba trend", ctx.manifest_config(&a))
}
