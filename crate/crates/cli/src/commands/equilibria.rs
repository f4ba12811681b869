use serde_json::json;
use turnover::equilibria::{
    basin_map, count_and_solve_2x2, pennies_critical_rates, solve_single, verify_stable_2x2,
    BasinSettings,
};
use turnover::{BimatrixTurnover, TurnoverConfig};

use super::Context;
use crate::args::{BuiltinGame, EquilibriaArgs, Format};
use crate::error::{invalid, CliResult};
use crate::games::{self, Game};

pub fn run(ctx: &Context, mut a: EquilibriaArgs) -> CliResult<()> {
    let (game, label) = games::load(a.game, a.game_file.as_deref(), a.r)?;
    let verify = *a.verify.get_or_insert(true);
    let mut out = ctx.output()?;
    let mut summary = json!({ "game": label });

    let set = match &game {
        Game::Matrix(g) => {
            games::reject(a.chi_x.is_some() || a.chi_y.is_some(), "chi-x/--chi-y", "needs a two-population game")?;
            games::reject(a.prior_x.is_some() || a.prior_y.is_some(), "prior-x/--prior-y", "needs a two-population game")?;
            games::reject(a.basin_resolution.is_some(), "basin-resolution", "needs a two-population game")?;
            let chi = a.chi.ok_or_else(|| invalid("--chi is required"))?;
            let prior = games::distribution(a.prior.as_deref(), g.dim(), "prior")?;
            a.prior = Some(prior.weights().to_vec());
            // single-population roots are always checked by integration
            solve_single(g, &TurnoverConfig::new(chi, prior)?)?
        }
        Game::Bimatrix(g) => {
            games::reject(a.prior.is_some(), "prior", "is for one-population games; use --prior-x/--prior-y")?;
            if !g.is_2x2() {
                return Err(invalid("two-population equilibria are solved for 2x2 games only"));
            }
            let (chi_x, chi_y) = games::pair_rates(a.chi, a.chi_x, a.chi_y)?;
            let px = games::distribution(a.prior_x.as_deref(), 2, "prior-x")?;
            let py = games::distribution(a.prior_y.as_deref(), 2, "prior-y")?;
            a.chi_x = Some(chi_x);
            a.chi_y = Some(chi_y);
            a.prior_x = Some(px.weights().to_vec());
            a.prior_y = Some(py.weights().to_vec());
            let (x0, y0) = (px[0], py[0]);
            let cfg = BimatrixTurnover::new(TurnoverConfig::new(chi_x, px)?, TurnoverConfig::new(chi_y, py)?);
            let mut set = count_and_solve_2x2(g, &cfg)?;
            if verify {
                verify_stable_2x2(g, &cfg, &mut set)?;
            }
            let (alpha, beta) = g.alpha_beta()?;
            summary["alpha"] = json!(alpha);
            summary["beta"] = json!(beta);
            if a.game == Some(BuiltinGame::Pennies) {
                let (cx, cy) = pennies_critical_rates(a.r.unwrap_or(1.0), x0, y0)?;
                summary["critical_chi_x"] = json!(cx);
                summary["critical_chi_y"] = json!(cy);
            }
            if let Some(res) = a.basin_resolution {
                let map = basin_map(g, &cfg, res, &BasinSettings::default(), ctx.workers)?;
                match ctx.format {
                    Format::Csv => out.write_with("basins.csv", |w| map.write_csv(w))?,
                    Format::Json => out.write_json("basins.json", &map)?,
                }
            }
            set
        }
    };

    summary["count"] = json!(set.len());
    summary["stable"] = json!(set.stable().count());
    out.write("equilibria.json", format!("{}\n", set.to_json()).into_bytes())?;
    if ctx.format == Format::Csv {
        out.write_with("equilibria.csv", |w| set.write_csv(w))?;
    }
    out.write_json("summary.json", &summary)?;
    out.finish("equilibria", ctx.manifest_config(&a))
}
