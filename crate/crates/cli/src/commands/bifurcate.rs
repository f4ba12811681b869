use serde_json::json;
use turnover::equilibria::{bifurcation_scan, ChiParameter};
use turnover::{BimatrixTurnover, TurnoverConfig};

use super::Context;
use crate::args::{BifurcateArgs, Format, ScanParameter, Spacing};
use crate::error::{invalid, CliResult};
use crate::games::{self, Game};

pub fn grid(from: f64, to: f64, points: usize, spacing: Spacing) -> CliResult<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && from > 0.0 && to > from) {
        return Err(invalid(format!(
            "the grid needs 0 < --from < --to, got {from} and {to}"
        )));
    }
    if points < 100 {
        return Err(invalid(format!("--points must be at least 100, got {points}")));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            let s = k as f64 / last;
            match spacing {
                Spacing::Linear => from + (to - from) * s,
                Spacing::Log => (from.ln() + (to.ln() - from.ln()) * s).exp(),
            }
        })
        .collect())
}

pub fn run(ctx: &Context, mut a: BifurcateArgs) -> CliResult<()> {
    let (game, label) = games::load(a.game, a.game_file.as_deref(), a.r)?;
    let Game::Bimatrix(game) = game else {
        return Err(invalid("bifurcate needs a 2x2 two-population game"));
    };
    if !game.is_2x2() {
        return Err(invalid("bifurcate needs a 2x2 two-population game"));
    }
    let parameter = *a.parameter.get_or_insert(ScanParameter::ChiX);
    let from = a.from.ok_or_else(|| invalid("--from is required"))?;
    let to = a.to.ok_or_else(|| invalid("--to is required"))?;
    let points = *a.points.get_or_insert(200);
    let spacing = *a.spacing.get_or_insert(Spacing::Linear);
    let values = grid(from, to, points, spacing)?;

    // the scanned rate is overwritten at every grid point
    let (chi_x, chi_y) = match parameter {
        ScanParameter::ChiX => {
            let y = a.chi_y.or(a.chi).ok_or_else(|| invalid("--chi-y (or --chi) is required"))?;
            a.chi_y = Some(y);
            a.chi_x = None;
            (from, y)
        }
        ScanParameter::ChiY => {
            let x = a.chi_x.or(a.chi).ok_or_else(|| invalid("--chi-x (or --chi) is required"))?;
            a.chi_x = Some(x);
            a.chi_y = None;
            (x, from)
        }
    };
    a.chi = None;
    let px = games::distribution(a.prior_x.as_deref(), 2, "prior-x")?;
    let py = games::distribution(a.prior_y.as_deref(), 2, "prior-y")?;
    a.prior_x = Some(px.weights().to_vec());
    a.prior_y = Some(py.weights().to_vec());
    let template = BimatrixTurnover::new(TurnoverConfig::new(chi_x, px)?, TurnoverConfig::new(chi_y, py)?);
    let which = match parameter {
        ScanParameter::ChiX => ChiParameter::ChiX,
        ScanParameter::ChiY => ChiParameter::ChiY,
    };
    let diagram = bifurcation_scan(&game, &template, which, &values, ctx.workers)?;

    let mut out = ctx.output()?;
    match ctx.format {
        Format::Csv => {
            out.write_with("branches.csv", |w| diagram.write_csv(w))?;
            out.write_with("events.csv", |w| diagram.write_events_csv(w))?;
        }
        Format::Json => out.write("diagram.json", format!("{}\n", diagram.to_json()).into_bytes())?,
    }
    out.write_json("events.json", &diagram.events)?;
    out.write_json(
        "summary.json",
        &json!({
            "game": label,
            "parameter": which.as_str(),
            "points": values.len(),
            "events": diagram.events.len(),
            "counts": diagram.counts(),
        }),
    )?;
    out.finish("bifurcate", ctx.manifest_config(&a))
}
