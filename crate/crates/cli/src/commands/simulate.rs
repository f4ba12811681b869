use serde_json::json;
use turnover::dynamics::{
    integrate, monitor_bimatrix_mean_payoffs, monitor_mean_effective_payoff, BimatrixFlow,
    IntegratorSettings, Trajectory, TurnoverFlow, fmt_float,
};
use turnover::{BimatrixTurnover, TurnoverConfig};

use super::Context;
use crate::args::{Format, SimulateArgs};
use crate::error::{invalid, CliResult};
use crate::games::{self, Game};

pub fn run(ctx: &Context, mut a: SimulateArgs) -> CliResult<()> {
    let (game, label) = games::load(a.game, a.game_file.as_deref(), a.r)?;
    let defaults = IntegratorSettings::default();
    let settings = IntegratorSettings {
        step: *a.step.get_or_insert(defaults.step),
        t_max: *a.t_max.get_or_insert(defaults.t_max),
        convergence_eps: *a.convergence_eps.get_or_insert(defaults.convergence_eps),
        record_stride: *a.record_stride.get_or_insert(defaults.record_stride),
        ..defaults
    };
    settings.validate()?;

    let mut out = ctx.output()?;
    let (traj, payoffs) = match &game {
        Game::Matrix(g) => {
            games::reject(a.chi_x.is_some() || a.chi_y.is_some(), "chi-x/--chi-y", "needs a two-population game")?;
            games::reject(a.prior_x.is_some() || a.prior_y.is_some(), "prior-x/--prior-y", "needs a two-population game")?;
            games::reject(a.initial_x.is_some() || a.initial_y.is_some(), "initial-x/--initial-y", "needs a two-population game")?;
            let chi = a.chi.ok_or_else(|| invalid("--chi is required"))?;
            let prior = games::distribution(a.prior.as_deref(), g.dim(), "prior")?;
            let start = match a.initial.as_deref() {
                Some(v) => games::distribution(Some(v), g.dim(), "initial")?,
                None => prior.clone(),
            };
            a.prior = Some(prior.weights().to_vec());
            a.initial = Some(start.weights().to_vec());
            let cfg = TurnoverConfig::new(chi, prior)?;
            let flow = TurnoverFlow::new(g, &cfg)?;
            let traj = integrate(&flow, start.weights(), &settings)?;
            let series = monitor_mean_effective_payoff(&traj, g, &cfg)?;
            (traj, vec![series])
        }
        Game::Bimatrix(g) => {
            games::reject(a.prior.is_some(), "prior", "is for one-population games; use --prior-x/--prior-y")?;
            games::reject(a.initial.is_some(), "initial", "is for one-population games; use --initial-x/--initial-y")?;
            let (chi_x, chi_y) = games::pair_rates(a.chi, a.chi_x, a.chi_y)?;
            let (m, k) = g.shape();
            let px = games::distribution(a.prior_x.as_deref(), m, "prior-x")?;
            let py = games::distribution(a.prior_y.as_deref(), k, "prior-y")?;
            let sx = match a.initial_x.as_deref() {
                Some(v) => games::distribution(Some(v), m, "initial-x")?,
                None => px.clone(),
            };
            let sy = match a.initial_y.as_deref() {
                Some(v) => games::distribution(Some(v), k, "initial-y")?,
                None => py.clone(),
            };
            a.chi_x = Some(chi_x);
            a.chi_y = Some(chi_y);
            a.prior_x = Some(px.weights().to_vec());
            a.prior_y = Some(py.weights().to_vec());
            a.initial_x = Some(sx.weights().to_vec());
            a.initial_y = Some(sy.weights().to_vec());
            let cfg = BimatrixTurnover::new(TurnoverConfig::new(chi_x, px)?, TurnoverConfig::new(chi_y, py)?);
            let flow = BimatrixFlow::new(g, &cfg)?;
            let start: Vec<f64> = sx.weights().iter().chain(sy.weights()).copied().collect();
            let traj = integrate(&flow, &start, &settings)?;
            let (sx, sy) = monitor_bimatrix_mean_payoffs(&traj, g)?;
            (traj, vec![sx, sy])
        }
    };

    match ctx.format {
        Format::Csv => {
            out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
            out.write_with("payoffs.csv", |w| {
                use std::io::Write;
                let cols = ["mean_payoff_x", "mean_payoff_y"];
                writeln!(w, "t,{}", cols[..payoffs.len()].join(","))?;
                for (i, t) in payoffs[0].times.iter().enumerate() {
                    write!(w, "{}", fmt_float(*t))?;
                    for s in &payoffs {
                        write!(w, ",{}", fmt_float(s.values[i]))?;
                    }
                    writeln!(w)?;
                }
                Ok(())
            })?;
        }
        Format::Json => {
            out.write_json("trajectory.json", &traj)?;
            out.write_json("payoffs.json", &payoffs)?;
        }
    }
    out.write_json("summary.json", &summary(&label, &traj))?;
    out.finish("simulate", ctx.manifest_config(&a))
}

fn summary(label: &str, traj: &Trajectory) -> serde_json::Value {
    let blocks: Vec<Vec<f64>> = (0..traj.blocks.len())
        .map(|b| {
            let start: usize = traj.blocks[..b].iter().sum();
            traj.final_state()[start..start + traj.blocks[b]].to_vec()
        })
        .collect();
    json!({
        "game": label,
        "terminal_status": traj.terminal_status,
        "final_time": traj.final_time(),
        "final_state": blocks,
        "final_rhs_norm": traj.rhs_norms.last(),
        "recorded_states": traj.len(),
        "clip_events": traj.clip_events,
        "max_correction": traj.max_correction,
    })
}
