use serde_json::json;
use turnover::micro::{ExperiencePopulation, InitialProfile, LearnRate};

use super::Context;
use crate::args::{Format, InitialProfileArg, MicroArgs};
use crate::error::{invalid, CliResult};
use crate::games::{self, Game};

pub fn run(ctx: &Context, mut a: MicroArgs) -> CliResult<()> {
    let (game, label) = games::load(a.game, a.game_file.as_deref(), None)?;
    let Game::Matrix(game) = game else {
        return Err(invalid("micro needs a one-population game (rps or a matrix game file)"));
    };
    let p = a.p.ok_or_else(|| invalid("--p is required"))?;
    let prior = games::distribution(a.prior.as_deref(), game.dim(), "prior")?;
    a.prior = Some(prior.weights().to_vec());
    let n = *a.n.get_or_insert(20.0);
    let rate = match (a.learn_rate, a.adaptive_scale) {
        (Some(_), Some(_)) => return Err(invalid("give either --learn-rate or --adaptive-scale")),
        (_, Some(scale)) => {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(invalid(format!("--adaptive-scale must be positive, got {scale}")));
            }
            LearnRate::Adaptive { scale }
        }
        (r, None) => {
            let r = *a.learn_rate.get_or_insert(r.unwrap_or(1.0));
            if !(r.is_finite() && r > 0.0) {
                return Err(invalid(format!("--learn-rate must be positive, got {r}")));
            }
            LearnRate::Fixed(r)
        }
    };
    let profile = match *a.initial_profile.get_or_insert(InitialProfileArg::Newcomers) {
        InitialProfileArg::Newcomers => InitialProfile::Newcomers,
        InitialProfileArg::Geometric => InitialProfile::Geometric,
    };
    let tol = *a.tol.get_or_insert(1e-13);
    let max_steps = *a.max_steps.get_or_insert(1_000_000);

    let pop = ExperiencePopulation::new(n, p, prior, a.age_cap, profile)?;
    a.age_cap = Some(pop.age_cap());
    let (pop, steps) = pop.run_to_steady_state(&game, rate, tol, max_steps)?;
    let strategies = pop.strategy_by_experience();
    let payoffs = pop.payoff_by_experience(&game)?;

    let mut out = ctx.output()?;
    match ctx.format {
        Format::Csv => {
            out.write_with("strategy_by_experience.csv", |w| strategies.write_csv(w, game.labels()))?;
            out.write_with("payoff_by_experience.csv", |w| payoffs.write_csv(w))?;
            out.write_with("mass.csv", |w| pop.write_mass_csv(w))?;
        }
        Format::Json => {
            out.write_json("strategy_by_experience.json", &strategies)?;
            out.write_json("payoff_by_experience.json", &payoffs)?;
            out.write_json("population.json", &pop)?;
        }
    }
    let chi = match rate {
        LearnRate::Fixed(r) => Some(p / ((1.0 - p) * r)),
        LearnRate::Adaptive { .. } => None,
    };
    out.write_json(
        "summary.json",
        &json!({
            "game": label,
            "steps": steps,
            "aggregate": pop.aggregate(),
            "equivalent_chi": chi,
            "age_cap": pop.age_cap(),
            "age_marginal": pop.age_marginal(),
        }),
    )?;
    out.finish("micro", ctx.manifest_config(&a))
}
