use serde::{Deserialize, Serialize};

use super::{exponential_prior, LubaGame};
use crate::dynamics::{settle, TurnoverFlow};
use crate::error::{Error, Result};
use crate::game::{effective_payoffs, mean_payoff, TurnoverConfig};
use crate::simplex::SimplexDistribution;

/// Integration settings for auction equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LubaSolver {
    pub step: f64,
    /// Required `||rhs||_inf` at the returned point.
    pub eps: f64,
    pub t_max: f64,
    /// Payoff slack allowed by the Nash indifference check.
    pub indifference_tol: f64,
    /// Bids with weight at or below this are treated as off-support.
    pub support_threshold: f64,
}

impl Default for LubaSolver {
    fn default() -> Self {
        Self {
            step: 0.1,
            eps: 1e-12,
            t_max: 1e6,
            indifference_tol: 1e-6,
            support_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedDistribution {
    pub distribution: SimplexDistribution,
    pub payoffs: Vec<f64>,
    pub residual: f64,
    /// Integration time needed to come to rest.
    pub time: f64,
}

/// Nash equilibrium as the rest point of turnover-free replicator dynamics
/// started from uniform bidding.
pub fn luba_nash(game: &LubaGame, solver: &LubaSolver) -> Result<SolvedDistribution> {
    let m = game.max_bid();
    let cfg = TurnoverConfig::new(0.0, SimplexDistribution::uniform(m))?;
    let flow = TurnoverFlow::new(game, &cfg)?;
    let start = SimplexDistribution::uniform(m).into_vec();
    let settled = settle(&flow, &start, solver.step, solver.eps, solver.t_max)?;
    if !settled.converged {
        return Err(Error::NonConvergence {
            detail: format!(
                "Nash dynamics for N={} did not come to rest by t={}",
                game.n_players(),
                settled.time
            ),
            residual: settled.residual,
        });
    }
    let x = SimplexDistribution::new(settled.state)?;
    let payoffs = game.payoffs(&x)?;

    let (mut lo, mut hi, mut off) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (&xi, &p) in x.weights().iter().zip(&payoffs) {
        if xi > solver.support_threshold {
            lo = lo.min(p);
            hi = hi.max(p);
        } else {
            off = off.max(p);
        }
    }
    if hi - lo > solver.indifference_tol || off > hi + solver.indifference_tol {
        return Err(Error::NonConvergence {
            detail: format!(
                "rest point is not a Nash equilibrium: support payoff spread {:e}, best off-support excess {:e}",
                hi - lo,
                off - hi
            ),
            residual: settled.residual,
        });
    }
    Ok(SolvedDistribution {
        distribution: x,
        payoffs,
        residual: settled.residual,
        time: settled.time,
    })
}

/// Turnover equilibrium with an exponential prior, integrated from the prior.
pub fn luba_turnover_equilibrium(
    game: &LubaGame,
    chi: f64,
    beta_prior: f64,
    solver: &LubaSolver,
) -> Result<SolvedDistribution> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "turnover rate must be positive, got {chi}"
        )));
    }
    let prior = exponential_prior(beta_prior, game.max_bid())?;
    let cfg = TurnoverConfig::new(chi, prior)?;
    let flow = TurnoverFlow::new(game, &cfg)?;
    // the turnover term decays at rate chi, which bounds the stable RK4 step
    let step = solver.step.min(1.0 / chi);
    let settled = settle(&flow, cfg.prior.weights(), step, solver.eps, solver.t_max)?;
    if !settled.converged {
        return Err(Error::NonConvergence {
            detail: format!(
                "turnover dynamics for N={} chi={chi} did not come to rest by t={}",
                game.n_players(),
                settled.time
            ),
            residual: settled.residual,
        });
    }
    let x = SimplexDistribution::new(settled.state)?;
    let payoffs = game.payoffs(&x)?;

    // Independent check in effective-payoff form: x_i (pi~_i - mean) = 0.
    let effective = effective_payoffs(&payoffs, &x, &cfg)?;
    let mean = mean_payoff(&payoffs, &x)?;
    let stationarity = x
        .weights()
        .iter()
        .zip(&effective)
        .map(|(xi, p)| (xi * (p - mean)).abs())
        .fold(0.0, f64::max);
    if stationarity > 100.0 * solver.eps.max(1e-14) {
        return Err(Error::NonConvergence {
            detail: "rest point fails the stationary condition".into(),
            residual: stationarity,
        });
    }
    Ok(SolvedDistribution {
        distribution: x,
        payoffs,
        residual: settled.residual,
        time: settled.time,
    })
}
