//! Turnover replicator flows and their numerical integration.
//!
//! A single population follows
//! `dx_i/dt = x_i (pi_i(x) - mean(pi)) + chi (x0_i - x_i)`
//! in rescaled time. Two populations playing a bimatrix game each follow the
//! same law with payoffs `A y` and `B x`.

mod integrator;
mod monitor;

pub use integrator::{
    classify_terminal, fmt_float, integrate, settle, IntegratorSettings, Settled, TerminalStatus, Trajectory,
};
pub use monitor::{monitor_bimatrix_mean_payoffs, monitor_mean_effective_payoff, PayoffSeries};

use crate::error::{Error, Result};
use crate::game::{dot, BimatrixGame, BimatrixTurnover, MatrixGame, TurnoverConfig};
use crate::simplex::SimplexDistribution;

/// A frequency-dependent payoff rule over a single strategy set.
pub trait PayoffField: Sync {
    fn dim(&self) -> usize;

    /// Writes `pi(x)` into `out`; `x` may lie marginally off the simplex
    /// during intermediate integrator stages.
    fn payoffs_into(&self, x: &[f64], out: &mut [f64]);
}

impl PayoffField for MatrixGame {
    fn dim(&self) -> usize {
        MatrixGame::dim(self)
    }

    fn payoffs_into(&self, x: &[f64], out: &mut [f64]) {
        MatrixGame::payoffs_into(self, x, out)
    }
}

/// A vector field on a product of simplices.
///
/// The state is the concatenation of one probability vector per block; the
/// field must be tangent to every block (components of each block sum to
/// zero).
pub trait FlowSystem: Sync {
    fn blocks(&self) -> &[usize];

    fn rhs(&self, state: &[f64], out: &mut [f64]);

    fn dim(&self) -> usize {
        self.blocks().iter().sum()
    }
}

/// Single-population turnover replicator flow for any payoff rule.
#[derive(Debug, Clone)]
pub struct TurnoverFlow<'a, P: PayoffField> {
    payoff: &'a P,
    chi: f64,
    prior: &'a [f64],
    blocks: [usize; 1],
}

impl<'a, P: PayoffField> TurnoverFlow<'a, P> {
    pub fn new(payoff: &'a P, cfg: &'a TurnoverConfig) -> Result<Self> {
        cfg.prior.check_len(payoff.dim())?;
        Ok(Self {
            payoff,
            chi: cfg.chi,
            prior: cfg.prior.weights(),
            blocks: [payoff.dim()],
        })
    }
}

impl<P: PayoffField> FlowSystem for TurnoverFlow<'_, P> {
    fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        self.payoff.payoffs_into(x, out);
        let mean = dot(x, out);
        for ((o, &xi), &x0) in out.iter_mut().zip(x).zip(self.prior) {
            *o = xi * (*o - mean) + self.chi * (x0 - xi);
        }
    }
}

/// Two-population flow; state layout `[x_1..x_m, y_1..y_k]`.
#[derive(Debug, Clone)]
pub struct BimatrixFlow<'a> {
    game: &'a BimatrixGame,
    cfg: &'a BimatrixTurnover,
    blocks: [usize; 2],
}

impl<'a> BimatrixFlow<'a> {
    pub fn new(game: &'a BimatrixGame, cfg: &'a BimatrixTurnover) -> Result<Self> {
        let (m, k) = game.shape();
        cfg.x.prior.check_len(m)?;
        cfg.y.prior.check_len(k)?;
        Ok(Self {
            game,
            cfg,
            blocks: [m, k],
        })
    }

    /// State vector for a 2x2 game from first-strategy weights.
    pub fn state_2x2(x: f64, y: f64) -> Vec<f64> {
        vec![x, 1.0 - x, y, 1.0 - y]
    }
}

impl FlowSystem for BimatrixFlow<'_> {
    fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    fn rhs(&self, state: &[f64], out: &mut [f64]) {
        let m = self.blocks[0];
        let (x, y) = state.split_at(m);
        let (ox, oy) = out.split_at_mut(m);
        self.game.payoffs_into(x, y, ox, oy);
        for (s, o, cfg) in [(x, ox, &self.cfg.x), (y, oy, &self.cfg.y)] {
            let mean = dot(s, o);
            for ((oi, &si), &s0) in o.iter_mut().zip(s).zip(cfg.prior.weights()) {
                *oi = si * (*oi - mean) + cfg.chi * (s0 - si);
            }
        }
    }
}

/// `v_i = x_i (pi_i - mean) + chi (x0_i - x_i)` for a matrix game.
pub fn rhs_single(
    game: &MatrixGame,
    cfg: &TurnoverConfig,
    x: &SimplexDistribution,
) -> Result<Vec<f64>> {
    x.check_len(game.dim())?;
    let flow = TurnoverFlow::new(game, cfg)?;
    let mut out = vec![0.0; game.dim()];
    flow.rhs(x.weights(), &mut out);
    Ok(out)
}

/// `(dx/dt, dy/dt)` of a 2x2 bimatrix game in first-strategy coordinates:
/// `x (1 - x) (pi_1 - pi_2) + chi_x (x0 - x)` and likewise for `y`.
pub fn rhs_bimatrix(
    game: &BimatrixGame,
    cfg: &BimatrixTurnover,
    x: f64,
    y: f64,
) -> Result<(f64, f64)> {
    game.require_2x2()?;
    for (name, v) in [("x", x), ("y", y)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{name} = {v} lies outside [0, 1]")));
        }
    }
    Ok(rhs_2x2_unchecked(game, cfg, x, y))
}

#[inline]
pub(crate) fn rhs_2x2_unchecked(
    game: &BimatrixGame,
    cfg: &BimatrixTurnover,
    x: f64,
    y: f64,
) -> (f64, f64) {
    let (alpha, beta) = alpha_beta_unchecked(game);
    let gap_x = alpha * y + game.a(0, 1) - game.a(1, 1);
    let gap_y = beta * x + game.b(0, 1) - game.b(1, 1);
    let x0 = cfg.x.prior[0];
    let y0 = cfg.y.prior[0];
    (
        x * (1.0 - x) * gap_x + cfg.x.chi * (x0 - x),
        y * (1.0 - y) * gap_y + cfg.y.chi * (y0 - y),
    )
}

#[inline]
pub(crate) fn alpha_beta_unchecked(game: &BimatrixGame) -> (f64, f64) {
    (
        game.a(0, 0) + game.a(1, 1) - game.a(1, 0) - game.a(0, 1),
        game.b(0, 0) + game.b(1, 1) - game.b(1, 0) - game.b(0, 1),
    )
}
