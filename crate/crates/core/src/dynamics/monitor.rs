use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::game::{dot, BimatrixGame, MatrixGame, TurnoverConfig};

/// Mean payoff along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Indices of samples on the simplex boundary, where the effective
    /// payoff itself is undefined.
    pub boundary_samples: Vec<usize>,
}

/// `sum_i x_i pi_i(x)` at every recorded time.
///
/// The turnover correction averages to zero, so this is also the mean
/// effective payoff wherever the latter is defined. Purely diagnostic; no
/// monotonicity is assumed.
pub fn monitor_mean_effective_payoff(
    traj: &Trajectory,
    game: &MatrixGame,
    cfg: &TurnoverConfig,
) -> Result<PayoffSeries> {
    if traj.blocks != [game.dim()] {
        return Err(Error::DimensionMismatch {
            expected: game.dim(),
            got: traj.blocks.iter().sum(),
        });
    }
    cfg.prior.check_len(game.dim())?;
    let mut pi = vec![0.0; game.dim()];
    let mut values = Vec::with_capacity(traj.len());
    let mut boundary_samples = Vec::new();
    for (i, x) in traj.states.iter().enumerate() {
        game.payoffs_into(x, &mut pi);
        values.push(dot(x, &pi));
        if x.iter().any(|&v| v <= 0.0) {
            boundary_samples.push(i);
        }
    }
    Ok(PayoffSeries {
        times: traj.times.clone(),
        values,
        boundary_samples,
    })
}

/// Mean payoffs `x . A y` and `y . B x` of both populations.
pub fn monitor_bimatrix_mean_payoffs(
    traj: &Trajectory,
    game: &BimatrixGame,
) -> Result<(PayoffSeries, PayoffSeries)> {
    let (m, k) = game.shape();
    if traj.blocks != [m, k] {
        return Err(Error::DimensionMismatch {
            expected: m + k,
            got: traj.blocks.iter().sum(),
        });
    }
    let mut px = vec![0.0; m];
    let mut py = vec![0.0; k];
    let mut series = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
    for (i, s) in traj.states.iter().enumerate() {
        let (x, y) = s.split_at(m);
        game.payoffs_into(x, y, &mut px, &mut py);
        for (slot, (state, pay)) in series.iter_mut().zip([(x, &px), (y, &py)]) {
            slot.0.push(dot(state, pay));
            if state.iter().any(|&v| v <= 0.0) {
                slot.1.push(i);
            }
        }
    }
    let [(vx, bx), (vy, by)] = series;
    Ok((
        PayoffSeries {
            times: traj.times.clone(),
            values: vx,
            boundary_samples: bx,
        },
        PayoffSeries {
            times: traj.times.clone(),
            values: vy,
            boundary_samples: by,
        },
    ))
}
