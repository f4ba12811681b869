use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    default_max_bid, luba_nash, luba_turnover_equilibrium, AuctionDataset, EmpiricalAuction,
    LubaGame, LubaSolver, DEFAULT_BETA_PRIOR,
};
use crate::error::{Error, Result};
use crate::pool::run_pooled;
use crate::simplex::SimplexDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub beta_prior: f64,
    pub chi_lower: f64,
    pub chi_upper: f64,
    /// Golden-section search stops once the bracket is this narrow relative
    /// to `chi`.
    pub rel_width: f64,
    /// Bid range of the model; by default the larger of the prior's
    /// `1e-6`-tail cutoff and the largest observed bid.
    pub max_bid: Option<usize>,
    pub compute_nash: bool,
    /// Threads for per-size equilibrium solves; results do not depend on it.
    pub workers: usize,
    pub solver: LubaSolver,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            beta_prior: DEFAULT_BETA_PRIOR,
            chi_lower: 1e-5,
            chi_upper: 1.0,
            rel_width: 1e-3,
            max_bid: None,
            compute_nash: true,
            workers: 1,
            solver: LubaSolver::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionFit {
    pub id: String,
    pub n: u32,
    pub d_turn: f64,
    pub d_nash: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub chi_hat: f64,
    pub d_turn: f64,
    pub d_nash: Option<f64>,
    /// Combined number of bidders.
    pub d_expected: f64,
    /// The optimum sits at a search bound.
    pub at_bound: bool,
    pub max_bid: usize,
    /// Objective evaluations spent by the search.
    pub evaluations: usize,
    pub per_auction: Vec<AuctionFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTotals {
    pub d_turn: f64,
    pub d_nash: f64,
    pub d_expected: f64,
}

/// `N^2 sum_i (x_emp_i - x_model_i)^2` for each auction, with the model
/// looked up by player count.
pub fn per_auction_distances(
    empirical: &[EmpiricalAuction],
    models: &BTreeMap<u32, SimplexDistribution>,
) -> Result<Vec<f64>> {
    empirical
        .iter()
        .map(|a| {
            let model = models.get(&a.n_players).ok_or_else(|| {
                Error::InvalidParameter(format!("no model distribution for N={}", a.n_players))
            })?;
            model.check_len(a.frequencies.len())?;
            let n = a.n_players as f64;
            let ss: f64 = a
                .frequencies
                .iter()
                .zip(model.weights())
                .map(|(e, m)| (e - m) * (e - m))
                .sum();
            Ok(n * n * ss)
        })
        .collect()
}

/// Summed distances to the turnover and Nash models, and their null
/// expectation `sum N`.
pub fn squared_distances(
    empirical: &[EmpiricalAuction],
    turnover: &BTreeMap<u32, SimplexDistribution>,
    nash: &BTreeMap<u32, SimplexDistribution>,
) -> Result<DistanceTotals> {
    Ok(DistanceTotals {
        d_turn: per_auction_distances(empirical, turnover)?.iter().sum(),
        d_nash: per_auction_distances(empirical, nash)?.iter().sum(),
        d_expected: empirical.iter().map(|a| a.n_players as f64).sum(),
    })
}

/// Solves one model per distinct player count; map order is deterministic.
fn models_by_size(
    sizes: &[u32],
    max_bid: usize,
    workers: usize,
    solve: impl Fn(&LubaGame) -> Result<SimplexDistribution> + Sync,
) -> Result<BTreeMap<u32, SimplexDistribution>> {
    let solved: Vec<Result<(u32, SimplexDistribution)>> = run_pooled(workers, || {
        let job = |&n: &u32| -> Result<(u32, SimplexDistribution)> {
            let game = LubaGame::new(n, max_bid)?;
            Ok((n, solve(&game)?))
        };
        if workers <= 1 {
            sizes.iter().map(job).collect()
        } else {
            sizes.par_iter().map(job).collect()
        }
    })?;
    solved.into_iter().collect()
}

/// Least-squares turnover rate for a whole dataset.
pub fn fit_chi(dataset: &AuctionDataset, opts: &FitOptions) -> Result<FitResult> {
    let max_bid = opts.max_bid.unwrap_or_else(|| {
        default_max_bid(opts.beta_prior).max(dataset.max_bid().unwrap_or(0) as usize)
    });
    if let Some(observed) = dataset.max_bid() {
        if observed as usize > max_bid {
            return Err(Error::InvalidParameter(format!(
                "max_bid {max_bid} is below the largest observed bid {observed}"
            )));
        }
    }
    fit_chi_empirical(&dataset.empirical(max_bid), opts)
}

/// Golden-section search for the `chi` minimizing `d_turn`, on `ln chi`.
///
/// Candidates whose equilibrium fails to converge score `+inf`.
pub fn fit_chi_empirical(empirical: &[EmpiricalAuction], opts: &FitOptions) -> Result<FitResult> {
    let Some(first) = empirical.first() else {
        return Err(Error::InvalidParameter("cannot fit an empty dataset".into()));
    };
    let max_bid = first.frequencies.len();
    if empirical.iter().any(|a| a.frequencies.len() != max_bid) {
        return Err(Error::InvalidParameter(
            "all auctions must share one bid range".into(),
        ));
    }
    if !(opts.chi_lower > 0.0 && opts.chi_lower < opts.chi_upper && opts.rel_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid search bounds [{}, {}]",
            opts.chi_lower, opts.chi_upper
        )));
    }
    let mut sizes: Vec<u32> = empirical.iter().map(|a| a.n_players).collect();
    sizes.sort_unstable();
    sizes.dedup();

    let turnover_models = |chi: f64| {
        models_by_size(&sizes, max_bid, opts.workers, |game| {
            luba_turnover_equilibrium(game, chi, opts.beta_prior, &opts.solver)
                .map(|s| s.distribution)
        })
    };
    let mut evaluations = 0usize;
    let mut objective = |ln_chi: f64| -> f64 {
        evaluations += 1;
        let chi = ln_chi.exp();
        match turnover_models(chi).and_then(|m| per_auction_distances(empirical, &m)) {
            Ok(d) => d.iter().sum(),
            Err(e) => {
                log::warn!("chi={chi:e}: {e}; candidate penalized");
                f64::INFINITY
            }
        }
    };

    let (lo_bound, hi_bound) = (opts.chi_lower.ln(), opts.chi_upper.ln());
    let tol = opts.rel_width.ln_1p();
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (lo_bound, hi_bound);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (objective(c), objective(d));
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = objective(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = objective(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    if !best.1.is_finite() {
        return Err(Error::NonConvergence {
            detail: "no candidate turnover rate produced converged equilibria".into(),
            residual: f64::INFINITY,
        });
    }
    let chi_hat = best.0.exp();
    let at_bound = best.0 - lo_bound < 2.0 * tol || hi_bound - best.0 < 2.0 * tol;
    if at_bound {
        log::warn!("fitted chi {chi_hat:e} lies at a search bound");
    }

    let turnover = turnover_models(chi_hat)?;
    let d_turn_each = per_auction_distances(empirical, &turnover)?;
    let d_nash_each = if opts.compute_nash {
        let nash = models_by_size(&sizes, max_bid, opts.workers, |game| {
            luba_nash(game, &opts.solver).map(|s| s.distribution)
        })?;
        Some(per_auction_distances(empirical, &nash)?)
    } else {
        None
    };

    let per_auction = empirical
        .iter()
        .enumerate()
        .map(|(i, a)| AuctionFit {
            id: a.id.clone(),
            n: a.n_players,
            d_turn: d_turn_each[i],
            d_nash: d_nash_each.as_ref().map(|d| d[i]),
        })
        .collect();
    Ok(FitResult {
        chi_hat,
        d_turn: d_turn_each.iter().sum(),
        d_nash: d_nash_each.map(|d| d.iter().sum()),
        d_expected: empirical.iter().map(|a| a.n_players as f64).sum(),
        at_bound,
        max_bid,
        evaluations,
        per_auction,
    })
}

/// Independent fits for each auction size, ascending in `N`.
pub fn fit_chi_by_size(dataset: &AuctionDataset, opts: &FitOptions) -> Result<Vec<(u32, FitResult)>> {
    dataset
        .by_size()
        .into_iter()
        .map(|(n, slice)| Ok((n, fit_chi(&slice, opts)?)))
        .collect()
}

/// Ordinary least-squares line through `(k, d_k)`, `k = 0, 1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Linear trend of per-auction distances against time order.
pub fn distance_trend(distances: &[f64]) -> Result<Trend> {
    let n = distances.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "a trend needs at least 3 auctions, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_t = (nf - 1.0) / 2.0;
    let mean_d = distances.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (k, &d) in distances.iter().enumerate() {
        let dt = k as f64 - mean_t;
        sxx += dt * dt;
        sxy += dt * (d - mean_d);
    }
    let slope = sxy / sxx;
    let intercept = mean_d - slope * mean_t;
    let ssr: f64 = distances
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let r = d - (intercept + slope * k as f64);
            r * r
        })
        .sum();
    Ok(Trend {
        slope,
        slope_stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        intercept,
        n,
    })
}
