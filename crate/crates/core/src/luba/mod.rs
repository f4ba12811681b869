//! Lowest unique bid auctions.
//!
//! `N` players each bid a positive integer; the lowest bid placed by exactly
//! one player wins. In the large-`N` (Poisson) limit a bid of `i` wins with
//! probability proportional to
//! `pi_i = exp(-N x_i) * prod_{j<i} (1 - N x_j exp(-N x_j))`.

mod data;
mod equilibrium;
mod fit;

pub use data::{generate_synthetic, Auction, AuctionDataset, EmpiricalAuction, IngestMode};
pub use equilibrium::{luba_nash, luba_turnover_equilibrium, LubaSolver, SolvedDistribution};
pub use fit::{
    distance_trend, fit_chi, fit_chi_by_size, fit_chi_empirical, per_auction_distances,
    squared_distances, AuctionFit, DistanceTotals, FitOptions, FitResult, Trend,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::PayoffField;
use crate::error::{Error, Result};
use crate::simplex::SimplexDistribution;

/// Which bid enters the product over lower bids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductIndex {
    /// Factor `j` uses `x_j`: lower bid `j` must not be a unique bid.
    #[default]
    Corrected,
    /// Every factor uses `x_i`, as the formula is sometimes printed.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LubaGame {
    n_players: u32,
    max_bid: usize,
    #[serde(default)]
    index: ProductIndex,
}

impl LubaGame {
    pub fn new(n_players: u32, max_bid: usize) -> Result<Self> {
        if n_players == 0 {
            return Err(Error::InvalidGame("an auction needs at least one player".into()));
        }
        if max_bid < 2 {
            return Err(Error::InvalidGame(format!("max_bid must be at least 2, got {max_bid}")));
        }
        Ok(Self {
            n_players,
            max_bid,
            index: ProductIndex::Corrected,
        })
    }

    pub fn with_index(mut self, index: ProductIndex) -> Self {
        self.index = index;
        self
    }

    pub fn n_players(&self) -> u32 {
        self.n_players
    }

    pub fn max_bid(&self) -> usize {
        self.max_bid
    }

    pub fn index(&self) -> ProductIndex {
        self.index
    }

    /// Payoff of each bid `1..=M` against the bid distribution `x`.
    pub fn payoffs(&self, x: &SimplexDistribution) -> Result<Vec<f64>> {
        x.check_len(self.max_bid)?;
        let mut out = vec![0.0; self.max_bid];
        luba_payoffs(self.n_players as f64, x.weights(), self.index, &mut out);
        Ok(out)
    }
}

impl PayoffField for LubaGame {
    fn dim(&self) -> usize {
        self.max_bid
    }

    fn payoffs_into(&self, x: &[f64], out: &mut [f64]) {
        luba_payoffs(self.n_players as f64, x, self.index, out);
    }
}

/// Large-`N` bid payoffs for a real-valued player count (`n = 0` allowed).
pub fn luba_payoffs(n: f64, x: &[f64], index: ProductIndex, out: &mut [f64]) {
    // N x e^{-N x} <= 1/e, so every factor lies in [1 - 1/e, 1] on the
    // simplex; the clamp only absorbs round-off from slightly negative x.
    let unique = |xi: f64| (n * xi * (-n * xi).exp()).max(0.0);
    match index {
        ProductIndex::Corrected => {
            let mut prefix = 1.0;
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = (-n * xi).exp() * prefix;
                prefix *= 1.0 - unique(xi);
            }
        }
        ProductIndex::Literal => {
            for (i, (o, &xi)) in out.iter_mut().zip(x).enumerate() {
                *o = (-n * xi).exp() * (1.0 - unique(xi)).powi(i as i32);
            }
        }
    }
}

/// Newcomer bid distribution `x0_i ∝ exp(-beta i)` over `1..=M`.
pub fn exponential_prior(beta_prior: f64, max_bid: usize) -> Result<SimplexDistribution> {
    if !(beta_prior.is_finite() && beta_prior > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prior decay constant must be positive, got {beta_prior}"
        )));
    }
    if max_bid == 0 {
        return Err(Error::InvalidParameter("max_bid must be positive".into()));
    }
    // Offset by one bid so the largest weight is exactly 1.
    let w = (0..max_bid).map(|i| (-beta_prior * i as f64).exp()).collect();
    SimplexDistribution::from_weights(w)
}

/// Smallest `M` whose exponential-prior tail beyond `M` carries less than
/// `1e-6` of the mass.
pub fn default_max_bid(beta_prior: f64) -> usize {
    ((1e6f64).ln() / beta_prior).ceil().max(2.0) as usize
}

/// Documented defaults for the prior decay and turnover constants fitted to
/// large online auctions; not verifiable without the original data.
pub const DEFAULT_BETA_PRIOR: f64 = 0.02;
pub const DEFAULT_CHI: f64 = 0.0062;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_bid_has_empty_product() {
        let g = LubaGame::new(10, 4).unwrap();
        let x = SimplexDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let pi = g.payoffs(&x).unwrap();
        assert!((pi[0] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_players_pay_one_everywhere() {
        let mut out = vec![0.0; 5];
        luba_payoffs(0.0, &[0.2; 5], ProductIndex::Corrected, &mut out);
        assert!(out.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn payoffs_in_unit_interval_and_first_depends_on_x1_only() {
        let g = LubaGame::new(50, 6).unwrap();
        let a = SimplexDistribution::new(vec![0.1, 0.1, 0.2, 0.2, 0.2, 0.2]).unwrap();
        let b = SimplexDistribution::new(vec![0.1, 0.3, 0.0, 0.4, 0.1, 0.1]).unwrap();
        let (pa, pb) = (g.payoffs(&a).unwrap(), g.payoffs(&b).unwrap());
        assert_eq!(pa[0], pb[0]);
        assert!(pa.iter().chain(&pb).all(|&p| p > 0.0 && p <= 1.0));
    }

    #[test]
    fn literal_index_differs_for_non_uniform_x() {
        let x = SimplexDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let c = LubaGame::new(5, 3).unwrap();
        let l = c.clone().with_index(ProductIndex::Literal);
        let (pc, pl) = (c.payoffs(&x).unwrap(), l.payoffs(&x).unwrap());
        assert_eq!(pc[0], pl[0]);
        assert!((pc[2] - pl[2]).abs() > 1e-3);
        // identical for uniform x
        let u = SimplexDistribution::uniform(3);
        let (pc, pl) = (c.payoffs(&u).unwrap(), l.payoffs(&u).unwrap());
        assert!(pc.iter().zip(&pl).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn exponential_prior_examples() {
        let x = exponential_prior(50.0, 10).unwrap();
        assert!(x[0] > 1.0 - 1e-15 && x[1] < 1e-20);

        let x = exponential_prior(0.02, 2).unwrap();
        let (a, b) = ((-0.02f64).exp(), (-0.04f64).exp());
        assert!((x[0] - a / (a + b)).abs() < 1e-15);
        assert!((x[1] - b / (a + b)).abs() < 1e-15);
        assert!((x[0] - 0.505).abs() < 1e-3);

        let x = exponential_prior(0.3, 40).unwrap();
        for i in 0..39 {
            assert!((x[i + 1] / x[i] - (-0.3f64).exp()).abs() < 1e-12);
        }
        assert!(exponential_prior(0.0, 10).is_err());
    }

    #[test]
    fn default_max_bid_tail() {
        let m = default_max_bid(0.02);
        assert_eq!(m, 691);
        assert!((-0.02 * m as f64).exp() < 1e-6);
        assert!((-0.02 * (m - 1) as f64).exp() >= 1e-6);
    }

    #[test]
    fn game_validation() {
        assert!(LubaGame::new(0, 5).is_err());
        assert!(LubaGame::new(5, 1).is_err());
        let g = LubaGame::new(5, 3).unwrap();
        assert!(g.payoffs(&SimplexDistribution::uniform(4)).is_err());
    }
}
