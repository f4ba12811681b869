//! Replicator dynamics with player turnover.
//!
//! Players leave a population at a constant rate and are replaced by
//! newcomers drawing their strategy from a fixed prior. The crate covers the
//! resulting macroscopic flow, the experience-structured population behind
//! it, turnover equilibria of single-population and 2x2 bimatrix games
//! (with bifurcation scans and basin maps), and lowest-unique-bid auctions.

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod game;
pub mod game_file;
pub mod luba;
pub mod micro;
mod pool;
pub mod simplex;

pub use error::{Error, Result};
pub use game::{
    effective_payoffs, mean_payoff, BimatrixGame, BimatrixTurnover, MatrixGame, TurnoverConfig,
};
pub use simplex::SimplexDistribution;
