//! Experience-structured population behind the turnover flow.
//!
//! `n_i(tau)` is the mass of players with experience `tau` playing strategy
//! `i`. Each step every class ages by one, loses a fraction `p` to turnover,
//! and exchanges mass between strategies at rate `x_j (pi_j - pi_i)` towards
//! better-paying strategies; newcomers enter at age zero with mass
//! `p N x0`. The oldest class absorbs everything that ages past it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::fmt_float;
use crate::error::{Error, Result};
use crate::game::MatrixGame;
use crate::simplex::{max_abs_diff, SimplexDistribution};

/// Classes whose mass falls below this fraction of `N` count as empty.
const EMPTY_CLASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProfile {
    /// All mass at age zero, split by the prior.
    #[default]
    Newcomers,
    /// Steady-state geometric age profile, split by the prior in every class.
    Geometric,
}

/// Scale applied to the learning terms of each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnRate {
    Fixed(f64),
    /// `scale / max |pi_i - pi_j|`, recomputed every step.
    Adaptive { scale: f64 },
}

impl Default for LearnRate {
    fn default() -> Self {
        LearnRate::Fixed(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperiencePopulation {
    /// `mass[tau][i]`, ages `0..=age_cap`.
    mass: Vec<Vec<f64>>,
    total_n: f64,
    turnover_p: f64,
    prior: SimplexDistribution,
    age_cap: usize,
}

/// Age cap `T` with `(1 - p)^T < 1e-12`.
pub fn default_age_cap(p: f64) -> usize {
    ((1e-12f64).ln() / (1.0 - p).ln()).ceil() as usize
}

impl ExperiencePopulation {
    pub fn new(
        total_n: f64,
        turnover_p: f64,
        prior: SimplexDistribution,
        age_cap: Option<usize>,
        profile: InitialProfile,
    ) -> Result<Self> {
        if !(total_n.is_finite() && total_n > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "population size must be positive, got {total_n}"
            )));
        }
        if !(turnover_p > 0.0 && turnover_p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "turnover probability must lie in (0, 1), got {turnover_p}"
            )));
        }
        let age_cap = age_cap.unwrap_or_else(|| default_age_cap(turnover_p));
        if age_cap == 0 {
            return Err(Error::InvalidParameter("age cap must be at least 1".into()));
        }
        let n = prior.len();
        let mut mass = vec![vec![0.0; n]; age_cap + 1];
        let scaled = |share: f64| prior.weights().iter().map(|w| w * share).collect::<Vec<_>>();
        match profile {
            InitialProfile::Newcomers => mass[0] = scaled(total_n),
            InitialProfile::Geometric => {
                for (tau, row) in mass.iter_mut().enumerate() {
                    let share = if tau < age_cap {
                        turnover_p * (1.0 - turnover_p).powi(tau as i32)
                    } else {
                        (1.0 - turnover_p).powi(age_cap as i32)
                    };
                    *row = scaled(total_n * share);
                }
            }
        }
        Ok(Self {
            mass,
            total_n,
            turnover_p,
            prior,
            age_cap,
        })
    }

    pub fn total_n(&self) -> f64 {
        self.total_n
    }

    pub fn turnover_p(&self) -> f64 {
        self.turnover_p
    }

    pub fn prior(&self) -> &SimplexDistribution {
        &self.prior
    }

    pub fn age_cap(&self) -> usize {
        self.age_cap
    }

    pub fn strategies(&self) -> usize {
        self.prior.len()
    }

    /// `n_i(tau)`.
    pub fn mass(&self, strategy: usize, age: usize) -> f64 {
        self.mass[age][strategy]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().flatten().sum()
    }

    /// Fraction of the population in each age class.
    pub fn age_marginal(&self) -> Vec<f64> {
        self.mass
            .iter()
            .map(|row| row.iter().sum::<f64>() / self.total_n)
            .collect()
    }

    fn aggregate_raw(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.strategies()];
        for row in &self.mass {
            for (xi, m) in x.iter_mut().zip(row) {
                *xi += m;
            }
        }
        x.iter_mut().for_each(|v| *v /= self.total_n);
        x
    }

    /// Population-wide strategy frequencies `x_i = sum_tau n_i(tau) / N`.
    pub fn aggregate(&self) -> SimplexDistribution {
        SimplexDistribution::new(self.aggregate_raw())
            .expect("mass conservation keeps the aggregate on the simplex")
    }

    /// `0.1 / max |pi_i - pi_j|` at the current aggregate (1 if all payoffs tie).
    pub fn adaptive_learn_rate(&self, game: &MatrixGame, scale: f64) -> Result<f64> {
        let pi = game.payoffs(&self.aggregate())?;
        let spread = pi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - pi.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(if spread > 0.0 { scale / spread } else { 1.0 })
    }

    /// One step of the experience-class recursion.
    pub fn step(&self, game: &MatrixGame, learn_rate: f64) -> Result<Self> {
        let n = self.strategies();
        if game.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: game.dim(),
            });
        }
        if !(learn_rate.is_finite() && learn_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {learn_rate}"
            )));
        }
        let p = self.turnover_p;
        let x = self.aggregate_raw();
        let mut pi = vec![0.0; n];
        game.payoffs_into(&x, &mut pi);

        // Per-unit-mass switching rate away from each strategy.
        let leave: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| pi[j] > pi[i])
                    .map(|j| x[j] * (pi[j] - pi[i]))
                    .sum()
            })
            .collect();
        let keep = (1.0 - p) * learn_rate;
        for (i, &rate) in leave.iter().enumerate() {
            let outflow = keep * rate + p;
            if outflow > 1.0 + 1e-12 {
                let age = self.mass.iter().position(|row| row[i] > 0.0).unwrap_or(0);
                return Err(Error::LearningRate {
                    strategy: i,
                    age,
                    outflow,
                });
            }
        }

        let mut next = vec![vec![0.0; n]; self.age_cap + 1];
        next[0] = self
            .prior
            .weights()
            .iter()
            .map(|w| p * self.total_n * w)
            .collect();
        for (tau, row) in self.mass.iter().enumerate() {
            let target = (tau + 1).min(self.age_cap);
            for i in 0..n {
                let inflow: f64 = (0..n)
                    .filter(|&j| pi[j] < pi[i])
                    .map(|j| row[j] * x[i] * (pi[i] - pi[j]))
                    .sum();
                let outflow = row[i] * leave[i];
                next[target][i] += row[i] + keep * (inflow - outflow) - p * row[i];
            }
        }
        // Round-off can leave -1e-17 where a class is drained exactly.
        for v in next.iter_mut().flatten() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            mass: next,
            total_n: self.total_n,
            turnover_p: p,
            prior: self.prior.clone(),
            age_cap: self.age_cap,
        })
    }

    /// Steps with `learn_rate` until the aggregate moves less than `tol` for
    /// `age_cap + 1` consecutive steps, so every age class has settled too.
    pub fn run_to_steady_state(
        &self,
        game: &MatrixGame,
        learn_rate: LearnRate,
        tol: f64,
        max_steps: usize,
    ) -> Result<(Self, usize)> {
        let mut pop = self.clone();
        let mut x = pop.aggregate_raw();
        let mut quiet = 0;
        for steps in 1..=max_steps {
            let rate = match learn_rate {
                LearnRate::Fixed(r) => r,
                LearnRate::Adaptive { scale } => pop.adaptive_learn_rate(game, scale)?,
            };
            pop = pop.step(game, rate)?;
            let next = pop.aggregate_raw();
            if max_abs_diff(&next, &x) < tol {
                quiet += 1;
                if quiet > self.age_cap {
                    return Ok((pop, steps));
                }
            } else {
                quiet = 0;
            }
            x = next;
        }
        Err(Error::NonConvergence {
            detail: format!("experience profile not steady after {max_steps} steps"),
            residual: f64::NAN,
        })
    }

    fn is_occupied(&self, tau: usize) -> bool {
        self.mass[tau].iter().sum::<f64>() >= EMPTY_CLASS * self.total_n
    }

    /// Strategy mix within each non-empty age class.
    pub fn strategy_by_experience(&self) -> ExperienceProfile {
        let mut ages = Vec::new();
        let mut rows = Vec::new();
        for (tau, row) in self.mass.iter().enumerate() {
            if self.is_occupied(tau) {
                let total: f64 = row.iter().sum();
                ages.push(tau);
                rows.push(row.iter().map(|m| m / total).collect());
            }
        }
        ExperienceProfile { ages, rows }
    }

    /// Payoff collected by each age class and per player in it, with payoffs
    /// evaluated at the aggregate strategy.
    pub fn payoff_by_experience(&self, game: &MatrixGame) -> Result<ExperiencePayoffs> {
        let pi = game.payoffs(&self.aggregate())?;
        let mut out = ExperiencePayoffs::default();
        for (tau, row) in self.mass.iter().enumerate() {
            let class_mass: f64 = row.iter().sum();
            let total: f64 = row.iter().zip(&pi).map(|(m, p)| m * p).sum();
            out.ages.push(tau);
            out.mass.push(class_mass);
            out.total.push(total);
            out.per_capita
                .push(self.is_occupied(tau).then(|| total / class_mass));
        }
        Ok(out)
    }

    /// CSV `age,strategy,mass` with strategies numbered from 1.
    pub fn write_mass_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "age,strategy,mass")?;
        for (tau, row) in self.mass.iter().enumerate() {
            for (i, m) in row.iter().enumerate() {
                writeln!(w, "{tau},{},{}", i + 1, fmt_float(*m))?;
            }
        }
        Ok(())
    }
}

/// Rows of per-age strategy fractions; empty classes are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceProfile {
    pub ages: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl ExperienceProfile {
    pub fn write_csv<W: Write>(&self, mut w: W, labels: &[String]) -> std::io::Result<()> {
        writeln!(w, "age,{}", labels.join(","))?;
        for (tau, row) in self.ages.iter().zip(&self.rows) {
            write!(w, "{tau}")?;
            for v in row {
                write!(w, ",{}", fmt_float(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperiencePayoffs {
    pub ages: Vec<usize>,
    /// Mass of each age class.
    pub mass: Vec<f64>,
    /// `sum_i n_i(tau) pi_i`.
    pub total: Vec<f64>,
    /// `total / mass`; `None` for empty classes.
    pub per_capita: Vec<Option<f64>>,
}

impl ExperiencePayoffs {
    /// CSV `age,mass,total,per_capita`; empty classes leave `per_capita` blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "age,mass,total,per_capita")?;
        for i in 0..self.ages.len() {
            let pc = self.per_capita[i].map(fmt_float).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{pc}",
                self.ages[i],
                fmt_float(self.mass[i]),
                fmt_float(self.total[i])
            )?;
        }
        Ok(())
    }
}
