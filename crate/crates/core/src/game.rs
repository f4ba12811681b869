//! Games, payoffs and turnover parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::SimplexDistribution;

/// Symmetric single-population game with payoffs `pi = A x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGame {
    n: usize,
    /// Row-major `n x n`.
    entries: Vec<f64>,
    labels: Vec<String>,
}

impl MatrixGame {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidGame(format!(
                "payoff matrix must be at least 2x2, got {n} rows"
            )));
        }
        let entries = flatten(&rows, n, n, "A")?;
        let labels = (1..=n).map(|i| format!("s{i}")).collect();
        Ok(Self { n, entries, labels })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    /// Rock-paper-scissors with win `+1`, loss `-1`, strategies ordered R, P, S.
    pub fn rock_paper_scissors() -> Self {
        Self::new(vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
        .and_then(|g| g.with_labels(vec!["rock".into(), "paper".into(), "scissors".into()]))
        .expect("static matrix")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Payoff vector `pi_i = sum_j A_ij x_j`.
    pub fn payoffs(&self, x: &SimplexDistribution) -> Result<Vec<f64>> {
        x.check_len(self.n)?;
        let mut out = vec![0.0; self.n];
        self.payoffs_into(x.weights(), &mut out);
        Ok(out)
    }

    /// Unchecked variant over a raw state; the integrator's inner loop.
    pub(crate) fn payoffs_into(&self, x: &[f64], out: &mut [f64]) {
        for (row, o) in self.entries.chunks_exact(self.n).zip(out.iter_mut()) {
            *o = row.iter().zip(x).map(|(a, xj)| a * xj).sum();
        }
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.entry(i, j) == -self.entry(j, i)))
    }
}

/// Two-population game: population one (`m` strategies) earns `A y`,
/// population two (`k` strategies) earns `B x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimatrixGame {
    m: usize,
    k: usize,
    /// Row-major `m x k`.
    a: Vec<f64>,
    /// Row-major `k x m`.
    b: Vec<f64>,
    labels_x: Vec<String>,
    labels_y: Vec<String>,
}

impl BimatrixGame {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let m = a.len();
        let k = a.first().map_or(0, Vec::len);
        if m < 2 || k < 2 {
            return Err(Error::InvalidGame(format!(
                "A must be at least 2x2, got {m}x{k}"
            )));
        }
        let a = flatten(&a, m, k, "A")?;
        if b.len() != k {
            return Err(Error::InvalidGame(format!(
                "B must have {k} rows to match A's columns, got {}",
                b.len()
            )));
        }
        let b = flatten(&b, k, m, "B")?;
        Ok(Self {
            m,
            k,
            a,
            b,
            labels_x: (1..=m).map(|i| format!("x{i}")).collect(),
            labels_y: (1..=k).map(|i| format!("y{i}")).collect(),
        })
    }

    pub fn with_labels(mut self, labels_x: Vec<String>, labels_y: Vec<String>) -> Result<Self> {
        if labels_x.len() != self.m || labels_y.len() != self.k {
            return Err(Error::InvalidGame("label count does not match strategy count".into()));
        }
        self.labels_x = labels_x;
        self.labels_y = labels_y;
        Ok(self)
    }

    /// Matching pennies with stake `r`: population one wins on a match.
    pub fn matching_pennies(r: f64) -> Result<Self> {
        Self::new(vec![vec![r, -r], vec![-r, r]], vec![vec![-r, r], vec![r, -r]])?
            .with_labels(
                vec!["heads".into(), "tails".into()],
                vec!["heads".into(), "tails".into()],
            )
    }

    /// Coordination game with `A = B = [[6, 0], [3, 2]]`.
    pub fn coordination() -> Self {
        let m = vec![vec![6.0, 0.0], vec![3.0, 2.0]];
        Self::new(m.clone(), m).expect("static matrix")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.k)
    }

    pub fn is_2x2(&self) -> bool {
        self.m == 2 && self.k == 2
    }

    pub fn labels(&self) -> (&[String], &[String]) {
        (&self.labels_x, &self.labels_y)
    }

    /// `a_ij`, zero-based.
    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.k + j]
    }

    /// `b_ij`, zero-based.
    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.m + j]
    }

    pub fn a_rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    pub fn b_rows(&self) -> Vec<Vec<f64>> {
        self.b.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    /// `(A y, B x)`.
    pub fn payoffs(
        &self,
        x: &SimplexDistribution,
        y: &SimplexDistribution,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        x.check_len(self.m)?;
        y.check_len(self.k)?;
        let mut px = vec![0.0; self.m];
        let mut py = vec![0.0; self.k];
        self.payoffs_into(x.weights(), y.weights(), &mut px, &mut py);
        Ok((px, py))
    }

    pub(crate) fn payoffs_into(&self, x: &[f64], y: &[f64], px: &mut [f64], py: &mut [f64]) {
        for (row, o) in self.a.chunks_exact(self.k).zip(px.iter_mut()) {
            *o = row.iter().zip(y).map(|(a, yj)| a * yj).sum();
        }
        for (row, o) in self.b.chunks_exact(self.m).zip(py.iter_mut()) {
            *o = row.iter().zip(x).map(|(b, xj)| b * xj).sum();
        }
    }

    /// `alpha = a11 + a22 - a21 - a12` and `beta = b11 + b22 - b21 - b12`.
    pub fn alpha_beta(&self) -> Result<(f64, f64)> {
        self.require_2x2()?;
        let alpha = self.a(0, 0) + self.a(1, 1) - self.a(1, 0) - self.a(0, 1);
        let beta = self.b(0, 0) + self.b(1, 1) - self.b(1, 0) - self.b(0, 1);
        Ok((alpha, beta))
    }

    pub(crate) fn require_2x2(&self) -> Result<()> {
        if !self.is_2x2() {
            return Err(Error::InvalidGame(format!(
                "operation requires a 2x2 game, got {}x{}",
                self.m, self.k
            )));
        }
        Ok(())
    }
}

fn flatten(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(nrows * ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::InvalidGame(format!(
                "{name}: row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidGame(format!("{name}[{i}][{j}] is not finite")));
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Rescaled turnover rate `chi = p / (1 - p)` and the strategy of newcomers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnoverConfig {
    pub chi: f64,
    pub prior: SimplexDistribution,
}

impl TurnoverConfig {
    pub fn new(chi: f64, prior: SimplexDistribution) -> Result<Self> {
        if !chi.is_finite() || chi < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "turnover rate must be finite and non-negative, got {chi}"
            )));
        }
        Ok(Self { chi, prior })
    }

    /// Turnover rate for a per-step replacement probability `p`.
    pub fn chi_from_probability(p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "replacement probability must lie in [0, 1), got {p}"
            )));
        }
        Ok(p / (1.0 - p))
    }

    pub(crate) fn require_interior_prior(&self) -> Result<()> {
        if !self.prior.is_interior() {
            return Err(Error::InvalidParameter(
                "prior must be strictly inside the simplex".into(),
            ));
        }
        Ok(())
    }
}

/// Turnover parameters of both populations in a bimatrix game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimatrixTurnover {
    pub x: TurnoverConfig,
    pub y: TurnoverConfig,
}

impl BimatrixTurnover {
    pub fn new(x: TurnoverConfig, y: TurnoverConfig) -> Self {
        Self { x, y }
    }

    /// 2x2 convenience: priors given as the weight of the first strategy.
    pub fn two_action(chi_x: f64, prior_x: f64, chi_y: f64, prior_y: f64) -> Result<Self> {
        Ok(Self {
            x: TurnoverConfig::new(chi_x, SimplexDistribution::binary(prior_x)?)?,
            y: TurnoverConfig::new(chi_y, SimplexDistribution::binary(prior_y)?)?,
        })
    }

    pub fn with_chi_x(&self, chi_x: f64) -> Self {
        let mut out = self.clone();
        out.x.chi = chi_x;
        out
    }

    pub fn with_chi_y(&self, chi_y: f64) -> Self {
        let mut out = self.clone();
        out.y.chi = chi_y;
        out
    }
}

/// `sum_i x_i pi_i`.
pub fn mean_payoff(pi: &[f64], x: &SimplexDistribution) -> Result<f64> {
    x.check_len(pi.len())?;
    Ok(dot(pi, x.weights()))
}

/// Payoffs shifted by the turnover correction `chi (x0_i / x_i - 1)`.
///
/// Only defined in the interior of the simplex; the correction has zero
/// mean under `x`, so `sum_i x_i pi~_i = sum_i x_i pi_i`.
pub fn effective_payoffs(
    pi: &[f64],
    x: &SimplexDistribution,
    cfg: &TurnoverConfig,
) -> Result<Vec<f64>> {
    x.check_len(pi.len())?;
    cfg.prior.check_len(pi.len())?;
    if let Some(index) = x.weights().iter().position(|&w| w <= 0.0) {
        return Err(Error::BoundaryDivergence { index });
    }
    Ok(pi
        .iter()
        .zip(x.weights())
        .zip(cfg.prior.weights())
        .map(|((p, xi), x0)| p + cfg.chi * (x0 / xi - 1.0))
        .collect())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
