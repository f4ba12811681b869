//! Turnover equilibria and their stability.
//!
//! Single-population games are solved by damped Newton iteration on the
//! simplex from many starting points. For 2x2 bimatrix games the rest
//! condition of the second population is reduced to a scalar equation in
//! the first population's state, which is bracketed exhaustively; this is
//! what makes the equilibrium count reliable enough to scan for
//! bifurcations.

mod basin;
mod bifurcation;
mod bimatrix;
mod single;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::fmt_float;
use crate::simplex::SimplexDistribution;

pub use basin::{basin_label, basin_map, BasinMap, BasinSettings, UNRESOLVED};
pub use bifurcation::{
    bifurcation_scan, BifurcationDiagram, BifurcationEvent, ChiParameter, EventKind,
};
pub use bimatrix::{
    count_and_solve_2x2, eigenvalues_2x2, finite_difference_jacobian_2x2, jacobian_2x2,
    pennies_critical_rates, reduce_y_of_x, verify_stable_2x2, YStarReduction, GRID_POINTS,
};
pub use single::solve_single;

/// Real parts within this distance of zero count as marginal.
pub const MARGINAL_BAND: f64 = 1e-8;

/// Largest accepted `||rhs||_inf` at a reported equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableNode,
    StableFocus,
    Saddle,
    UnstableNode,
    UnstableFocus,
    Marginal,
}

impl Stability {
    pub fn from_eigenvalues(eigenvalues: &[Eigenvalue]) -> Self {
        let max_re = eigenvalues
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_re = eigenvalues.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
        let oscillates = eigenvalues.iter().any(|e| e.im != 0.0);
        if max_re.abs() <= MARGINAL_BAND {
            Stability::Marginal
        } else if max_re < 0.0 {
            if oscillates {
                Stability::StableFocus
            } else {
                Stability::StableNode
            }
        } else if min_re < -MARGINAL_BAND {
            Stability::Saddle
        } else if oscillates {
            Stability::UnstableFocus
        } else {
            Stability::UnstableNode
        }
    }

    /// Number of eigenvalues with positive real part; `None` when marginal.
    /// Node and focus variants share an index.
    pub fn unstable_dimension(self) -> Option<usize> {
        match self {
            Stability::StableNode | Stability::StableFocus => Some(0),
            Stability::Saddle => Some(1),
            Stability::UnstableNode | Stability::UnstableFocus => Some(2),
            Stability::Marginal => None,
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, Stability::StableNode | Stability::StableFocus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stability::StableNode => "stable_node",
            Stability::StableFocus => "stable_focus",
            Stability::Saddle => "saddle",
            Stability::UnstableNode => "unstable_node",
            Stability::UnstableFocus => "unstable_focus",
            Stability::Marginal => "marginal",
        }
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EquilibriumState {
    Single { x: SimplexDistribution },
    /// First-strategy frequencies of the two populations.
    Pair { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub state: EquilibriumState,
    /// `||rhs||_inf` at `state`.
    pub residual: f64,
    pub stability: Stability,
    pub eigenvalues: Vec<Eigenvalue>,
    /// Outcome of the perturbed forward integration, when one was run.
    pub verified: Option<bool>,
}

impl Equilibrium {
    pub fn pair(&self) -> Option<(f64, f64)> {
        match self.state {
            EquilibriumState::Pair { x, y } => Some((x, y)),
            EquilibriumState::Single { .. } => None,
        }
    }

    pub fn single(&self) -> Option<&SimplexDistribution> {
        match &self.state {
            EquilibriumState::Single { x } => Some(x),
            EquilibriumState::Pair { .. } => None,
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        match &self.state {
            EquilibriumState::Single { x } => x.weights().to_vec(),
            EquilibriumState::Pair { x, y } => vec![*x, *y],
        }
    }

    pub fn distance_inf(&self, other: &Equilibrium) -> f64 {
        crate::simplex::max_abs_diff(&self.coordinates(), &other.coordinates())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub equilibria: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Equilibrium> {
        self.equilibria.iter()
    }

    pub fn stable(&self) -> impl Iterator<Item = &Equilibrium> {
        self.equilibria.iter().filter(|e| e.stability.is_stable())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("equilibria serialize")
    }

    /// One row per equilibrium: state coordinates, stability, residual and
    /// eigenvalues.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Some(first) = self.equilibria.first() else {
            return writeln!(w, "index,stability,residual");
        };
        let mut header = vec!["index".to_string()];
        header.extend(state_columns(first));
        header.extend(["stability".into(), "residual".into(), "verified".into()]);
        for k in 1..=first.eigenvalues.len() {
            header.push(format!("eig{k}_re"));
            header.push(format!("eig{k}_im"));
        }
        writeln!(w, "{}", header.join(","))?;
        for (i, e) in self.equilibria.iter().enumerate() {
            write!(w, "{i}")?;
            write_equilibrium_fields(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

fn state_columns(e: &Equilibrium) -> Vec<String> {
    match &e.state {
        EquilibriumState::Pair { .. } => vec!["x".into(), "y".into()],
        EquilibriumState::Single { x } => (1..=x.len()).map(|i| format!("x_{i}")).collect(),
    }
}

fn write_equilibrium_fields<W: Write>(w: &mut W, e: &Equilibrium) -> std::io::Result<()> {
    for v in e.coordinates() {
        write!(w, ",{}", fmt_float(v))?;
    }
    let verified = e.verified.map(|v| v.to_string()).unwrap_or_default();
    write!(w, ",{},{},{verified}", e.stability, fmt_float(e.residual))?;
    for ev in &e.eigenvalues {
        write!(w, ",{},{}", fmt_float(ev.re), fmt_float(ev.im))?;
    }
    Ok(())
}
