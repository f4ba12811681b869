use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::count_and_solve_2x2;
use crate::dynamics::{fmt_float, settle, BimatrixFlow};
use crate::error::{Error, Result};
use crate::game::{BimatrixGame, BimatrixTurnover};
use crate::pool::run_pooled;

/// Label of cells whose trajectory reached no stable equilibrium.
pub const UNRESOLVED: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinSettings {
    pub step: f64,
    pub t_max: f64,
    /// Rest threshold on `||rhs||_inf`.
    pub eps: f64,
    /// Distance within which a settled state is assigned to an attractor.
    pub capture: f64,
}

impl Default for BasinSettings {
    fn default() -> Self {
        Self {
            step: 0.02,
            t_max: 1e4,
            eps: 1e-11,
            capture: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinMap {
    pub resolution: usize,
    /// Stable equilibria `(x, y)`; labels index into this list.
    pub attractors: Vec<(f64, f64)>,
    /// `labels[j][i]` for the cell centred at `((i + 1/2) / n, (j + 1/2) / n)`.
    pub labels: Vec<Vec<i32>>,
}

impl BasinMap {
    pub fn cell_centre(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.resolution as f64
    }

    /// CSV grid: a header of cell-centre `x` values, then one row per `y`
    /// (increasing) led by its centre.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "y\\x")?;
        for i in 0..self.resolution {
            write!(w, ",{}", fmt_float(self.cell_centre(i)))?;
        }
        writeln!(w)?;
        for (j, row) in self.labels.iter().enumerate() {
            write!(w, "{}", fmt_float(self.cell_centre(j)))?;
            for l in row {
                write!(w, ",{l}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Attractor reached from `(x, y)`: an index into `attractors` or
/// [`UNRESOLVED`].
pub fn basin_label(
    game: &BimatrixGame,
    cfg: &BimatrixTurnover,
    attractors: &[(f64, f64)],
    x: f64,
    y: f64,
    settings: &BasinSettings,
) -> Result<i32> {
    let flow = BimatrixFlow::new(game, cfg)?;
    label_from(&flow, attractors, x, y, settings)
}

fn label_from(
    flow: &BimatrixFlow<'_>,
    attractors: &[(f64, f64)],
    x: f64,
    y: f64,
    settings: &BasinSettings,
) -> Result<i32> {
    let end = settle(flow, &BimatrixFlow::state_2x2(x, y), settings.step, settings.eps, settings.t_max)?;
    if !end.converged {
        return Ok(UNRESOLVED);
    }
    let (sx, sy) = (end.state[0], end.state[2]);
    Ok(attractors
        .iter()
        .position(|&(ax, ay)| (ax - sx).abs().max((ay - sy).abs()) < settings.capture)
        .map_or(UNRESOLVED, |k| k as i32))
}

/// Integrates from every cell centre of a `resolution x resolution` lattice
/// over the unit square and labels it by the stable equilibrium reached.
pub fn basin_map(
    game: &BimatrixGame,
    cfg: &BimatrixTurnover,
    resolution: usize,
    settings: &BasinSettings,
    workers: usize,
) -> Result<BasinMap> {
    if resolution == 0 {
        return Err(Error::InvalidParameter("basin resolution must be positive".into()));
    }
    let attractors: Vec<(f64, f64)> = count_and_solve_2x2(game, cfg)?
        .stable()
        .filter_map(|e| e.pair())
        .collect();
    let flow = BimatrixFlow::new(game, cfg)?;
    let centre = |k: usize| (k as f64 + 0.5) / resolution as f64;
    let rows: Vec<Result<Vec<i32>>> = run_pooled(workers, || {
        (0..resolution)
            .into_par_iter()
            .map(|j| {
                (0..resolution)
                    .map(|i| label_from(&flow, &attractors, centre(i), centre(j), settings))
                    .collect()
            })
            .collect()
    })?;
    Ok(BasinMap {
        resolution,
        attractors,
        labels: rows.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior_label(chi_x: f64) -> (i32, Vec<(f64, f64)>) {
        let g = BimatrixGame::coordination();
        let c = BimatrixTurnover::two_action(chi_x, 0.9, 2.0, 0.1).unwrap();
        let attractors: Vec<(f64, f64)> = count_and_solve_2x2(&g, &c)
            .unwrap()
            .stable()
            .filter_map(|e| e.pair())
            .collect();
        let l = basin_label(&g, &c, &attractors, 0.9, 0.1, &BasinSettings::default()).unwrap();
        (l, attractors)
    }

    #[test]
    fn prior_switches_basin_between_070_and_073() {
        let (l, att) = prior_label(0.70);
        assert!(l >= 0);
        assert!(att[l as usize].0 < 0.5, "{att:?}");
        let (l, att) = prior_label(0.73);
        assert!(l >= 0);
        let (x, y) = att[l as usize];
        assert!((x - 0.9).abs() < 1e-9 && (y - 0.4).abs() < 1e-9);
    }

    #[test]
    fn single_attractor_fills_map() {
        let g = BimatrixGame::matching_pennies(2.0).unwrap();
        let c = BimatrixTurnover::two_action(1.0, 0.3, 1.0, 0.3).unwrap();
        let map = basin_map(&g, &c, 12, &BasinSettings::default(), 3).unwrap();
        assert_eq!(map.attractors.len(), 1);
        let resolved: Vec<i32> = map.labels.iter().flatten().copied().filter(|&l| l != UNRESOLVED).collect();
        assert!(!resolved.is_empty());
        assert!(resolved.iter().all(|&l| l == 0));
    }

    #[test]
    fn coordination_map_has_two_basins_and_is_deterministic() {
        let g = BimatrixGame::coordination();
        let c = BimatrixTurnover::two_action(0.5, 0.9, 2.0, 0.1).unwrap();
        let a = basin_map(&g, &c, 16, &BasinSettings::default(), 1).unwrap();
        let b = basin_map(&g, &c, 16, &BasinSettings::default(), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.attractors.len(), 2);
        let flat: Vec<i32> = a.labels.iter().flatten().copied().collect();
        assert!(flat.contains(&0) && flat.contains(&1));
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 17);
    }
}
