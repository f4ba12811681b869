use nalgebra::{DMatrix, DVector};

use super::{Eigenvalue, Equilibrium, EquilibriumSet, EquilibriumState, Stability, RESIDUAL_TOL};
use crate::dynamics::{settle, FlowSystem, TurnoverFlow};
use crate::error::{Error, Result};
use crate::game::{MatrixGame, TurnoverConfig};
use crate::simplex::{max_abs, max_abs_diff, SimplexDistribution};

const LATTICE_POINTS: usize = 100;
const MAX_NEWTON: usize = 200;
const DEDUP: f64 = 1e-6;
const PERTURBATION: f64 = 1e-3;
const VERIFY_TOL: f64 = 1e-6;

/// Interior turnover equilibria of a single-population matrix game.
///
/// Newton iteration runs in the first `n - 1` coordinates from the prior,
/// the barycentre and an interior barycentric lattice of about 100 points.
/// Stable roots are re-approached by forward integration from a perturbed
/// start and flagged in `verified`.
pub fn solve_single(game: &MatrixGame, cfg: &TurnoverConfig) -> Result<EquilibriumSet> {
    let n = game.dim();
    cfg.prior.check_len(n)?;
    cfg.require_interior_prior()?;
    if cfg.chi <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "turnover rate must be positive, got {}",
            cfg.chi
        )));
    }
    let flow = TurnoverFlow::new(game, cfg)?;

    let mut starts = vec![cfg.prior.weights().to_vec(), vec![1.0 / n as f64; n]];
    starts.extend(barycentric_lattice(n, LATTICE_POINTS));

    let mut roots: Vec<Vec<f64>> = Vec::new();
    for start in starts {
        if let Some(root) = newton(game, cfg, &flow, start) {
            if roots.iter().all(|r| max_abs_diff(r, &root) > DEDUP) {
                roots.push(root);
            }
        }
    }
    if roots.is_empty() {
        return Err(Error::NoEquilibrium(
            "Newton iteration failed from every starting point".into(),
        ));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));

    let mut equilibria = Vec::with_capacity(roots.len());
    for root in roots {
        let mut rhs = vec![0.0; n];
        flow.rhs(&root, &mut rhs);
        let eigenvalues = reduced_eigenvalues(game, cfg, &root);
        let stability = Stability::from_eigenvalues(&eigenvalues);
        let verified = if stability.is_stable() {
            Some(attracts_perturbation(game, cfg, &flow, &root)?)
        } else {
            None
        };
        equilibria.push(Equilibrium {
            state: EquilibriumState::Single {
                x: SimplexDistribution::new(root)?,
            },
            residual: max_abs(&rhs),
            stability,
            eigenvalues,
            verified,
        });
    }
    Ok(EquilibriumSet { equilibria })
}

/// Interior points `k / m` with every `k_i >= 1`, for the smallest `m`
/// giving at least `target` points.
fn barycentric_lattice(n: usize, target: usize) -> Vec<Vec<f64>> {
    if n < 2 {
        return Vec::new();
    }
    let mut m = n;
    while binomial(m - 1, n - 1) < target as f64 {
        m += 1;
    }
    let mut out = Vec::new();
    let mut parts = vec![1usize; n];
    compositions(m, 0, &mut parts, &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn compositions(m: usize, i: usize, parts: &mut [usize], out: &mut Vec<Vec<f64>>) {
    let n = parts.len();
    let used: usize = parts[..i].iter().sum();
    if i == n - 1 {
        parts[i] = m - used;
        out.push(parts.iter().map(|&k| k as f64 / m as f64).collect());
        return;
    }
    let remaining_min = n - i - 1;
    for k in 1..=(m - used - remaining_min) {
        parts[i] = k;
        compositions(m, i + 1, parts, out);
    }
}

/// Full Jacobian of the single-population rhs in all `n` coordinates.
fn full_jacobian(game: &MatrixGame, cfg: &TurnoverConfig, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut ax = vec![0.0; n];
    game.payoffs_into(x, &mut ax);
    let atx: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| game.entry(i, j) * x[i]).sum())
        .collect();
    let mean: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { ax[i] - mean - cfg.chi } else { 0.0 };
        diag + x[i] * (game.entry(i, j) - ax[j] - atx[j])
    })
}

/// Jacobian in the coordinates `x_1 .. x_{n-1}` with `x_n = 1 - sum`.
fn reduced_jacobian(game: &MatrixGame, cfg: &TurnoverConfig, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let full = full_jacobian(game, cfg, x);
    DMatrix::from_fn(n - 1, n - 1, |i, j| full[(i, j)] - full[(i, n - 1)])
}

fn reduced_eigenvalues(game: &MatrixGame, cfg: &TurnoverConfig, x: &[f64]) -> Vec<Eigenvalue> {
    if x.len() < 2 {
        return Vec::new();
    }
    let mut ev: Vec<Eigenvalue> = reduced_jacobian(game, cfg, x)
        .complex_eigenvalues()
        .iter()
        .map(|c| Eigenvalue { re: c.re, im: c.im })
        .collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

fn newton(
    game: &MatrixGame,
    cfg: &TurnoverConfig,
    flow: &TurnoverFlow<'_, MatrixGame>,
    mut x: Vec<f64>,
) -> Option<Vec<f64>> {
    let n = x.len();
    let mut f = vec![0.0; n];
    flow.rhs(&x, &mut f);
    let mut norm = max_abs(&f);
    for _ in 0..MAX_NEWTON {
        if norm < 1e-15 {
            break;
        }
        let jac = reduced_jacobian(game, cfg, &x);
        let rhs = DVector::from_iterator(n - 1, f[..n - 1].iter().map(|v| -v));
        let step = jac.lu().solve(&rhs)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = x.clone();
            for i in 0..n - 1 {
                trial[i] += lambda * step[i];
            }
            trial[n - 1] = 1.0 - trial[..n - 1].iter().sum::<f64>();
            if trial.iter().all(|&v| v > 0.0) {
                let mut ft = vec![0.0; n];
                flow.rhs(&trial, &mut ft);
                let nt = max_abs(&ft);
                if nt < (1.0 - 1e-4 * lambda) * norm {
                    x = trial;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (norm < RESIDUAL_TOL).then_some(x)
}

fn flow_rate_scale(game: &MatrixGame, chi: f64) -> f64 {
    let n = game.dim();
    let max_entry = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| game.entry(i, j).abs())
        .fold(0.0, f64::max);
    chi + 4.0 * max_entry + 1.0
}

fn attracts_perturbation(
    game: &MatrixGame,
    cfg: &TurnoverConfig,
    flow: &TurnoverFlow<'_, MatrixGame>,
    root: &[f64],
) -> Result<bool> {
    let n = root.len();
    // Alternating kick with zero sum, shrunk if it would leave the simplex.
    let mut kick: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    if n % 2 == 1 {
        kick[n - 1] = 0.0;
    }
    let room = root.iter().cloned().fold(f64::INFINITY, f64::min);
    let size = PERTURBATION.min(0.5 * room);
    let start: Vec<f64> = root.iter().zip(&kick).map(|(r, k)| r + size * k).collect();
    // RK4 needs the step well inside 2.8 / |lambda|; chi dominates the
    // spectrum for strong turnover.
    let step = 0.01f64.min(0.5 / flow_rate_scale(game, cfg.chi));
    let settled = settle(flow, &start, step, 1e-12, 1e5)?;
    Ok(settled.converged && max_abs_diff(&settled.state, root) < VERIFY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegratorSettings};

    fn rps_cfg(chi: f64) -> TurnoverConfig {
        TurnoverConfig::new(chi, SimplexDistribution::new(vec![0.8, 0.1, 0.1]).unwrap()).unwrap()
    }

    #[test]
    fn lattice_size_and_interior() {
        let pts = barycentric_lattice(3, 100);
        assert_eq!(pts.len(), 105);
        for p in &pts {
            assert!(p.iter().all(|&v| v > 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(barycentric_lattice(2, 100).len(), 100);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let game = MatrixGame::rock_paper_scissors();
        let cfg = rps_cfg(0.3);
        let flow = TurnoverFlow::new(&game, &cfg).unwrap();
        let x = [0.5, 0.3, 0.2];
        let jac = full_jacobian(&game, &cfg, &x);
        let h = 1e-6;
        for j in 0..3 {
            let (mut up, mut dn) = (x.to_vec(), x.to_vec());
            up[j] += h;
            dn[j] -= h;
            let (mut fu, mut fd) = (vec![0.0; 3], vec![0.0; 3]);
            flow.rhs(&up, &mut fu);
            flow.rhs(&dn, &mut fd);
            for i in 0..3 {
                let fdiff = (fu[i] - fd[i]) / (2.0 * h);
                assert!((fdiff - jac[(i, j)]).abs() < 1e-8, "({i},{j})");
            }
        }
    }

    #[test]
    fn rps_large_chi_returns_prior() {
        let game = MatrixGame::rock_paper_scissors();
        let set = solve_single(&game, &rps_cfg(1e4)).unwrap();
        assert_eq!(set.len(), 1);
        let x = set.equilibria[0].single().unwrap();
        assert!(x.distance_inf(&rps_cfg(1e4).prior) < 1e-3);
    }

    #[test]
    fn rps_quarter_matches_long_integration() {
        let game = MatrixGame::rock_paper_scissors();
        let cfg = rps_cfg(0.25);
        let set = solve_single(&game, &cfg).unwrap();
        assert_eq!(set.len(), 1);
        let eq = &set.equilibria[0];
        assert!(eq.residual < 1e-10);
        assert!(eq.stability.is_stable());
        assert_eq!(eq.verified, Some(true));
        let flow = TurnoverFlow::new(&game, &cfg).unwrap();
        let settings = IntegratorSettings {
            t_max: 1e3,
            record_stride: 1000,
            ..Default::default()
        };
        let traj = integrate(&flow, cfg.prior.weights(), &settings).unwrap();
        let x = eq.single().unwrap().weights();
        assert!(max_abs_diff(traj.final_state(), x) < 1e-6);
        // displaced from the prior towards paper
        assert!(x[1] > 0.1);
    }

    #[test]
    fn zero_game_equilibrium_is_prior() {
        let game = MatrixGame::new(vec![vec![0.0; 2]; 2]).unwrap();
        let cfg = TurnoverConfig::new(0.7, SimplexDistribution::binary(0.3).unwrap()).unwrap();
        let set = solve_single(&game, &cfg).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.equilibria[0].single().unwrap().distance_inf(&cfg.prior) < 1e-15);
        assert_eq!(set.equilibria[0].stability, Stability::StableNode);
    }

    #[test]
    fn bistable_two_strategy_game() {
        // Coordination with weak turnover: two stable roots and one unstable.
        let game = MatrixGame::new(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let cfg = TurnoverConfig::new(0.01, SimplexDistribution::binary(0.5).unwrap()).unwrap();
        let set = solve_single(&game, &cfg).unwrap();
        let labels: Vec<_> = set.iter().map(|e| e.stability).collect();
        assert_eq!(set.len(), 3, "{labels:?}");
        assert_eq!(set.stable().count(), 2);
        assert!(set.iter().all(|e| e.residual < 1e-10));
        assert!(set.stable().all(|e| e.verified == Some(true)));
    }

    #[test]
    fn rejects_boundary_prior_and_zero_chi() {
        let game = MatrixGame::rock_paper_scissors();
        let edge = TurnoverConfig::new(0.2, SimplexDistribution::vertex(3, 0)).unwrap();
        assert!(matches!(solve_single(&game, &edge), Err(Error::InvalidParameter(_))));
        assert!(solve_single(&game, &rps_cfg(0.0)).is_err());
    }
}
