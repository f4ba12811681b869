use super::{Eigenvalue, Equilibrium, EquilibriumSet, EquilibriumState, Stability, RESIDUAL_TOL};
use crate::dynamics::{alpha_beta_unchecked, rhs_2x2_unchecked, settle, BimatrixFlow};
use crate::error::{Error, Result};
use crate::game::{BimatrixGame, BimatrixTurnover};

/// Grid resolution of the scalar root search.
pub const GRID_POINTS: usize = 10_000;
const BISECT_WIDTH: f64 = 1e-12;
const DEDUP: f64 = 1e-9;

/// The `x`-rest condition solved for `y`, plus the composite function whose
/// zeros are the equilibria.
///
/// `y*(x) = (chi_x / alpha) (x - x0) / (x (1 - x)) - (a12 - a22) / alpha` is
/// strictly monotone on `(0, 1)`, so it crosses 0 and 1 exactly once each;
/// between those two points `h(x) = beta x + b12 - b22 - g(x)` with
/// `g(x) = chi_y (y* - y0) / (y* (1 - y*))` runs from `+inf` (at `y* = 0`)
/// to `-inf` (at `y* = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YStarReduction {
    pub alpha: f64,
    pub beta: f64,
    gap_a: f64,
    gap_b: f64,
    chi_x: f64,
    chi_y: f64,
    x0: f64,
    y0: f64,
    /// `x` where `y* = 0`.
    pub zero_at: f64,
    /// `x` where `y* = 1`.
    pub one_at: f64,
}

fn check_config(game: &BimatrixGame, cfg: &BimatrixTurnover) -> Result<(f64, f64)> {
    game.require_2x2()?;
    for (name, c) in [("x", &cfg.x), ("y", &cfg.y)] {
        c.prior.check_len(2)?;
        c.require_interior_prior()?;
        if c.chi <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "turnover rate of population {name} must be positive, got {}",
                c.chi
            )));
        }
    }
    let (alpha, beta) = alpha_beta_unchecked(game);
    let scale = 1.0 + (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| game.a(i, j).abs())
        .fold(0.0, f64::max);
    if alpha.abs() <= 1e-12 * scale {
        return Err(Error::DegenerateGame(
            "alpha = a11 + a22 - a21 - a12 vanishes".into(),
        ));
    }
    Ok((alpha, beta))
}

/// Builds `y*(x)` and its two singular points.
pub fn reduce_y_of_x(game: &BimatrixGame, cfg: &BimatrixTurnover) -> Result<YStarReduction> {
    let (alpha, beta) = check_config(game, cfg)?;
    let gap_a = game.a(0, 1) - game.a(1, 1);
    let chi_x = cfg.x.chi;
    let x0 = cfg.x.prior[0];
    Ok(YStarReduction {
        alpha,
        beta,
        gap_a,
        gap_b: game.b(0, 1) - game.b(1, 1),
        chi_x,
        chi_y: cfg.y.chi,
        x0,
        y0: cfg.y.prior[0],
        zero_at: level_crossing(gap_a, chi_x, x0),
        one_at: level_crossing(alpha + gap_a, chi_x, x0),
    })
}

/// Root in `(0, 1)` of `k x^2 + (chi - k) x - chi x0`, where `y*` equals
/// the level `c` and `k = alpha c + a12 - a22`. The quadratic is negative at
/// 0 and positive at 1, so exactly one root lies in between.
fn level_crossing(k: f64, chi: f64, x0: f64) -> f64 {
    let quad = |x: f64| k * x * x + (chi - k) * x - chi * x0;
    if k == 0.0 {
        return x0;
    }
    let b = chi - k;
    let disc = (b * b + 4.0 * k * chi * x0).max(0.0);
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let candidates = [q / k, if q != 0.0 { -chi * x0 / q } else { f64::NAN }];
    if let Some(&r) = candidates.iter().find(|r| **r > 0.0 && **r < 1.0) {
        return r;
    }
    // Round-off pushed the root onto the boundary; bisect instead.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quad(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl YStarReduction {
    pub fn y_star(&self, x: f64) -> f64 {
        self.chi_x / self.alpha * (x - self.x0) / (x * (1.0 - x)) - self.gap_a / self.alpha
    }

    /// Open interval of `x` on which `y*(x)` lies in `(0, 1)`.
    pub fn admissible(&self) -> (f64, f64) {
        (self.zero_at.min(self.one_at), self.zero_at.max(self.one_at))
    }

    pub fn g(&self, x: f64) -> f64 {
        let y = self.y_star(x);
        self.chi_y * (y - self.y0) / (y * (1.0 - y))
    }

    pub fn h(&self, x: f64) -> f64 {
        self.beta * x + self.gap_b - self.g(x)
    }

    /// Sign of `h`, taking the limit value wherever round-off puts `y*`
    /// on or past 0 or 1.
    fn h_sign(&self, x: f64) -> f64 {
        let y = self.y_star(x);
        if y <= 0.0 {
            1.0
        } else if y >= 1.0 {
            -1.0
        } else {
            sign(self.h(x))
        }
    }
}

/// All turnover equilibria of a 2x2 game, with stability.
///
/// `h` is sampled on `GRID_POINTS` interior points of the admissible
/// interval, with the known infinite limits standing in for the two ends.
/// Sign changes are bisected to width `1e-12`; the end cells are first
/// subdivided geometrically towards the singular point so roots crowding
/// the boundary are separated. Each root is then polished by Newton
/// iteration on the full two-dimensional system.
pub fn count_and_solve_2x2(game: &BimatrixGame, cfg: &BimatrixTurnover) -> Result<EquilibriumSet> {
    let red = reduce_y_of_x(game, cfg)?;
    check_boundary(game, cfg)?;
    let (lo, hi) = red.admissible();
    // Sign of h at the lower end of the interval.
    let lo_sign = if red.zero_at < red.one_at { 1.0 } else { -1.0 };

    let width = hi - lo;
    let grid: Vec<f64> = (1..=GRID_POINTS)
        .map(|k| lo + width * k as f64 / (GRID_POINTS + 1) as f64)
        .collect();
    let signs: Vec<f64> = grid.iter().map(|&x| red.h_sign(x)).collect();

    // (a, b, sign at a): h changes sign between a and b.
    let mut brackets: Vec<(f64, f64, f64)> = Vec::new();
    end_brackets(&red, lo, grid[0], lo_sign, &mut brackets);
    for k in 0..grid.len() - 1 {
        if signs[k] != signs[k + 1] {
            brackets.push((grid[k], grid[k + 1], signs[k]));
        }
    }
    end_brackets(&red, hi, grid[grid.len() - 1], -lo_sign, &mut brackets);

    // (x, must converge): crossings are certain roots, touches only candidates.
    let (split, touches) = hidden_roots(&red, &grid, &signs);
    brackets.extend(split);
    let mut candidates: Vec<(f64, bool)> = brackets
        .into_iter()
        .map(|(a, b, sa)| (bisect(&red, a, b, sa), true))
        .collect();
    candidates.extend(touches.into_iter().map(|x| (x, false)));

    let mut roots: Vec<(f64, f64, f64)> = Vec::new();
    for (x, required) in candidates {
        let (x, y) = polish(game, cfg, x, red.y_star(x));
        let (fx, fy) = rhs_2x2_unchecked(game, cfg, x, y);
        let residual = fx.abs().max(fy.abs());
        if residual >= RESIDUAL_TOL {
            if !required {
                continue;
            }
            return Err(Error::NonConvergence {
                detail: format!("equilibrium near ({x}, {y}) could not be refined"),
                residual,
            });
        }
        if roots
            .iter()
            .all(|&(rx, ry, _)| (rx - x).abs().max((ry - y).abs()) > DEDUP)
        {
            roots.push((x, y, residual));
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut equilibria = Vec::with_capacity(roots.len());
    for (x, y, residual) in roots {
        let eigenvalues = eigenvalues_2x2(&jacobian_unchecked(game, cfg, x, y)).to_vec();
        equilibria.push(Equilibrium {
            state: EquilibriumState::Pair { x, y },
            residual,
            stability: Stability::from_eigenvalues(&eigenvalues),
            eigenvalues,
            verified: None,
        });
    }
    Ok(EquilibriumSet { equilibria })
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Subdivides the cell between the singular point `end` and the nearest
/// grid point geometrically, pushing each sign change found.
fn end_brackets(
    red: &YStarReduction,
    end: f64,
    nearest: f64,
    end_sign: f64,
    out: &mut Vec<(f64, f64, f64)>,
) {
    let gap = nearest - end;
    // Points from the grid point towards the singularity.
    let mut pts: Vec<(f64, f64)> = (0..=160)
        .map(|k| end + gap * 10f64.powf(-(k as f64) / 8.0))
        .filter(|&x| x != end && x > 0.0 && x < 1.0)
        .map(|x| (x, red.h_sign(x)))
        .collect();
    pts.dedup_by(|a, b| a.0 == b.0);
    let mut found = Vec::new();
    for w in pts.windows(2) {
        if w[0].1 != w[1].1 {
            found.push((w[0].0, w[1].0, w[0].1));
        }
    }
    if let Some(&(x, s)) = pts.last() {
        if s != end_sign {
            found.push((x, end, s));
        }
    }
    // Brackets are stored with a < b.
    out.extend(found.into_iter().map(|(a, b, sa)| {
        if a < b {
            (a, b, sa)
        } else {
            (b, a, -sa)
        }
    }));
}

/// Roots hidden inside one grid cell: at each grid-level dip of `s h`
/// (with `s` the common sign of three neighbours) the dip is minimized. A
/// minimum below zero splits into two brackets; one within round-off of
/// zero is a double root, as at a transcritical crossing.
fn hidden_roots(
    red: &YStarReduction,
    grid: &[f64],
    signs: &[f64],
) -> (Vec<(f64, f64, f64)>, Vec<f64>) {
    let scale = 1.0 + red.beta.abs() + red.gap_b.abs();
    let mut brackets = Vec::new();
    let mut touches = Vec::new();
    let mut prev = f64::INFINITY;
    let mut here = signs[0] * red.h(grid[0]);
    for k in 1..grid.len() - 1 {
        let next = signs[k + 1] * red.h(grid[k + 1]);
        let level = signs[k - 1] == signs[k] && signs[k] == signs[k + 1];
        let dip = level && here.is_finite() && here <= prev && here <= next;
        (prev, here) = (here, next);
        if !dip {
            continue;
        }
        let s = signs[k];
        let f = |x: f64| {
            let v = s * red.h(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let (a, b) = (grid[k - 1], grid[k + 1]);
        let x = golden_min(f, a, b);
        let v = f(x);
        if v < 0.0 {
            brackets.push((a, x, s));
            brackets.push((x, b, -s));
        } else if v < 1e-9 * scale {
            touches.push(x);
        }
    }
    (brackets, touches)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > BISECT_WIDTH {
        if fc < fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + phi * (b - a);
            fd = f(d);
        }
        if fc < 0.0 || fd < 0.0 {
            // Already below zero: the dip holds a pair of crossings.
            return if fc < fd { c } else { d };
        }
    }
    0.5 * (a + b)
}

fn bisect(red: &YStarReduction, mut a: f64, mut b: f64, sa: f64) -> f64 {
    while b - a >= BISECT_WIDTH {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if red.h_sign(m) == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Newton steps on `(dx/dt, dy/dt) = 0`; keeps the input if they do not help.
fn polish(game: &BimatrixGame, cfg: &BimatrixTurnover, x: f64, y: f64) -> (f64, f64) {
    let resid = |x: f64, y: f64| {
        let (a, b) = rhs_2x2_unchecked(game, cfg, x, y);
        a.abs().max(b.abs())
    };
    let (mut bx, mut by) = (x, y);
    let mut best = if (0.0..=1.0).contains(&y) { resid(x, y) } else { f64::INFINITY };
    let (mut cx, mut cy) = (bx, by.clamp(0.0, 1.0));
    for _ in 0..30 {
        let (fx, fy) = rhs_2x2_unchecked(game, cfg, cx, cy);
        let j = jacobian_unchecked(game, cfg, cx, cy);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (-fx * j[1][1] + fy * j[0][1]) / det;
        let dy = (-fy * j[0][0] + fx * j[1][0]) / det;
        let (nx, ny) = (cx + dx, cy + dy);
        if !(nx > 0.0 && nx < 1.0 && ny > 0.0 && ny < 1.0) {
            break;
        }
        let r = resid(nx, ny);
        (cx, cy) = (nx, ny);
        if r < best {
            best = r;
            (bx, by) = (nx, ny);
        }
        if r < 1e-16 || (dx.abs().max(dy.abs()) < 1e-17) {
            break;
        }
    }
    // A jump of more than the bisection tolerance would be another root.
    if (bx - x).abs() > 1e-6 {
        return (x, y);
    }
    (bx, by)
}

/// With interior priors and positive rates the turnover term pushes inward
/// on every edge of the unit square, so no boundary point is at rest.
fn check_boundary(game: &BimatrixGame, cfg: &BimatrixTurnover) -> Result<()> {
    const EDGE: usize = 100;
    for k in 0..=EDGE {
        let t = k as f64 / EDGE as f64;
        for (x, y) in [(0.0, t), (1.0, t), (t, 0.0), (t, 1.0)] {
            let (fx, fy) = rhs_2x2_unchecked(game, cfg, x, y);
            if fx.abs().max(fy.abs()) == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "boundary point ({x}, {y}) is at rest"
                )));
            }
        }
    }
    Ok(())
}

fn jacobian_unchecked(game: &BimatrixGame, cfg: &BimatrixTurnover, x: f64, y: f64) -> [[f64; 2]; 2] {
    let (alpha, beta) = alpha_beta_unchecked(game);
    let gap_x = alpha * y + game.a(0, 1) - game.a(1, 1);
    let gap_y = beta * x + game.b(0, 1) - game.b(1, 1);
    [
        [(1.0 - 2.0 * x) * gap_x - cfg.x.chi, x * (1.0 - x) * alpha],
        [y * (1.0 - y) * beta, (1.0 - 2.0 * y) * gap_y - cfg.y.chi],
    ]
}

/// `d(dx/dt, dy/dt) / d(x, y)`.
pub fn jacobian_2x2(
    game: &BimatrixGame,
    cfg: &BimatrixTurnover,
    x: f64,
    y: f64,
) -> Result<[[f64; 2]; 2]> {
    game.require_2x2()?;
    for (name, v) in [("x", x), ("y", y)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{name} = {v} lies outside [0, 1]")));
        }
    }
    Ok(jacobian_unchecked(game, cfg, x, y))
}

/// Central-difference Jacobian with step `h`.
pub fn finite_difference_jacobian_2x2(
    game: &BimatrixGame,
    cfg: &BimatrixTurnover,
    x: f64,
    y: f64,
    h: f64,
) -> Result<[[f64; 2]; 2]> {
    game.require_2x2()?;
    let (px, mx) = (
        rhs_2x2_unchecked(game, cfg, x + h, y),
        rhs_2x2_unchecked(game, cfg, x - h, y),
    );
    let (py, my) = (
        rhs_2x2_unchecked(game, cfg, x, y + h),
        rhs_2x2_unchecked(game, cfg, x, y - h),
    );
    let d = 2.0 * h;
    Ok([
        [(px.0 - mx.0) / d, (py.0 - my.0) / d],
        [(px.1 - mx.1) / d, (py.1 - my.1) / d],
    ])
}

/// Eigenvalues of a real 2x2 matrix, larger real part first.
pub fn eigenvalues_2x2(j: &[[f64; 2]; 2]) -> [Eigenvalue; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [
            Eigenvalue { re: 0.5 * tr + s, im: 0.0 },
            Eigenvalue { re: 0.5 * tr - s, im: 0.0 },
        ]
    } else {
        let s = (-disc).sqrt();
        [
            Eigenvalue { re: 0.5 * tr, im: s },
            Eigenvalue { re: 0.5 * tr, im: -s },
        ]
    }
}

/// Integrates from a `1e-3` perturbation of each stable equilibrium and
/// records whether it returns within `1e-6`.
pub fn verify_stable_2x2(
    game: &BimatrixGame,
    cfg: &BimatrixTurnover,
    set: &mut EquilibriumSet,
) -> Result<()> {
    let flow = BimatrixFlow::new(game, cfg)?;
    for eq in &mut set.equilibria {
        let Some((x, y)) = eq.pair() else { continue };
        if !eq.stability.is_stable() {
            continue;
        }
        let kick = 1e-3f64.min(0.5 * x.min(1.0 - x)).min(0.5 * y.min(1.0 - y));
        let start = BimatrixFlow::state_2x2(x + kick, y - kick);
        let settled = settle(&flow, &start, 0.01, 1e-13, 1e5)?;
        let (sx, sy) = (settled.state[0], settled.state[2]);
        eq.verified = Some((sx - x).abs().max((sy - y).abs()) < 1e-6);
    }
    Ok(())
}

/// Critical turnover rates of matching pennies with stake `r` at which one
/// population is held at the indifferent mix:
/// `chi_x,c = -r (1 - 2 y0) / (1 - 2 x0)` and
/// `chi_y,c = r (1 - 2 x0) / (1 - 2 y0)`, each `None` unless positive.
pub fn pennies_critical_rates(r: f64, x0: f64, y0: f64) -> Result<(Option<f64>, Option<f64>)> {
    for (name, v) in [("x0", x0), ("y0", y0)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")));
        }
        if v == 0.5 {
            return Err(Error::InvalidParameter(format!(
                "{name} = 1/2 leaves the critical rate undefined"
            )));
        }
    }
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!("stake must be finite, got {r}")));
    }
    let positive = |v: f64| (v > 0.0).then_some(v);
    Ok((
        positive(-r * (1.0 - 2.0 * y0) / (1.0 - 2.0 * x0)),
        positive(r * (1.0 - 2.0 * x0) / (1.0 - 2.0 * y0)),
    ))
}
