use std::io::Write;

use serde::{Deserialize, Serialize};

use super::FlowSystem;
use crate::error::{Error, Result};
use crate::simplex::{max_abs, max_abs_diff, SimplexDistribution};

/// Components may leave `[0, 1]` by this much before a step counts as unstable.
const RANGE_SLACK: f64 = 1e-6;
/// Largest admissible mass change from clipping and renormalizing one step.
const DRIFT_BUDGET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub step: f64,
    pub t_max: f64,
    /// Sup-norm of the vector field below which a state counts as at rest.
    pub convergence_eps: f64,
    pub record_stride: usize,
    /// Consecutive recorded states that must be at rest.
    pub convergence_window: usize,
    /// Distance to an earlier state that counts as a return.
    pub recurrence_tol: f64,
    /// Minimum excursion away from that state before a return counts.
    pub excursion_min: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            step: 0.01,
            t_max: 1e4,
            convergence_eps: 1e-10,
            record_stride: 1,
            convergence_window: 100,
            recurrence_tol: 1e-6,
            excursion_min: 1e-3,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("t_max", self.t_max),
            ("convergence_eps", self.convergence_eps),
            ("recurrence_tol", self.recurrence_tol),
            ("excursion_min", self.excursion_min),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.step >= self.t_max {
            return Err(Error::InvalidParameter(format!(
                "step {} must be smaller than t_max {}",
                self.step, self.t_max
            )));
        }
        if self.record_stride == 0 || self.convergence_window == 0 {
            return Err(Error::InvalidParameter(
                "record_stride and convergence_window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Converged,
    Periodic,
    MaxTime,
}

impl std::fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::Periodic => "periodic",
            TerminalStatus::MaxTime => "max_time",
        })
    }
}

/// Recorded states of an integration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Sizes of the per-population blocks of each state.
    pub blocks: Vec<usize>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `||rhs||_inf` at each recorded state.
    pub rhs_norms: Vec<f64>,
    pub terminal_status: TerminalStatus,
    /// Steps on which a negative component had to be clipped.
    pub clip_events: usize,
    /// Largest per-step clip-and-renormalize correction.
    pub max_correction: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// Population `block` of recorded state `index`.
    pub fn population(&self, index: usize, block: usize) -> Result<SimplexDistribution> {
        let start: usize = self.blocks[..block].iter().sum();
        let state = &self.states[index];
        SimplexDistribution::new(state[start..start + self.blocks[block]].to_vec())
    }

    /// CSV with header `t,x_1,...,x_n[,y_1,...,y_m]`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        for (b, &len) in self.blocks.iter().enumerate() {
            let name = ["x", "y"].get(b).copied().unwrap_or("z");
            header.extend((1..=len).map(|i| format!("{name}_{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{}", fmt_float(*t))?;
            for v in s {
                write!(w, ",{}", fmt_float(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Decimal float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Classic fourth-order Runge-Kutta with preallocated stages.
struct Rk4<'a, S: FlowSystem> {
    system: &'a S,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a, S: FlowSystem> Rk4<'a, S> {
    fn new(system: &'a S) -> Self {
        let n = system.dim();
        Self {
            system,
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `state` by `h`; returns `||rhs(state)||_inf` before the step.
    fn advance(&mut self, state: &mut [f64], h: f64) -> f64 {
        let sys = self.system;
        sys.rhs(state, &mut self.k1);
        axpy(&mut self.tmp, state, 0.5 * h, &self.k1);
        sys.rhs(&self.tmp, &mut self.k2);
        axpy(&mut self.tmp, state, 0.5 * h, &self.k2);
        sys.rhs(&self.tmp, &mut self.k3);
        axpy(&mut self.tmp, state, h, &self.k3);
        sys.rhs(&self.tmp, &mut self.k4);
        for i in 0..state.len() {
            state[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        max_abs(&self.k1)
    }
}

#[inline]
fn axpy(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Clips negative components of each block and renormalizes.
///
/// Returns `(correction, clipped)`; fails if a component left
/// `[-1e-6, 1 + 1e-6]` or the correction exceeds the drift budget.
fn project(state: &mut [f64], blocks: &[usize], time: f64) -> Result<(f64, bool)> {
    let mut start = 0;
    let mut worst = 0.0f64;
    let mut clipped_any = false;
    for &len in blocks {
        let block = &mut state[start..start + len];
        if let Some((i, v)) = block
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(*v)))
        {
            return Err(Error::Instability {
                time,
                detail: format!(
                    "component {} = {v} left the unit interval; reduce the step size",
                    start + i
                ),
            });
        }
        let mut clipped = 0.0;
        for v in block.iter_mut() {
            if *v < 0.0 {
                clipped -= *v;
                *v = 0.0;
                clipped_any = true;
            }
        }
        let sum: f64 = block.iter().sum();
        let correction = (sum - 1.0).abs() + clipped;
        if correction > DRIFT_BUDGET {
            return Err(Error::Instability {
                time,
                detail: format!("renormalization correction {correction:e} exceeds the drift budget"),
            });
        }
        block.iter_mut().for_each(|v| *v /= sum);
        worst = worst.max(correction);
        start += len;
    }
    Ok((worst, clipped_any))
}

fn validate_initial<S: FlowSystem>(system: &S, initial: &[f64]) -> Result<Vec<f64>> {
    if initial.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: initial.len(),
        });
    }
    let mut state = Vec::with_capacity(initial.len());
    let mut start = 0;
    for &len in system.blocks() {
        let block = SimplexDistribution::new(initial[start..start + len].to_vec())?;
        state.extend(block.into_vec());
        start += len;
    }
    Ok(state)
}

/// Online terminal-state detection over recorded states.
struct Classifier {
    eps: f64,
    window: usize,
    tol: f64,
    excursion_min: f64,
    at_rest: usize,
    anchor: Vec<f64>,
    excursion: bool,
    /// Last three recorded states with their distance to the anchor.
    recent: Vec<(Vec<f64>, f64)>,
}

impl Classifier {
    fn new(settings: &IntegratorSettings) -> Self {
        Self {
            eps: settings.convergence_eps,
            window: settings.convergence_window,
            tol: settings.recurrence_tol,
            excursion_min: settings.excursion_min,
            at_rest: 0,
            anchor: Vec::new(),
            excursion: false,
            recent: Vec::with_capacity(3),
        }
    }

    fn push(&mut self, index: usize, state: &[f64], rhs_norm: f64) -> Option<TerminalStatus> {
        if rhs_norm < self.eps {
            self.at_rest += 1;
            if self.at_rest >= self.window {
                return Some(TerminalStatus::Converged);
            }
        } else {
            self.at_rest = 0;
        }

        // Anchors at index 0 and 1024, 2048, 4096, ... so that orbits longer
        // than the first window, or limit cycles not through the initial
        // state, are eventually caught.
        if index == 0 || (index >= 1024 && index.is_power_of_two()) {
            self.anchor = state.to_vec();
            self.excursion = false;
            self.recent.clear();
            self.recent.push((state.to_vec(), 0.0));
            return None;
        }

        let d = max_abs_diff(state, &self.anchor);
        if d > self.excursion_min {
            self.excursion = true;
        }
        if self.recent.len() == 3 {
            self.recent.remove(0);
        }
        self.recent.push((state.to_vec(), d));

        if self.excursion && self.recent.len() == 3 {
            let (d0, d1, d2) = (self.recent[0].1, self.recent[1].1, self.recent[2].1);
            if d1 <= d0 && d1 <= d2 && d1 < 1e-2 {
                let closest = self.closest_approach();
                if closest < self.tol {
                    return Some(TerminalStatus::Periodic);
                }
            }
        }
        None
    }

    /// Minimum sup-distance to the anchor along the quadratic through the
    /// last three recorded states.
    fn closest_approach(&self) -> f64 {
        let (a, b, c) = (&self.recent[0].0, &self.recent[1].0, &self.recent[2].0);
        let dist = |u: f64| {
            a.iter()
                .zip(b)
                .zip(c)
                .zip(&self.anchor)
                .map(|(((&sa, &sb), &sc), &z)| {
                    let p = sb + 0.5 * u * (sc - sa) + 0.5 * u * u * (sc - 2.0 * sb + sa);
                    (p - z).abs()
                })
                .fold(0.0, f64::max)
        };
        golden_min(dist, -1.0, 1.0, 80)
    }
}

/// Golden-section minimum value of a unimodal function on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(lo)).min(f(hi))
}

/// Fixed-step RK4 integration with per-step clip-and-renormalize.
///
/// Stops when the state has been at rest for `convergence_window` recorded
/// states, when it returns to an earlier state after an excursion, or at
/// `t_max`.
pub fn integrate<S: FlowSystem>(
    system: &S,
    initial: &[f64],
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    settings.validate()?;
    let mut state = validate_initial(system, initial)?;
    let blocks = system.blocks().to_vec();
    let mut rk = Rk4::new(system);
    let mut classifier = Classifier::new(settings);
    let mut rhs = vec![0.0; state.len()];

    let mut traj = Trajectory {
        blocks: blocks.clone(),
        times: Vec::new(),
        states: Vec::new(),
        rhs_norms: Vec::new(),
        terminal_status: TerminalStatus::MaxTime,
        clip_events: 0,
        max_correction: 0.0,
    };

    let mut record = |traj: &mut Trajectory, t: f64, state: &[f64]| {
        system.rhs(state, &mut rhs);
        let norm = max_abs(&rhs);
        let index = traj.states.len();
        traj.times.push(t);
        traj.states.push(state.to_vec());
        traj.rhs_norms.push(norm);
        classifier.push(index, state, norm)
    };

    if let Some(status) = record(&mut traj, 0.0, &state) {
        traj.terminal_status = status;
        return Ok(traj);
    }

    let n_steps = (settings.t_max / settings.step).round() as usize;
    for s in 1..=n_steps {
        let t = s as f64 * settings.step;
        rk.advance(&mut state, settings.step);
        let (correction, clipped) = project(&mut state, &blocks, t)?;
        traj.max_correction = traj.max_correction.max(correction);
        traj.clip_events += clipped as usize;
        // The final state is always recorded.
        if s % settings.record_stride == 0 || s == n_steps {
            if let Some(status) = record(&mut traj, t, &state) {
                traj.terminal_status = status;
                break;
            }
        }
    }
    Ok(traj)
}

/// Re-runs terminal classification over a recorded trajectory.
///
/// Converged when the last `min(window, len)` states are at rest; otherwise
/// periodic when the recurrence test fires anywhere; otherwise max-time.
pub fn classify_terminal(traj: &Trajectory, settings: &IntegratorSettings) -> TerminalStatus {
    let n = traj.len();
    if n < 2 {
        return TerminalStatus::MaxTime;
    }
    let window = settings.convergence_window.min(n);
    if traj.rhs_norms[n - window..]
        .iter()
        .all(|&r| r < settings.convergence_eps)
    {
        return TerminalStatus::Converged;
    }
    let mut classifier = Classifier::new(settings);
    // Convergence was decided above on the tail.
    classifier.window = usize::MAX;
    for (i, (s, &r)) in traj.states.iter().zip(&traj.rhs_norms).enumerate() {
        if let Some(status) = classifier.push(i, s, r) {
            return status;
        }
    }
    TerminalStatus::MaxTime
}

/// Final state of an unrecorded run to rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Settled {
    pub state: Vec<f64>,
    pub time: f64,
    /// `||rhs||_inf` at `state`.
    pub residual: f64,
    pub converged: bool,
}

/// Integrates until `||rhs||_inf < eps` or `t_max`, keeping only the
/// current state.
pub fn settle<S: FlowSystem>(
    system: &S,
    initial: &[f64],
    step: f64,
    eps: f64,
    t_max: f64,
) -> Result<Settled> {
    let mut state = validate_initial(system, initial)?;
    let blocks = system.blocks().to_vec();
    let mut rk = Rk4::new(system);
    let n_steps = (t_max / step).ceil() as usize;
    for s in 0..n_steps {
        let t = s as f64 * step;
        let mut trial = state.clone();
        let residual = rk.advance(&mut trial, step);
        if residual < eps {
            return Ok(Settled {
                state,
                time: t,
                residual,
                converged: true,
            });
        }
        project(&mut trial, &blocks, t + step)?;
        state = trial;
    }
    let mut rhs = vec![0.0; state.len()];
    system.rhs(&state, &mut rhs);
    let residual = max_abs(&rhs);
    Ok(Settled {
        state,
        time: n_steps as f64 * step,
        residual,
        converged: residual < eps,
    })
}
