use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{count_and_solve_2x2, Equilibrium, EquilibriumSet, Stability};
use crate::dynamics::fmt_float;
use crate::error::{Error, Result};
use crate::game::{BimatrixGame, BimatrixTurnover};
use crate::pool::run_pooled;

const EVENT_WIDTH: f64 = 1e-4;
const AMBIGUOUS: f64 = 1e-6;

/// Which turnover rate a scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiParameter {
    ChiX,
    ChiY,
}

impl ChiParameter {
    pub fn apply(self, template: &BimatrixTurnover, value: f64) -> BimatrixTurnover {
        match self {
            ChiParameter::ChiX => template.with_chi_x(value),
            ChiParameter::ChiY => template.with_chi_y(value),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChiParameter::ChiX => "chi_x",
            ChiParameter::ChiY => "chi_y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SaddleNode,
    Transcritical,
    OtherCountChange,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SaddleNode => "saddle_node",
            EventKind::Transcritical => "transcritical",
            EventKind::OtherCountChange => "other_count_change",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    /// Midpoint of the refined bracket.
    pub parameter: f64,
    pub lower: f64,
    pub upper: f64,
    pub kind: EventKind,
    pub count_below: usize,
    pub count_above: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub parameter: ChiParameter,
    pub parameter_grid: Vec<f64>,
    /// Equilibria at each grid value, ordered by `x`.
    pub branches: Vec<Vec<Equilibrium>>,
    /// Continuation label of every entry of `branches`.
    pub branch_ids: Vec<Vec<usize>>,
    pub events: Vec<BifurcationEvent>,
}

impl BifurcationDiagram {
    pub fn counts(&self) -> Vec<usize> {
        self.branches.iter().map(Vec::len).collect()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &BifurcationEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serializes")
    }

    /// One row per branch per grid value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},branch,x,y,stability,residual,eig1_re,eig1_im,eig2_re,eig2_im",
            self.parameter.as_str()
        )?;
        for ((chi, eqs), ids) in self.parameter_grid.iter().zip(&self.branches).zip(&self.branch_ids) {
            for (e, id) in eqs.iter().zip(ids) {
                let (x, y) = e.pair().expect("bimatrix equilibria");
                write!(
                    w,
                    "{},{id},{},{},{},{}",
                    fmt_float(*chi),
                    fmt_float(x),
                    fmt_float(y),
                    e.stability,
                    fmt_float(e.residual)
                )?;
                for ev in &e.eigenvalues {
                    write!(w, ",{},{}", fmt_float(ev.re), fmt_float(ev.im))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// CSV of the detected events.
    pub fn write_events_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "parameter,lower,upper,kind,count_below,count_above")?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_float(e.parameter),
                fmt_float(e.lower),
                fmt_float(e.upper),
                e.kind.as_str(),
                e.count_below,
                e.count_above
            )?;
        }
        Ok(())
    }
}

/// Equilibria of a 2x2 game along a grid of one turnover rate.
///
/// Grid points are solved in parallel on `workers` threads; branch
/// continuation and event detection are a sequential pass, so the result
/// does not depend on the worker count. Count changes between neighbours
/// are bisected on the count to width below `1e-4`. A change by two whose
/// extra pair is one saddle and one non-saddle, with all other branches
/// keeping their stability, is a saddle-node; two branches exchanging
/// stability with the count unchanged is transcritical. Everything else,
/// including branches closer than `1e-6`, is `other_count_change`.
pub fn bifurcation_scan(
    game: &BimatrixGame,
    template: &BimatrixTurnover,
    parameter: ChiParameter,
    grid: &[f64],
    workers: usize,
) -> Result<BifurcationDiagram> {
    if grid.len() < 100 {
        return Err(Error::InvalidParameter(format!(
            "bifurcation grid needs at least 100 values, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
        return Err(Error::InvalidParameter(
            "bifurcation grid must be positive and strictly increasing".into(),
        ));
    }
    let solve = |chi: f64| count_and_solve_2x2(game, &parameter.apply(template, chi));
    let solved: Vec<Result<EquilibriumSet>> =
        run_pooled(workers, || grid.par_iter().map(|&c| solve(c)).collect())?;
    let sets: Vec<EquilibriumSet> = solved.into_iter().collect::<Result<_>>()?;
    let branches: Vec<Vec<Equilibrium>> = sets.into_iter().map(|s| s.equilibria).collect();

    let mut branch_ids: Vec<Vec<usize>> = vec![(0..branches[0].len()).collect()];
    let mut next_id = branches[0].len();
    for i in 1..branches.len() {
        let m = match_nearest(&branches[i - 1], &branches[i]);
        let ids = m
            .iter()
            .map(|prev| match prev {
                Some(p) => branch_ids[i - 1][*p],
                None => {
                    next_id += 1;
                    next_id - 1
                }
            })
            .collect();
        branch_ids.push(ids);
    }

    let mut events = Vec::new();
    let mut explained = vec![false; grid.len()];
    let mut i = 0;
    while i + 1 < grid.len() {
        let (a, b) = (&branches[i], &branches[i + 1]);
        // A grid value sitting on a crossing can merge or crowd the two
        // branches; look across it before calling it two events.
        if (a.len() != b.len() || has_close_pair(b)) && i + 2 < grid.len() {
            if let Some(pair) = exchanged_pair(a, &branches[i + 2]) {
                events.push(refine_exchange(&solve, grid[i], grid[i + 2], a, pair)?);
                explained[i] = true;
                explained[i + 1] = true;
                explained[i + 2] = true;
                i += 2;
                continue;
            }
        }
        if a.len() != b.len() {
            let kind = classify_count_change(a, b);
            events.push(refine_count(&solve, grid[i], grid[i + 1], a.len(), b.len(), kind)?);
            explained[i] = true;
            explained[i + 1] = true;
        } else {
            let m = match_nearest(a, b);
            let changed: Vec<usize> = (0..b.len())
                .filter(|&k| m[k].is_some_and(|p| !same_index(a[p].stability, b[k].stability)))
                .collect();
            if !changed.is_empty() {
                match exchanged_pair(a, b) {
                    Some(pair) => events.push(refine_exchange(&solve, grid[i], grid[i + 1], a, pair)?),
                    None => events.push(BifurcationEvent {
                        parameter: 0.5 * (grid[i] + grid[i + 1]),
                        lower: grid[i],
                        upper: grid[i + 1],
                        kind: EventKind::OtherCountChange,
                        count_below: a.len(),
                        count_above: b.len(),
                    }),
                }
                explained[i] = true;
                explained[i + 1] = true;
            }
        }
        i += 1;
    }
    for (k, eqs) in branches.iter().enumerate() {
        if !explained[k] && has_close_pair(eqs) {
            events.push(BifurcationEvent {
                parameter: grid[k],
                lower: grid[k],
                upper: grid[k],
                kind: EventKind::OtherCountChange,
                count_below: eqs.len(),
                count_above: eqs.len(),
            });
        }
    }
    events.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));

    Ok(BifurcationDiagram {
        parameter,
        parameter_grid: grid.to_vec(),
        branches,
        branch_ids,
        events,
    })
}

/// Greedy global nearest-neighbour matching: for each entry of `next`, the
/// index of its partner in `prev`.
fn match_nearest(prev: &[Equilibrium], next: &[Equilibrium]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * next.len());
    for (i, p) in prev.iter().enumerate() {
        for (j, n) in next.iter().enumerate() {
            pairs.push((p.distance_inf(n), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_prev = vec![false; prev.len()];
    let mut out = vec![None; next.len()];
    for (_, i, j) in pairs {
        if !used_prev[i] && out[j].is_none() {
            used_prev[i] = true;
            out[j] = Some(i);
        }
    }
    out
}

/// Node/focus changes are not bifurcations.
fn same_index(a: Stability, b: Stability) -> bool {
    a.unstable_dimension() == b.unstable_dimension()
}

fn has_close_pair(eqs: &[Equilibrium]) -> bool {
    eqs.iter()
        .enumerate()
        .any(|(i, a)| eqs[i + 1..].iter().any(|b| a.distance_inf(b) < AMBIGUOUS))
}

/// Two matched branches swapping stable and unstable labels, as indices
/// into `a`, when that is the only change.
fn exchanged_pair(a: &[Equilibrium], b: &[Equilibrium]) -> Option<(usize, usize)> {
    if a.len() != b.len() || has_close_pair(a) || has_close_pair(b) {
        return None;
    }
    let m = match_nearest(a, b);
    let changed: Vec<(usize, usize)> = (0..b.len())
        .filter_map(|k| m[k].map(|p| (p, k)))
        .filter(|&(p, k)| !same_index(a[p].stability, b[k].stability))
        .collect();
    if changed.len() != 2 {
        return None;
    }
    let (p0, k0) = changed[0];
    let (p1, k1) = changed[1];
    let swapped = same_index(a[p0].stability, b[k1].stability)
        && same_index(a[p1].stability, b[k0].stability);
    let exchange = a[p0].stability.is_stable() != a[p1].stability.is_stable();
    (swapped && exchange).then_some((p0, p1))
}

fn classify_count_change(a: &[Equilibrium], b: &[Equilibrium]) -> EventKind {
    let (few, many) = if a.len() < b.len() { (a, b) } else { (b, a) };
    if many.len() != few.len() + 2 || has_close_pair(many) {
        return EventKind::OtherCountChange;
    }
    let m = match_nearest(few, many);
    let kept_labels = (0..many.len())
        .filter_map(|k| m[k].map(|p| (p, k)))
        .all(|(p, k)| same_index(few[p].stability, many[k].stability));
    let extra: Vec<Stability> = (0..many.len())
        .filter(|&k| m[k].is_none())
        .map(|k| many[k].stability)
        .collect();
    let saddles = extra.iter().filter(|s| **s == Stability::Saddle).count();
    if kept_labels && saddles == 1 {
        EventKind::SaddleNode
    } else {
        EventKind::OtherCountChange
    }
}

fn refine_count(
    solve: &(impl Fn(f64) -> Result<EquilibriumSet> + ?Sized),
    mut lo: f64,
    mut hi: f64,
    count_lo: usize,
    count_hi: usize,
    kind: EventKind,
) -> Result<BifurcationEvent> {
    let (below, above) = (count_lo, count_hi);
    while hi - lo >= EVENT_WIDTH {
        let mid = 0.5 * (lo + hi);
        if solve(mid)?.len() == count_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BifurcationEvent {
        parameter: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        kind,
        count_below: below,
        count_above: above,
    })
}

/// Bisects on the stability of the first exchanging branch. The branch is
/// followed by proximity to its position interpolated between the current
/// bracket ends, which keeps it apart from its partner as the bracket shrinks.
fn refine_exchange(
    solve: &(impl Fn(f64) -> Result<EquilibriumSet> + ?Sized),
    mut lo: f64,
    mut hi: f64,
    below: &[Equilibrium],
    pair: (usize, usize),
) -> Result<BifurcationEvent> {
    let count = below.len();
    let label = below[pair.0].stability;
    let mut at_lo = below[pair.0].coordinates();
    let mut at_hi = {
        let far = solve(hi)?;
        let m = match_nearest(below, &far.equilibria);
        match m.iter().position(|p| *p == Some(pair.0)) {
            Some(k) => far.equilibria[k].coordinates(),
            None => at_lo.clone(),
        }
    };
    while hi - lo >= EVENT_WIDTH {
        let mid = 0.5 * (lo + hi);
        let guess: Vec<f64> = at_lo.iter().zip(&at_hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let set = solve(mid)?;
        let nearest = set.iter().min_by(|a, b| {
            let da = crate::simplex::max_abs_diff(&a.coordinates(), &guess);
            let db = crate::simplex::max_abs_diff(&b.coordinates(), &guess);
            da.total_cmp(&db)
        });
        match nearest {
            Some(e) if same_index(e.stability, label) => {
                lo = mid;
                at_lo = e.coordinates();
            }
            Some(e) => {
                hi = mid;
                at_hi = e.coordinates();
            }
            None => hi = mid,
        }
    }
    Ok(BifurcationEvent {
        parameter: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        kind: EventKind::Transcritical,
        count_below: count,
        count_above: count,
    })
}
