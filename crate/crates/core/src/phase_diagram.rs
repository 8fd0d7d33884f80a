//! Critical lines and triple points in the `(θ, a)` plane.
//!
//! The global phase is labelled on a rectangular grid, every grid edge whose
//! end labels differ is bisected down to the boundary, and the boundary points
//! are grouped into lines by the pair of phases they separate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::roots;
use crate::params::{theta_eff_sq, ModelParams};
use crate::saddle::{branch_crossing, global_phase_with, GlobalPhase, Phase};

/// Width of the final bisection bracket along a grid edge.
pub const EDGE_TOL: f64 = 1e-8;
/// Jumps in `⟨x⟩` above this mark a first-order transition.
pub const JUMP_THRESHOLD: f64 = 1e-3;
/// Default triple-point search radius, in grid cells.
pub const TRIPLE_TOL_CELLS: f64 = 1.5;
const MIN_RESOLUTION: usize = 32;
const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LineKind {
    /// `θ²_eff (a - b) = 1`, where the branch-0 minimum leaves `x = 0`.
    ThermalOnset,
    /// Between maser phases `k` and `k + 1` (or `k` and a higher one).
    MaserMaser(usize),
    /// Between the thermal phase and maser phase `k ≥ 1`.
    ThermalMaser(usize),
}

impl std::fmt::Display for LineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LineKind::ThermalOnset => write!(f, "thermal_onset"),
            LineKind::MaserMaser(k) => write!(f, "maser_maser_{k}"),
            LineKind::ThermalMaser(k) => write!(f, "thermal_maser_{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionOrder {
    First,
    Second,
}

impl std::fmt::Display for TransitionOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransitionOrder::First => write!(f, "first"),
            TransitionOrder::Second => write!(f, "second"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLine {
    pub kind: LineKind,
    /// `(θ, a)`, strictly increasing in `θ`.
    pub points: Vec<(f64, f64)>,
    pub order_labels: Vec<TransitionOrder>,
    /// `|Δ⟨x⟩|` across the line at each point.
    pub jumps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta_range: (f64, f64),
    pub a_range: (f64, f64),
    pub n_theta: usize,
    pub n_a: usize,
}

impl GridSpec {
    pub fn new(theta_range: (f64, f64), a_range: (f64, f64), n_theta: usize, n_a: usize) -> Self {
        GridSpec { theta_range, a_range, n_theta, n_a }
    }

    pub fn theta(&self, j: usize) -> f64 {
        lerp(self.theta_range, j, self.n_theta)
    }

    pub fn a(&self, i: usize) -> f64 {
        lerp(self.a_range, i, self.n_a)
    }

    pub fn theta_step(&self) -> f64 {
        (self.theta_range.1 - self.theta_range.0) / (self.n_theta - 1) as f64
    }

    pub fn a_step(&self) -> f64 {
        (self.a_range.1 - self.a_range.0) / (self.n_a - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_theta < MIN_RESOLUTION || self.n_a < MIN_RESOLUTION {
            return Err(Error::Domain(format!("grid resolution must be at least {MIN_RESOLUTION} x {MIN_RESOLUTION}")));
        }
        let (t0, t1) = self.theta_range;
        let (a0, a1) = self.a_range;
        if !(t0 >= 0.0 && t1 > t0 && t1.is_finite()) {
            return Err(Error::Domain("theta range must satisfy 0 <= lo < hi".into()));
        }
        if !(a0 >= 0.0 && a1 > a0 && a1 <= 1.0) {
            return Err(Error::Domain("a range must satisfy 0 <= lo < hi <= 1".into()));
        }
        Ok(())
    }
}

fn lerp((lo, hi): (f64, f64), i: usize, n: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub delta: f64,
    pub n_b: f64,
    pub grid: GridSpec,
    pub lines: Vec<CriticalLine>,
    pub triple_points: Vec<(f64, f64)>,
    /// Phase at grid node `(i, j)` stored at `i * n_theta + j` (`i` indexes `a`).
    pub labels: Vec<Phase>,
}

impl PhaseDiagram {
    pub fn label(&self, i: usize, j: usize) -> Phase {
        self.labels[i * self.grid.n_theta + j]
    }

    pub fn line(&self, kind: LineKind) -> Option<&CriticalLine> {
        self.lines.iter().find(|l| l.kind == kind)
    }
}

/// `a(θ)` on `θ²_eff (a - b) = 1`, or `None` where it exceeds 1 or diverges.
pub fn onset_a(theta: f64, delta: f64) -> Option<f64> {
    let t = theta_eff_sq(theta, delta);
    if !(t > 0.0) {
        return None;
    }
    let a = 0.5 * (1.0 + 1.0 / t);
    (a <= 1.0).then_some(a)
}

/// The analytic thermal-onset line sampled at `n_points` pump values.
pub fn first_critical_line(delta: f64, theta_range: (f64, f64), n_points: usize) -> CriticalLine {
    let mut points = Vec::new();
    for i in 0..n_points {
        let th = lerp(theta_range, i, n_points.max(2));
        if let Some(a) = onset_a(th, delta) {
            points.push((th, a));
        }
    }
    let n = points.len();
    CriticalLine { kind: LineKind::ThermalOnset, points, order_labels: vec![TransitionOrder::Second; n], jumps: vec![0.0; n] }
}

fn phase_at(delta: f64, n_b: f64, a: f64, theta: f64) -> Result<GlobalPhase> {
    let p = ModelParams { flux: 1.0, excitation: a, thermal_photons: n_b, detuning: delta, pump: theta };
    global_phase_with(&p, theta, QUAD_TOL)
}

fn line_kind(p: Phase, q: Phase) -> LineKind {
    match (p.min(q), p.max(q)) {
        (Phase::Thermal, Phase::Maser(0)) => LineKind::ThermalOnset,
        (Phase::Thermal, Phase::Maser(k)) => LineKind::ThermalMaser(k),
        (Phase::Maser(j), _) => LineKind::MaserMaser(j),
        (Phase::Thermal, Phase::Thermal) => unreachable!("no boundary between equal phases"),
    }
}

struct BoundaryPoint {
    kind: LineKind,
    theta: f64,
    a: f64,
    jump: f64,
}

/// Edge of the grid between two nodes: fixed `a` (varying `θ`) or fixed `θ`.
#[derive(Clone, Copy)]
enum Edge {
    Theta { a: f64, lo: f64, hi: f64 },
    A { theta: f64, lo: f64, hi: f64 },
}

fn refine_edge(delta: f64, n_b: f64, edge: Edge, left: Phase) -> Result<BoundaryPoint> {
    let eval = |s: f64| match edge {
        Edge::Theta { a, .. } => phase_at(delta, n_b, a, s),
        Edge::A { theta, .. } => phase_at(delta, n_b, s, theta),
    };
    let (lo, hi) = match edge {
        Edge::Theta { lo, hi, .. } | Edge::A { lo, hi, .. } => (lo, hi),
    };
    let mut failed = None;
    let (s0, s1) = roots::bisect_predicate(
        |s| match eval(s) {
            Ok(g) => g.phase == left,
            Err(e) => {
                failed.get_or_insert(e);
                true
            }
        },
        lo,
        hi,
        EDGE_TOL,
    );
    if let Some(e) = failed {
        return Err(e);
    }
    let g0 = eval(s0)?;
    let g1 = eval(s1)?;
    let kind = line_kind(g0.phase, g1.phase);
    let jump = (g1.x_mean - g0.x_mean).abs();
    let mid = 0.5 * (s0 + s1);
    let (mut theta, mut a) = match edge {
        Edge::Theta { a, .. } => (mid, a),
        Edge::A { theta, .. } => (theta, mid),
    };
    let onset = kind == LineKind::ThermalOnset || (matches!(kind, LineKind::ThermalMaser(_)) && jump <= JUMP_THRESHOLD);
    if onset {
        // Snap onto the analytic onset line. The labels flip slightly past
        // it (the new minimum must beat the tie tolerance), so the bracket
        // is widened inside the edge until it holds the analytic point.
        match edge {
            Edge::Theta { a: fixed, .. } => {
                let target = 1.0 / (2.0 * fixed - 1.0);
                let f = |t: f64| theta_eff_sq(t, delta) - target;
                let (mut l, mut r) = (s0, s1);
                let mut w = (s1 - s0).max(EDGE_TOL);
                while f(l) * f(r) > 0.0 && (l > lo || r < hi) {
                    w *= 2.0;
                    l = (s0 - w).max(lo);
                    r = (s1 + w).min(hi);
                }
                if let Some(t) = roots::brent(f, l, r, 0.0, 200) {
                    theta = t;
                }
                a = fixed;
            }
            Edge::A { theta: fixed, .. } => {
                if let Some(v) = onset_a(fixed, delta) {
                    if v >= lo && v <= hi {
                        a = v;
                    }
                }
            }
        }
    }
    Ok(BoundaryPoint { kind, theta, a, jump })
}

/// Labels the grid, refines every boundary crossing and assembles the lines.
pub fn trace_lines(delta: f64, n_b: f64, grid: GridSpec) -> Result<PhaseDiagram> {
    grid.validate()?;
    let nt = grid.n_theta;
    let na = grid.n_a;
    let labels: Vec<Phase> = (0..na * nt)
        .into_par_iter()
        .map(|idx| phase_at(delta, n_b, grid.a(idx / nt), grid.theta(idx % nt)).map(|g| g.phase))
        .collect::<Result<_>>()?;

    let mut edges = Vec::new();
    for i in 0..na {
        for j in 0..nt {
            let here = labels[i * nt + j];
            if j + 1 < nt && labels[i * nt + j + 1] != here {
                edges.push((Edge::Theta { a: grid.a(i), lo: grid.theta(j), hi: grid.theta(j + 1) }, here));
            }
            if i + 1 < na && labels[(i + 1) * nt + j] != here {
                edges.push((Edge::A { theta: grid.theta(j), lo: grid.a(i), hi: grid.a(i + 1) }, here));
            }
        }
    }
    let points: Vec<BoundaryPoint> =
        edges.par_iter().map(|&(edge, left)| refine_edge(delta, n_b, edge, left)).collect::<Result<_>>()?;

    let mut kinds: Vec<LineKind> = points.iter().map(|p| p.kind).collect();
    kinds.sort();
    kinds.dedup();
    let lines = kinds
        .into_iter()
        .map(|kind| {
            let mut pts: Vec<&BoundaryPoint> = points.iter().filter(|p| p.kind == kind).collect();
            pts.sort_by(|x, y| x.theta.total_cmp(&y.theta).then(x.a.total_cmp(&y.a)));
            pts.dedup_by(|x, y| x.theta == y.theta);
            CriticalLine {
                kind,
                points: pts.iter().map(|p| (p.theta, p.a)).collect(),
                order_labels: pts
                    .iter()
                    .map(|p| {
                        if kind != LineKind::ThermalOnset && p.jump > JUMP_THRESHOLD {
                            TransitionOrder::First
                        } else {
                            TransitionOrder::Second
                        }
                    })
                    .collect(),
                jumps: pts.iter().map(|p| p.jump).collect(),
            }
        })
        .collect();

    let mut diagram = PhaseDiagram { delta, n_b, grid, lines, triple_points: Vec::new(), labels };
    diagram.triple_points = find_triple_points(&diagram, TRIPLE_TOL_CELLS);
    Ok(diagram)
}

/// Points where three phases meet. Grid nodes whose 3×3 neighbourhood holds
/// at least three labels are clustered; in each cluster the refined lines are
/// intersected pairwise from local straight fits. Crossings inside the grid
/// and within `tol` cells of the cluster qualify; the one closest to where
/// its two lines nearly touch is reported.
pub fn find_triple_points(diagram: &PhaseDiagram, tol: f64) -> Vec<(f64, f64)> {
    let g = &diagram.grid;
    let (nt, na) = (g.n_theta, g.n_a);
    let mut flagged = vec![false; na * nt];
    for i in 1..na.saturating_sub(1) {
        for j in 1..nt.saturating_sub(1) {
            let mut seen: Vec<Phase> = Vec::with_capacity(9);
            for di in 0..3 {
                for dj in 0..3 {
                    let l = diagram.label(i + di - 1, j + dj - 1);
                    if !seen.contains(&l) {
                        seen.push(l);
                    }
                }
            }
            flagged[i * nt + j] = seen.len() >= 3;
        }
    }

    let ht = g.theta_step();
    let ha = g.a_step();
    let cell_dist = |p: (f64, f64), q: (f64, f64)| (((p.0 - q.0) / ht).powi(2) + ((p.1 - q.1) / ha).powi(2)).sqrt();

    let mut visited = vec![false; na * nt];
    let mut out = Vec::new();
    for start in 0..na * nt {
        if !flagged[start] || visited[start] {
            continue;
        }
        // Connected component over the 8-neighbourhood.
        let mut stack = vec![start];
        visited[start] = true;
        let (mut i_lo, mut i_hi, mut j_lo, mut j_hi) = (usize::MAX, 0, usize::MAX, 0);
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx / nt, idx % nt);
            i_lo = i_lo.min(i);
            i_hi = i_hi.max(i);
            j_lo = j_lo.min(j);
            j_hi = j_hi.max(j);
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= na as i64 || nj >= nt as i64 {
                        continue;
                    }
                    let nidx = ni as usize * nt + nj as usize;
                    if flagged[nidx] && !visited[nidx] {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        let t_lo = g.theta(j_lo.saturating_sub(1));
        let t_hi = g.theta((j_hi + 1).min(nt - 1));
        let a_lo = g.a(i_lo.saturating_sub(1));
        let a_hi = g.a((i_hi + 1).min(na - 1));
        let inside = |p: &(f64, f64)| p.0 >= t_lo && p.0 <= t_hi && p.1 >= a_lo && p.1 <= a_hi;
        let local: Vec<(usize, Vec<(f64, f64)>)> = diagram
            .lines
            .iter()
            .enumerate()
            .map(|(li, l)| (li, l.points.iter().copied().filter(inside).collect::<Vec<_>>()))
            .filter(|(_, pts)| !pts.is_empty())
            .collect();
        // Distance in cells from a point to the cluster's box.
        let box_dist = |p: (f64, f64)| {
            let dt = (t_lo - p.0).max(p.0 - t_hi).max(0.0) / ht;
            let da = (a_lo - p.1).max(p.1 - a_hi).max(0.0) / ha;
            (dt * dt + da * da).sqrt()
        };
        let mut best: Option<(f64, (f64, f64))> = None;
        for (x, (_, pa)) in local.iter().enumerate() {
            for (_, pb) in local.iter().skip(x + 1) {
                if let Some((gap, pt)) = local_intersection(pa, pb, &cell_dist) {
                    let in_domain = pt.0 >= g.theta_range.0 && pt.0 <= g.theta_range.1 && pt.1 >= g.a_range.0 && pt.1 <= g.a_range.1;
                    let d = box_dist(pt);
                    if in_domain && d <= tol && best.map_or(true, |(bg, _)| gap < bg) {
                        best = Some((gap, pt));
                    }
                }
            }
        }
        if let Some((_, pt)) = best {
            out.push(pt);
        }
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    out
}

/// Crossing of two lines from straight fits through the two points of each
/// nearest to their closest approach. Returns the crossing and its distance
/// (in grid cells) from the closest-approach midpoint.
fn local_intersection<D: Fn((f64, f64), (f64, f64)) -> f64>(a: &[(f64, f64)], b: &[(f64, f64)], dist: &D) -> Option<(f64, (f64, f64))> {
    let mut closest: Option<(f64, (f64, f64))> = None;
    for &p in a {
        for &q in b {
            let d = dist(p, q);
            if closest.map_or(true, |(cd, _)| d < cd) {
                closest = Some((d, (0.5 * (p.0 + q.0), 0.5 * (p.1 + q.1))));
            }
        }
    }
    let (_, mid) = closest?;
    let nearest_two = |pts: &[(f64, f64)]| -> Option<((f64, f64), (f64, f64))> {
        if pts.len() < 2 {
            return None;
        }
        let mut sorted: Vec<(f64, f64)> = pts.to_vec();
        sorted.sort_by(|x, y| dist(*x, mid).total_cmp(&dist(*y, mid)));
        Some((sorted[0], sorted[1]))
    };
    let (p0, p1) = nearest_two(a)?;
    let (q0, q1) = nearest_two(b)?;
    let r = (p1.0 - p0.0, p1.1 - p0.1);
    let s = (q1.0 - q0.0, q1.1 - q0.1);
    let den = r.0 * s.1 - r.1 * s.0;
    if den == 0.0 {
        return None;
    }
    let t = ((q0.0 - p0.0) * s.1 - (q0.1 - p0.1) * s.0) / den;
    let x = (p0.0 + t * r.0, p0.1 + t * r.1);
    Some((dist(x, mid), x))
}

/// Detuning `|Δ|` above which the minima of branches `k` and `k + 1` stop
/// meeting as global minima, bisected to `tol`.
pub fn separation_threshold(a: f64, n_b: f64, k: usize, tol: f64) -> Result<f64> {
    if !(a > 0.5 && a <= 1.0) {
        return Err(Error::Domain(format!("separation needs 1/2 < a <= 1, got {a}")));
    }
    let edge = (2.0 * a - 1.0).sqrt();
    let crosses = |d: f64| -> Result<bool> {
        let p = ModelParams { flux: 1.0, excitation: a, thermal_photons: n_b, detuning: d, pump: 1.0 };
        match branch_crossing(&p, k, 1e-10) {
            Ok(_) => Ok(true),
            Err(Error::NoCrossing(_)) | Err(Error::Branch(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let lo = 0.0;
    let hi = edge * (1.0 - 1e-9);
    if !crosses(lo)? || crosses(hi)? {
        return Err(Error::Domain(format!("branches {k} and {} do not separate for |delta| in (0, {edge})", k + 1)));
    }
    let mut failed = None;
    let (s0, s1) = roots::bisect_predicate(
        |d| match crosses(d) {
            Ok(v) => v,
            Err(e) => {
                failed.get_or_insert(e);
                false
            }
        },
        lo,
        hi,
        tol,
    );
    if let Some(e) = failed {
        return Err(e);
    }
    Ok(0.5 * (s0 + s1))
}
