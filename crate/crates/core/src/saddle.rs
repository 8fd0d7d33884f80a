//! Saddle points of `V₀` and the critical pump parameters.
//!
//! Extrema satisfy `w(x*) = 1`. In the angle variable they are
//!
//! ```text
//! x*(φ) = (a-b) sin²φ - Δ²,   θ(φ) = φ / (√(a-b) |sin φ|)
//! ```
//!
//! so `θ` is the dependent variable and the branches do not depend on `n_b`.
//! Branch `k` covers `φ ∈ [φ₀ + kπ, (k+1)π - φ₀]`. For `k ≥ 1`, `θ(φ)` first
//! falls to its minimum `θ_k` at `φ_k` (`tan φ_k = φ_k`), sweeping out local
//! maxima of `V₀`, then rises again along the local minima.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::roots;
use crate::params::ModelParams;
use crate::potential::{self, critical_phi, theta_of_phi, MAX_BRANCH};

/// Samples used to check monotonicity of `θ(φ)` on construction.
const MONOTONE_SAMPLES: usize = 1000;
/// Samples used to bracket sign changes when locating crossings.
const CROSSING_SAMPLES: usize = 128;
/// Ties in `V₀` closer than this go to the lower branch.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubBranch {
    /// Local minima of `V₀`; `θ` increases with `φ`.
    Minimum,
    /// Local maxima of `V₀`; `θ` decreases with `φ`.
    Maximum,
}

/// One monotone piece of branch `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleBranch {
    pub k: usize,
    pub sub: SubBranch,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub excitation: f64,
    pub detuning: f64,
}

/// A saddle evaluated at a given pump parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub phi: f64,
    pub x_star: f64,
    pub v0: f64,
    /// Sign of `V₀''(x*)`: `+1` on minima, `-1` on maxima.
    pub curvature_sign: i8,
}

impl SaddleBranch {
    /// Builds sub-branch `sub` of branch `k`. Fails with a branch error when
    /// the sub-branch is empty (the maximum piece of branch 0, or of any branch
    /// whose `φ_k` falls below `φ₀ + kπ`).
    pub fn new(params: &ModelParams, k: usize, sub: SubBranch) -> Result<Self> {
        let phi0 = potential::phi0(params)?;
        let start = phi0 + k as f64 * PI;
        let end = (k + 1) as f64 * PI - phi0;
        let (phi_lo, phi_hi) = match (k, sub) {
            (0, SubBranch::Minimum) => (start, end),
            (0, SubBranch::Maximum) => return Err(Error::Branch("branch 0 has no maximum sub-branch".into())),
            (_, SubBranch::Minimum) => (critical_phi(k).max(start), end),
            (_, SubBranch::Maximum) => {
                let pk = critical_phi(k);
                if pk <= start {
                    return Err(Error::Branch(format!("branch {k} has no maximum sub-branch at this detuning")));
                }
                (start, pk)
            }
        };
        if !(phi_hi > phi_lo) {
            return Err(Error::Branch(format!("branch {k} is empty at this detuning")));
        }
        let branch = SaddleBranch { k, sub, phi_lo, phi_hi, excitation: params.excitation, detuning: params.detuning };
        branch.check_monotone()?;
        Ok(branch)
    }

    /// Both sub-branches of branch `k` that exist, maximum first.
    pub fn branches(params: &ModelParams, k: usize) -> Result<Vec<Self>> {
        let mut out = Vec::with_capacity(2);
        if let Ok(b) = Self::new(params, k, SubBranch::Maximum) {
            out.push(b);
        }
        out.push(Self::new(params, k, SubBranch::Minimum)?);
        Ok(out)
    }

    pub fn inversion(&self) -> f64 {
        2.0 * self.excitation - 1.0
    }

    fn check_monotone(&self) -> Result<()> {
        let ab = self.inversion();
        let rising = self.sub == SubBranch::Minimum;
        let mut prev: Option<f64> = None;
        for i in 0..=MONOTONE_SAMPLES {
            let phi = self.phi_lo + (self.phi_hi - self.phi_lo) * i as f64 / MONOTONE_SAMPLES as f64;
            let th = theta_of_phi(phi, ab);
            if !th.is_finite() {
                continue;
            }
            if let Some(p) = prev {
                let ok = if rising { th > p } else { th < p };
                // The turning point φ_k is flat to second order.
                let flat = (th - p).abs() <= 1e-12 * th;
                if !ok && !flat {
                    return Err(Error::Branch(format!("theta(phi) not monotone on branch {} near phi = {phi}", self.k)));
                }
            }
            prev = Some(th);
        }
        Ok(())
    }

    /// `θ(φ)` on this branch.
    pub fn theta_at(&self, phi: f64) -> f64 {
        theta_of_phi(phi, self.inversion())
    }

    /// `x*(φ) = (a-b) sin²φ - Δ²`, clamped at 0 against round-off at the ends.
    pub fn x_at(&self, phi: f64) -> f64 {
        (self.inversion() * phi.sin().powi(2) - self.detuning * self.detuning).max(0.0)
    }

    /// Closed interval of pump parameters swept out, lower end first. The
    /// upper end is infinite when the branch runs into `sin φ = 0`.
    pub fn theta_range(&self) -> (f64, f64) {
        let a = self.theta_at(self.phi_lo);
        let b = self.theta_at(self.phi_hi);
        match self.sub {
            SubBranch::Minimum => (a, b),
            SubBranch::Maximum => (b, a),
        }
    }

    pub fn contains_theta(&self, theta: f64) -> bool {
        let (lo, hi) = self.theta_range();
        theta >= lo && theta <= hi
    }

    /// Inverts `θ(φ)` on this sub-branch.
    pub fn phi_for_theta(&self, theta: f64) -> Result<f64> {
        let (lo, hi) = self.theta_range();
        if !(theta >= lo && theta <= hi) {
            return Err(Error::Range { theta, lo, hi });
        }
        let scale = theta * self.inversion().sqrt();
        // 1 - θ√(a-b)|sin φ|/φ has the sign of θ(φ) - θ and no poles.
        let f = |p: f64| if p == 0.0 { 1.0 - scale } else { 1.0 - scale * (p.sin() / p).abs() };
        if let Some(phi) = roots::brent(f, self.phi_lo, self.phi_hi, 1e-15, 200) {
            return Ok(phi);
        }
        // θ sits on an end of the image and round-off hides the sign change.
        let (g_lo, g_hi) = (f(self.phi_lo).abs(), f(self.phi_hi).abs());
        Ok(if g_lo <= g_hi { self.phi_lo } else { self.phi_hi })
    }

    /// Saddle at pump `theta`: location, `V₀` from the angle form, curvature.
    pub fn point(&self, params: &ModelParams, theta: f64, quad_tol: f64) -> Result<BranchPoint> {
        let phi = self.phi_for_theta(theta)?;
        let p = params.with_pump(theta);
        let v0 = potential::v0_phi(phi, &p, quad_tol)?;
        Ok(BranchPoint { phi, x_star: self.x_at(phi), v0, curvature_sign: curvature_sign(phi, self.sub) })
    }
}

/// `sign(1 - φ cot φ)`, which is the sign of `V₀''` at the saddle. Falls back
/// to the sub-branch label where it vanishes (at `φ_k` or `φ = 0`).
fn curvature_sign(phi: f64, sub: SubBranch) -> i8 {
    let s = phi.sin();
    let v = (s - phi * phi.cos()) * s;
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        match sub {
            SubBranch::Minimum => 1,
            SubBranch::Maximum => -1,
        }
    }
}

/// Evaluates `V₀` at the saddle of `branch` for pump `theta`.
pub fn branch_potential(theta: f64, branch: &SaddleBranch, params: &ModelParams, quad_tol: f64) -> Result<BranchPoint> {
    if branch.excitation != params.excitation || branch.detuning != params.detuning {
        return Err(Error::Branch("branch was built for different (a, delta)".into()));
    }
    branch.point(params, theta, quad_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Thermal,
    Maser(usize),
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Thermal => write!(f, "thermal"),
            Phase::Maser(k) => write!(f, "maser{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalPhase {
    pub phase: Phase,
    pub x_mean: f64,
    pub v0_min: f64,
}

/// Minimum of branch `k` at `theta`, if that branch has one there.
fn minimum_at(params: &ModelParams, k: usize, theta: f64, quad_tol: f64) -> Result<Option<BranchPoint>> {
    let br = match SaddleBranch::new(params, k, SubBranch::Minimum) {
        Ok(b) => b,
        Err(Error::Branch(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if !br.contains_theta(theta) {
        return Ok(None);
    }
    br.point(params, theta, quad_tol).map(Some)
}

/// Branches whose minimum can exist at `theta`: `θ_k ≤ θ`, capped at [`MAX_BRANCH`].
fn candidate_branches(params: &ModelParams, theta: f64) -> Vec<usize> {
    let ab = params.inversion();
    let mut ks = vec![0];
    for k in 1..=MAX_BRANCH {
        if theta_of_phi(critical_phi(k), ab) > theta {
            break;
        }
        ks.push(k);
    }
    ks
}

/// Global minimum of `V₀` at pump `theta`, comparing the thermal point
/// `x = 0` (where `V₀ = 0`) with every branch minimum present.
pub fn global_phase(params: &ModelParams, theta: f64) -> Result<GlobalPhase> {
    global_phase_with(params, theta, potential::DEFAULT_QUAD_TOL)
}

pub fn global_phase_with(params: &ModelParams, theta: f64, quad_tol: f64) -> Result<GlobalPhase> {
    let mut best = GlobalPhase { phase: Phase::Thermal, x_mean: 0.0, v0_min: 0.0 };
    if !params.has_saddles() {
        return Ok(best);
    }
    for k in candidate_branches(params, theta) {
        if let Some(pt) = minimum_at(params, k, theta, quad_tol)? {
            if pt.v0 < best.v0_min - TIE_TOL {
                best = GlobalPhase { phase: Phase::Maser(k), x_mean: pt.x_star, v0_min: pt.v0 };
            }
        }
    }
    Ok(best)
}

/// Lowest `V₀` among branch minima other than `skip` at `theta` (0 if none).
fn lowest_other(params: &ModelParams, theta: f64, skip: &[usize], quad_tol: f64) -> Result<f64> {
    let mut lowest = 0.0f64;
    for k in candidate_branches(params, theta) {
        if skip.contains(&k) {
            continue;
        }
        if let Some(pt) = minimum_at(params, k, theta, quad_tol)? {
            lowest = lowest.min(pt.v0);
        }
    }
    Ok(lowest)
}

/// Cap for infinite θ-images when scanning for crossings: four branch widths
/// past the onset of the upper branch.
fn scan_cap(params: &ModelParams, k: usize) -> f64 {
    let ab = params.inversion();
    theta_of_phi(critical_phi(k.max(1)), ab) + 4.0 * PI / ab.sqrt()
}

/// Sign changes of `f` on an even `CROSSING_SAMPLES` scan of `[lo, hi]`, as
/// brackets with the sign at the left end.
fn sign_changes<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    let mut prev_t = lo;
    let mut prev_v = f(lo)?;
    for i in 1..=CROSSING_SAMPLES {
        let t = lo + (hi - lo) * i as f64 / CROSSING_SAMPLES as f64;
        let v = f(t)?;
        if prev_v.is_finite() && v.is_finite() && (prev_v > 0.0) != (v > 0.0) {
            out.push((prev_t, t, prev_v));
        }
        prev_t = t;
        prev_v = v;
    }
    Ok(out)
}

fn refine<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    roots::brent(f, lo, hi, tol, 200).unwrap_or(0.5 * (lo + hi))
}

/// First-order maser-maser crossing `θ*_{k,k+1}`: where the minima of
/// branches `k` and `k+1` have equal `V₀`, below zero and below every other
/// minimum. A no-crossing error means the two phases never meet.
pub fn branch_crossing(params: &ModelParams, k: usize, tol: f64) -> Result<f64> {
    let quad_tol = potential::DEFAULT_QUAD_TOL;
    let lower = SaddleBranch::new(params, k, SubBranch::Minimum)?;
    let upper = SaddleBranch::new(params, k + 1, SubBranch::Minimum)?;
    let (l0, h0) = lower.theta_range();
    let (l1, h1) = upper.theta_range();
    let lo = l0.max(l1);
    let hi = h0.min(h1).min(scan_cap(params, k + 1));
    if !(hi > lo) {
        return Err(Error::NoCrossing(format!("minima of branches {k} and {} never coexist", k + 1)));
    }
    let diff = |t: f64| -> Result<f64> { Ok(lower.point(params, t, quad_tol)?.v0 - upper.point(params, t, quad_tol)?.v0) };
    for (a, b, _) in sign_changes(diff, lo, hi)? {
        let t = refine(|t| diff(t).unwrap_or(f64::NAN), a, b, tol);
        let v = lower.point(params, t, quad_tol)?.v0;
        if v < 0.0 && lowest_other(params, t, &[k, k + 1], quad_tol)? >= v - TIE_TOL {
            return Ok(t);
        }
    }
    Err(Error::NoCrossing(format!("branches {k} and {} never intersect as global minima", k + 1)))
}

/// First-order thermal-maser crossing `θ*_{tk}`: where the minimum of branch
/// `k` falls through `V₀ = 0` while no other minimum lies below zero.
pub fn thermal_crossing(params: &ModelParams, k: usize, tol: f64) -> Result<f64> {
    let quad_tol = potential::DEFAULT_QUAD_TOL;
    let br = SaddleBranch::new(params, k, SubBranch::Minimum)?;
    let (lo, hi) = br.theta_range();
    let hi = hi.min(scan_cap(params, k));
    let v = |t: f64| -> Result<f64> { Ok(br.point(params, t, quad_tol)?.v0) };
    for (a, b, left) in sign_changes(v, lo, hi)? {
        if left <= 0.0 {
            continue;
        }
        let t = refine(|t| v(t).unwrap_or(f64::NAN), a, b, tol);
        if lowest_other(params, t, &[k], quad_tol)? >= -TIE_TOL {
            return Ok(t);
        }
    }
    Err(Error::NoCrossing(format!("minimum of branch {k} never becomes the global minimum through V0 = 0")))
}

/// The ladder of critical pump parameters for fixed `(a, Δ, n_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub theta0_star: f64,
    /// `theta_k[i]` holds `θ_{i+1}`.
    pub theta_k: Vec<f64>,
    pub theta_cross: BTreeMap<usize, f64>,
    pub theta_thermal: BTreeMap<usize, f64>,
}

impl CriticalSet {
    /// Critical values for branches `0..=k_max`. Missing crossings are
    /// simply absent from the maps.
    pub fn compute(params: &ModelParams, k_max: usize, tol: f64) -> Result<Self> {
        let k_max = k_max.min(MAX_BRANCH - 1);
        let theta0_star = potential::theta0_star(params)?;
        let theta_k = (1..=k_max + 1).map(|k| potential::theta_k(params, k)).collect::<Result<Vec<_>>>()?;
        let mut theta_cross = BTreeMap::new();
        let mut theta_thermal = BTreeMap::new();
        for k in 0..=k_max {
            match branch_crossing(params, k, tol) {
                Ok(t) => {
                    theta_cross.insert(k, t);
                }
                Err(Error::NoCrossing(_)) | Err(Error::Branch(_)) => {}
                Err(e) => return Err(e),
            }
            if k >= 1 {
                match thermal_crossing(params, k, tol) {
                    Ok(t) => {
                        theta_thermal.insert(k, t);
                    }
                    Err(Error::NoCrossing(_)) | Err(Error::Branch(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(CriticalSet { theta0_star, theta_k, theta_cross, theta_thermal })
    }
}
