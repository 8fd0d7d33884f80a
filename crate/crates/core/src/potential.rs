//! Effective potential and large-N asymptotics.
//!
//! Poisson resummation of the detailed-balance product gives
//! `p(x) = p₀ √(w(x)/w(0)) exp(-N Σ_k V_k(x))` with
//!
//! ```text
//! w(x)   = (n_b x + a q(x)) / ((1 + n_b) x + b q(x))
//! V_k(x) = -∫₀ˣ ln w(ν) cos(2πNkν) dν
//! ```
//!
//! `V₀` is the large-deviation rate function; its global minimum picks the
//! phase. The `k ≠ 0` terms are suppressed by `1/N` away from trapping points.
//!
//! Substituting `φ = θ√(x + Δ²)` turns `V₀` into
//! `-(2/θ²) ∫_{θ|Δ|}^{φ} s ln[(n_b + a u(s)) / (1 + n_b + b u(s))] ds`
//! with `u(s) = θ² sin²s / s²`, which is the form evaluated on saddle branches.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::distribution::log_sum_exp;
use crate::error::{Error, Result};
use crate::numeric::{quad, roots};
use crate::params::ModelParams;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// Largest Poisson index `|k|` accepted by [`vk_correction`] and [`asymptotic_log_p`].
pub const MAX_POISSON_TERM: u32 = 32;
/// Largest branch index tabulated.
pub const MAX_BRANCH: usize = 32;

/// Gain function `w(x)`; at `x = 0` the limit
/// `(n_b + a θ²_eff) / (1 + n_b + b θ²_eff)` from `q(x) ≈ θ²_eff x`.
pub fn w_of_x(x: f64, params: &ModelParams) -> f64 {
    let nb = params.thermal_photons;
    let a = params.excitation;
    let b = params.ground();
    if x == 0.0 {
        let t = params.theta_eff_sq();
        return (nb + a * t) / (1.0 + nb + b * t);
    }
    let q = params.q(x);
    (nb * x + a * q) / ((1.0 + nb) * x + b * q)
}

#[inline]
fn ln_w(x: f64, params: &ModelParams) -> f64 {
    w_of_x(x, params).ln()
}

/// Interior points of `(0, x_hi)` where `q` vanishes: `x_m = (mπ/θ)² - Δ²`.
pub fn trapping_zeros(params: &ModelParams, x_hi: f64) -> Vec<f64> {
    let th = params.pump;
    if th <= 0.0 {
        return Vec::new();
    }
    let d2 = params.detuning * params.detuning;
    let mut out = Vec::new();
    let mut m = 1.0;
    loop {
        let x = (m * PI / th).powi(2) - d2;
        if x >= x_hi {
            break;
        }
        if x > 0.0 {
            out.push(x);
        }
        m += 1.0;
    }
    out
}

/// Breakpoints for integrating `ln w` over `[0, x_hi]`; with `n_b = 0` they
/// are logarithmic singularities (including the origin when `θ_eff = 0`).
fn log_w_breaks(params: &ModelParams, x_hi: f64) -> (Vec<f64>, bool) {
    let mut breaks = trapping_zeros(params, x_hi);
    let singular = params.thermal_photons == 0.0;
    if singular && w_of_x(0.0, params) == 0.0 {
        breaks.insert(0, 0.0);
    }
    (breaks, singular)
}

/// `w ≡ 0` when nothing can add a photon; the potential is then infinite.
fn no_gain(params: &ModelParams) -> bool {
    params.thermal_photons == 0.0 && params.excitation == 0.0
}

/// `V₀(x) = -∫₀ˣ ln w(ν) dν` by adaptive quadrature.
pub fn v0(x: f64, params: &ModelParams, quad_tol: f64) -> Result<f64> {
    v0_between(0.0, x, params, quad_tol)
}

/// `V₀(x₁) - V₀(x₀)`.
pub fn v0_between(x0: f64, x1: f64, params: &ModelParams, quad_tol: f64) -> Result<f64> {
    if x0 == x1 {
        return Ok(0.0);
    }
    if no_gain(params) {
        return Ok(if x1 > x0 { f64::INFINITY } else { f64::NEG_INFINITY });
    }
    let (breaks, singular) = log_w_breaks(params, x0.max(x1));
    let f = |v: f64| ln_w(v, params);
    quad::integrate(&f, x0, x1, &breaks, singular, quad_tol).map(|i| -i)
}

/// `V₀` in the angle variable, integrated from `θ|Δ|` (i.e. `x = 0`) to `φ`.
pub fn v0_phi(phi: f64, params: &ModelParams, quad_tol: f64) -> Result<f64> {
    let th = params.pump;
    if !(th > 0.0) {
        return Err(Error::Domain("angle form of V0 needs theta > 0".into()));
    }
    if no_gain(params) {
        return Ok(f64::INFINITY);
    }
    let nb = params.thermal_photons;
    let a = params.excitation;
    let b = params.ground();
    let th2 = th * th;
    let lo = th * params.detuning.abs();
    let f = |s: f64| {
        let u = if s == 0.0 { th2 } else { th2 * (s.sin() / s).powi(2) };
        s * ((nb + a * u) / (1.0 + nb + b * u)).ln()
    };
    let top = lo.max(phi);
    let mut breaks = Vec::new();
    let mut m = 1.0;
    while m * PI < top {
        breaks.push(m * PI);
        m += 1.0;
    }
    // Tolerance on the bare integral, rescaled by the 2/θ² prefactor.
    let tol = quad_tol * th2 / 2.0;
    quad::integrate(&f, lo, phi, &breaks, nb == 0.0, tol).map(|i| -2.0 / th2 * i)
}

/// Oscillatory Poisson term `V_k(x) = -∫₀ˣ ln w(ν) cos(2πNkν) dν`, `k ≠ 0`.
pub fn vk_correction(x: f64, params: &ModelParams, k: i32, quad_tol: f64) -> Result<f64> {
    vk_between(0.0, x, params, k, quad_tol)
}

fn vk_between(x0: f64, x1: f64, params: &ModelParams, k: i32, quad_tol: f64) -> Result<f64> {
    if k == 0 || k.unsigned_abs() > MAX_POISSON_TERM {
        return Err(Error::Domain(format!("Poisson index k = {k} must satisfy 0 < |k| <= {MAX_POISSON_TERM}")));
    }
    if !(params.flux > 0.0) {
        return Err(Error::Domain("oscillatory terms need N > 0".into()));
    }
    if x0 == x1 {
        return Ok(0.0);
    }
    if no_gain(params) {
        return Err(Error::Domain("ln w diverges everywhere (a = n_b = 0)".into()));
    }
    let omega = 2.0 * PI * params.flux * k.unsigned_abs() as f64;
    let (breaks, singular) = log_w_breaks(params, x0.max(x1));
    let f = |v: f64| ln_w(v, params) * (omega * v).cos();
    quad::integrate_oscillatory(&f, x0, x1, 2.0 * PI / omega, &breaks, singular, quad_tol).map(|i| -i)
}

/// `ln p(x_i)` from the resummed form with Poisson terms `|k| ≤ K`, on a
/// uniform ascending grid, normalized so that `N Σ p(x_i) Δx = 1`.
pub fn asymptotic_log_p(params: &ModelParams, terms: u32, grid: &[f64], quad_tol: f64) -> Result<Vec<f64>> {
    if terms > MAX_POISSON_TERM {
        return Err(Error::Domain(format!("K = {terms} exceeds {MAX_POISSON_TERM}")));
    }
    if !(params.flux > 0.0) {
        return Err(Error::Domain("asymptotic distribution needs N > 0".into()));
    }
    if grid.len() < 2 {
        return Err(Error::Domain("grid needs at least two points".into()));
    }
    let dx = grid[1] - grid[0];
    if !(dx > 0.0) || grid[0] < 0.0 {
        return Err(Error::Domain("grid must be ascending and nonnegative".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.max(w[1].abs()) {
            return Err(Error::Domain("grid must be uniform".into()));
        }
    }
    let n = params.flux;
    let mut potential = Vec::with_capacity(grid.len());
    let mut acc = v0(grid[0], params, quad_tol)?;
    for k in 1..=terms as i32 {
        acc += 2.0 * vk_correction(grid[0], params, k, quad_tol)?;
    }
    potential.push(acc);
    for w in grid.windows(2) {
        acc += v0_between(w[0], w[1], params, quad_tol)?;
        for k in 1..=terms as i32 {
            acc += 2.0 * vk_between(w[0], w[1], params, k, quad_tol)?;
        }
        potential.push(acc);
    }
    let lw0 = ln_w(0.0, params);
    let mut logp: Vec<f64> = grid
        .iter()
        .zip(&potential)
        .map(|(&x, &v)| 0.5 * (ln_w(x, params) - lw0) - n * v)
        .collect();
    let norm = log_sum_exp(&logp) + (n * dx).ln();
    for l in &mut logp {
        *l -= norm;
    }
    Ok(logp)
}

/// [`asymptotic_log_p`] exponentiated.
pub fn asymptotic_p(params: &ModelParams, terms: u32, grid: &[f64], quad_tol: f64) -> Result<Vec<f64>> {
    Ok(asymptotic_log_p(params, terms, grid, quad_tol)?.into_iter().map(f64::exp).collect())
}

/// `k`-th positive root of `tan φ = φ`, which lies in `(kπ, kπ + π/2)`.
///
/// Solved as a root of `sin φ - φ cos φ`, which has no poles in the bracket.
pub fn critical_phi(k: usize) -> f64 {
    assert!(k >= 1, "critical angles are indexed from k = 1");
    if k <= MAX_BRANCH {
        return critical_phi_table()[k];
    }
    solve_critical_phi(k)
}

fn solve_critical_phi(k: usize) -> f64 {
    let lo = k as f64 * PI;
    let hi = lo + 0.5 * PI;
    roots::brent(|p| p.sin() - p * p.cos(), lo, hi, 0.0, 200).expect("sin φ - φ cos φ changes sign on (kπ, kπ + π/2)")
}

fn critical_phi_table() -> &'static [f64; MAX_BRANCH + 1] {
    static TABLE: OnceLock<[f64; MAX_BRANCH + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; MAX_BRANCH + 1];
        for (k, v) in t.iter_mut().enumerate().skip(1) {
            *v = solve_critical_phi(k);
        }
        t
    })
}

/// `θ(φ) = φ / (√(a-b) |sin φ|)` with the `φ → 0` limit `1/√(a-b)`.
pub fn theta_of_phi(phi: f64, inversion: f64) -> f64 {
    let root = inversion.sqrt();
    if phi == 0.0 {
        return 1.0 / root;
    }
    let s = phi.sin().abs();
    if s == 0.0 {
        return f64::INFINITY;
    }
    phi / (root * s)
}

fn require_saddles(params: &ModelParams) -> Result<()> {
    if !params.has_saddles() {
        return Err(Error::Domain(format!(
            "maser saddles need a > (1 + delta^2)/2; a = {}, delta = {}",
            params.excitation, params.detuning
        )));
    }
    Ok(())
}

/// Lowest admissible angle `φ₀ = arcsin(|Δ|/√(a-b))`.
pub fn phi0(params: &ModelParams) -> Result<f64> {
    require_saddles(params)?;
    Ok((params.detuning.abs() / params.inversion().sqrt()).asin())
}

/// Second-order onset `θ₀* = θ(φ₀)`.
pub fn theta0_star(params: &ModelParams) -> Result<f64> {
    let p0 = phi0(params)?;
    Ok(theta_of_phi(p0, params.inversion()))
}

/// Pump value at which branch `k ≥ 1` appears: `θ_k = φ_k / (|sin φ_k| √(a-b))`.
pub fn theta_k(params: &ModelParams, k: usize) -> Result<f64> {
    require_saddles(params)?;
    Ok(theta_of_phi(critical_phi(k), params.inversion()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: f64, a: f64, nb: f64, d: f64, th: f64) -> ModelParams {
        ModelParams::new(n, a, nb, d, th).unwrap()
    }

    #[test]
    fn w_at_origin_uses_the_small_x_limit() {
        let p = params(100.0, 1.0, 0.0, 0.0, 1.0);
        assert!((w_of_x(0.0, &p) - 1.0).abs() < 1e-15);
        assert!((w_of_x(1e-9, &p) - 1.0).abs() < 1e-8);
        let q = params(100.0, 0.8, 0.15, 0.3, 2.0);
        let t2 = q.theta_eff_sq();
        let limit = (0.15 + 0.8 * t2) / (1.15 + 0.2 * t2);
        assert!((w_of_x(0.0, &q) - limit).abs() < 1e-14);
    }

    #[test]
    fn w_without_inversion_stays_below_thermal_ratio() {
        let p = params(100.0, 0.0, 0.3, 0.2, 4.0);
        for i in 1..300 {
            let x = i as f64 * 0.01;
            assert!(w_of_x(x, &p) <= 0.3 / 1.3 + 1e-15);
        }
    }

    #[test]
    fn w_origin_limit() {
        // (n_b + a θ²)/(1 + n_b + b θ²) with b = 0
        let p = params(100.0, 1.0, 0.0, 0.0, 1.0);
        assert_eq!(w_of_x(0.0, &p), 1.0);
        assert!((w_of_x(1e-9, &p) - 1.0).abs() < 1e-8);
        let p = params(100.0, 0.5, 0.0, 0.0, 1.0);
        assert!((w_of_x(0.0, &p) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w_of_x(1e-9, &p) - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn w_reference_value() {
        // 40-digit evaluation
        let p = params(100.0, 1.0, 0.15, 0.0, 7.0);
        assert!((w_of_x(0.5, &p) - 1.773_410_542_463_374_956).abs() < 1e-14);
    }

    #[test]
    fn v0_origin_and_monotone_without_inversion() {
        let p = params(100.0, 0.5, 0.4, 0.3, 6.0);
        assert_eq!(v0(0.0, &p, 1e-10).unwrap(), 0.0);
        let mut prev = 0.0;
        for i in 1..40 {
            let v = v0(i as f64 * 0.05, &p, 1e-10).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn v0_reference_value() {
        // 40-digit quadrature: a = 1, n_b = 0.15, θ = 5, x = 0.8
        let p = params(25.0, 1.0, 0.15, 0.0, 5.0);
        let v = v0(0.8, &p, 1e-12).unwrap();
        assert!((v + 0.106_489_986_650_333_319).abs() < 1e-10, "{v}");
    }

    #[test]
    fn v0_forms_agree() {
        for &(a, nb, d, th) in &[(1.0, 0.15, 0.0, 7.0), (0.8, 0.5, 0.3, 11.0), (0.9, 0.0, 0.2, 9.0)] {
            let p = params(100.0, a, nb, d, th);
            for &x in &[0.05, 0.3, 0.61] {
                let phi = th * (x + d * d).sqrt();
                let vx = v0(x, &p, 1e-10).unwrap();
                let vp = v0_phi(phi, &p, 1e-10).unwrap();
                assert!((vx - vp).abs() < 2e-10, "a={a} nb={nb} d={d} x={x}: {vx} vs {vp}");
            }
        }
    }

    #[test]
    fn v0_finite_through_trapping_zero() {
        let p = params(100.0, 1.0, 0.0, 0.0, 8.0);
        let zeros = trapping_zeros(&p, 1.0);
        assert!(!zeros.is_empty());
        let v = v0(1.0, &p, 1e-10).unwrap();
        assert!(v.is_finite());
        let vp = v0_phi(8.0, &p, 1e-10).unwrap();
        assert!((v - vp).abs() < 1e-8);
    }

    #[test]
    fn vk_vanishes_at_origin_and_is_even() {
        let p = params(25.0, 1.0, 0.15, 0.0, 5.0);
        assert_eq!(vk_correction(0.0, &p, 1, 1e-10).unwrap(), 0.0);
        let a = vk_correction(0.53, &p, 2, 1e-11).unwrap();
        let b = vk_correction(0.53, &p, -2, 1e-11).unwrap();
        assert_eq!(a, b);
        assert!(vk_correction(0.5, &p, 33, 1e-10).is_err());
    }

    #[test]
    fn vk_matches_dense_midpoint_sum() {
        let p = params(25.0, 1.0, 0.15, 0.0, 5.0);
        let x = 0.8;
        let nodes = 1_000_000;
        let h = x / nodes as f64;
        let omega = 2.0 * PI * 25.0;
        let mut sum = 0.0;
        for i in 0..nodes {
            let v = (i as f64 + 0.5) * h;
            let th = 5.0 * v.sqrt();
            let w = (0.15 * v + th.sin().powi(2)) / (1.15 * v);
            sum += w.ln() * (omega * v).cos();
        }
        let riemann = -sum * h;
        let vk = vk_correction(x, &p, 1, 1e-12).unwrap();
        assert!((vk - riemann).abs() < 1e-8, "{vk} vs {riemann}");
        // 40-digit reference
        assert!((vk + 3.408_792_536_795_977e-4).abs() < 1e-10);
    }

    #[test]
    fn critical_angles() {
        assert!((critical_phi(1) - 4.493_409_457_909_064).abs() < 1e-12);
        assert!((critical_phi(2) - 7.725_251_836_937_707).abs() < 1e-12);
        for k in 1..=20 {
            let phi = critical_phi(k);
            assert!((phi.tan() - phi).abs() < 1e-10, "k={k}");
            assert!(phi > k as f64 * PI && phi < k as f64 * PI + 0.5 * PI);
        }
        assert!((critical_phi(40).tan() - critical_phi(40)).abs() < 1e-9);
    }

    #[test]
    fn onset_values() {
        assert_eq!(theta0_star(&params(1.0, 1.0, 0.1, 0.0, 1.0)).unwrap(), 1.0);
        let t = theta0_star(&params(1.0, 1.0, 0.1, 0.5, 1.0)).unwrap();
        assert!((t - PI / 3.0).abs() < 1e-12);
        let t1 = theta_k(&params(1.0, 1.0, 0.1, 0.0, 1.0), 1).unwrap();
        assert!((t1 - 4.603_338_848_751_700).abs() < 1e-12);
        assert!(theta0_star(&params(1.0, 0.6, 0.1, 0.5, 1.0)).is_err());
    }

    #[test]
    fn thermal_envelope_decreases() {
        let p = params(200.0, 1.0, 0.15, 0.0, 0.7);
        let grid: Vec<f64> = (0..100).map(|i| i as f64 / 200.0).collect();
        let lp = asymptotic_log_p(&p, 0, &grid, 1e-10).unwrap();
        assert!(lp.windows(2).all(|w| w[1] < w[0]));
    }
}
