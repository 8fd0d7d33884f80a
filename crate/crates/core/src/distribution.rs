//! Exact stationary photon distribution and its thermal-phase approximation.
//!
//! The stationary state of the pumped, damped cavity is a birth–death
//! equilibrium: consecutive probabilities are related by
//!
//! ```text
//! p_n / p_{n-1} = (n_b n + N a q_n) / ((1 + n_b) n + N b q_n),   q_n = q(n/N)
//! ```
//!
//! The products span hundreds of orders of magnitude for `N ~ 10³`, so they
//! are accumulated as sums of logarithms and normalized by log-sum-exp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_HARD_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionOptions {
    /// Relative tail threshold: truncation stops once `p_{n_max} < tol · max p`.
    pub tol: f64,
    /// Largest admissible `n_max`.
    pub hard_cap: usize,
}

impl Default for DistributionOptions {
    fn default() -> Self {
        DistributionOptions {
            tol: DEFAULT_TAIL_TOL,
            hard_cap: DEFAULT_HARD_CAP,
        }
    }
}

/// Truncated, normalized photon-number distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    log_p0: f64,
    params: ModelParams,
}

impl PhotonDistribution {
    /// Builds a distribution from unnormalized log weights (`-inf` allowed).
    pub fn from_log_weights(log_weights: Vec<f64>, params: ModelParams) -> Self {
        let lse = log_sum_exp(&log_weights);
        let log_probs: Vec<f64> = log_weights.iter().map(|&l| l - lse).collect();
        let probs = log_probs.iter().map(|&l| l.exp()).collect();
        PhotonDistribution {
            log_p0: log_probs[0],
            probs,
            log_probs,
            params,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `ln p_0`, the log normalization constant.
    pub fn log_p0(&self) -> f64 {
        self.log_p0
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `Σ nᵏ p_n`.
    pub fn moment(&self, order: u32) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, &p)| (n as f64).powi(order as i32) * p)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Order parameter `⟨x⟩ = ⟨n⟩/N`.
    pub fn mean_x(&self) -> f64 {
        self.mean() / self.params.flux
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, &p)| (n as f64 - m).powi(2) * p)
            .sum()
    }

    /// Most probable photon number (lowest on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (n, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = n;
            }
        }
        best
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Numerator and denominator of `p_n / p_{n-1}` for `n ≥ 1`.
#[inline]
pub fn step_rates(params: &ModelParams, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let nb = params.thermal_photons;
    let pumped = if params.flux > 0.0 {
        params.flux * params.q(nf / params.flux)
    } else {
        0.0
    };
    (nb * nf + params.excitation * pumped, (1.0 + nb) * nf + params.ground() * pumped)
}

/// Unnormalized `ln(p_n / p_0)` for `n = 0..=n_max`, accumulated by the
/// detailed-balance recursion. Entries after a trapping zero are `-inf`.
pub fn log_weights(params: &ModelParams, n_max: usize) -> Vec<f64> {
    let mut lw = Vec::with_capacity(n_max + 1);
    lw.push(0.0);
    extend_log_weights(params, &mut lw, n_max);
    lw
}

fn extend_log_weights(params: &ModelParams, lw: &mut Vec<f64>, n_max: usize) {
    let mut acc = *lw.last().unwrap();
    for n in lw.len()..=n_max {
        if acc == f64::NEG_INFINITY {
            lw.push(acc);
            continue;
        }
        let (num, den) = step_rates(params, n);
        acc = if num > 0.0 { acc + num.ln() - den.ln() } else { f64::NEG_INFINITY };
        lw.push(acc);
    }
}

/// Initial truncation guess: the maser peak sits at `x ≤ a - b` and has a
/// width of order `√N`.
pub fn initial_n_max(params: &ModelParams) -> usize {
    let n = params.flux;
    (n * params.inversion().max(0.0) + 10.0 * n.sqrt() + 50.0).ceil() as usize
}

/// Exact stationary distribution with the default hard cap.
pub fn stationary_distribution(params: &ModelParams, tol: f64) -> Result<PhotonDistribution> {
    stationary_distribution_with(
        params,
        &DistributionOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn stationary_distribution_with(params: &ModelParams, opts: &DistributionOptions) -> Result<PhotonDistribution> {
    params.validate()?;
    if !(opts.tol > 0.0 && opts.tol <= 1e-6) {
        return Err(Error::InvalidParams {
            name: "tol",
            reason: format!("tail tolerance {} outside (0, 1e-6]", opts.tol),
        });
    }
    let log_tol = opts.tol.ln();
    let mut n_max = initial_n_max(params).min(opts.hard_cap);
    let mut lw = vec![0.0];
    loop {
        extend_log_weights(params, &mut lw, n_max);
        let peak = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lw[n_max] - peak < log_tol {
            break;
        }
        if n_max >= opts.hard_cap {
            return Err(Error::Truncation { cap: opts.hard_cap });
        }
        n_max = (2 * n_max).min(opts.hard_cap);
    }
    // Beyond x = a - b the weights decrease monotonically, so everything
    // after the last entry above threshold is pure tail.
    let peak = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last_above = lw.iter().rposition(|&l| l - peak >= log_tol).unwrap_or(0);
    lw.truncate((last_above + 2).min(lw.len()));
    Ok(PhotonDistribution::from_log_weights(lw, *params))
}

/// Ratio of the geometric thermal-phase distribution,
/// `(n_b + a θ²_eff) / (1 + n_b + b θ²_eff)`.
pub fn thermal_ratio(params: &ModelParams) -> f64 {
    let t = params.theta_eff_sq();
    let nb = params.thermal_photons;
    (nb + params.excitation * t) / (1.0 + nb + params.ground() * t)
}

fn check_normalizable(params: &ModelParams) -> Result<()> {
    let g = params.theta_eff_sq() * params.inversion();
    if g >= 1.0 {
        return Err(Error::Normalizability { value: g });
    }
    Ok(())
}

/// Closed-form thermal-phase mean `r/(1 - r)`.
pub fn thermal_mean(params: &ModelParams) -> Result<f64> {
    check_normalizable(params)?;
    let r = thermal_ratio(params);
    Ok(r / (1.0 - r))
}

/// Geometric distribution obtained by expanding the effective potential
/// around `x = 0`; valid while `θ²_eff (a - b) < 1`.
pub fn thermal_distribution(params: &ModelParams) -> Result<PhotonDistribution> {
    params.validate()?;
    check_normalizable(params)?;
    let r = thermal_ratio(params);
    let n_max = if r > 0.0 {
        ((DEFAULT_TAIL_TOL.ln() / r.ln()).ceil() as usize).max(1)
    } else {
        1
    };
    let lr = r.ln();
    let lw = (0..=n_max).map(|n| if n == 0 { 0.0 } else { n as f64 * lr }).collect();
    Ok(PhotonDistribution::from_log_weights(lw, *params))
}

/// Periodic extrema of the thermal-phase photon number at nonzero detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinkleExtrema {
    pub mean_max: f64,
    pub mean_min: f64,
    /// `θ = (n + ½)π/|Δ|`, `n = 0..count`.
    pub theta_max_positions: Vec<f64>,
    /// `θ = nπ/|Δ|`, `n = 0..count`.
    pub theta_min_positions: Vec<f64>,
}

/// Extremes of the thermal mean as `Δθ` sweeps through multiples of `π/2`.
/// Requires `Δ ≠ 0` and `a < (1 + Δ²)/2` so that no maser phase interferes.
pub fn twinkle_extrema(params: &ModelParams, count: usize) -> Result<TwinkleExtrema> {
    let d = params.detuning;
    if d == 0.0 {
        return Err(Error::Domain("twinkling requires nonzero detuning".into()));
    }
    let a = params.excitation;
    if a >= (1.0 + d * d) / 2.0 {
        return Err(Error::Domain(format!(
            "a = {a} >= (1 + delta^2)/2 = {}: maser phases exist",
            (1.0 + d * d) / 2.0
        )));
    }
    let d2 = d * d;
    let nb = params.thermal_photons;
    let step = std::f64::consts::PI / d.abs();
    Ok(TwinkleExtrema {
        mean_max: (nb + a / d2) / (1.0 + (params.ground() - a) / d2),
        mean_min: nb,
        theta_max_positions: (0..count).map(|n| (n as f64 + 0.5) * step).collect(),
        theta_min_positions: (0..count).map(|n| n as f64 * step).collect(),
    })
}
