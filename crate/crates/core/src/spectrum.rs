//! Master-equation generator, spectral gap and correlation length.
//!
//! The photon-number distribution evolves as `dp/dt = -γ L p` with
//! `L = L_C - N(M₊ + M₋ - 1)`. Cavity damping `L_C` and the atomic kicks `M±`
//! only move one photon at a time, so `L` is the tridiagonal generator of a
//! birth-death chain with rates
//!
//! ```text
//! birth(n) = n_b (n + 1) + N a q((n + 1)/N)      n → n + 1
//! death(n) = (1 + n_b) n + N b q(n/N)            n → n - 1
//! ```
//!
//! The chain is reversible with respect to its stationary distribution, so
//! the similarity transform by `√p` makes `L` symmetric and the gap can be
//! taken from a Sturm-sequence bisection. The correlation length is `γξ = 1/λ`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::distribution::{log_sum_exp, stationary_distribution, DEFAULT_HARD_CAP, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::numeric::tridiag;
use crate::params::ModelParams;

/// Relative width of the final bisection bracket for the gap.
pub const DEFAULT_GAP_TOL: f64 = 1e-10;
/// Largest block handled by the dense eigen-expansion in [`photon_autocorrelation`].
pub const DENSE_AUTOCORR_MAX: usize = 500;
const MIN_N_MAX: usize = 10;
/// Relative change of the gap under doubling of `n_max` accepted as converged.
pub const GAP_CONVERGENCE: f64 = 1e-9;
/// Autocorrelation values below this are treated as noise by the tail fit.
const FIT_FLOOR: f64 = 1e-9;

/// Tridiagonal `L` on photon numbers `0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub n_max: usize,
    pub diag: Vec<f64>,
    /// `L[n][n+1]`, the negated death rate out of `n + 1`.
    pub sup: Vec<f64>,
    /// `L[n+1][n]`, the negated birth rate out of `n`.
    pub sub: Vec<f64>,
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    pub params: ModelParams,
}

/// Assembles `L` with a reflecting top row: the outflow from `n_max` to
/// `n_max + 1` is dropped.
pub fn build_generator(params: &ModelParams, n_max: usize) -> Result<GeneratorMatrix> {
    // N = 0 is allowed here: the generator is then pure cavity damping.
    ModelParams { flux: if params.flux == 0.0 { 1.0 } else { params.flux }, ..*params }.validate()?;
    if n_max < MIN_N_MAX {
        return Err(Error::Domain(format!("n_max must be at least {MIN_N_MAX}")));
    }
    let n = params.flux;
    let a = params.excitation;
    let b = params.ground();
    let nb = params.thermal_photons;
    let q = |m: usize| if n > 0.0 { params.q(m as f64 / n) } else { 0.0 };
    let mut birth = Vec::with_capacity(n_max + 1);
    let mut death = Vec::with_capacity(n_max + 1);
    for m in 0..=n_max {
        let up = if m < n_max { nb * (m + 1) as f64 + n * a * q(m + 1) } else { 0.0 };
        birth.push(up);
        death.push((1.0 + nb) * m as f64 + n * b * q(m));
    }
    let diag = birth.iter().zip(&death).map(|(u, d)| u + d).collect();
    let sup = death[1..].iter().map(|d| -d).collect();
    let sub = birth[..n_max].iter().map(|u| -u).collect();
    Ok(GeneratorMatrix { n_max, diag, sup, sub, birth, death, params: *params })
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// `L p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * p[i];
                if i > 0 {
                    v += self.sub[i - 1] * p[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * p[i + 1];
                }
                v
            })
            .collect()
    }

    /// Column sums of `L`; zero up to round-off with the reflecting top row.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j];
                if j > 0 {
                    s += self.sup[j - 1];
                }
                if j + 1 < n {
                    s += self.sub[j];
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.sup[i];
                m[(i + 1, i)] = self.sub[i];
            }
        }
        m
    }

    /// Last state reachable from `n = 0`: the chain splits where a birth rate
    /// vanishes (only possible with `n_b = 0` at a trapping point).
    pub fn head_end(&self) -> usize {
        self.birth[..self.n_max].iter().position(|&u| u == 0.0).unwrap_or(self.n_max)
    }

    /// Diagonal and off-diagonal of `D^{-1/2} L D^{1/2}` on the head block.
    pub fn symmetrized(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.head_end();
        let diag = self.diag[..=h].to_vec();
        let off = (0..h).map(|i| -(self.birth[i] * self.death[i + 1]).sqrt()).collect();
        (diag, off)
    }
}

/// Null vector of `L`, normalized, from flux balance in log space. States
/// past a chain split get probability 0.
pub fn stationary_vector(gen: &GeneratorMatrix) -> Vec<f64> {
    let h = gen.head_end();
    let mut lw = vec![f64::NEG_INFINITY; gen.dim()];
    lw[0] = 0.0;
    for m in 0..h {
        lw[m + 1] = lw[m] + gen.birth[m].ln() - gen.death[m + 1].ln();
    }
    let norm = log_sum_exp(&lw[..=h]);
    lw.iter().map(|l| (l - norm).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Smallest eigenvalue of the symmetrized generator (zero up to round-off).
    pub lambda0: f64,
    /// `‖L p⁰‖∞` for the computed stationary vector.
    pub lambda0_residual: f64,
    pub gap: f64,
    /// `γξ = 1/λ`.
    pub xi: f64,
    pub n_max_used: usize,
    /// Set when a trapping point cut the chain and the gap refers to the head block.
    pub split: bool,
}

/// Gap of `L` with the default bisection tolerance.
pub fn spectral_gap(gen: &GeneratorMatrix) -> Result<SpectralResult> {
    spectral_gap_with(gen, DEFAULT_GAP_TOL)
}

pub fn spectral_gap_with(gen: &GeneratorMatrix, rel_tol: f64) -> Result<SpectralResult> {
    let h = gen.head_end();
    if h == 0 {
        return Err(Error::Spectral("the reachable block is the vacuum alone; no gap".into()));
    }
    let p = stationary_vector(gen);
    let split = h < gen.n_max;
    if !split {
        let peak = p.iter().cloned().fold(0.0, f64::max);
        if p[gen.n_max] >= DEFAULT_TAIL_TOL * peak {
            return Err(Error::Spectral(format!("truncation at n_max = {} is too small; enlarge it", gen.n_max)));
        }
    }
    let residual = gen.apply(&p).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // A fully reflecting head block: drop the births out of its last state.
    let gap = tridiag::edge_gap(&gen.birth[..h], &gen.death[1..=h], rel_tol);
    if !(gap > 0.0) {
        return Err(Error::Spectral("gap is not positive".into()));
    }
    let (diag, off) = gen.symmetrized();
    let lambda0 = tridiag::kth_smallest(&diag, &off, 0, 1e-15);
    Ok(SpectralResult { lambda0, lambda0_residual: residual, gap, xi: 1.0 / gap, n_max_used: gen.n_max, split })
}

/// Truncation that passes the tail criterion with some margin.
pub fn auto_n_max(params: &ModelParams) -> Result<usize> {
    let dist = stationary_distribution(params, DEFAULT_TAIL_TOL)?;
    Ok((dist.n_max() + dist.n_max() / 4 + 20).max(MIN_N_MAX))
}

/// Gap of `L` starting from [`auto_n_max`] and doubling the truncation until
/// the gap moves by less than [`GAP_CONVERGENCE`] relative. The slow mode can
/// live well beyond the bulk of `p_n`, so the tail criterion alone is not
/// enough.
pub fn correlation_length(params: &ModelParams) -> Result<SpectralResult> {
    correlation_length_with(params, DEFAULT_GAP_TOL)
}

pub fn correlation_length_with(params: &ModelParams, rel_tol: f64) -> Result<SpectralResult> {
    let mut n_max = auto_n_max(params)?;
    let mut prev = spectral_gap_with(&build_generator(params, n_max)?, rel_tol)?;
    while n_max <= DEFAULT_HARD_CAP / 2 {
        n_max *= 2;
        let next = spectral_gap_with(&build_generator(params, n_max)?, rel_tol)?;
        if (next.gap - prev.gap).abs() <= GAP_CONVERGENCE * next.gap {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Spectral(format!("gap did not settle below n_max = {n_max}")))
}

/// Thermal-phase closed form `γξ ≃ 1/(1 + (a-b) θ²_eff)`.
pub fn thermal_xi_approx(params: &ModelParams) -> Result<f64> {
    let s = params.inversion() * params.theta_eff_sq();
    if s >= 1.0 {
        return Err(Error::Domain(format!("thermal form needs theta_eff^2 (a - b) < 1, got {s}")));
    }
    if s <= -1.0 {
        return Err(Error::Domain(format!("1/(1 + s) is not positive for s = {s}")));
    }
    Ok(1.0 / (1.0 + s))
}

/// Linearized thermal gap `γξ = 1/(1 - (a-b) θ²_eff)`: near `n = 0` the
/// rates are `(n_b + a θ²_eff)(n + 1)` up and `(1 + n_b + b θ²_eff) n` down,
/// whose linear birth-death gap is the difference of the two slopes.
pub fn thermal_xi_linearized(params: &ModelParams) -> Result<f64> {
    let s = params.inversion() * params.theta_eff_sq();
    if s >= 1.0 {
        return Err(Error::Domain(format!("thermal form needs theta_eff^2 (a - b) < 1, got {s}")));
    }
    Ok(1.0 / (1.0 - s))
}

/// Peak height at the thermal onset, `(a-b) √(N/(a + (a-b) n_b)) / 2`.
pub fn critical_xi_approx(params: &ModelParams) -> Result<f64> {
    let ab = params.inversion();
    if !(ab > 0.0) || !(params.flux > 0.0) {
        return Err(Error::Domain("critical form needs a > b and N > 0".into()));
    }
    Ok(ab * (params.flux / (params.excitation + ab * params.thermal_photons)).sqrt() / 2.0)
}

/// Normalized photon-number autocovariance and its fitted decay length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `ξ_C` from an exponential fit over the last decade of decay.
    pub xi_fit: f64,
}

/// `C(t) = (⟨n(t) n(0)⟩ - ⟨n⟩²) / Var(n)` in the stationary state.
///
/// In the symmetrized frame `C(t) = uᵀ e^{-L_s t} u / uᵀu` with
/// `u_n = (n - ⟨n⟩) √p_n`. Blocks up to [`DENSE_AUTOCORR_MAX`] states use the
/// full eigen-expansion; larger ones are stepped with backward Euler plus
/// one Richardson extrapolation.
pub fn photon_autocorrelation(params: &ModelParams, t_grid: &[f64], n_max: usize) -> Result<Autocorrelation> {
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be nonnegative and strictly increasing".into()));
    }
    let gen = build_generator(params, n_max)?;
    let h = gen.head_end();
    let p = stationary_vector(&gen);
    let mean: f64 = p.iter().enumerate().map(|(n, v)| n as f64 * v).sum();
    let u: Vec<f64> = (0..=h).map(|n| (n as f64 - mean) * p[n].sqrt()).collect();
    let norm: f64 = u.iter().map(|v| v * v).sum();
    if !(norm > 0.0) {
        return Err(Error::Spectral("photon number has no variance".into()));
    }
    let (diag, off) = gen.symmetrized();
    let values = if h + 1 <= DENSE_AUTOCORR_MAX {
        eigen_expansion(&diag, &off, &u, t_grid)
    } else {
        let gap = spectral_gap(&gen)?.gap;
        implicit_stepping(&diag, &off, &u, t_grid, gap)
    };
    let values: Vec<f64> = values.into_iter().map(|v| v / norm).collect();
    let xi_fit = fit_tail(t_grid, &values)?;
    Ok(Autocorrelation { times: t_grid.to_vec(), values, xi_fit })
}

fn eigen_expansion(diag: &[f64], off: &[f64], u: &[f64], t_grid: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    let weights: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let c: f64 = eig.eigenvectors.column(j).iter().zip(u).map(|(v, w)| v * w).sum();
            (eig.eigenvalues[j].max(0.0), c * c)
        })
        .collect();
    t_grid.iter().map(|&t| weights.iter().map(|&(l, w)| w * (-l * t).exp()).sum()).collect()
}

fn implicit_stepping(diag: &[f64], off: &[f64], u: &[f64], t_grid: &[f64], gap: f64) -> Vec<f64> {
    let n = diag.len();
    let h_max = 0.05 / gap;
    let step = |y: &[f64], dt: f64| -> Vec<f64> {
        let d: Vec<f64> = diag.iter().map(|v| 1.0 + dt * v).collect();
        let o: Vec<f64> = off.iter().map(|v| dt * v).collect();
        tridiag::solve_tridiagonal(&o, &d, &o, y)
    };
    let mut y = u.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / h_max).ceil() as usize;
            let dt = span / steps as f64;
            let mut coarse = y.clone();
            let mut fine = y.clone();
            for _ in 0..steps {
                coarse = step(&coarse, dt);
                fine = step(&step(&fine, 0.5 * dt), 0.5 * dt);
            }
            y = (0..n).map(|i| 2.0 * fine[i] - coarse[i]).collect();
            t = target;
        }
        out.push(y.iter().zip(u).map(|(a, b)| a * b).sum());
    }
    out
}

/// Least-squares slope of `ln C` over the last decade of decay above the
/// noise floor.
fn fit_tail(times: &[f64], values: &[f64]) -> Result<f64> {
    let last = values.iter().rposition(|&c| c > FIT_FLOOR).ok_or_else(|| Error::Fit("autocorrelation below the noise floor".into()))?;
    let end = values[last];
    let peak = values[..=last].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if peak < 10.0 * end {
        return Err(Error::Fit("tail spans less than one decade of decay".into()));
    }
    let start = values[..=last].iter().rposition(|&c| c >= 10.0 * end).unwrap_or(0);
    let pts: Vec<(f64, f64)> = (start..=last).filter(|&i| values[i] > 0.0).map(|i| (times[i], values[i].ln())).collect();
    if pts.len() < 2 {
        return Err(Error::Fit("too few points in the tail".into()));
    }
    let m = pts.len() as f64;
    let tx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ty = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tx) * (p.1 - ty)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tx).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Fit("tail does not decay".into()));
    }
    Ok(-1.0 / slope)
}
