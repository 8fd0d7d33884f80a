//! The micromaser parameter bundle.
//!
//! Everything downstream works with the dimensionless set: atomic flux
//! `N = R/γ`, excited-state probability `a` of the pump atoms, thermal photon
//! number `n_b`, detuning `Δ = Δω/(2g√N)` and pump parameter `θ = gτ√N`.
//! The ground-state probability `b = 1 - a` is never stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Atomic flux `N`. Zero switches pumping off entirely.
    pub flux: f64,
    /// Excited-state probability `a` of an injected atom.
    pub excitation: f64,
    /// Mean thermal photon number `n_b`.
    pub thermal_photons: f64,
    /// Dimensionless detuning `Δ`.
    pub detuning: f64,
    /// Pump parameter `θ`.
    pub pump: f64,
}

impl ModelParams {
    pub fn new(flux: f64, excitation: f64, thermal_photons: f64, detuning: f64, pump: f64) -> Result<Self> {
        let p = ModelParams {
            flux,
            excitation,
            thermal_photons,
            detuning,
            pump,
        };
        p.validate()?;
        Ok(p)
    }

    /// Reduces raw physical inputs (injection rate `R`, cavity damping `γ`,
    /// vacuum Rabi frequency `g`, transit time `τ`, detuning `Δω`) to the
    /// dimensionless bundle.
    pub fn from_physical(
        rate: f64,
        damping: f64,
        rabi: f64,
        transit_time: f64,
        detuning_freq: f64,
        excitation: f64,
        thermal_photons: f64,
    ) -> Result<Self> {
        if !(damping > 0.0) {
            return Err(invalid("damping", "must be positive"));
        }
        if !(rabi > 0.0) {
            return Err(invalid("rabi", "must be positive"));
        }
        let flux = rate / damping;
        if !(flux > 0.0) {
            return Err(invalid("rate", "flux R/gamma must be positive"));
        }
        let root = flux.sqrt();
        Self::new(
            flux,
            excitation,
            thermal_photons,
            detuning_freq / (2.0 * rabi * root),
            rabi * transit_time * root,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.flux >= 0.0) || !self.flux.is_finite() {
            return Err(invalid("N", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.excitation) {
            return Err(invalid("a", "must lie in [0, 1]"));
        }
        if !(self.thermal_photons >= 0.0) || !self.thermal_photons.is_finite() {
            return Err(invalid("n_b", "must be finite and nonnegative"));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if !(self.pump >= 0.0) || !self.pump.is_finite() {
            return Err(invalid("theta", "must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn with_pump(mut self, pump: f64) -> Self {
        self.pump = pump;
        self
    }

    pub fn with_flux(mut self, flux: f64) -> Self {
        self.flux = flux;
        self
    }

    pub fn with_excitation(mut self, excitation: f64) -> Self {
        self.excitation = excitation;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_thermal_photons(mut self, n_b: f64) -> Self {
        self.thermal_photons = n_b;
        self
    }

    /// Ground-state probability `b = 1 - a`.
    #[inline]
    pub fn ground(&self) -> f64 {
        1.0 - self.excitation
    }

    /// Population inversion `a - b`.
    #[inline]
    pub fn inversion(&self) -> f64 {
        self.excitation - self.ground()
    }

    /// `θ²_eff = sin²(θΔ)/Δ²`, continued to `θ²` at zero detuning.
    pub fn theta_eff_sq(&self) -> f64 {
        theta_eff_sq(self.pump, self.detuning)
    }

    /// Maser saddle points exist only for `a > (1 + Δ²)/2`.
    pub fn has_saddles(&self) -> bool {
        self.inversion() > self.detuning * self.detuning
    }

    /// Pumping function `q(x)` at these `θ`, `Δ`.
    #[inline]
    pub fn q(&self, x: f64) -> f64 {
        q_of_x(x, self.pump, self.detuning)
    }
}

fn invalid(name: &'static str, reason: &str) -> Error {
    Error::InvalidParams {
        name,
        reason: reason.to_string(),
    }
}

pub fn theta_eff_sq(theta: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        theta * theta
    } else {
        let s = (theta * delta).sin() / delta;
        s * s
    }
}

/// Probability that an atom emits a photon into a cavity holding `x = n/N`
/// photons per unit flux:
/// `q(x) = x/(x+Δ²) · sin²(θ√(x+Δ²))`.
#[inline]
pub fn q_of_x(x: f64, theta: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        let s = (theta * x.sqrt()).sin();
        return s * s;
    }
    let d2 = delta * delta;
    let r = x + d2;
    let s = (theta * r.sqrt()).sin();
    x / r * s * s
}
