//! Stationary photon statistics, effective-potential phase structure and
//! correlation length of the micromaser.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`]: the dimensionless parameter bundle and the pumping function `q(x)`.
//! * [`distribution`]: the exact stationary photon distribution and its
//!   thermal-phase approximation.
//! * [`potential`]: the effective potential `V_k(x)`, its large-N
//!   distribution and the critical angles `φ_k`.
//! * [`saddle`]: maser branches, their potentials, first-order crossings and
//!   the global phase at a given pump parameter.
//! * [`phase_diagram`]: critical lines and triple points in the `(θ, a)` plane.
//! * [`spectrum`]: the master-equation generator, its spectral gap and the
//!   correlation length.

pub mod distribution;
pub mod error;
pub mod numeric;
pub mod params;
pub mod phase_diagram;
pub mod potential;
pub mod saddle;
pub mod spectrum;

pub use distribution::{stationary_distribution, thermal_distribution, twinkle_extrema, PhotonDistribution};
pub use error::{Error, Result};
pub use params::{q_of_x, ModelParams};
pub use phase_diagram::{CriticalLine, GridSpec, LineKind, PhaseDiagram, TransitionOrder};
pub use saddle::{global_phase, CriticalSet, GlobalPhase, Phase, SaddleBranch, SubBranch};
pub use spectrum::{build_generator, spectral_gap, GeneratorMatrix, SpectralResult};
