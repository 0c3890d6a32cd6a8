//! Nonlinear geometric optics solvers for highly oscillatory transport.
//!
//! Each model is written in terms of a slowly varying phase `S` and a profile
//! that is periodic in the fast variable `τ`; the oscillatory solution is
//! recovered by evaluating the profile at `τ = S/ε`. Errors of the schemes do
//! not deteriorate as the wavelength `ε` goes to zero.
//!
//! * [`scalar`]: `∂_t u + c ∂_x u + r(u) = (i a/ε) u`.
//! * [`system`]: a 2×2 hyperbolic system with one oscillating component.
//! * [`hopping`]: a semiclassical surface-hopping kinetic model on `(x, p)`.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`).

use std::fmt;
use std::str::FromStr;

pub mod coeff;
pub mod error;
pub mod expm;
pub mod hopping;
pub mod phase;
pub mod real;
pub mod scalar;
pub mod spectral;
pub mod system;

pub use coeff::ClampPolicy;
pub use error::{NgoError, Result};
pub use phase::PhaseMethod;
pub use real::{cis, fast_phase, Real};
pub use spectral::{Fourier, MeanPolicy, PeriodicGrid, ProfileField, SpectralField1D};

/// Initial profile: Chapman-Enskog corrected or the raw data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum InitMode {
    #[default]
    Corrected,
    Uncorrected,
}

impl InitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitMode::Corrected => "corrected",
            InitMode::Uncorrected => "uncorrected",
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitMode {
    type Err = NgoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(InitMode::Corrected),
            "uncorrected" => Ok(InitMode::Uncorrected),
            other => Err(NgoError::InvalidParameter {
                name: "init",
                reason: format!("unknown mode `{other}` (expected corrected or uncorrected)"),
            }),
        }
    }
}

pub type PeriodicGrid64 = PeriodicGrid<f64>;
pub type PeriodicGrid32 = PeriodicGrid<f32>;
pub type ProfileField64 = ProfileField<f64>;
pub type ScalarProblem64 = scalar::ScalarProblem<f64>;
pub type ScalarProblem32 = scalar::ScalarProblem<f32>;
pub type ScalarState64 = scalar::ScalarState<f64>;
pub type SystemProblem64 = system::SystemProblem<f64>;
pub type SystemState64 = system::SystemState<f64>;
pub type HoppingProblem64 = hopping::HoppingProblem<f64>;
pub type KineticState64 = hopping::KineticState<f64>;
pub type AugmentedKineticState64 = hopping::AugmentedKineticState<f64>;
