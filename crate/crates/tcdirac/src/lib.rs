//! Semiclassical trajectory-coherent dynamics for a relativistic spin-1/2
//! particle in smooth external electromagnetic fields.
//!
//! The crate is organized around one pipeline:
//! classical Hamilton flow ([`classical`]) -> complex-germ variational
//! dynamics ([`germ`]) -> spinor / polarization transport ([`spin`]) ->
//! wavepacket construction and quadrature expectations ([`wavepacket`]) and
//! the closed quantum-average moment system ([`moments`]).
//!
//! [`emfield`] supplies the analytic field catalog that feeds everything,
//! [`verify`] hosts the seeded matrix-identity and consistency suites that
//! the CLI exposes as `verify`.

pub mod constants;
pub mod emfield;
pub mod classical;
pub mod germ;
pub mod moments;
pub mod ode;
pub mod rng;
pub mod spin;
pub mod verify;
pub mod wavepacket;

pub use constants::Constants;
pub use emfield::{FieldDerivatives, FieldModel, Gauge};
pub use classical::{HamiltonianSpec, Mode, PhasePoint, PhaseTrajectory, VariationalMatrices};
pub use germ::{GermInit, GermSeries, GermState};
pub use moments::{MomentState, SpinCouplingMatrices};
pub use spin::{BmtConvention, KinematicPoint, Polarization, SpinSeries, SpinState};
pub use wavepacket::{DiracTcs, Observable, QuadratureGrid, ScalarTcs};

use num_complex::Complex64;

pub type C64 = Complex64;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec6 = nalgebra::Vector6<f64>;
pub type Mat6 = nalgebra::Matrix6<f64>;
pub type CVec2 = nalgebra::Vector2<C64>;
pub type CVec3 = nalgebra::Vector3<C64>;
pub type CVec4 = nalgebra::Vector4<C64>;
pub type CMat2 = nalgebra::Matrix2<C64>;
pub type CMat3 = nalgebra::Matrix3<C64>;
pub type CMat4 = nalgebra::Matrix4<C64>;
/// 4x2 column pair of Dirac eigenvectors (one energy sheet).
pub type CMat4x2 = nalgebra::Matrix4x2<C64>;

/// Errors shared across the engine modules.
#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<ode::OdeError> for EngineError {
    fn from(e: ode::OdeError) -> Self {
        match e {
            ode::OdeError::Domain { t, what } => {
                EngineError::Domain(format!("{what} (at t = {t:.6e})"))
            }
            other => EngineError::Numerical(other.to_string()),
        }
    }
}
