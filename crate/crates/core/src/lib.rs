//! Pilot-wave dynamics in 1+1 spacetime dimensions.
//!
//! The library is built around a quantum mass field derived from the wave
//! amplitude: `M = m * exp((hbar^2 / m^2 c^2) * box|psi| / |psi|)`, where
//! `box = c^-2 d^2/dt^2 - d^2/dx^2`. Unlike the usual decomposition
//! `M_std^2 c^2 = m^2 c^2 + hbar^2 box|psi|/|psi|`, which can turn negative
//! (tachyonic), the exponential form stays strictly positive.
//!
//! Modules:
//! - [`wavefield`]: closed-form and grid-backed wavefunctions plus the
//!   finite-difference operators acting on their amplitudes and phases.
//! - [`massfield`]: the exponential mass field, its standard-theory
//!   counterpart, gradients and tachyon scans.
//! - [`dynamics`]: relativistic (proper-time RK4) and non-relativistic
//!   trajectory integration, guidance-velocity initialization.
//! - [`geometry`]: static diagonal metrics, Christoffel symbols, geodesics,
//!   and the conformal metric `g~ = (M/m) g` that reproduces the mass-field
//!   force as free fall.
//!
//! Everything numeric is generic over the scalar width via [`Real`];
//! concrete `f64` aliases are exported at the crate root.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod massfield;
pub mod scalar;
pub mod stencil;
pub mod wavefield;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` event (one point of 1+1 spacetime).
pub type Event64 = wavefield::Event<f64>;
/// `f64` wavefield provider.
pub type Provider64 = wavefield::WavefieldProvider<f64>;
/// `f64` spacetime grid description.
pub type Grid64 = wavefield::SpacetimeGrid<f64>;
/// `f64` mass-field parameter block.
pub type MassParams64 = massfield::MassParams<f64>;
/// `f64` wavefield-backed mass field.
pub type WavefieldMass64 = massfield::WavefieldMass<f64>;
/// `f64` relativistic particle state.
pub type ParticleState64 = dynamics::ParticleState<f64>;
/// `f64` trajectory record.
pub type TrajectoryRecord64 = dynamics::TrajectoryRecord<f64>;
/// `f64` metric.
pub type Metric64 = geometry::Metric<f64>;
