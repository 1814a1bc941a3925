//! Particle-mesh simulator for the kinetic Cucker-Smale model coupled with
//! the non-stationary Stokes equations on a periodic box.
//!
//! The distribution function is discretized as an empirical measure (an
//! ensemble of weighted particles advanced along characteristics), the fluid
//! velocity lives on a collocation grid with an exact per-mode spectral
//! Stokes integrator, and the two are coupled through a cloud-in-cell
//! deposit/interpolate adjoint pair. Each timestep of the fully coupled
//! system is solved by a Picard fixed-point iteration whose contraction is
//! measured and reported.

pub mod alignment;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod fft;
pub mod fluid;
pub mod kernel;
pub mod output;
pub mod picard;
pub mod stokes;
pub mod transport;
pub mod vec3;

pub use config::{FluidInit, Mode, ParticleInit, SimConfig, WeightSpec};
pub use diagnostics::DiagnosticsRecord;
pub use ensemble::ParticleEnsemble;
pub use error::Error;
pub use fluid::FluidState;
pub use kernel::KernelSpec;
pub use vec3::Vec3;
