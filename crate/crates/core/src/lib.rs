//! Variable-step BDF2 time stepping with Fourier pseudo-spectral space
//! discretization for the space fractional Cahn-Hilliard equation
//!
//! ```text
//! d_t phi = -kappa (-Delta)^alpha mu,   mu = eps^2 (-Delta) phi + phi^3 - phi
//! ```
//!
//! on the periodic square `(0, L)^2`.
//!
//! * [`grid`]: transforms, (fractional) Laplacians, norms.
//! * [`kernels`]: BDF2 and DOC kernels, step restrictions.
//! * [`stepper`]: implicit BDF2 / TR-BDF2 steps.
//! * [`energy`]: discrete and modified energies, dissipation checks.
//! * [`adaptive`]: adaptive step controller and seeded random inputs.
//! * [`experiments`]: run driver and studies; [`io`]: file formats.

pub mod adaptive;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{inner, norm_l2, norm_lq, GridField, SpectralField, SpectralGrid};
pub use kernels::{KernelSet, RestrictionMode, TimeMesh};
pub use stepper::{ModelParams, NonlinearSolveConfig, SolverState, Stepper};
