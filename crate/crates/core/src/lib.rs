//! Optical Bloch equations of a laser-driven four-level N-scheme atom.
//!
//! Levels S, P, D form a Λ system driven by a blue (B, S–P) and a red
//! (R, D–P) laser; a weak clock laser (C) couples S to the metastable Q.
//! The crate computes
//!
//! * steady states of the master equation ([`steady`]) and parameter sweeps
//!   with peak finding ([`scan`]);
//! * time evolution, relaxation timescales and g²(τ) ([`dynamics`]);
//! * quantum-jump trajectories and bright/dark statistics ([`mcwf`]);
//! * motional sidebands of an oscillating ion via a Floquet expansion
//!   ([`floquet`]);
//! * closed-form dressed-state results used as analytical references
//!   ([`dressed`]).
//!
//! Configuration files give frequencies in MHz as the factor that
//! multiplies 2π; internally everything is rad/µs and µs ([`model`]).
//!
//! ```
//! use nscheme::{presets, steady_state, carrier_superoperator, Level};
//!
//! let config = presets::fig3a().validate()?;
//! let rho = steady_state(&carrier_superoperator(&config))?;
//! assert!(rho.population(Level::Q) > 0.95);
//! # Ok::<(), nscheme::Error>(())
//! ```

// `!(a > b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dressed;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod liouvillian;
pub mod mcwf;
pub mod model;
pub mod presets;
pub mod scan;
pub mod spectral;
pub mod steady;

pub use dressed::{doppler_rate, lambda_eigensystem, three_photon_report};
pub use dynamics::{evolve, fit_timescales, g2, PopulationTrace};
pub use error::{Error, Result};
pub use floquet::{convergence_check, solve_floquet_auto, solve_floquet_steady, FloquetBlockSystem};
pub use liouvillian::{build_hamiltonian, carrier_superoperator, Superoperator};
pub use mcwf::{bright_dark_statistics, ensemble_populations, run_trajectory, TrajectoryRecord};
pub use model::{mhz, to_mhz, validate, DensityMatrix, Level, RawConfig, SystemConfig};
pub use scan::{find_peaks, run_scan, ScanSpec, Spectrum};
pub use steady::steady_state;

/// The guide's chapters, compiled so their examples stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/configuration.md")]
    pub struct Configuration;
    #[doc = include_str!("../../../book/src/steady-state.md")]
    pub struct SteadyState;
    #[doc = include_str!("../../../book/src/dressed-states.md")]
    pub struct DressedStates;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub struct Dynamics;
    #[doc = include_str!("../../../book/src/quantum-jumps.md")]
    pub struct QuantumJumps;
    #[doc = include_str!("../../../book/src/motion.md")]
    pub struct Motion;
    #[doc = include_str!("../../../book/src/scans.md")]
    pub struct Scans;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
