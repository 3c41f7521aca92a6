//! Particle-picture Monte Carlo for Hermite processes and the non-symmetric
//! Rosenblatt process.
//!
//! A Poisson system of charged particles moving as independent symmetric
//! α-stable Lévy motions is simulated on a time grid. Functionals built from
//! the (mollified) Riesz interaction `|x - y|^(γ-1)` and from k-fold
//! intersection local times are evaluated on it and compared against
//! independent generators of the limiting processes.
//!
//! Module map:
//!
//! - [`stable_levy`]: exact-in-distribution stable increments and paths,
//!   transition density and potential kernel.
//! - [`particle_system`]: the charged Poisson system and the charge
//!   occupation field `X_T`.
//! - [`kernels`]: mollifiers, smoothed step functions and the truncated
//!   Riesz operator `V^δ`.
//! - [`functionals`]: the pair functional `Δ`, the approximate k-ILT and the
//!   aggregated `η^T` / `ρ^T` samplers.
//! - [`wick`]: pairing combinatorics, Wick products and Monte Carlo checks
//!   of the Poisson moment identities.
//! - [`hermite_oracle`]: fBm, partial-sum and spectral Hermite generators.
//! - [`stats`]: covariance, normalization, Hurst regression and energy
//!   distance tests.
//! - [`io`]: CSV ensembles and JSON sidecars.

pub mod error;
pub mod functionals;
pub mod hermite_oracle;
pub mod io;
pub mod kernels;
pub mod particle_system;
pub mod quad;
pub mod rng;
pub mod stable_levy;
pub mod stats;
pub mod wick;

pub use error::{Error, Result};
