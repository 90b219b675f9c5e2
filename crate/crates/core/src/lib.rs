//! Simulation and numerical verification toolkit for a storage network in
//! which every file has at most two copies, copies fail independently and a
//! shared duplication capacity restores single-copy files.
//!
//! The state `(x0, x1)` counts lost files and single-copy files. The process
//! is transient with `(F_N, 0)` absorbing. The crate provides:
//!
//! * [`model`]: parameters, state space, regimes and jump rates.
//! * [`ctmc`]: exact event-driven simulation, M/M/1 auxiliaries and the
//!   domination coupling.
//! * [`skorokhod`]: the one-dimensional reflection map and a Picard solver
//!   for the generalized Skorokhod problem.
//! * [`fluid`]: the fluid limit in closed form and as a GSP solution.
//! * [`critical`]: Euler integration of the reflected integro-differential
//!   SDE that governs the critical regime.
//! * [`decay`]: the decay curve of the stable regime and its local
//!   equilibrium law.
//! * [`stats`]: estimators and goodness-of-fit checks.
//! * [`verify`]: named verification suites that tie everything together.

pub mod critical;
pub mod ctmc;
pub mod decay;
mod error;
pub mod fluid;
pub mod model;
pub mod rng;
pub mod skorokhod;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use model::{ModelParams, NetworkState, Rates, Regime, RegimeTag};
