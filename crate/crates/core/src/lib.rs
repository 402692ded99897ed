//! Pulse-level state preparation for the lattice Schwinger model on
//! simulated superconducting transmon devices.
//!
//! The crate is organised bottom-up:
//!
//! - [`spin`]: the Schwinger spin Hamiltonian and exact-diagonalisation oracles.
//! - [`device`]: transmon device descriptions and their Hamiltonians.
//! - [`schedule`]: piecewise-constant pulse schedules and parameter packing.
//! - [`engine`]: Schrödinger and Lindblad propagation, measurement, leakage,
//!   and adjoint gradients.
//! - [`optim`]: bounded limited-memory quasi-Newton minimisation, multi-start
//!   ground-state preparation.
//! - [`gates`]: gate-level Trotter and strongly entangling baselines.
//! - [`vqt`]: the pulse-level variational quantum thermaliser.
//! - [`experiments`]: minimum-evolution-time search, scans and speedup reports.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what every tolerance in the test
//! suite assumes.

// `!(x > 0)` is used throughout so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod device;
pub mod engine;
mod error;
pub mod experiments;
pub mod gates;
pub mod io;
pub mod linalg;
pub mod num;
pub mod optim;
pub mod schedule;
pub mod spin;
pub mod vqt;

pub use error::{Error, Result};
pub use num::Real;

/// Complex scalar over `f64`.
pub type C64 = num_complex::Complex<f64>;

pub type CMatrix64 = linalg::CMatrix<f64>;
pub type SchwingerParams64 = spin::SchwingerParams<f64>;
pub type SpinHamiltonian64 = spin::SpinHamiltonian<f64>;
pub type SpectrumResult64 = spin::SpectrumResult<f64>;
pub type DeviceSpec64 = device::DeviceSpec<f64>;
pub type PulseSchedule64 = schedule::PulseSchedule<f64>;
pub type QuantumState64 = engine::QuantumState<f64>;
pub type DensityMatrix64 = engine::DensityMatrix<f64>;
pub type OptResult64 = optim::OptResult<f64>;
pub type RunResult64 = optim::RunResult<f64>;
pub type Circuit64 = gates::Circuit<f64>;
pub type ThermalResult64 = vqt::ThermalResult<f64>;
pub type MetResult64 = experiments::MetResult<f64>;
