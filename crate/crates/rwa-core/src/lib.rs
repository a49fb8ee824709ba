//! Pulse synthesis, unitary propagation and averaging oracles for chirped
//! control of small quantum systems.
//!
//! The crate is `no_std` with `alloc`; enable either the `std` (default) or
//! the `libm` feature for floating-point intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adiabatic;
pub mod averaging;
pub mod controls;
pub mod error;
mod math;
pub mod phase;
pub mod schrodinger;
pub mod smallmat;

pub use error::{Error, Result};
pub use smallmat::{dist_up_to_phase, eig_hermitian, expm_skew, fidelity, ComplexMatrix, QuantumState, C64};
