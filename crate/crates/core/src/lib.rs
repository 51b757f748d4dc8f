//! Numerical core for out-of-time-ordered correlators (OTOCs) of spin-1/2
//! chains coupled to bosonic baths.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It provides:
//!
//! * [`quantum`]: dense complex operators on composite spaces, Hermitian
//!   eigendecompositions, partial traces and thermal oscillator states;
//! * [`model`]: spin-chain Hamiltonians, observables, bath discretisation and
//!   the joint system-environment Hamiltonians;
//! * [`bath`]: spectral densities, the bath correlation function, the
//!   dephasing double integral and its closed forms;
//! * [`special`]: Hurwitz zeta and digamma for complex arguments;
//! * [`otoc`]: exact closed, full-backward (FBTE) and partial-backward (PBTE)
//!   OTOC engines on the truncated joint space;
//! * [`influence`]: influence phases for piecewise-constant spin paths and a
//!   path-sum OTOC engine for dephasing (σ_z-diagonal) chains;
//! * [`bounds`]: dephasing lower bounds and the Taylor difference bound.
//!
//! Units: the bath cutoff Λ sets the frequency scale; times are in 1/Λ and
//! temperatures in Λ/k_B unless a function says otherwise.

#![no_std]
// f64 methods come from `Float` under no_std and are inherent once std is in the crate graph.
#![allow(unused_imports)]

extern crate alloc;

pub mod bath;
pub mod bounds;
mod error;
pub mod influence;
mod linalg;
pub mod model;
pub mod otoc;
pub mod quadrature;
pub mod quantum;
pub mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64;
