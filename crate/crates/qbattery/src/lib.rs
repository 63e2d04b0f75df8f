//! Numerical laboratory for charging-power bounds on quantum batteries.
//!
//! The crate simulates closed (unitary composite) and open (Lindblad)
//! battery dynamics, computes the free energy operator and its
//! fluctuation/covariance/Fisher-information quantifiers, and evaluates the
//! charging-power bounds for both settings, including the kernel-singularity
//! behaviour of the free energy operator on rank-deficient states.
//!
//! Start with the runnable examples (`cargo run --example <name>`), or the
//! `qbattery` binary for scenario runs and verification campaigns.

pub mod bounds;
pub mod cli;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod operator;
pub mod report;
pub mod scenarios;
pub mod space;
pub mod thermo;

pub use density::{expectation, DensityMatrix};
pub use error::{Error, Result};
pub use operator::{CMatrix, HermitianOperator, SpectralDecomposition, C64};
pub use space::{CompositeSpace, Subsystem};
pub use thermo::{RegularizationPolicy, ThermoContext};
