//! Efficiency at maximum power of quantum Carnot engines driven between
//! temperature-tunable baths.
//!
//! The crate has two layers. [`bath_thermo`] holds the closed-form
//! low-dissipation results: effective temperatures, the generalized Carnot
//! limit and the bounds it imposes on the efficiency at maximum power. The
//! remaining modules carry out the full finite-time optimization of a
//! two-level spin engine: [`spin_engine`] defines the working medium,
//! [`optimal_protocol`] solves the Euler-Lagrange problem for each
//! isothermal stroke, [`power_opt`] maximizes power over the stroke
//! durations and [`verify_oracle`] cross-checks everything by direct
//! integration of the relaxation equation.
//!
//! Units: ħ = k_B = 1, energies and temperatures in meV, time in meV⁻¹.
//!
//! ```
//! use tunable_carnot::{power_opt::maximize_power, Bath, EngineParams};
//!
//! # fn main() -> tunable_carnot::Result<()> {
//! let params = EngineParams::new(Bath::new(25.8, 2.0)?, Bath::new(12.9, 1.8)?, 5.0, 3.0, 0.005)?;
//! let report = maximize_power(&params)?;
//! assert!(report.bounds.contains(report.emp, 1e-9));
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath_thermo;
pub mod error;
pub mod numerics;
pub mod optimal_protocol;
pub mod power_opt;
pub mod spin_engine;
pub mod verify_oracle;

pub use bath_thermo::{Bath, EmpBounds, LowDissipationCoefficients};
pub use error::{Error, Result};
pub use optimal_protocol::{BranchKind, ELBranch, ProtocolTrace};
pub use power_opt::OptimumReport;
pub use spin_engine::{CycleBoundaries, EngineParams};
