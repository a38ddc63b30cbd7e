//! Hybrid deterministic / Monte Carlo variance-reduction workbench.
//!
//! The crate builds self-shielded multigroup libraries from synthetic resonance
//! nuclides, solves the 2-D multigroup discrete-ordinates equations forward and
//! adjoint, turns the results into CADIS / FW-CADIS / resonance-factor weight
//! windows and biased sources, and runs a fine-group Monte Carlo engine with
//! those windows.
//!
//! Module map:
//!
//! * [`xslib`] pointwise cross sections, Bondarenko factors, library building
//! * [`grid`] benchmark geometry and angular quadrature
//! * [`detsolver`] diamond-difference source-iteration SN solver
//! * [`vr`] adjoint sources, importance maps, weight windows, source biasing
//! * [`mc`] Monte Carlo transport, tallies and statistics
//! * [`harness`] configuration, pipelines, sweeps and reports

pub mod detsolver;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod harness;
pub mod mc;
pub mod textio;
pub mod vr;
pub mod xslib;

pub use error::{Error, Result};
