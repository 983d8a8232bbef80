//! Simulation of the CNOT entangling-probe attack on BB84.
//!
//! - [`qmath`]: one- and two-qubit pure states and 4x4 unitaries.
//! - [`probe`]: the ideal probe, sift-event joint distributions and Renyi
//!   information.
//! - [`error_model`]: the non-ideal forward model; [`fit`] fits it to
//!   count data with [`simplex`] descent.
//! - [`montecarlo`]: seeded count simulation and estimation from counts.
//! - [`io`]: counts files and parameter documents.
//! - [`cli`]: the `fpb-sim` command line.

pub mod cli;
pub mod error;
pub mod error_model;
pub mod fit;
pub mod io;
pub mod montecarlo;
pub mod probe;
pub mod qmath;
pub mod simplex;

pub use error::{FpbError, Result};
pub use error_model::{ErrorModelParams, OutcomeProbs};
pub use fit::{FitOptions, FitResult};
pub use montecarlo::{CountsRecord, RngSeed, Weighting};
pub use probe::{Bb84State, JointDistribution, ProbeConfig, SiftBasis};
