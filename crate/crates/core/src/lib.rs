//! Simulation and optimization of EIT light storage in a lambda-type atomic
//! ensemble.
//!
//! [`solver`] integrates the Maxwell-Bloch equations in the retarded frame and
//! runs the write/store/retrieve protocol; [`optimizer`] implements
//! time-reversal signal optimization, the optimal spin-wave eigenproblem and
//! adjoint-based synthesis of writing controls.

pub mod error;
pub mod fields;
pub mod medium;
pub mod optimizer;
pub mod solver;

pub use error::{Error, Result};
pub use fields::{shapes::Shape, SampledPulse, SpinWave};
pub use medium::{CalibrationAnchors, MediumParams};
pub use solver::{Mode, ProtocolResult, SolverGrid};
