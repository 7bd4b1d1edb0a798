//! Optimization protocols: time-reversal iteration of the input signal,
//! the optimal spin-wave eigenproblem, adjoint synthesis of writing controls
//! and optical-depth scans.

mod control;
mod eigen;
mod iterate;
mod scan;

use serde::{Deserialize, Serialize};

use crate::fields::SampledPulse;

pub use control::{
    optimize_control, verify_control, ControlObjective, ControlOptions, ControlOutcome,
    ControlVerification, StopReason,
};
pub use eigen::{
    max_efficiency_curve, optimal_spin_wave, optimal_spin_wave_with, OptimalMode, SpinWaveOptions,
};
pub use iterate::{iterate_signal, read_control_for, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use scan::{efficiency_vs_depth_scan, ScanOptions, ScanPoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub input: SampledPulse,
    pub retrieved: SampledPulse,
    pub efficiency: f64,
    /// Overlap of this input with the previous one; absent for the first run.
    pub overlap_with_previous: Option<f64>,
    /// Overlap of the retrieved pulse with the time-reversed input.
    pub time_reversal_overlap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub final_input: SampledPulse,
    pub final_efficiency: f64,
}

impl OptimizationTrace {
    /// Index of the iteration at which the overlap criterion was met.
    pub fn converged_at(&self) -> Option<usize> {
        self.converged.then(|| self.iterations.len() - 1)
    }

    pub fn efficiencies(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.efficiency).collect()
    }
}
