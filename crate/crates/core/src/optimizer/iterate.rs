use crate::error::{invalid, Error, Result};
use crate::fields::SampledPulse;
use crate::medium::MediumParams;
use crate::solver::{run_protocol, SolverGrid};

use super::{IterationRecord, OptimizationTrace};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 20;

/// Retrieved energy below this fraction of the input stops the iteration.
const STALL_FLOOR: f64 = 1e-6;

/// Time-reversed writing control placed `tau_us` after writing ends.
pub fn read_control_for(omega_write: &SampledPulse, tau_us: f64) -> SampledPulse {
    omega_write
        .time_reverse()
        .shifted_to(omega_write.t_end() + tau_us)
}

/// Store `e0`, retrieve with the time-reversed writing control, and feed the
/// renormalized time-reversed output back in until successive inputs
/// overlap better than `1 - tol`.
pub fn iterate_signal(
    e0: &SampledPulse,
    omega_write: &SampledPulse,
    tau_us: f64,
    m: &MediumParams,
    grid: &SolverGrid,
    tol: f64,
    max_iter: usize,
) -> Result<OptimizationTrace> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("tol", format!("must lie in (0, 1), got {tol}")));
    }
    let omega_read = read_control_for(omega_write, tau_us);
    let mut input = e0.normalize()?;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    for k in 0..=max_iter {
        let result = run_protocol(&input, omega_write, &omega_read, tau_us, m, grid)?;
        if result.efficiency < STALL_FLOOR {
            return Err(Error::Stalled {
                iteration: k,
                retrieved_fraction: result.efficiency,
            });
        }
        let overlap_with_previous = match iterations.last() {
            Some(prev) => Some(SampledPulse::overlap(&input, &prev.input)?),
            None => None,
        };
        let reversed = input.time_reverse().shifted_to(result.retrieved.t_start());
        let time_reversal_overlap = SampledPulse::overlap(&result.retrieved, &reversed)?;
        let next = result
            .retrieved
            .time_reverse()
            .shifted_to(e0.t_start())
            .normalize()?;
        iterations.push(IterationRecord {
            input,
            retrieved: result.retrieved,
            efficiency: result.efficiency,
            overlap_with_previous,
            time_reversal_overlap,
        });
        if overlap_with_previous.is_some_and(|o| o > 1.0 - tol) {
            converged = true;
            break;
        }
        input = next;
    }
    let last = iterations.last().expect("at least one run");
    Ok(OptimizationTrace {
        converged,
        final_input: last.input.clone(),
        final_efficiency: last.efficiency,
        iterations,
    })
}
