use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{SampledPulse, SpinWave};
use crate::medium::MediumParams;
use crate::solver::{self, SolverGrid, COMPLETION_FACTOR};

/// Dominant mode of one retrieve/store cycle in the decay-free limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalMode {
    pub alpha_l: f64,
    /// Unit-energy spin wave, real positive at its largest sample.
    pub spin_wave: SpinWave,
    /// Per-cycle energy ratio: the best achievable storage-plus-retrieval
    /// efficiency at this depth.
    pub eta_max: f64,
    /// Fraction of the mode's energy released by forward retrieval alone.
    pub retrieval_efficiency: f64,
    pub cycles: usize,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpinWaveOptions {
    /// Transit time `L / v_g` (us) fixing the constant control used for both
    /// halves of the cycle.
    pub transit_us: f64,
    pub max_cycles: usize,
    /// Relative change of the energy ratio that counts as stable.
    pub rel_tol: f64,
    /// Consecutive stable cycles required.
    pub stable_cycles: usize,
}

impl Default for SpinWaveOptions {
    fn default() -> Self {
        Self {
            transit_us: 1.0,
            max_cycles: 500,
            rel_tol: 1e-6,
            stable_cycles: 3,
        }
    }
}

pub fn optimal_spin_wave(m: &MediumParams, grid: &SolverGrid) -> Result<OptimalMode> {
    optimal_spin_wave_with(m, grid, &SpinWaveOptions::default())
}

/// Power iteration `S -> store(time_reverse(retrieve(S)))` with a constant
/// control during both retrieval and storage. Spin decay is ignored.
pub fn optimal_spin_wave_with(
    m: &MediumParams,
    grid: &SolverGrid,
    opts: &SpinWaveOptions,
) -> Result<OptimalMode> {
    m.validate()?;
    grid.validate()?;
    if m.alpha_l <= 0.0 {
        return Err(invalid(
            "alpha_L",
            "the optimal mode needs a positive optical depth",
        ));
    }
    if opts.transit_us.is_nan() || opts.transit_us <= 0.0 || opts.max_cycles == 0 {
        return Err(invalid(
            "options",
            "transit_us and max_cycles must be positive",
        ));
    }
    let m = (*m).with_gamma_s(0.0);
    let rabi = m.rabi_for_transit_us(opts.transit_us);
    let duration = COMPLETION_FACTOR * opts.transit_us;
    let n = grid.samples_for(&m, duration, rabi);
    let control = SampledPulse::constant(0.0, duration, n, rabi)?;

    let mut s = SpinWave::from_fn(grid.nz, |_| C64::new(1.0, 0.0))?.normalize()?;
    let mut history = Vec::new();
    let mut stable = 0;
    for cycle in 1..=opts.max_cycles {
        let out = solver::retrieve(&s, &control, &m, grid)?;
        let retrieval_efficiency = out.energy() / s.energy();
        let (_, stored) = solver::propagate(&out.time_reverse(), &control, &m, None, grid)?;
        let ratio = stored.energy() / s.energy();
        if ratio.is_nan() || ratio <= 0.0 {
            return Err(Error::Degenerate("power iteration collapsed to zero"));
        }
        if let Some(&prev) = history.last() {
            let change: f64 = (ratio - prev) / ratio;
            stable = if change.abs() < opts.rel_tol {
                stable + 1
            } else {
                0
            };
        }
        history.push(ratio);
        s = stored.normalize()?;
        if stable >= opts.stable_cycles {
            return Ok(OptimalMode {
                alpha_l: m.alpha_l,
                spin_wave: s.phase_fixed(),
                eta_max: ratio,
                retrieval_efficiency,
                cycles: cycle,
                history,
            });
        }
    }
    Err(Error::NotConverged {
        cycles: opts.max_cycles,
        last_ratio: history.last().copied().unwrap_or(0.0),
    })
}

/// `(alpha_L, eta_max)` for each depth, computed in parallel.
pub fn max_efficiency_curve(
    alpha_l_values: &[f64],
    template: &MediumParams,
    grid: &SolverGrid,
) -> Result<Vec<(f64, f64)>> {
    if let Some(bad) = alpha_l_values
        .iter()
        .find(|&&a| !(a > 0.0 && a.is_finite()))
    {
        return Err(invalid(
            "alpha_L",
            format!("all depths must be positive, got {bad}"),
        ));
    }
    alpha_l_values
        .par_iter()
        .map(|&a| {
            let mode = optimal_spin_wave(&(*template).with_alpha_l(a), grid)?;
            Ok((a, mode.eta_max))
        })
        .collect()
}
