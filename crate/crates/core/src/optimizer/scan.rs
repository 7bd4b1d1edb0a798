use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::shapes::trailing_gaussian;
use crate::fields::SampledPulse;
use crate::medium::{CalibrationAnchors, MediumParams};
use crate::solver::SolverGrid;

use super::iterate::{iterate_signal, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    pub anchors: CalibrationAnchors,
    /// Writing window length in units of the transit time `L / v_g`.
    pub n_transits: f64,
    /// Time resolution per transit; replaces the grid's `nt_per_us`.
    pub samples_per_transit: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting input: a Gaussian peaking this many transits before the
    /// end of the writing window...
    pub start_lead_transits: f64,
    /// ...with this width in transits.
    pub start_sigma_transits: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            anchors: CalibrationAnchors::default(),
            n_transits: 8.0,
            samples_per_transit: 400.0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            start_lead_transits: 0.5,
            start_sigma_transits: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub control_power_mw: f64,
    pub alpha_l: f64,
    pub gamma_s_rad_per_s: f64,
    pub tau_us: f64,
    pub rabi_rad_per_us: f64,
    pub window_us: f64,
    pub efficiency: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

fn scan_point(
    power: f64,
    alpha_l: f64,
    gamma_s: f64,
    tau_us: f64,
    template: &MediumParams,
    grid: &SolverGrid,
    opts: &ScanOptions,
) -> ScanPoint {
    let mut point = ScanPoint {
        control_power_mw: power,
        alpha_l,
        gamma_s_rad_per_s: gamma_s,
        tau_us,
        rabi_rad_per_us: f64::NAN,
        window_us: f64::NAN,
        efficiency: None,
        iterations: 0,
        converged: false,
        error: None,
    };
    let run = |point: &mut ScanPoint| -> Result<()> {
        let m = MediumParams::new(alpha_l, template.gamma, gamma_s, template.length)?;
        let rabi = opts.anchors.rabi_for_power(power)? * 1e-6;
        if rabi <= 0.0 {
            return Err(invalid("control_power_mW", "scan powers must be positive"));
        }
        let transit = m.transit_time_us(rabi);
        let window = opts.n_transits * transit;
        point.rabi_rad_per_us = rabi;
        point.window_us = window;
        let g = SolverGrid {
            nt_per_us: opts.samples_per_transit / transit,
            ..*grid
        };
        let n = g.samples_for(&m, window, rabi);
        let control = SampledPulse::constant(-window, 0.0, n, rabi)?;
        let e0 = trailing_gaussian(
            window,
            opts.start_lead_transits * transit,
            opts.start_sigma_transits * transit,
            n,
        )?;
        let trace = iterate_signal(&e0, &control, tau_us, &m, &g, opts.tol, opts.max_iter)?;
        point.efficiency = Some(trace.final_efficiency);
        point.iterations = trace.iterations.len();
        point.converged = trace.converged;
        Ok(())
    };
    if let Err(e) = run(&mut point) {
        point.error = Some(e.to_string());
    }
    point
}

/// Converged iterative efficiency for every `(power, alpha_L)` pair with
/// spin decay `gamma_s` (rad/s) active in all three stages. Points run in
/// parallel; the output is ordered power-major. Failures are recorded per
/// point and do not abort the scan.
pub fn efficiency_vs_depth_scan(
    control_powers_mw: &[f64],
    alpha_l_values: &[f64],
    gamma_s: f64,
    tau_us: f64,
    template: &MediumParams,
    grid: &SolverGrid,
    opts: &ScanOptions,
) -> Result<Vec<ScanPoint>> {
    if control_powers_mw.is_empty() || alpha_l_values.is_empty() {
        return Err(invalid(
            "scan",
            "control powers and depths must be nonempty",
        ));
    }
    if !(opts.n_transits > 0.0 && opts.samples_per_transit >= 2.0) {
        return Err(invalid(
            "scan",
            "n_transits must be positive and samples_per_transit at least 2",
        ));
    }
    grid.validate()?;
    let points: Vec<(f64, f64)> = control_powers_mw
        .iter()
        .flat_map(|&p| alpha_l_values.iter().map(move |&a| (p, a)))
        .collect();
    Ok(points
        .par_iter()
        .map(|&(p, a)| scan_point(p, a, gamma_s, tau_us, template, grid, opts))
        .collect())
}
