//! Retarded-frame integration of the lambda-system Maxwell-Bloch equations
//! and the write/store/retrieve protocol.
//!
//! Units: `z / L` in [0, 1], time in us, rates and Rabi frequencies in
//! rad/us. Fields are flux-normalized so that `int |E|^2 dt` and
//! `int |S|^2 dz/L` are directly comparable energies.

pub(crate) mod adiabatic;
pub(crate) mod full;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{SampledPulse, SpinWave};
use crate::medium::MediumParams;

use adiabatic::{Adiabatic, Rk4Work};
use full::Full;

/// Retrieval is declared complete once `int W^2 dt >= COMPLETION_FACTOR * k^2`
/// (with `k^2 = alpha_L gamma / 2`).
pub const COMPLETION_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    #[default]
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverGrid {
    pub nz: usize,
    /// Output samples per microsecond. Adiabatic runs raise this when the
    /// control is strong enough to make the step unstable.
    pub nt_per_us: f64,
    pub mode: Mode,
}

impl Default for SolverGrid {
    fn default() -> Self {
        Self {
            nz: 256,
            nt_per_us: 100.0,
            mode: Mode::Adiabatic,
        }
    }
}

impl SolverGrid {
    pub fn new(nz: usize, nt_per_us: f64, mode: Mode) -> Result<Self> {
        let g = Self {
            nz,
            nt_per_us,
            mode,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nz < 32 {
            return Err(invalid(
                "grid.nz",
                format!("need at least 32 z samples, got {}", self.nz),
            ));
        }
        if !(self.nt_per_us.is_finite() && self.nt_per_us > 0.0) {
            return Err(invalid(
                "grid.nt_per_us",
                format!("must be positive, got {}", self.nt_per_us),
            ));
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Output sample count for a window run under a control bounded by
    /// `rabi_max` (rad/us).
    pub fn samples_for(&self, m: &MediumParams, duration_us: f64, rabi_max: f64) -> usize {
        let per_us = match self.mode {
            Mode::Adiabatic => {
                let rate = m.gamma_s_us() + 2.0 * rabi_max * rabi_max / m.gamma_us();
                self.nt_per_us.max(2.0 * rate)
            }
            Mode::Full => self.nt_per_us,
        };
        ((duration_us * per_us - 1e-9).ceil().max(1.0) as usize) + 1
    }
}

/// Optical polarization snapshots `P(z, t_k)` at the output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationField {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<C64>>,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub output: SampledPulse,
    pub spin: SpinWave,
    pub polarization: Option<PolarizationField>,
    /// The input signal as seen by the solver (resampled onto its grid).
    pub input: SampledPulse,
}

fn window_tol(a: f64, b: f64) -> f64 {
    1e-9 * (b - a).abs().max(1.0)
}

fn real_control(control: &SampledPulse) -> Result<()> {
    let scale = control.max_abs();
    if control
        .samples()
        .iter()
        .any(|s| s.im.abs() > 1e-9 * scale.max(1e-300))
    {
        return Err(invalid("control", "control envelopes must be real"));
    }
    Ok(())
}

fn check_finite(y: &[C64], step: usize, t_us: f64) -> Result<()> {
    if y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalInstability { step, t_us })
    }
}

/// Integrate over the control's window with signal `e_in` entering at
/// z = 0 (zero when `None`) and initial spin wave `s0` (zero when `None`).
fn integrate(
    e_in: Option<&SampledPulse>,
    control: &SampledPulse,
    m: &MediumParams,
    s0: Option<&SpinWave>,
    grid: &SolverGrid,
    record: bool,
) -> Result<Propagation> {
    m.validate()?;
    grid.validate()?;
    real_control(control)?;
    let (t0, t1) = control.window();
    if let Some(e) = e_in {
        let tol = window_tol(t0, t1);
        if (e.t_start() - t0).abs() > tol || (e.t_end() - t1).abs() > tol {
            return Err(invalid(
                "window",
                format!(
                    "signal window [{}, {}] does not match control window [{t0}, {t1}]",
                    e.t_start(),
                    e.t_end()
                ),
            ));
        }
    }
    let nz = grid.nz;
    let rabi_max = control.max_abs();
    let n = grid.samples_for(m, t1 - t0, rabi_max);
    let dt = (t1 - t0) / (n - 1) as f64;
    let time = |k: usize| if k + 1 == n { t1 } else { t0 + dt * k as f64 };
    let om: Vec<f64> = (0..n).map(|k| control.value_at(time(k)).re).collect();
    let e: Vec<C64> = match e_in {
        Some(p) => (0..n).map(|k| p.value_at(time(k))).collect(),
        None => vec![C64::new(0.0, 0.0); n],
    };
    let s_init: Vec<C64> = match s0 {
        Some(s) => s.resample(nz)?.samples().to_vec(),
        None => vec![C64::new(0.0, 0.0); nz],
    };
    let gamma_s = m.gamma_s_us();
    let mut out = vec![C64::new(0.0, 0.0); n];
    let mut pol = record.then(|| PolarizationField {
        times: Vec::with_capacity(n),
        snapshots: Vec::with_capacity(n),
    });

    let s_final = match grid.mode {
        Mode::Adiabatic => {
            let model = Adiabatic::new(m, nz, gamma_s);
            let mut s = s_init;
            let mut work = Rk4Work::new(nz);
            let mut pbuf = vec![C64::new(0.0, 0.0); nz];
            for k in 0..n {
                out[k] = model.field_at_end(&s, e[k], om[k]);
                if let Some(p) = pol.as_mut() {
                    let mut scratch = vec![C64::new(0.0, 0.0); nz];
                    model.polarization(&s, e[k], om[k], &mut scratch, &mut pbuf);
                    p.times.push(time(k));
                    p.snapshots.push(pbuf.clone());
                }
                if k + 1 == n {
                    break;
                }
                let em = (e[k] + e[k + 1]) * 0.5;
                let omm = 0.5 * (om[k] + om[k + 1]);
                model.step(
                    &mut s,
                    [e[k], em, e[k + 1]],
                    [om[k], omm, om[k + 1]],
                    dt,
                    &mut work,
                );
                check_finite(&s, k + 1, time(k + 1))?;
            }
            s
        }
        Mode::Full => {
            let model = Full::new(m, nz, gamma_s);
            let mut y = vec![C64::new(0.0, 0.0); 2 * nz];
            y[nz..].copy_from_slice(&s_init);
            let mut work = Rk4Work::new(2 * nz);
            let sub = ((dt / model.max_step(rabi_max)).ceil() as usize).max(1);
            let h = dt / sub as f64;
            for k in 0..n {
                out[k] = model.field_at_end(&y[..nz], e[k]);
                if let Some(p) = pol.as_mut() {
                    p.times.push(time(k));
                    p.snapshots.push(y[..nz].to_vec());
                }
                if k + 1 == n {
                    break;
                }
                let lerp_e = |f: f64| e[k] * (1.0 - f) + e[k + 1] * f;
                let lerp_o = |f: f64| om[k] * (1.0 - f) + om[k + 1] * f;
                for i in 0..sub {
                    let f0 = i as f64 / sub as f64;
                    let f1 = (i + 1) as f64 / sub as f64;
                    let fm = 0.5 * (f0 + f1);
                    model.step(
                        &mut y,
                        [lerp_e(f0), lerp_e(fm), lerp_e(f1)],
                        [lerp_o(f0), lerp_o(fm), lerp_o(f1)],
                        h,
                        &mut work,
                    );
                }
                check_finite(&y, k + 1, time(k + 1))?;
            }
            y[nz..].to_vec()
        }
    };
    check_finite(&out, n - 1, t1)?;
    Ok(Propagation {
        output: SampledPulse::new(t0, t1, out)?,
        spin: SpinWave::from_vec_unchecked(s_final),
        polarization: pol,
        input: SampledPulse::new(t0, t1, e)?,
    })
}

/// Propagate `e_in` through the medium under `control` (rad/us), starting
/// from spin wave `s0` (zero when `None`). Returns the field at z = L over the
/// window and the spin wave at the end of the window.
pub fn propagate(
    e_in: &SampledPulse,
    control: &SampledPulse,
    m: &MediumParams,
    s0: Option<&SpinWave>,
    grid: &SolverGrid,
) -> Result<(SampledPulse, SpinWave)> {
    let p = integrate(Some(e_in), control, m, s0, grid, false)?;
    Ok((p.output, p.spin))
}

/// [`propagate`] that also keeps `P(z, t)` at every output time.
pub fn propagate_recording(
    e_in: &SampledPulse,
    control: &SampledPulse,
    m: &MediumParams,
    s0: Option<&SpinWave>,
    grid: &SolverGrid,
) -> Result<Propagation> {
    integrate(Some(e_in), control, m, s0, grid, true)
}

/// Read out spin wave `s` with `control`; no signal enters the medium.
pub fn retrieve(
    s: &SpinWave,
    control: &SampledPulse,
    m: &MediumParams,
    grid: &SolverGrid,
) -> Result<SampledPulse> {
    if control.max_abs() == 0.0 {
        return Err(invalid("control", "retrieval control is zero everywhere"));
    }
    Ok(integrate(None, control, m, Some(s), grid, false)?.output)
}

/// Like [`retrieve`] but also returns the spin wave left behind.
pub fn retrieve_with_residual(
    s: &SpinWave,
    control: &SampledPulse,
    m: &MediumParams,
    grid: &SolverGrid,
) -> Result<(SampledPulse, SpinWave)> {
    if control.max_abs() == 0.0 {
        return Err(invalid("control", "retrieval control is zero everywhere"));
    }
    let p = integrate(None, control, m, Some(s), grid, false)?;
    Ok((p.output, p.spin))
}

/// Duration (us) a constant control needs for retrieval to run to completion.
pub fn completion_duration_us(m: &MediumParams, rabi_us: f64) -> Result<f64> {
    if !(rabi_us.is_finite() && rabi_us > 0.0) {
        return Err(invalid("rabi", "completion needs a positive control"));
    }
    Ok(COMPLETION_FACTOR * m.kappa_us().powi(2) / (rabi_us * rabi_us))
}

/// Constant control of strength `rabi_us` starting at `t_start` and long
/// enough for retrieval to run to completion.
pub fn constant_read_control(
    m: &MediumParams,
    rabi_us: f64,
    t_start: f64,
    grid: &SolverGrid,
) -> Result<SampledPulse> {
    let duration = completion_duration_us(m, rabi_us)?;
    let n = grid.samples_for(m, duration, rabi_us);
    SampledPulse::constant(t_start, t_start + duration, n, rabi_us)
}

/// Outputs of one write/store/retrieve run.
#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub leak: SampledPulse,
    pub spin_after_write: SpinWave,
    pub spin_after_storage: SpinWave,
    pub retrieved: SampledPulse,
    pub spin_after_retrieval: SpinWave,
    pub input_energy: f64,
    pub efficiency: f64,
    pub leak_fraction: f64,
    pub stored_fraction: f64,
    /// Spin-wave energy left after the read window, relative to the input.
    pub residual_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub input_energy: f64,
    pub efficiency: f64,
    pub leak_fraction: f64,
    pub stored_fraction: f64,
    pub stored_after_storage_fraction: f64,
    pub residual_fraction: f64,
    pub retrieval_complete: bool,
}

impl ProtocolResult {
    /// Retrieval counts as complete when less than 1e-3 of the stored
    /// excitation remains.
    pub fn retrieval_complete(&self) -> bool {
        let stored = self.spin_after_storage.energy();
        stored == 0.0 || self.spin_after_retrieval.energy() < 1e-3 * stored
    }

    pub fn summary(&self) -> ProtocolSummary {
        let frac = |x: f64| {
            if self.input_energy > 0.0 {
                x / self.input_energy
            } else {
                0.0
            }
        };
        ProtocolSummary {
            input_energy: self.input_energy,
            efficiency: self.efficiency,
            leak_fraction: self.leak_fraction,
            stored_fraction: self.stored_fraction,
            stored_after_storage_fraction: frac(self.spin_after_storage.energy()),
            residual_fraction: self.residual_fraction,
            retrieval_complete: self.retrieval_complete(),
        }
    }
}

/// Run writing over `e_in`'s window (which `omega_write` must share),
/// storage for `tau_us` with fields off, then retrieval under `omega_read`,
/// whose window must start `tau_us` after writing ends.
pub fn run_protocol(
    e_in: &SampledPulse,
    omega_write: &SampledPulse,
    omega_read: &SampledPulse,
    tau_us: f64,
    m: &MediumParams,
    grid: &SolverGrid,
) -> Result<ProtocolResult> {
    if !(tau_us.is_finite() && tau_us >= 0.0) {
        return Err(invalid(
            "tau",
            format!("storage time must be non-negative, got {tau_us}"),
        ));
    }
    let write = integrate(Some(e_in), omega_write, m, None, grid, false)?;
    let expected = e_in.t_end() + tau_us;
    if (omega_read.t_start() - expected).abs() > window_tol(e_in.t_start(), omega_read.t_end()) {
        return Err(invalid(
            "omega_read",
            format!(
                "read window starts at {} but writing ends at {} and tau = {tau_us}",
                omega_read.t_start(),
                e_in.t_end()
            ),
        ));
    }
    let decay = (-m.gamma_s_us() * tau_us).exp();
    let stored = write.spin.scaled(C64::new(decay, 0.0));
    let read = integrate(None, omega_read, m, Some(&stored), grid, false)?;

    let input_energy = write.input.energy();
    let frac = |x: f64| {
        if input_energy > 0.0 {
            x / input_energy
        } else {
            0.0
        }
    };
    Ok(ProtocolResult {
        efficiency: frac(read.output.energy()),
        leak_fraction: frac(write.output.energy()),
        stored_fraction: frac(write.spin.energy()),
        residual_fraction: frac(read.spin.energy()),
        input_energy,
        leak: write.output,
        spin_after_write: write.spin,
        spin_after_storage: stored,
        retrieved: read.output,
        spin_after_retrieval: read.spin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(SolverGrid::new(16, 100.0, Mode::Adiabatic).is_err());
        assert!(SolverGrid::new(64, 0.0, Mode::Adiabatic).is_err());
        assert!(SolverGrid::new(64, 10.0, Mode::Full).is_ok());
    }

    #[test]
    fn strong_control_refines_adiabatic_steps() {
        let m = MediumParams::rb_cell(24.0).unwrap();
        let g = SolverGrid::default();
        assert_eq!(g.samples_for(&m, 10.0, 1.0), 1001);
        assert!(g.samples_for(&m, 10.0, 400.0) > 3000);
    }

    #[test]
    fn mismatched_windows_rejected() {
        let m = MediumParams::rb_cell(6.0).unwrap();
        let e = SampledPulse::constant(-10.0, 0.0, 101, 1.0).unwrap();
        let c = SampledPulse::constant(-9.0, 0.0, 101, 30.0).unwrap();
        assert!(matches!(
            propagate(&e, &c, &m, None, &SolverGrid::default()),
            Err(Error::InvalidParameter { name: "window", .. })
        ));
    }

    #[test]
    fn complex_control_rejected() {
        let m = MediumParams::rb_cell(6.0).unwrap();
        let e = SampledPulse::constant(0.0, 1.0, 11, 1.0).unwrap();
        let c = SampledPulse::from_fn(0.0, 1.0, 11, |_| C64::new(1.0, 1.0)).unwrap();
        assert!(propagate(&e, &c, &m, None, &SolverGrid::default()).is_err());
    }
}
