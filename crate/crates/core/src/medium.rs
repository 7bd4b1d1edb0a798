//! Physical parameters of the atomic ensemble and the quantities derived
//! from them.
//!
//! Public operations take SI values (rad/s, m, s). The solver works in
//! dimensionless length `z / L` and microseconds; the `*_us` accessors on
//! [`MediumParams`] perform that conversion.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Optical polarization decay rate (HWHM) of the pressure-broadened Rb D1 line, rad/s.
pub const DEFAULT_GAMMA: f64 = TAU * 145.0e6;

/// Spin decay rate for a 500 us amplitude-squared time constant, `1 / (2 gamma_s) = 500 us`.
pub const DEFAULT_GAMMA_S: f64 = 1.0 / (2.0 * 500.0e-6);

/// Vapor cell length, m.
pub const DEFAULT_LENGTH: f64 = 0.075;

const US_PER_S: f64 = 1.0e6;

/// The atomic ensemble seen by the signal field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// Optical depth: unsaturated intensity absorption exponent over the full length.
    #[serde(rename = "alpha_L")]
    pub alpha_l: f64,
    /// Optical polarization decay rate (HWHM), rad/s.
    #[serde(rename = "gamma_rad_per_s")]
    pub gamma: f64,
    /// Spin coherence decay rate, rad/s.
    #[serde(rename = "gamma_s_rad_per_s")]
    pub gamma_s: f64,
    /// Medium length, m.
    #[serde(rename = "length_m")]
    pub length: f64,
    /// Speed of light used for unit conversions, m/s.
    #[serde(default = "default_light_speed")]
    pub light_speed: f64,
}

fn default_light_speed() -> f64 {
    SPEED_OF_LIGHT
}

impl MediumParams {
    pub fn new(alpha_l: f64, gamma: f64, gamma_s: f64, length: f64) -> Result<Self> {
        let m = Self {
            alpha_l,
            gamma,
            gamma_s,
            length,
            light_speed: SPEED_OF_LIGHT,
        };
        m.validate()?;
        Ok(m)
    }

    /// Warm Rb cell at the given optical depth with the default linewidths.
    pub fn rb_cell(alpha_l: f64) -> Result<Self> {
        Self::new(alpha_l, DEFAULT_GAMMA, DEFAULT_GAMMA_S, DEFAULT_LENGTH)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_l.is_finite() && self.alpha_l >= 0.0) {
            return Err(invalid(
                "alpha_L",
                format!("must be finite and >= 0, got {}", self.alpha_l),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid(
                "gamma",
                format!("must be finite and > 0, got {}", self.gamma),
            ));
        }
        if !(self.gamma_s.is_finite() && self.gamma_s >= 0.0) {
            return Err(invalid(
                "gamma_s",
                format!("must be finite and >= 0, got {}", self.gamma_s),
            ));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(invalid(
                "length",
                format!("must be finite and > 0, got {}", self.length),
            ));
        }
        if !(self.light_speed.is_finite() && self.light_speed > 0.0) {
            return Err(invalid(
                "light_speed",
                format!("must be finite and > 0, got {}", self.light_speed),
            ));
        }
        Ok(())
    }

    pub fn with_alpha_l(mut self, alpha_l: f64) -> Self {
        self.alpha_l = alpha_l;
        self
    }

    pub fn with_gamma_s(mut self, gamma_s: f64) -> Self {
        self.gamma_s = gamma_s;
        self
    }

    /// Absorption coefficient per unit length, 1/m.
    pub fn alpha(&self) -> f64 {
        self.alpha_l / self.length
    }

    /// `gamma` in rad/us.
    pub fn gamma_us(&self) -> f64 {
        self.gamma / US_PER_S
    }

    /// `gamma_s` in rad/us.
    pub fn gamma_s_us(&self) -> f64 {
        self.gamma_s / US_PER_S
    }

    /// Coupling in solver units (rad/us, length normalized to the medium):
    /// `kappa^2 = gamma * alpha_L / 2`, so that a field with no control is
    /// attenuated in intensity by `exp(-alpha_L)`.
    pub fn kappa_us(&self) -> f64 {
        (self.gamma_us() * self.alpha_l / 2.0).sqrt()
    }

    /// Time for a slow-light pulse to cross the medium under a constant
    /// control of Rabi frequency `rabi_us` (rad/us), in us.
    pub fn transit_time_us(&self, rabi_us: f64) -> f64 {
        self.kappa_us().powi(2) / (rabi_us * rabi_us)
    }

    /// Constant Rabi frequency (rad/us) whose transit time equals `duration_us`.
    pub fn rabi_for_transit_us(&self, duration_us: f64) -> f64 {
        self.kappa_us() / duration_us.sqrt()
    }
}

/// Collective coupling `g sqrt(N) = sqrt(gamma alpha c / 2)`, in 1/s.
pub fn derive_coupling(m: &MediumParams) -> Result<f64> {
    m.validate()?;
    Ok((m.gamma * m.alpha() * m.light_speed / 2.0).sqrt())
}

/// EIT group velocity `2 |Omega|^2 / (alpha gamma)`, m/s.
pub fn group_velocity(rabi: f64, m: &MediumParams) -> Result<f64> {
    m.validate()?;
    if m.alpha_l == 0.0 {
        return Err(invalid(
            "alpha_L",
            "group velocity is undefined for a transparent medium",
        ));
    }
    Ok(2.0 * rabi * rabi / (m.alpha() * m.gamma))
}

/// Width of the EIT transparency window `sqrt(alpha_L) v_g / L`, rad/s.
pub fn eit_bandwidth(rabi: f64, m: &MediumParams) -> Result<f64> {
    let vg = group_velocity(rabi, m)?;
    Ok(m.alpha_l.sqrt() * vg / m.length)
}

/// Energy retained by a spin wave stored for `tau` seconds: `exp(-2 gamma_s tau)`.
pub fn storage_decay_factor(m: &MediumParams, tau: f64) -> Result<f64> {
    m.validate()?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid(
            "tau",
            format!("storage time must be >= 0, got {tau}"),
        ));
    }
    Ok((-2.0 * m.gamma_s * tau).exp())
}

/// Saturated Rb vapor number density relative to an arbitrary scale,
/// from the liquid-phase vapor-pressure fit (valid above 39.3 C).
fn rb_vapor_density(temperature_c: f64) -> f64 {
    let t = temperature_c + 273.15;
    let log10_p = 15.88253 - 4529.635 / t + 0.00058663 * t - 2.99138 * t.log10();
    10f64.powf(log10_p) / t
}

/// Tabulated vapor density against temperature, normalized to 1 at the
/// reference temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    temperatures_c: Vec<f64>,
    relative_density: Vec<f64>,
}

impl DensityTable {
    pub fn new(temperatures_c: Vec<f64>, relative_density: Vec<f64>) -> Result<Self> {
        if temperatures_c.len() != relative_density.len() || temperatures_c.len() < 2 {
            return Err(invalid(
                "density_vs_temperature",
                "need at least two (T, n) pairs of equal length",
            ));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&temperatures_c) || !increasing(&relative_density) {
            return Err(invalid(
                "density_vs_temperature",
                "table must be strictly increasing",
            ));
        }
        if relative_density[0] <= 0.0 {
            return Err(invalid(
                "density_vs_temperature",
                "densities must be positive",
            ));
        }
        Ok(Self {
            temperatures_c,
            relative_density,
        })
    }

    /// Rb table over 40-80 C in 0.5 C steps, normalized at `reference_c`.
    pub fn rubidium(reference_c: f64) -> Self {
        let norm = rb_vapor_density(reference_c);
        let temperatures_c: Vec<f64> = (0..=80).map(|k| 40.0 + 0.5 * k as f64).collect();
        let relative_density = temperatures_c
            .iter()
            .map(|&t| rb_vapor_density(t) / norm)
            .collect();
        Self {
            temperatures_c,
            relative_density,
        }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.temperatures_c[0], *self.temperatures_c.last().unwrap())
    }

    /// Log-linear interpolation in the table.
    pub fn density_at(&self, temperature_c: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(temperature_c >= lo && temperature_c <= hi) {
            return Err(Error::OutOfRange {
                what: "temperature_C",
                value: temperature_c,
                min: lo,
                max: hi,
            });
        }
        let k = self
            .temperatures_c
            .partition_point(|&t| t <= temperature_c)
            .clamp(1, self.temperatures_c.len() - 1);
        let (t0, t1) = (self.temperatures_c[k - 1], self.temperatures_c[k]);
        let (n0, n1) = (
            self.relative_density[k - 1].ln(),
            self.relative_density[k].ln(),
        );
        let x = (temperature_c - t0) / (t1 - t0);
        Ok((n0 + x * (n1 - n0)).exp())
    }
}

/// Lab-to-model correspondence: a single measured point for the optical
/// depth and for the control Rabi frequency, scaled by vapor density and
/// by the square root of control power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchors {
    /// (temperature in C, optical depth)
    pub anchor_alpha_l: (f64, f64),
    /// (control power in mW, Rabi frequency in rad/s)
    pub anchor_rabi: (f64, f64),
    pub density_vs_temperature: DensityTable,
}

impl Default for CalibrationAnchors {
    fn default() -> Self {
        Self {
            anchor_alpha_l: (60.5, 24.0),
            anchor_rabi: (16.0, TAU * 6.13e6),
            density_vs_temperature: DensityTable::rubidium(60.5),
        }
    }
}

impl CalibrationAnchors {
    /// Rabi frequency (rad/s) for a control power in mW.
    pub fn rabi_for_power(&self, control_power_mw: f64) -> Result<f64> {
        if !(control_power_mw.is_finite() && control_power_mw >= 0.0) {
            return Err(invalid(
                "control_power_mW",
                format!("must be >= 0, got {control_power_mw}"),
            ));
        }
        let (p0, rabi0) = self.anchor_rabi;
        Ok(rabi0 * (control_power_mw / p0).sqrt())
    }

    /// Optical depth at a cell temperature in C.
    pub fn alpha_l_at(&self, temperature_c: f64) -> Result<f64> {
        let (t0, od0) = self.anchor_alpha_l;
        let table = &self.density_vs_temperature;
        Ok(od0 * table.density_at(temperature_c)? / table.density_at(t0)?)
    }
}

/// Map a lab operating point to `(alpha_L, Omega in rad/s)`.
pub fn calibrate(
    temperature_c: f64,
    control_power_mw: f64,
    anchors: &CalibrationAnchors,
) -> Result<(f64, f64)> {
    Ok((
        anchors.alpha_l_at(temperature_c)?,
        anchors.rabi_for_power(control_power_mw)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_cell() -> MediumParams {
        MediumParams::new(24.0, TAU * 145.0e6, 0.0, 0.075).unwrap()
    }

    #[test]
    fn coupling_matches_closed_form_and_identity() {
        let m = paper_cell();
        let g = derive_coupling(&m).unwrap();
        // sqrt(2pi*145e6 * 320 * 299792458 / 2), evaluated by hand.
        assert_relative_eq!(g, 6.6104e9, max_relative = 1e-4);
        assert_relative_eq!(
            g * g * 2.0 * m.length / (m.gamma * m.light_speed),
            24.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn coupling_edge_cases() {
        let m = paper_cell();
        assert_eq!(derive_coupling(&m.with_alpha_l(0.0)).unwrap(), 0.0);
        let g1 = derive_coupling(&m.with_alpha_l(6.0)).unwrap();
        let g4 = derive_coupling(&m.with_alpha_l(24.0)).unwrap();
        assert_relative_eq!(g4, 2.0 * g1, max_relative = 1e-14);
        assert!(derive_coupling(&MediumParams { length: -1.0, ..m }).is_err());
    }

    #[test]
    fn group_velocity_at_anchor() {
        let m = paper_cell();
        let rabi = TAU * 6.13e6;
        let vg = group_velocity(rabi, &m).unwrap();
        assert_relative_eq!(vg, 1.0177e4, max_relative = 1e-3);
        assert_relative_eq!(m.length / vg * 1e6, 7.37, max_relative = 1e-3);
        // Same transit time through the solver-unit route.
        assert_relative_eq!(
            m.transit_time_us(rabi * 1e-6),
            m.length / vg * 1e6,
            max_relative = 1e-12
        );
        assert_eq!(group_velocity(0.0, &m).unwrap(), 0.0);
        let doubled = group_velocity(2f64.sqrt() * rabi, &m).unwrap();
        assert_relative_eq!(doubled, 2.0 * vg, max_relative = 1e-12);
        assert!(group_velocity(rabi, &m.with_alpha_l(0.0)).is_err());
    }

    #[test]
    fn eit_bandwidth_values() {
        let m = paper_cell();
        let rabi = TAU * 6.13e6;
        let bw = eit_bandwidth(rabi, &m).unwrap();
        assert_relative_eq!(bw, 6.648e5, max_relative = 1e-3);
        let vg = group_velocity(rabi, &m).unwrap();
        assert_relative_eq!(bw * m.length / vg, 24f64.sqrt(), max_relative = 1e-14);
        assert_eq!(eit_bandwidth(0.0, &m).unwrap(), 0.0);
        let bw2 = eit_bandwidth(2f64.sqrt() * rabi, &m).unwrap();
        assert_relative_eq!(bw2, 2.0 * bw, max_relative = 1e-12);
    }

    #[test]
    fn decay_factor() {
        let m = MediumParams::rb_cell(24.0).unwrap();
        let f = storage_decay_factor(&m, 100e-6).unwrap();
        assert!((f - 0.82).abs() < 0.005, "{f}");
        assert_relative_eq!(f, (-0.2f64).exp(), max_relative = 1e-12);
        assert_eq!(storage_decay_factor(&m, 0.0).unwrap(), 1.0);
        assert_eq!(
            storage_decay_factor(&m.with_gamma_s(0.0), 1.0).unwrap(),
            1.0
        );
        assert!(storage_decay_factor(&m, -1e-6).is_err());
        let (a, b) = (37e-6, 81e-6);
        assert_relative_eq!(
            storage_decay_factor(&m, a + b).unwrap(),
            storage_decay_factor(&m, a).unwrap() * storage_decay_factor(&m, b).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn calibration_anchor_points() {
        let anchors = CalibrationAnchors::default();
        let (od, rabi) = calibrate(60.5, 16.0, &anchors).unwrap();
        assert_relative_eq!(od, 24.0, max_relative = 1e-12);
        assert_relative_eq!(rabi, TAU * 6.13e6, max_relative = 1e-12);
        let (_, quarter) = calibrate(60.5, 4.0, &anchors).unwrap();
        assert_relative_eq!(quarter, TAU * 3.065e6, max_relative = 1e-12);
        assert_eq!(calibrate(60.5, 0.0, &anchors).unwrap().1, 0.0);
        assert!(calibrate(20.0, 16.0, &anchors).is_err());
        assert!(calibrate(60.5, -1.0, &anchors).is_err());
    }

    #[test]
    fn calibration_spans_lab_range() {
        // The vapor-pressure fit lands near the optical depths quoted for
        // the coldest and hottest cell temperatures.
        let anchors = CalibrationAnchors::default();
        let cold = anchors.alpha_l_at(45.0).unwrap();
        let hot = anchors.alpha_l_at(77.0).unwrap();
        assert!((cold - 6.0).abs() < 0.5, "{cold}");
        assert!((hot - 88.0).abs() < 2.0, "{hot}");
    }

    #[test]
    fn calibration_is_monotone() {
        let anchors = CalibrationAnchors::default();
        let mut last = (0.0, -1.0);
        for k in 0..=160 {
            let t = 40.0 + 0.25 * k as f64;
            let p = 0.25 * k as f64;
            let (od, rabi) = calibrate(t, p, &anchors).unwrap();
            assert!(od > last.0 && rabi > last.1);
            last = (od, rabi);
        }
    }

    #[test]
    fn density_table_rejects_non_monotone() {
        assert!(DensityTable::new(vec![40.0, 50.0], vec![1.0, 0.5]).is_err());
        assert!(DensityTable::new(vec![40.0], vec![1.0]).is_err());
        assert!(DensityTable::new(vec![40.0, 50.0], vec![1.0, 2.0]).is_ok());
    }
}
