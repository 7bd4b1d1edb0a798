use std::path::{Path, PathBuf};

use eitmem_core::medium::{
    calibrate, DensityTable, DEFAULT_GAMMA, DEFAULT_GAMMA_S, DEFAULT_LENGTH,
};
use eitmem_core::optimizer::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use eitmem_core::{CalibrationAnchors, MediumParams, SampledPulse, Shape, SolverGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{at, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub medium: MediumConfig,
    #[serde(default)]
    pub grid: SolverGrid,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub iterate: Option<IterateConfig>,
    #[serde(default)]
    pub optimize_control: Option<OptimizeConfig>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

/// Either `alpha_L` directly or a cell temperature mapped through the
/// calibration anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MediumConfig {
    #[serde(default)]
    pub alpha_L: Option<f64>,
    #[serde(default)]
    pub temperature_C: Option<f64>,
    #[serde(default)]
    pub gamma_rad_per_s: Option<f64>,
    #[serde(default)]
    pub gamma_s_rad_per_s: Option<f64>,
    #[serde(default)]
    pub length_m: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// (temperature in C, alpha_L)
    #[serde(default)]
    pub anchor_alpha_l: Option<(f64, f64)>,
    /// (control power in mW, Rabi frequency in rad/s)
    #[serde(default)]
    pub anchor_rabi: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    Gaussian,
    RoundedStep,
    SincSegment,
    DescendingRamp,
    Zero,
}

/// A signal pulse: a built-in shape on `[-duration_us, 0]` or a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    #[serde(default)]
    pub shape: Option<ShapeName>,
    #[serde(default)]
    pub duration_us: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

/// Control strength as a lab power or a Rabi frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct Level {
    #[serde(default)]
    pub power_mW: Option<f64>,
    #[serde(default)]
    pub rabi_rad_per_us: Option<f64>,
}

/// A control field: constant at a [`Level`] or loaded from a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ControlSpec {
    #[serde(default)]
    pub power_mW: Option<f64>,
    #[serde(default)]
    pub rabi_rad_per_us: Option<f64>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub signal: PulseSpec,
    pub write_control: ControlSpec,
    pub read_control: ControlSpec,
    #[serde(default)]
    pub tau_us: f64,
    /// Read window length for a constant read control; defaults to the
    /// completion duration.
    #[serde(default)]
    pub read_duration_us: Option<f64>,
}

fn default_window_transits() -> f64 {
    4.0
}
fn default_lead() -> f64 {
    0.5
}
fn default_sigma() -> f64 {
    0.25
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateConfig {
    pub controls: Vec<Level>,
    #[serde(default)]
    pub tau_us: f64,
    #[serde(default = "default_window_transits")]
    pub window_transits: f64,
    #[serde(default = "default_lead")]
    pub start_lead_transits: f64,
    #[serde(default = "default_sigma")]
    pub start_sigma_transits: f64,
    /// Starting input; replaces the built-in trailing Gaussian and fixes
    /// the writing window.
    #[serde(default)]
    pub signal: Option<PulseSpec>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_opt_iter() -> usize {
    400
}
fn default_patience() -> usize {
    20
}
fn default_min_gain() -> f64 {
    1e-4
}
fn default_target_tol() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub signals: Vec<PulseSpec>,
    #[serde(default)]
    pub tau_us: f64,
    pub max_control: Level,
    #[serde(default)]
    pub read_control: Option<Level>,
    #[serde(default = "default_opt_iter")]
    pub max_iter: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_min_gain")]
    pub min_rel_gain: f64,
    #[serde(default)]
    pub target_eta: Option<f64>,
    #[serde(default = "default_target_tol")]
    pub target_tol: f64,
}

fn default_scan_transits() -> f64 {
    8.0
}
fn default_samples_per_transit() -> f64 {
    400.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ScanConfig {
    pub control_powers_mW: Vec<f64>,
    pub alpha_L: Vec<f64>,
    #[serde(default)]
    pub tau_us: f64,
    #[serde(default = "default_scan_transits")]
    pub n_transits: f64,
    #[serde(default = "default_samples_per_transit")]
    pub samples_per_transit: f64,
    #[serde(default = "default_lead")]
    pub start_lead_transits: f64,
    #[serde(default = "default_sigma")]
    pub start_sigma_transits: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::config(
            path.display().to_string(),
            format!("cannot read config: {e}"),
        )
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        CliError::config(
            if field == "." { "<root>".into() } else { field },
            e.inner().to_string(),
        )
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let hash = config_hash(&config);
    Ok(Loaded {
        config,
        base_dir,
        hash,
    })
}

/// SHA-256 of the canonical JSON form, ignoring where output is written.
pub fn config_hash(config: &RunConfig) -> String {
    let mut canonical = config.clone();
    canonical.output_dir = None;
    canonical.run_id = None;
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub(crate) fn positive(path: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(path, format!("must be positive, got {v}")))
    }
}

pub(crate) fn non_negative(path: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(
            path,
            format!("must be non-negative, got {v}"),
        ))
    }
}

impl Loaded {
    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir.join(file)
        }
    }

    pub fn anchors(&self) -> Result<CalibrationAnchors> {
        let mut anchors = CalibrationAnchors::default();
        let c = &self.config.calibration;
        if let Some((t, od)) = c.anchor_alpha_l {
            positive("calibration.anchor_alpha_l[1]", od)?;
            let table = DensityTable::rubidium(t);
            let (lo, hi) = table.range();
            if !(t >= lo && t <= hi) {
                return Err(CliError::config(
                    "calibration.anchor_alpha_l[0]",
                    format!("temperature {t} C outside the density table [{lo}, {hi}]"),
                ));
            }
            anchors.anchor_alpha_l = (t, od);
            anchors.density_vs_temperature = table;
        }
        if let Some((p, rabi)) = c.anchor_rabi {
            positive("calibration.anchor_rabi[0]", p)?;
            positive("calibration.anchor_rabi[1]", rabi)?;
            anchors.anchor_rabi = (p, rabi);
        }
        Ok(anchors)
    }

    pub fn medium(&self) -> Result<MediumParams> {
        let c = &self.config.medium;
        let alpha_l = match (c.alpha_L, c.temperature_C) {
            (Some(a), None) => non_negative("medium.alpha_L", a)?,
            (None, Some(t)) => {
                calibrate(t, 0.0, &self.anchors()?)
                    .map_err(at("medium.temperature_C"))?
                    .0
            }
            _ => {
                return Err(CliError::config(
                    "medium",
                    "give exactly one of `alpha_L` and `temperature_C`",
                ))
            }
        };
        MediumParams::new(
            alpha_l,
            c.gamma_rad_per_s.unwrap_or(DEFAULT_GAMMA),
            c.gamma_s_rad_per_s.unwrap_or(DEFAULT_GAMMA_S),
            c.length_m.unwrap_or(DEFAULT_LENGTH),
        )
        .map_err(at("medium"))
    }

    pub fn grid(&self) -> Result<SolverGrid> {
        self.config.grid.validate().map_err(at("grid"))?;
        Ok(self.config.grid)
    }

    /// Rabi frequency in rad/us.
    pub fn level(&self, path: &str, level: &Level) -> Result<f64> {
        match (level.power_mW, level.rabi_rad_per_us) {
            (Some(p), None) => {
                let rabi = self.anchors()?.rabi_for_power(p).map_err(at(path))? * 1e-6;
                positive(&format!("{path}.power_mW"), rabi)
            }
            (None, Some(r)) => positive(&format!("{path}.rabi_rad_per_us"), r),
            _ => Err(CliError::config(
                path,
                "give exactly one of `power_mW` and `rabi_rad_per_us`",
            )),
        }
    }

    pub fn pulse(&self, path: &str, spec: &PulseSpec) -> Result<SampledPulse> {
        match (&spec.file, spec.shape) {
            (Some(file), None) => {
                if spec.duration_us.is_some() || spec.samples.is_some() {
                    return Err(CliError::config(
                        path,
                        "a pulse file fixes its own window and sampling",
                    ));
                }
                let full = self.resolve(file);
                SampledPulse::load_csv(&full)
                    .map_err(|source| CliError::Input { file: full, source })
            }
            (None, Some(shape)) => {
                let duration = positive(
                    &format!("{path}.duration_us"),
                    spec.duration_us.ok_or_else(|| {
                        CliError::config(format!("{path}.duration_us"), "required with `shape`")
                    })?,
                )?;
                let n = match spec.samples {
                    Some(n) if n >= 2 => n,
                    Some(n) => {
                        return Err(CliError::config(
                            format!("{path}.samples"),
                            format!("need at least 2, got {n}"),
                        ))
                    }
                    None => (duration * self.config.grid.nt_per_us).ceil() as usize + 1,
                };
                let pulse = match shape {
                    ShapeName::Zero => SampledPulse::zeros(-duration, 0.0, n),
                    ShapeName::Gaussian => Shape::Gaussian.sample(duration, n),
                    ShapeName::RoundedStep => Shape::RoundedStep.sample(duration, n),
                    ShapeName::SincSegment => Shape::SincSegment.sample(duration, n),
                    ShapeName::DescendingRamp => Shape::DescendingRamp.sample(duration, n),
                };
                pulse.map_err(at(path))
            }
            _ => Err(CliError::config(
                path,
                "give exactly one of `shape` and `file`",
            )),
        }
    }

    /// Label used in artifact file names for a pulse spec.
    pub fn pulse_label(spec: &PulseSpec, index: usize) -> String {
        match (&spec.file, spec.shape) {
            (Some(f), _) => f
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("signal{index}")),
            (None, Some(shape)) => serde_json::to_value(shape)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_else(|| format!("signal{index}")),
            _ => format!("signal{index}"),
        }
    }

    /// Control over `[t0, t1]` (constant) or from file (shifted to start at `t0`).
    pub fn control(
        &self,
        path: &str,
        spec: &ControlSpec,
        t0: f64,
        t1: f64,
        n: usize,
    ) -> Result<SampledPulse> {
        match (
            &spec.file,
            spec.power_mW.is_some() || spec.rabi_rad_per_us.is_some(),
        ) {
            (Some(file), false) => {
                let full = self.resolve(file);
                let pulse = SampledPulse::load_csv(&full)
                    .map_err(|source| CliError::Input { file: full, source })?;
                if pulse.samples().iter().any(|s| s.re < 0.0 || s.im != 0.0) {
                    return Err(CliError::config(
                        format!("{path}.file"),
                        "control envelopes must be real and non-negative",
                    ));
                }
                Ok(pulse.shifted_to(t0))
            }
            (None, true) => {
                let level = Level {
                    power_mW: spec.power_mW,
                    rabi_rad_per_us: spec.rabi_rad_per_us,
                };
                let rabi = self.level(path, &level)?;
                SampledPulse::constant(t0, t1, n, rabi).map_err(at(path))
            }
            _ => Err(CliError::config(
                path,
                "give exactly one of `power_mW`, `rabi_rad_per_us` and `file`",
            )),
        }
    }
}

pub fn check_tol(path: &str, tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(CliError::config(
            path,
            format!("must lie in (0, 1), got {tol}"),
        ))
    }
}
