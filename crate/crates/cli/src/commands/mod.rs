pub mod iterate;
pub mod optimize;
pub mod scan;
pub mod simulate;

use eitmem_core::{MediumParams, SolverGrid};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Parameters shared by every artifact of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Context {
    pub medium: MediumParams,
    pub grid: SolverGrid,
}

impl Context {
    pub fn tuple(&self) -> String {
        format!(
            "alpha_L={} gamma_rad_per_s={} gamma_s_rad_per_s={} length_m={} nz={} nt_per_us={} mode={:?}",
            self.medium.alpha_l,
            self.medium.gamma,
            self.medium.gamma_s,
            self.medium.length,
            self.grid.nz,
            self.grid.nt_per_us,
            self.grid.mode
        )
    }
}

pub fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::config(name, "section is required for this command"))
}

/// Human-readable outcome printed after a run.
#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
}
