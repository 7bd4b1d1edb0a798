use eitmem_core::medium::storage_decay_factor;
use eitmem_core::optimizer::{
    efficiency_vs_depth_scan, max_efficiency_curve, ScanOptions, ScanPoint,
};
use serde::Serialize;

use super::{section, Context, Report};
use crate::config::{check_tol, non_negative, positive, Loaded};
use crate::error::{at, CliError, Result};
use crate::output::{num, RunDir};
use crate::svg::{figure, Panel, Series};

#[derive(Serialize)]
struct Peak {
    control_power_mw: f64,
    alpha_l: f64,
    efficiency: f64,
    interior: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    #[serde(flatten)]
    context: &'a Context,
    tau_us: f64,
    storage_decay_factor: f64,
    options: &'a ScanOptions,
    no_decay: Vec<(f64, f64)>,
    peaks: Vec<Peak>,
    failed_points: usize,
    artifacts: Vec<String>,
}

/// Largest finite efficiency on one power's curve, in scan order.
fn peak_of(points: &[&ScanPoint]) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.efficiency.map(|e| (i, e)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn run(cfg: &Loaded, out: &mut RunDir) -> Result<Report> {
    let sc = section(&cfg.config.scan, "scan")?;
    let ctx = Context {
        medium: cfg.medium()?,
        grid: cfg.grid()?,
    };
    let m = &ctx.medium;
    let tau = non_negative("scan.tau_us", sc.tau_us)?;
    check_tol("scan.tol", sc.tol)?;
    if sc.control_powers_mW.is_empty() {
        return Err(CliError::config(
            "scan.control_powers_mW",
            "need at least one power",
        ));
    }
    if sc.alpha_L.is_empty() {
        return Err(CliError::config("scan.alpha_L", "need at least one depth"));
    }
    for (k, &a) in sc.alpha_L.iter().enumerate() {
        positive(&format!("scan.alpha_L[{k}]"), a)?;
    }
    for (k, &p) in sc.control_powers_mW.iter().enumerate() {
        positive(&format!("scan.control_powers_mW[{k}]"), p)?;
    }
    let opts = ScanOptions {
        anchors: cfg.anchors()?,
        n_transits: positive("scan.n_transits", sc.n_transits)?,
        samples_per_transit: positive("scan.samples_per_transit", sc.samples_per_transit)?,
        tol: sc.tol,
        max_iter: sc.max_iter,
        start_lead_transits: non_negative("scan.start_lead_transits", sc.start_lead_transits)?,
        start_sigma_transits: positive("scan.start_sigma_transits", sc.start_sigma_transits)?,
    };

    let decay = storage_decay_factor(m, tau * 1e-6).map_err(at("scan.tau_us"))?;
    let no_decay = max_efficiency_curve(&sc.alpha_L, m, &ctx.grid).map_err(at("scan"))?;
    let points = efficiency_vs_depth_scan(
        &sc.control_powers_mW,
        &sc.alpha_L,
        m.gamma_s,
        tau,
        m,
        &ctx.grid,
        &opts,
    )
    .map_err(at("scan"))?;

    let mut report = Report::default();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                num(p.control_power_mw),
                num(p.alpha_l),
                num(p.gamma_s_rad_per_s),
                num(p.tau_us),
                num(p.rabi_rad_per_us),
                num(p.window_us),
                num(opts.n_transits),
                num(opts.samples_per_transit),
                ctx.grid.nz.to_string(),
                p.efficiency.map(num).unwrap_or_default(),
                p.iterations.to_string(),
                p.converged.to_string(),
                p.error
                    .clone()
                    .unwrap_or_default()
                    .replace([',', '\n'], ";"),
            ]
        })
        .collect();
    out.table(
        "scan.csv",
        &[
            "control_power_mW",
            "alpha_L",
            "gamma_s_rad_per_s",
            "tau_us",
            "rabi_rad_per_us",
            "window_us",
            "n_transits",
            "samples_per_transit",
            "nz",
            "efficiency",
            "iterations",
            "converged",
            "error",
        ],
        &rows,
    )?;
    let curve_rows: Vec<Vec<String>> = no_decay
        .iter()
        .map(|&(a, e)| vec![num(a), num(e), num(e * decay), num(m.gamma_s), num(tau)])
        .collect();
    out.table(
        "curves.csv",
        &[
            "alpha_L",
            "eta_no_decay",
            "eta_storage_decay",
            "gamma_s_rad_per_s",
            "tau_us",
        ],
        &curve_rows,
    )?;

    let mut panel = Panel::new("efficiency vs optical depth", "alpha_L", "efficiency")
        .y_range(0.0, 1.0)
        .with(
            Series::new("no decay", no_decay.clone())
                .width(1.0)
                .color("#000000"),
        )
        .with(
            Series::new(
                "storage decay",
                no_decay.iter().map(|&(a, e)| (a, e * decay)).collect(),
            )
            .width(3.0)
            .color("#000000"),
        );
    let mut peaks = Vec::new();
    for &power in &sc.control_powers_mW {
        let curve: Vec<&ScanPoint> = points
            .iter()
            .filter(|p| p.control_power_mw == power)
            .collect();
        let pts: Vec<(f64, f64)> = curve
            .iter()
            .map(|p| (p.alpha_l, p.efficiency.unwrap_or(f64::NAN)))
            .collect();
        panel = panel.with(Series::new(format!("{power} mW"), pts).dashed());
        if let Some((i, e)) = peak_of(&curve) {
            let interior = i > 0 && i + 1 < curve.len();
            report.lines.push(format!(
                "{power} mW: peak efficiency {e:.5} at alpha_L {}{}",
                curve[i].alpha_l,
                if interior {
                    ""
                } else {
                    " (at the edge of the scan)"
                }
            ));
            peaks.push(Peak {
                control_power_mw: power,
                alpha_l: curve[i].alpha_l,
                efficiency: e,
                interior,
            });
        }
    }
    out.svg("scan.svg", &figure(&[panel], 1))?;

    let failed = points.iter().filter(|p| p.error.is_some()).count();
    for p in points.iter().filter(|p| p.error.is_some()) {
        report.warnings.push(format!(
            "{} mW, alpha_L {}: {}",
            p.control_power_mw,
            p.alpha_l,
            p.error.as_deref().unwrap_or_default()
        ));
    }
    let summary = Summary {
        command: "scan",
        context: &ctx,
        tau_us: tau,
        storage_decay_factor: decay,
        options: &opts,
        no_decay,
        peaks,
        failed_points: failed,
        artifacts: out.artifacts().to_vec(),
    };
    out.json("summary.json", &summary)?;
    Ok(report)
}
