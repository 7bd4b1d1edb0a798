use eitmem_core::fields::shapes::trailing_gaussian;
use eitmem_core::optimizer::{iterate_signal, OptimizationTrace};
use eitmem_core::SampledPulse;
use rayon::prelude::*;
use serde::Serialize;

use super::{section, Context, Report};
use crate::config::{check_tol, non_negative, positive, Loaded};
use crate::error::{at, Result};
use crate::output::{num, RunDir};
use crate::svg::{envelope, figure, Panel, Series};

#[derive(Serialize)]
struct ControlRun {
    power_mw: Option<f64>,
    rabi_rad_per_us: f64,
    transit_us: f64,
    window_us: (f64, f64),
    converged: bool,
    converged_at: Option<usize>,
    final_efficiency: f64,
    efficiencies: Vec<f64>,
    final_time_reversal_overlap: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    #[serde(flatten)]
    context: &'a Context,
    tau_us: f64,
    tol: f64,
    max_iter: usize,
    runs: Vec<ControlRun>,
    /// Largest difference between final efficiencies across controls.
    final_efficiency_spread: f64,
    artifacts: Vec<String>,
}

pub fn run(cfg: &Loaded, out: &mut RunDir) -> Result<Report> {
    let it = section(&cfg.config.iterate, "iterate")?;
    let ctx = Context {
        medium: cfg.medium()?,
        grid: cfg.grid()?,
    };
    let m = &ctx.medium;
    let grid = &ctx.grid;
    let tau = non_negative("iterate.tau_us", it.tau_us)?;
    check_tol("iterate.tol", it.tol)?;
    if it.controls.is_empty() {
        return Err(crate::error::CliError::config(
            "iterate.controls",
            "need at least one control",
        ));
    }
    let given = match &it.signal {
        Some(spec) => Some(cfg.pulse("iterate.signal", spec)?),
        None => {
            positive("iterate.window_transits", it.window_transits)?;
            positive("iterate.start_sigma_transits", it.start_sigma_transits)?;
            non_negative("iterate.start_lead_transits", it.start_lead_transits)?;
            None
        }
    };

    let mut setups = Vec::new();
    for (k, level) in it.controls.iter().enumerate() {
        let path = format!("iterate.controls[{k}]");
        let rabi = cfg.level(&path, level)?;
        let transit = m.transit_time_us(rabi);
        let (e0, control) = match &given {
            Some(e) => {
                let n = grid.samples_for(m, e.duration(), rabi);
                (
                    e.clone(),
                    SampledPulse::constant(e.t_start(), e.t_end(), n, rabi).map_err(at(&path))?,
                )
            }
            None => {
                let window = it.window_transits * transit;
                let n = grid.samples_for(m, window, rabi);
                let e0 = trailing_gaussian(
                    window,
                    it.start_lead_transits * transit,
                    it.start_sigma_transits * transit,
                    n,
                )
                .map_err(at("iterate"))?;
                (
                    e0,
                    SampledPulse::constant(-window, 0.0, n, rabi).map_err(at(&path))?,
                )
            }
        };
        setups.push((level.power_mW, rabi, transit, e0, control));
    }

    let traces: Vec<OptimizationTrace> = setups
        .par_iter()
        .map(|(_, _, _, e0, control)| {
            iterate_signal(e0, control, tau, m, grid, it.tol, it.max_iter)
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(at("iterate"))?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut report = Report::default();
    let mut eff_panel = Panel::new("efficiency per iteration", "iteration", "efficiency");
    for (k, ((power, rabi, transit, _, control), trace)) in setups.iter().zip(&traces).enumerate() {
        let extra = format!(
            "{} tau_us={tau} control_index={k} rabi_rad_per_us={rabi} transit_us={transit}",
            ctx.tuple()
        );
        out.pulse(&format!("c{k}_control.csv"), control, &extra)?;
        let mut panels = Vec::new();
        for (i, rec) in trace.iterations.iter().enumerate() {
            out.pulse(&format!("c{k}_iter{i}_input.csv"), &rec.input, &extra)?;
            out.pulse(&format!("c{k}_iter{i}_output.csv"), &rec.retrieved, &extra)?;
            rows.push(vec![
                k.to_string(),
                power.map(num).unwrap_or_default(),
                num(*rabi),
                num(m.alpha_l),
                num(m.gamma_s),
                num(tau),
                num(it.window_transits),
                i.to_string(),
                num(rec.efficiency),
                rec.overlap_with_previous.map(num).unwrap_or_default(),
                num(rec.time_reversal_overlap),
            ]);
            let scale = rec.input.max_abs();
            panels.push(
                Panel::new(format!("input {i}"), "t (us)", "normalized amplitude")
                    .with(Series::new("", envelope(&rec.input, scale))),
            );
            panels.push(
                Panel::new(
                    format!("output {i} (eta = {:.4})", rec.efficiency),
                    "t (us)",
                    "normalized amplitude",
                )
                .with(Series::new("", envelope(&rec.retrieved, scale)).color("#2ca02c")),
            );
        }
        out.svg(&format!("c{k}_iterations.svg"), &figure(&panels, 2))?;
        let label = match power {
            Some(p) => format!("{p} mW"),
            None => format!("{rabi:.3} rad/us"),
        };
        let effs = trace.efficiencies();
        eff_panel = eff_panel.with(Series::new(
            label.clone(),
            effs.iter()
                .enumerate()
                .map(|(i, &e)| (i as f64, e))
                .collect(),
        ));
        if !trace.converged {
            report.warnings.push(format!(
                "control {label}: not converged after {} runs",
                trace.iterations.len()
            ));
        }
        report.lines.push(format!(
            "control {label}: efficiency {:.6} after {} runs{}",
            trace.final_efficiency,
            trace.iterations.len(),
            if trace.converged {
                ""
            } else {
                " (not converged)"
            }
        ));
        runs.push(ControlRun {
            power_mw: *power,
            rabi_rad_per_us: *rabi,
            transit_us: *transit,
            window_us: control.window(),
            converged: trace.converged,
            converged_at: trace.converged_at(),
            final_efficiency: trace.final_efficiency,
            efficiencies: effs,
            final_time_reversal_overlap: trace
                .iterations
                .last()
                .map(|r| r.time_reversal_overlap)
                .unwrap_or(0.0),
        });
    }
    out.table(
        "iterations.csv",
        &[
            "control_index",
            "control_power_mW",
            "rabi_rad_per_us",
            "alpha_L",
            "gamma_s_rad_per_s",
            "tau_us",
            "window_transits",
            "iteration",
            "efficiency",
            "overlap_with_previous",
            "time_reversal_overlap",
        ],
        &rows,
    )?;
    out.svg("efficiency.svg", &figure(&[eff_panel], 1))?;

    let finals: Vec<f64> = runs.iter().map(|r| r.final_efficiency).collect();
    let spread = finals.iter().cloned().fold(f64::MIN, f64::max)
        - finals.iter().cloned().fold(f64::MAX, f64::min);
    let summary = Summary {
        command: "iterate",
        context: &ctx,
        tau_us: tau,
        tol: it.tol,
        max_iter: it.max_iter,
        runs,
        final_efficiency_spread: spread,
        artifacts: out.artifacts().to_vec(),
    };
    out.json("summary.json", &summary)?;
    Ok(report)
}
