use eitmem_core::optimizer::{optimize_control, verify_control, ControlOptions, StopReason};
use eitmem_core::{SampledPulse, SpinWave};
use rayon::prelude::*;
use serde::Serialize;

use super::{section, Context, Report};
use crate::config::{non_negative, positive, Loaded};
use crate::error::{at, CliError, Result};
use crate::output::{num, RunDir};
use crate::svg::{envelope, figure, Panel, Series};

#[derive(Serialize)]
struct SignalRun {
    label: String,
    window_us: (f64, f64),
    achieved_eta: f64,
    initial_eta: f64,
    target_eta: f64,
    not_at_optimum: bool,
    iterations: usize,
    stop: StopReason,
    flat_efficiency: f64,
    reversed_efficiency: f64,
    reversal_overlap: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    #[serde(flatten)]
    context: &'a Context,
    tau_us: f64,
    options: ControlOptions,
    runs: Vec<SignalRun>,
    /// Smallest pairwise overlap of flat-control outputs across signals.
    min_flat_output_overlap: Option<f64>,
    /// Smallest pairwise overlap of the stored spin waves.
    min_spin_wave_overlap: Option<f64>,
    artifacts: Vec<String>,
}

fn min_pairwise<T>(
    items: &[T],
    overlap: impl Fn(&T, &T) -> eitmem_core::Result<f64>,
) -> eitmem_core::Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let o = overlap(&items[i], &items[j])?;
            best = Some(best.map_or(o, |b| b.min(o)));
        }
    }
    Ok(best)
}

pub fn run(cfg: &Loaded, out: &mut RunDir) -> Result<Report> {
    let oc = section(&cfg.config.optimize_control, "optimize_control")?;
    let ctx = Context {
        medium: cfg.medium()?,
        grid: cfg.grid()?,
    };
    let m = &ctx.medium;
    let grid = &ctx.grid;
    let tau = non_negative("optimize_control.tau_us", oc.tau_us)?;
    if oc.signals.is_empty() {
        return Err(CliError::config(
            "optimize_control.signals",
            "need at least one signal",
        ));
    }
    if oc.max_iter == 0 {
        return Err(CliError::config(
            "optimize_control.max_iter",
            "must be positive",
        ));
    }
    if oc.patience == 0 {
        return Err(CliError::config(
            "optimize_control.patience",
            "must be positive",
        ));
    }
    non_negative("optimize_control.min_rel_gain", oc.min_rel_gain)?;
    non_negative("optimize_control.target_tol", oc.target_tol)?;
    if let Some(t) = oc.target_eta {
        positive("optimize_control.target_eta", t)?;
    }
    let max_rabi = cfg.level("optimize_control.max_control", &oc.max_control)?;
    let read_rabi = match &oc.read_control {
        Some(level) => cfg.level("optimize_control.read_control", level)?,
        None => max_rabi,
    };
    let opts = ControlOptions {
        max_rabi,
        read_rabi: Some(read_rabi),
        max_iter: oc.max_iter,
        patience: oc.patience,
        min_rel_gain: oc.min_rel_gain,
        target_eta: oc.target_eta,
        target_tol: oc.target_tol,
    };

    let mut inputs = Vec::new();
    for (k, spec) in oc.signals.iter().enumerate() {
        let e = cfg.pulse(&format!("optimize_control.signals[{k}]"), spec)?;
        if e.energy() == 0.0 {
            return Err(CliError::config(
                format!("optimize_control.signals[{k}]"),
                "signal is zero",
            ));
        }
        inputs.push((format!("{k}_{}", Loaded::pulse_label(spec, k)), e));
    }

    let results = inputs
        .par_iter()
        .map(|(_, e)| {
            let outcome = optimize_control(e, m, tau, grid, &opts)?;
            let check = verify_control(e, &outcome.omega_write, m, tau, grid, read_rabi)?;
            Ok((outcome, check))
        })
        .collect::<eitmem_core::Result<Vec<_>>>()
        .map_err(at("optimize_control"))?;

    let mut report = Report::default();
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut panels = Vec::new();
    for ((label, e), (outcome, check)) in inputs.iter().zip(&results) {
        let extra = format!(
            "{} tau_us={tau} signal={label} max_rabi_rad_per_us={max_rabi} read_rabi_rad_per_us={read_rabi}",
            ctx.tuple()
        );
        out.pulse(&format!("{label}_input.csv"), e, &extra)?;
        out.pulse(
            &format!("{label}_control.csv"),
            &outcome.omega_write,
            &extra,
        )?;
        out.pulse(
            &format!("{label}_flat_output.csv"),
            &check.flat_output,
            &extra,
        )?;
        out.pulse(
            &format!("{label}_reversed_output.csv"),
            &check.reversed_output,
            &extra,
        )?;
        out.spin_wave(&format!("{label}_spin_wave.csv"), &check.stored, &extra)?;
        if outcome.not_at_optimum {
            report.warnings.push(format!(
                "{label}: efficiency {:.4} is more than {} below the target {:.4}",
                outcome.achieved_eta, oc.target_tol, outcome.target_eta
            ));
        }
        report.lines.push(format!(
            "{label}: efficiency {:.6} (start {:.6}, target {:.6}), reversal overlap {:.5}",
            outcome.achieved_eta, outcome.initial_eta, outcome.target_eta, check.reversal_overlap
        ));
        rows.push(vec![
            label.clone(),
            num(m.alpha_l),
            num(m.gamma_s),
            num(tau),
            num(max_rabi),
            num(read_rabi),
            num(outcome.initial_eta),
            num(outcome.achieved_eta),
            num(outcome.target_eta),
            outcome.not_at_optimum.to_string(),
            outcome.iterations.to_string(),
            num(check.flat_efficiency),
            num(check.reversed_efficiency),
            num(check.reversal_overlap),
        ]);
        let scale = e.max_abs();
        panels.push(
            Panel::new(
                format!("{label}: writing"),
                "t (us)",
                "normalized amplitude",
            )
            .with(Series::new("signal", envelope(e, scale)))
            .with(
                Series::new("control", envelope(&outcome.omega_write, max_rabi))
                    .dashed()
                    .color("#555555"),
            ),
        );
        let reversed_in = e.time_reverse().shifted_to(check.reversed_output.t_start());
        let out_scale = check
            .reversed_output
            .max_abs()
            .max(check.flat_output.max_abs());
        // Reversed input attenuated by the retrieval efficiency, for comparison.
        let in_scale = out_scale / check.reversed_efficiency.sqrt().max(1e-12);
        panels.push(
            Panel::new(
                format!("{label}: retrieval (eta = {:.4})", outcome.achieved_eta),
                "t (us)",
                "normalized amplitude",
            )
            .with(
                Series::new(
                    "reversed control",
                    envelope(&check.reversed_output, out_scale),
                )
                .color("#2ca02c"),
            )
            .with(
                Series::new("reversed input", envelope(&reversed_in, in_scale))
                    .dashed()
                    .color("#000000"),
            )
            .with(
                Series::new("flat control", envelope(&check.flat_output, out_scale))
                    .color("#d62728"),
            ),
        );
        runs.push(SignalRun {
            label: label.clone(),
            window_us: e.window(),
            achieved_eta: outcome.achieved_eta,
            initial_eta: outcome.initial_eta,
            target_eta: outcome.target_eta,
            not_at_optimum: outcome.not_at_optimum,
            iterations: outcome.iterations,
            stop: outcome.stop,
            flat_efficiency: check.flat_efficiency,
            reversed_efficiency: check.reversed_efficiency,
            reversal_overlap: check.reversal_overlap,
        });
    }
    out.table(
        "verification.csv",
        &[
            "signal",
            "alpha_L",
            "gamma_s_rad_per_s",
            "tau_us",
            "max_rabi_rad_per_us",
            "read_rabi_rad_per_us",
            "initial_eta",
            "achieved_eta",
            "target_eta",
            "not_at_optimum",
            "iterations",
            "flat_efficiency",
            "reversed_efficiency",
            "reversal_overlap",
        ],
        &rows,
    )?;
    out.svg("controls.svg", &figure(&panels, 2))?;

    let flats: Vec<&SampledPulse> = results.iter().map(|(_, c)| &c.flat_output).collect();
    let spins: Vec<&SpinWave> = results.iter().map(|(_, c)| &c.stored).collect();
    let min_flat =
        min_pairwise(&flats, |a, b| SampledPulse::overlap(a, b)).map_err(at("optimize_control"))?;
    let min_spin =
        min_pairwise(&spins, |a, b| SpinWave::overlap(a, b)).map_err(at("optimize_control"))?;
    if let (Some(f), Some(s)) = (min_flat, min_spin) {
        report.lines.push(format!(
            "min pairwise overlap: flat outputs {f:.5}, stored spin waves {s:.5}"
        ));
    }
    let summary = Summary {
        command: "optimize-control",
        context: &ctx,
        tau_us: tau,
        options: opts,
        runs,
        min_flat_output_overlap: min_flat,
        min_spin_wave_overlap: min_spin,
        artifacts: out.artifacts().to_vec(),
    };
    out.json("summary.json", &summary)?;
    Ok(report)
}
