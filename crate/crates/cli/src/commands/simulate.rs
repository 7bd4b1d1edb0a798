use eitmem_core::solver::{completion_duration_us, run_protocol, ProtocolSummary};
use serde::Serialize;

use super::{section, Context, Report};
use crate::config::{non_negative, positive, Loaded};
use crate::error::{at, Result};
use crate::output::RunDir;
use crate::svg::{envelope, figure, Panel, Series};

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    #[serde(flatten)]
    context: &'a Context,
    tau_us: f64,
    write_window_us: (f64, f64),
    read_window_us: (f64, f64),
    result: ProtocolSummary,
    artifacts: Vec<String>,
}

pub fn run(cfg: &Loaded, out: &mut RunDir) -> Result<Report> {
    let sim = section(&cfg.config.simulate, "simulate")?;
    let ctx = Context {
        medium: cfg.medium()?,
        grid: cfg.grid()?,
    };
    let m = &ctx.medium;
    let tau = non_negative("simulate.tau_us", sim.tau_us)?;
    let e = cfg.pulse("simulate.signal", &sim.signal)?;
    let write = cfg.control(
        "simulate.write_control",
        &sim.write_control,
        e.t_start(),
        e.t_end(),
        e.len(),
    )?;

    let read_start = e.t_end() + tau;
    let read = if sim.read_control.file.is_some() {
        if sim.read_duration_us.is_some() {
            return Err(crate::error::CliError::config(
                "simulate.read_duration_us",
                "only applies to a constant read control",
            ));
        }
        cfg.control(
            "simulate.read_control",
            &sim.read_control,
            read_start,
            read_start,
            2,
        )?
    } else {
        let level = crate::config::Level {
            power_mW: sim.read_control.power_mW,
            rabi_rad_per_us: sim.read_control.rabi_rad_per_us,
        };
        let rabi = cfg.level("simulate.read_control", &level)?;
        let duration = match sim.read_duration_us {
            Some(d) => positive("simulate.read_duration_us", d)?,
            None => completion_duration_us(m, rabi).map_err(at("simulate.read_control"))?,
        };
        let n = ctx.grid.samples_for(m, duration, rabi);
        cfg.control(
            "simulate.read_control",
            &sim.read_control,
            read_start,
            read_start + duration,
            n,
        )?
    };

    let r = run_protocol(&e, &write, &read, tau, m, &ctx.grid).map_err(at("simulate"))?;
    let mut report = Report::default();
    if !r.retrieval_complete() {
        report.warnings.push(format!(
            "retrieval incomplete: {:.3e} of the input is still stored after the read window",
            r.residual_fraction
        ));
    }

    let extra = format!("{} tau_us={tau}", ctx.tuple());
    out.pulse("input.csv", &e, &extra)?;
    out.pulse("write_control.csv", &write, &extra)?;
    out.pulse("leak.csv", &r.leak, &extra)?;
    out.pulse("read_control.csv", &read, &extra)?;
    out.pulse("retrieved.csv", &r.retrieved, &extra)?;
    out.spin_wave("spin_after_write.csv", &r.spin_after_write, &extra)?;
    out.spin_wave("spin_after_storage.csv", &r.spin_after_storage, &extra)?;
    out.spin_wave("spin_after_retrieval.csv", &r.spin_after_retrieval, &extra)?;

    let scale = e.max_abs();
    let c_scale = write.max_abs().max(read.max_abs());
    let writing = Panel::new("writing", "t (us)", "normalized amplitude")
        .with(Series::new("input", envelope(&e, scale)))
        .with(Series::new("leak", envelope(&r.leak, scale)))
        .with(
            Series::new("control", envelope(&write, c_scale))
                .dashed()
                .color("#555555"),
        );
    let mut retrieval = Panel::new(
        format!("retrieval (eta = {:.4})", r.efficiency),
        "t (us)",
        "normalized amplitude",
    )
    .with(Series::new("retrieved", envelope(&r.retrieved, scale)).color("#2ca02c"))
    .with(
        Series::new("control", envelope(&read, c_scale))
            .dashed()
            .color("#555555"),
    );
    if r.retrieved.energy() > 0.0 {
        // Show the released pulse rather than the whole completion window.
        let (t0, t1) = read.window();
        let end = t0 + 2.0 * (r.retrieved.energy_quantile(0.999) - t0);
        retrieval = retrieval.x_range(t0, end.clamp(t0 + r.retrieved.dt(), t1));
    }
    let spin = |s: &eitmem_core::SpinWave| -> Vec<(f64, f64)> {
        s.positions()
            .zip(s.samples())
            .map(|(z, v)| (z, v.norm()))
            .collect()
    };
    let spins = Panel::new("spin wave", "z / L", "|S|")
        .with(Series::new("after writing", spin(&r.spin_after_write)))
        .with(Series::new("after storage", spin(&r.spin_after_storage)).dashed());
    out.svg("protocol.svg", &figure(&[writing, retrieval, spins], 3))?;

    report.lines.push(format!(
        "efficiency {:.6}  leak {:.6}  stored {:.6}",
        r.efficiency, r.leak_fraction, r.stored_fraction
    ));
    let summary = Summary {
        command: "simulate",
        context: &ctx,
        tau_us: tau,
        write_window_us: e.window(),
        read_window_us: read.window(),
        result: r.summary(),
        artifacts: out.artifacts().to_vec(),
    };
    out.json("summary.json", &summary)?;
    Ok(report)
}
