//! Writing-control synthesis by projected gradient ascent.
//!
//! The objective is the protocol efficiency with a flat read control run to
//! completion. Retrieval is linear and fixed, so its contribution collapses
//! into a real symmetric form `J = S^H Q S` on the stored spin wave; the
//! gradient with respect to the writing control comes from the discrete
//! adjoint of the RK4 writing stage.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{SampledPulse, SpinWave};
use crate::medium::{storage_decay_factor, MediumParams};
use crate::solver::adiabatic::{Adiabatic, Rk4Work};
use crate::solver::{completion_duration_us, constant_read_control, run_protocol, SolverGrid};

use super::eigen::optimal_spin_wave;
use super::iterate::read_control_for;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Efficiency as a function of the writing-control samples for a fixed input.
#[derive(Debug, Clone)]
pub struct ControlObjective {
    model: Adiabatic,
    t0: f64,
    t1: f64,
    dt: f64,
    e: Vec<C64>,
    input_energy: f64,
    /// Retrieval form, already scaled by the storage decay and `1 / E_in`.
    q: Vec<f64>,
}

impl ControlObjective {
    /// `max_rabi` bounds the controls that will be evaluated and sets the
    /// time step; `read_rabi` is the flat read control.
    pub fn new(
        e_in: &SampledPulse,
        m: &MediumParams,
        tau_us: f64,
        grid: &SolverGrid,
        max_rabi: f64,
        read_rabi: f64,
    ) -> Result<Self> {
        m.validate()?;
        grid.validate()?;
        if !(max_rabi.is_finite() && max_rabi > 0.0) {
            return Err(invalid(
                "max_rabi",
                format!("must be positive, got {max_rabi}"),
            ));
        }
        let nz = grid.nz;
        let model = Adiabatic::new(m, nz, m.gamma_s_us());
        let (t0, t1) = e_in.window();
        let n = grid.samples_for(m, t1 - t0, max_rabi);
        let dt = (t1 - t0) / (n - 1) as f64;
        let e: Vec<C64> = (0..n)
            .map(|k| e_in.value_at(if k + 1 == n { t1 } else { t0 + dt * k as f64 }))
            .collect();
        let input_energy = SampledPulse::new(t0, t1, e.clone())?.energy();
        if input_energy <= 0.0 {
            return Err(Error::Degenerate(
                "control optimization needs a nonzero input",
            ));
        }
        let decay = storage_decay_factor(m, tau_us * 1e-6)?;
        let mut q = retrieval_form(&model, m, grid, read_rabi)?;
        let scale = decay / input_energy;
        q.iter_mut().for_each(|x| *x *= scale);
        Ok(Self {
            model,
            t0,
            t1,
            dt,
            e,
            input_energy,
            q,
        })
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn input_energy(&self) -> f64 {
        self.input_energy
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.e.len() {
            self.t1
        } else {
            self.t0 + self.dt * k as f64
        }
    }

    pub fn to_pulse(&self, omega: &[f64]) -> Result<SampledPulse> {
        SampledPulse::from_real(self.t0, self.t1, omega)
    }

    fn check(&self, omega: &[f64]) -> Result<()> {
        if omega.len() != self.e.len() {
            return Err(invalid(
                "omega",
                format!(
                    "expected {} control samples, got {}",
                    self.e.len(),
                    omega.len()
                ),
            ));
        }
        Ok(())
    }

    /// Writing stage; returns the spin wave at every output time.
    fn store(&self, omega: &[f64]) -> Result<Vec<Vec<C64>>> {
        let nz = self.model.nz;
        let n = self.e.len();
        let mut states = Vec::with_capacity(n);
        let mut s = vec![ZERO; nz];
        let mut work = Rk4Work::new(nz);
        states.push(s.clone());
        for k in 0..n - 1 {
            let em = (self.e[k] + self.e[k + 1]) * 0.5;
            let om = 0.5 * (omega[k] + omega[k + 1]);
            self.model.step(
                &mut s,
                [self.e[k], em, self.e[k + 1]],
                [omega[k], om, omega[k + 1]],
                self.dt,
                &mut work,
            );
            if !s.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NumericalInstability {
                    step: k + 1,
                    t_us: self.time(k + 1),
                });
            }
            states.push(s.clone());
        }
        Ok(states)
    }

    fn q_mul(&self, s: &[C64]) -> Vec<C64> {
        let nz = s.len();
        (0..nz)
            .map(|i| {
                let row = &self.q[i * nz..(i + 1) * nz];
                row.iter().zip(s).map(|(&q, &x)| x * q).sum()
            })
            .collect()
    }

    /// Spin wave stored at the end of writing.
    pub fn stored(&self, omega: &[f64]) -> Result<SpinWave> {
        self.check(omega)?;
        let states = self.store(omega)?;
        SpinWave::new(states.last().expect("nonempty").clone())
    }

    pub fn efficiency(&self, omega: &[f64]) -> Result<f64> {
        self.check(omega)?;
        let states = self.store(omega)?;
        let s = states.last().expect("nonempty");
        let qs = self.q_mul(s);
        Ok(s.iter().zip(&qs).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Efficiency and its gradient with respect to every control sample.
    pub fn efficiency_and_gradient(&self, omega: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(omega)?;
        let states = self.store(omega)?;
        let md = &self.model;
        let nz = md.nz;
        let n = self.e.len();
        let s_end = states.last().expect("nonempty");
        let mut lambda = self.q_mul(s_end);
        let eta: f64 = s_end
            .iter()
            .zip(&lambda)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();

        let mut grad = vec![0.0; n];
        let mut work = Rk4Work::new(nz);
        let mut ys: [Vec<C64>; 4] = std::array::from_fn(|_| vec![ZERO; nz]);
        let mut kbar: [Vec<C64>; 4] = std::array::from_fn(|_| vec![ZERO; nz]);
        let mut ybar: [Vec<C64>; 4] = std::array::from_fn(|_| vec![ZERO; nz]);
        let mut vy = vec![ZERO; nz];
        let dt = self.dt;
        for k in (0..n - 1).rev() {
            let s = &states[k];
            let em = (self.e[k] + self.e[k + 1]) * 0.5;
            let omm = 0.5 * (omega[k] + omega[k + 1]);
            let es = [self.e[k], em, em, self.e[k + 1]];
            let oms = [omega[k], omm, omm, omega[k + 1]];
            let fracs = [0.5 * dt, 0.5 * dt, dt];

            // Rebuild the stage states of this step.
            ys[0].copy_from_slice(s);
            for i in 0..3 {
                let (head, tail) = ys.split_at_mut(i + 1);
                md.rhs(&head[i], es[i], oms[i], &mut work.field, &mut work.k[0]);
                for j in 0..nz {
                    tail[0][j] = s[j] + work.k[0][j] * fracs[i];
                }
            }

            // Stage cotangents, last stage first.
            let weights = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
            for i in (0..4).rev() {
                for j in 0..nz {
                    kbar[i][j] = lambda[j] * weights[i];
                }
                if i < 3 {
                    let c = fracs[i];
                    for j in 0..nz {
                        kbar[i][j] += ybar[i + 1][j] * c;
                    }
                }
                self.a_transpose(&kbar[i], oms[i], &mut ybar[i]);
            }

            // Control sensitivities of each stage.
            let mut dstage = [0.0; 4];
            for i in 0..4 {
                let om = oms[i];
                md.v_mul(&ys[i], &mut vy);
                let ca = -2.0 * om * md.inv_gamma;
                let cv = 2.0 * md.beta * md.beta * om;
                let ce = -md.beta * es[i];
                let mut acc = ZERO;
                for j in 0..nz {
                    let d = ys[i][j] * ca + vy[j] * cv + ce * md.u[j];
                    acc += kbar[i][j].conj() * d;
                }
                dstage[i] = 2.0 * acc.re;
            }
            grad[k] += dstage[0] + 0.5 * (dstage[1] + dstage[2]);
            grad[k + 1] += dstage[3] + 0.5 * (dstage[1] + dstage[2]);

            for j in 0..nz {
                lambda[j] += ybar[0][j] + ybar[1][j] + ybar[2][j] + ybar[3][j];
            }
        }
        Ok((eta, grad))
    }

    /// `A(om)^T x` for the spin-wave generator `A = -(gamma_s + om^2/gamma) + b^2 V`.
    fn a_transpose(&self, x: &[C64], om: f64, out: &mut [C64]) {
        let md = &self.model;
        md.vt_mul(x, out);
        let b2 = md.beta * md.beta * om * om;
        let c = md.gamma_s + om * om * md.inv_gamma;
        for (o, &xj) in out.iter_mut().zip(x) {
            *o = *o * b2 - xj * c;
        }
    }
}

/// `Q = sum_k c_k w_k w_k^T` with `w_k = (M^T)^k rho`, where `M` is the RK4
/// step under a constant read control and `rho` maps a spin wave to the
/// output field at z = L.
fn retrieval_form(
    model: &Adiabatic,
    m: &MediumParams,
    grid: &SolverGrid,
    read_rabi: f64,
) -> Result<Vec<f64>> {
    let duration = completion_duration_us(m, read_rabi)?;
    let n = grid.samples_for(m, duration, read_rabi);
    let dt = duration / (n - 1) as f64;
    let nz = model.nz;
    let b = model.beta * read_rabi;
    let c = model.gamma_s + read_rabi * read_rabi * model.inv_gamma;
    let b2 = b * b;

    let mut w = vec![ZERO; nz];
    model.add_v_last_adjoint(C64::new(-b, 0.0), &mut w);
    let mut q = vec![0.0; nz * nz];
    let mut tmp = vec![ZERO; nz];
    let mut acc = vec![ZERO; nz];
    let apply_at = |x: &[C64], out: &mut [C64], tmp: &mut [C64]| {
        model.vt_mul(x, tmp);
        for j in 0..nz {
            out[j] = tmp[j] * b2 - x[j] * c;
        }
    };
    for k in 0..n {
        let ck = if k == 0 || k + 1 == n { 0.5 * dt } else { dt };
        for i in 0..nz {
            let wi = w[i].re * ck;
            if wi == 0.0 {
                continue;
            }
            let row = &mut q[i * nz..i * nz + i + 1];
            for (qij, wj) in row.iter_mut().zip(&w[..=i]) {
                *qij += wi * wj.re;
            }
        }
        if k + 1 == n {
            break;
        }
        // Horner form of the degree-4 Taylor polynomial that RK4 reduces to.
        acc.copy_from_slice(&w);
        for p in [4.0, 3.0, 2.0, 1.0] {
            let mut at = vec![ZERO; nz];
            apply_at(&acc, &mut at, &mut tmp);
            for j in 0..nz {
                acc[j] = w[j] + at[j] * (dt / p);
            }
        }
        std::mem::swap(&mut w, &mut acc);
        if !w.iter().all(|v| v.re.is_finite()) {
            return Err(Error::NumericalInstability {
                step: k + 1,
                t_us: dt * (k + 1) as f64,
            });
        }
    }
    for i in 0..nz {
        for j in 0..i {
            q[j * nz + i] = q[i * nz + j];
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlOptions {
    /// Upper bound on the writing control (rad/us).
    pub max_rabi: f64,
    /// Flat read control used in the objective; defaults to `max_rabi`.
    pub read_rabi: Option<f64>,
    pub max_iter: usize,
    /// Stop when the best efficiency improved by less than `min_rel_gain`
    /// (relative) over this many iterations.
    pub patience: usize,
    pub min_rel_gain: f64,
    /// Efficiency regarded as optimal; defaults to the decay-free optimum
    /// times the storage decay factor.
    pub target_eta: Option<f64>,
    /// Falling further than this below the target raises the
    /// not-at-optimum flag.
    pub target_tol: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            max_rabi: std::f64::consts::TAU * 12.0,
            read_rabi: None,
            max_iter: 400,
            patience: 20,
            min_rel_gain: 1e-4,
            target_eta: None,
            target_tol: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Stalled,
    Stationary,
    IterationCap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlOutcome {
    pub omega_write: SampledPulse,
    pub achieved_eta: f64,
    pub initial_eta: f64,
    pub target_eta: f64,
    pub not_at_optimum: bool,
    pub iterations: usize,
    pub stop: StopReason,
    pub history: Vec<f64>,
}

/// Constant control whose group velocity carries the bulk of `e_in` across
/// the medium in its duration (`T v_g = L`).
fn initial_rabi(e_in: &SampledPulse, m: &MediumParams) -> f64 {
    let span = (e_in.energy_quantile(0.99) - e_in.energy_quantile(0.01)).max(e_in.dt());
    m.rabi_for_transit_us(span)
}

fn project(x: &mut [f64], hi: f64) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, hi));
}

/// Writing control maximizing the storage-plus-retrieval efficiency of
/// `e_in`, bounded to `[0, max_rabi]`.
pub fn optimize_control(
    e_in: &SampledPulse,
    m: &MediumParams,
    tau_us: f64,
    grid: &SolverGrid,
    opts: &ControlOptions,
) -> Result<ControlOutcome> {
    if opts.max_iter == 0 || opts.patience == 0 {
        return Err(invalid("options", "max_iter and patience must be positive"));
    }
    let read_rabi = opts.read_rabi.unwrap_or(opts.max_rabi);
    let objective = ControlObjective::new(e_in, m, tau_us, grid, opts.max_rabi, read_rabi)?;
    let target_eta = match opts.target_eta {
        Some(t) => t,
        None => optimal_spin_wave(m, grid)?.eta_max * storage_decay_factor(m, tau_us * 1e-6)?,
    };

    let hi = opts.max_rabi;
    let mut x = vec![initial_rabi(e_in, m).min(hi); objective.len()];
    let (mut f, mut g) = objective.efficiency_and_gradient(&x)?;
    // Work with the descent problem on -eta.
    g.iter_mut().for_each(|v| *v = -*v);
    let initial_eta = f;
    let mut history = vec![f];
    let mut recent = vec![-f];
    let mut best = (f, x.clone());

    let pg_norm = |x: &[f64], g: &[f64]| {
        x.iter()
            .zip(g)
            .map(|(&xi, &gi)| ((xi - gi).clamp(0.0, hi) - xi).abs())
            .fold(0.0, f64::max)
    };
    let mut alpha = {
        let p = pg_norm(&x, &g);
        if p > 0.0 {
            (hi * 1e-2 / p).max(1.0 / p)
        } else {
            1.0
        }
    };
    let mut stop = StopReason::IterationCap;
    let mut iterations = 0;
    const MEMORY: usize = 10;
    const ARMIJO: f64 = 1e-4;
    for it in 1..=opts.max_iter {
        iterations = it;
        if pg_norm(&x, &g) <= 1e-14 * hi {
            stop = StopReason::Stationary;
            break;
        }
        let d: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| (xi - alpha * gi).clamp(0.0, hi) - xi)
            .collect();
        let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let f_ref = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + lam * b).collect();
            project(&mut trial, hi);
            let (ft, gt) = objective.efficiency_and_gradient(&trial)?;
            if -ft <= f_ref + ARMIJO * lam * gd {
                accepted = Some((trial, ft, gt));
                break;
            }
            // Safeguarded quadratic backtracking.
            let denom = 2.0 * (-ft - (-f) - lam * gd);
            let lq = if denom > 0.0 {
                -gd * lam * lam / denom
            } else {
                0.5 * lam
            };
            lam = lq.clamp(0.1 * lam, 0.5 * lam);
        }
        let Some((xn, fn_, mut gn)) = accepted else {
            stop = StopReason::Stationary;
            break;
        };
        gn.iter_mut().for_each(|v| *v = -*v);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        alpha = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            alpha * 10.0
        };
        x = xn;
        f = fn_;
        g = gn;
        history.push(f);
        recent.push(-f);
        if recent.len() > MEMORY {
            recent.remove(0);
        }
        if f > best.0 {
            best = (f, x.clone());
        }
        if it >= opts.patience {
            let earlier = history[history.len() - 1 - opts.patience];
            let best_recent = history[history.len() - opts.patience..]
                .iter()
                .copied()
                .fold(f64::MIN, f64::max);
            if best_recent - earlier < opts.min_rel_gain * earlier.abs().max(1e-300) {
                stop = StopReason::Stalled;
                break;
            }
        }
    }

    let (achieved_eta, omega) = best;
    Ok(ControlOutcome {
        omega_write: objective.to_pulse(&omega)?,
        achieved_eta,
        initial_eta,
        target_eta,
        not_at_optimum: achieved_eta < target_eta - opts.target_tol,
        iterations,
        stop,
        history,
    })
}

/// Checks of a synthesized writing control: the stored excitation read out
/// by a flat control and by the time-reversed writing control.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlVerification {
    pub stored: SpinWave,
    pub flat_efficiency: f64,
    pub flat_output: SampledPulse,
    pub reversed_efficiency: f64,
    pub reversed_output: SampledPulse,
    /// Overlap of the reversed-control output with the time-reversed input.
    pub reversal_overlap: f64,
}

pub fn verify_control(
    e_in: &SampledPulse,
    omega_write: &SampledPulse,
    m: &MediumParams,
    tau_us: f64,
    grid: &SolverGrid,
    read_rabi: f64,
) -> Result<ControlVerification> {
    let read_start = e_in.t_end() + tau_us;
    let flat = constant_read_control(m, read_rabi, read_start, grid)?;
    let flat_run = run_protocol(e_in, omega_write, &flat, tau_us, m, grid)?;
    let reversed = read_control_for(omega_write, tau_us);
    let rev_run = run_protocol(e_in, omega_write, &reversed, tau_us, m, grid)?;
    let target = e_in.time_reverse().shifted_to(read_start);
    let reversal_overlap = SampledPulse::overlap(&rev_run.retrieved, &target)?;
    Ok(ControlVerification {
        stored: flat_run.spin_after_write,
        flat_efficiency: flat_run.efficiency,
        flat_output: flat_run.retrieved,
        reversed_efficiency: rev_run.efficiency,
        reversed_output: rev_run.retrieved,
        reversal_overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::MediumParams;

    fn setup(gamma_s: f64) -> (MediumParams, SolverGrid, SampledPulse) {
        let m = MediumParams::rb_cell(12.0).unwrap().with_gamma_s(gamma_s);
        let grid = SolverGrid::new(40, 40.0, crate::solver::Mode::Adiabatic).unwrap();
        let e = SampledPulse::from_fn(-6.0, 0.0, 61, |t| {
            C64::new((-(t + 3.0).powi(2) / 2.0).exp(), 0.0)
        })
        .unwrap();
        (m, grid, e)
    }

    #[test]
    fn objective_matches_protocol_run() {
        let (m, grid, e) = setup(2000.0);
        let read = 40.0;
        let obj = ControlObjective::new(&e, &m, 5.0, &grid, 40.0, read).unwrap();
        let omega: Vec<f64> = (0..obj.len())
            .map(|k| 20.0 + 10.0 * (0.3 * k as f64).sin())
            .collect();
        let eta = obj.efficiency(&omega).unwrap();
        let write = obj.to_pulse(&omega).unwrap();
        let read_ctl = constant_read_control(&m, read, 5.0, &grid).unwrap();
        let e_grid = e.resample(obj.len(), (-6.0, 0.0)).unwrap();
        let r = run_protocol(&e_grid, &write, &read_ctl, 5.0, &m, &grid).unwrap();
        assert!(
            (r.efficiency - eta).abs() < 1e-9 * eta,
            "{} vs {eta}",
            r.efficiency
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (m, grid, e) = setup(2000.0);
        let obj = ControlObjective::new(&e, &m, 5.0, &grid, 40.0, 35.0).unwrap();
        let omega: Vec<f64> = (0..obj.len())
            .map(|k| 18.0 + 6.0 * (0.17 * k as f64).cos())
            .collect();
        let (eta, grad) = obj.efficiency_and_gradient(&omega).unwrap();
        assert!((eta - obj.efficiency(&omega).unwrap()).abs() < 1e-14);
        for &k in &[0usize, 7, obj.len() / 2, obj.len() - 3, obj.len() - 1] {
            let h = 1e-4;
            let mut p = omega.clone();
            p[k] += h;
            let mut q = omega.clone();
            q[k] -= h;
            let fd = (obj.efficiency(&p).unwrap() - obj.efficiency(&q).unwrap()) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs()
                    < 1e-6 * grad.iter().map(|g| g.abs()).fold(0.0, f64::max) + 1e-12,
                "sample {k}: adjoint {} vs finite difference {fd}",
                grad[k]
            );
        }
    }
}
