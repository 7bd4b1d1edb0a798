//! Adiabatic elimination of the optical polarization.
//!
//! With `P = i(kE + WS)/gamma` the field obeys `dE/dz = -a E - b S` with
//! `a = alpha_L / 2` and `b = k W / gamma`, which is integrated exactly across
//! each z cell for piecewise-linear `S`. The spin wave then evolves as
//! `dS/dt = -(gamma_s + W^2/gamma) S - b E`.

use num_complex::Complex64 as C64;

use crate::medium::MediumParams;

#[derive(Debug, Clone)]
pub(crate) struct Adiabatic {
    pub nz: usize,
    /// `exp(-a h)`
    pub r: f64,
    /// Weight of the near-end sample in the exact cell integral.
    pub w_prev: f64,
    /// Weight of the far-end sample.
    pub w_next: f64,
    /// `k / gamma`, so that `b = beta * W`.
    pub beta: f64,
    pub inv_gamma: f64,
    pub gamma_s: f64,
    pub kappa: f64,
    /// `exp(-a z_j)`
    pub u: Vec<f64>,
}

pub(crate) fn cell_weights(a: f64, h: f64) -> (f64, f64) {
    let x = a * h;
    let (w1, wl) = if x < 1e-4 {
        (
            h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0),
            h * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0),
        )
    } else {
        let w1 = -(-x).exp_m1() / a;
        (w1, (h - w1) / x)
    };
    (w1 - wl, wl)
}

impl Adiabatic {
    pub fn new(m: &MediumParams, nz: usize, gamma_s_us: f64) -> Self {
        let h = 1.0 / (nz - 1) as f64;
        let a = 0.5 * m.alpha_l;
        let (w_prev, w_next) = cell_weights(a, h);
        let r = (-a * h).exp();
        let gamma = m.gamma_us();
        let kappa = m.kappa_us();
        Self {
            nz,
            r,
            w_prev,
            w_next,
            beta: kappa / gamma,
            inv_gamma: 1.0 / gamma,
            gamma_s: gamma_s_us,
            kappa,
            u: (0..nz).map(|j| (-a * h * j as f64).exp()).collect(),
        }
    }

    /// `(V s)_j`: exact integral of `exp(-a(z_j - z')) s(z')` over `[0, z_j]`.
    pub fn v_mul(&self, s: &[C64], out: &mut [C64]) {
        let mut acc = C64::new(0.0, 0.0);
        out[0] = acc;
        for j in 0..self.nz - 1 {
            acc = acc * self.r + s[j] * self.w_prev + s[j + 1] * self.w_next;
            out[j + 1] = acc;
        }
    }

    /// `V^T y`.
    pub fn vt_mul(&self, y: &[C64], out: &mut [C64]) {
        let n = self.nz;
        // G_j = sum_{i >= j} r^(i-j) y_i, built from the far end.
        let mut g_next = C64::new(0.0, 0.0);
        for i in (0..n).rev() {
            let g_i = y[i] + g_next * self.r;
            let mut v = C64::new(0.0, 0.0);
            if i + 1 < n {
                v += g_next * self.w_prev;
            }
            if i >= 1 {
                v += g_i * self.w_next;
            }
            out[i] = v;
            g_next = g_i;
        }
    }

    /// Last entry of `V s` (the field-relevant projection at z = L).
    pub fn v_last(&self, s: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..self.nz - 1 {
            acc = acc * self.r + s[j] * self.w_prev + s[j + 1] * self.w_next;
        }
        acc
    }

    /// Adjoint of `s -> (V s)_last`: writes `c * v` into `out` (accumulating).
    pub fn add_v_last_adjoint(&self, c: C64, out: &mut [C64]) {
        let n = self.nz;
        // Coefficient of cell m in the last entry is r^(n-2-m).
        let mut p = 1.0;
        for m in (0..n - 1).rev() {
            out[m] += c * (self.w_prev * p);
            out[m + 1] += c * (self.w_next * p);
            p *= self.r;
        }
    }

    /// Field `E(z)` for spin wave `s`, input `e0` at z = 0 and control `om`.
    pub fn field(&self, s: &[C64], e0: C64, om: f64, out: &mut [C64]) {
        let b = self.beta * om;
        let mut e = e0;
        out[0] = e;
        for j in 0..self.nz - 1 {
            e = e * self.r - (s[j] * self.w_prev + s[j + 1] * self.w_next) * b;
            out[j + 1] = e;
        }
    }

    /// Output field at z = L.
    pub fn field_at_end(&self, s: &[C64], e0: C64, om: f64) -> C64 {
        e0 * self.u[self.nz - 1] - self.v_last(s) * (self.beta * om)
    }

    /// `ds = dS/dt`; `field` is scratch space and holds E on return.
    pub fn rhs(&self, s: &[C64], e0: C64, om: f64, field: &mut [C64], ds: &mut [C64]) {
        self.field(s, e0, om, field);
        let b = self.beta * om;
        let c = self.gamma_s + om * om * self.inv_gamma;
        for ((d, &sj), &ej) in ds.iter_mut().zip(s).zip(field.iter()) {
            *d = -(sj * c) - ej * b;
        }
    }

    /// `P = i(kE + W S)/gamma`.
    pub fn polarization(&self, s: &[C64], e0: C64, om: f64, field: &mut [C64], out: &mut [C64]) {
        self.field(s, e0, om, field);
        let i_over_gamma = C64::new(0.0, self.inv_gamma);
        for ((p, &sj), &ej) in out.iter_mut().zip(s).zip(field.iter()) {
            *p = i_over_gamma * (ej * self.kappa + sj * om);
        }
    }
}

/// Scratch buffers for one RK4 step.
pub(crate) struct Rk4Work {
    pub k: [Vec<C64>; 4],
    pub y: Vec<C64>,
    pub field: Vec<C64>,
}

impl Rk4Work {
    pub fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            y: z.clone(),
            field: z,
        }
    }
}

impl Adiabatic {
    /// Advance `s` by one RK4 step. Inputs and controls are given at the
    /// start, midpoint and end of the step.
    pub fn step(&self, s: &mut [C64], e: [C64; 3], om: [f64; 3], dt: f64, w: &mut Rk4Work) {
        let Rk4Work { k, y, field } = w;
        let [k1, k2, k3, k4] = k;
        self.rhs(s, e[0], om[0], field, k1);
        for j in 0..self.nz {
            y[j] = s[j] + k1[j] * (0.5 * dt);
        }
        self.rhs(y, e[1], om[1], field, k2);
        for j in 0..self.nz {
            y[j] = s[j] + k2[j] * (0.5 * dt);
        }
        self.rhs(y, e[1], om[1], field, k3);
        for j in 0..self.nz {
            y[j] = s[j] + k3[j] * dt;
        }
        self.rhs(y, e[2], om[2], field, k4);
        let c = dt / 6.0;
        for j in 0..self.nz {
            s[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(alpha_l: f64, nz: usize) -> Adiabatic {
        Adiabatic::new(&MediumParams::rb_cell(alpha_l).unwrap(), nz, 0.0)
    }

    fn pseudo(n: usize, seed: f64) -> Vec<C64> {
        (0..n)
            .map(|j| {
                C64::new(
                    (seed * (j as f64 + 1.0)).sin(),
                    (seed * 0.7 * j as f64).cos(),
                )
            })
            .collect()
    }

    #[test]
    fn transpose_matches_inner_product() {
        let m = model(24.0, 40);
        let s = pseudo(40, 1.3);
        let y = pseudo(40, 0.4);
        let mut vs = vec![C64::new(0.0, 0.0); 40];
        let mut vty = vs.clone();
        m.v_mul(&s, &mut vs);
        m.vt_mul(&y, &mut vty);
        let lhs: C64 = y.iter().zip(&vs).map(|(a, b)| a * b).sum();
        let rhs: C64 = vty.iter().zip(&s).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));

        let mut last = vec![C64::new(0.0, 0.0); 40];
        m.add_v_last_adjoint(C64::new(1.0, 0.0), &mut last);
        let direct: C64 = last.iter().zip(&s).map(|(a, b)| a * b).sum();
        assert!((direct - vs[39]).norm() < 1e-12);
        assert!((m.v_last(&s) - vs[39]).norm() < 1e-14);
    }

    #[test]
    fn exact_for_linear_spin_wave() {
        // dE/dz = -a E - b z with E(0) = 0 has E(z) = -b (z/a - (1 - e^{-az})/a^2).
        let m = model(10.0, 33);
        let s: Vec<C64> = (0..33).map(|j| C64::new(j as f64 / 32.0, 0.0)).collect();
        let mut e = vec![C64::new(0.0, 0.0); 33];
        let om = 2.0;
        m.field(&s, C64::new(0.0, 0.0), om, &mut e);
        let b = m.beta * om;
        let a: f64 = 5.0;
        let exact = -b * (1.0 / a - (1.0 - (-a).exp()) / (a * a));
        assert!((e[32].re - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn small_depth_weights_are_continuous() {
        let h = 0.01;
        let (p0, n0) = cell_weights(0.0, h);
        assert!((p0 - h / 2.0).abs() < 1e-15 && (n0 - h / 2.0).abs() < 1e-15);
        // Series branch against the closed form just below the switch-over.
        let a = 0.99e-2;
        let (p1, n1) = cell_weights(a, h);
        let w1 = -(-a * h).exp_m1() / a;
        let wl = (h - w1) / (a * h);
        assert!((n1 - wl).abs() < 1e-12 * h && (p1 - (w1 - wl)).abs() < 1e-12 * h);
    }
}
