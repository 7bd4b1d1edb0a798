//! Full three-level model with the optical polarization kept as a dynamical
//! variable. The field is rebuilt from `P` by trapezoidal z-quadrature at
//! every RK4 stage.

use num_complex::Complex64 as C64;

use crate::medium::MediumParams;

#[derive(Debug, Clone)]
pub(crate) struct Full {
    pub nz: usize,
    pub h: f64,
    pub gamma: f64,
    pub gamma_s: f64,
    pub kappa: f64,
    pub a: f64,
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

impl Full {
    pub fn new(m: &MediumParams, nz: usize, gamma_s_us: f64) -> Self {
        Self {
            nz,
            h: 1.0 / (nz - 1) as f64,
            gamma: m.gamma_us(),
            gamma_s: gamma_s_us,
            kappa: m.kappa_us(),
            a: 0.5 * m.alpha_l,
        }
    }

    /// Largest stable internal step for a control bounded by `rabi_max`.
    pub fn max_step(&self, rabi_max: f64) -> f64 {
        0.5 / (self.gamma * (1.0 + self.a) + rabi_max + self.gamma_s)
    }

    pub fn field(&self, p: &[C64], e0: C64, out: &mut [C64]) {
        let c = I * (self.kappa * 0.5 * self.h);
        let mut e = e0;
        out[0] = e;
        for j in 0..self.nz - 1 {
            e += c * (p[j] + p[j + 1]);
            out[j + 1] = e;
        }
    }

    pub fn field_at_end(&self, p: &[C64], e0: C64) -> C64 {
        let c = I * (self.kappa * 0.5 * self.h);
        let mut e = e0;
        for j in 0..self.nz - 1 {
            e += c * (p[j] + p[j + 1]);
        }
        e
    }

    /// State layout: `[P_0..P_{nz-1}, S_0..S_{nz-1}]`.
    pub fn rhs(&self, y: &[C64], e0: C64, om: f64, field: &mut [C64], dy: &mut [C64]) {
        let n = self.nz;
        let (p, s) = y.split_at(n);
        self.field(p, e0, field);
        let (dp, ds) = dy.split_at_mut(n);
        for j in 0..n {
            dp[j] = -p[j] * self.gamma + I * (field[j] * self.kappa + s[j] * om);
            ds[j] = -s[j] * self.gamma_s + I * (p[j] * om);
        }
    }

    pub fn step(
        &self,
        y: &mut [C64],
        e: [C64; 3],
        om: [f64; 3],
        dt: f64,
        w: &mut super::adiabatic::Rk4Work,
    ) {
        let n = y.len();
        let super::adiabatic::Rk4Work { k, y: tmp, field } = w;
        let [k1, k2, k3, k4] = k;
        self.rhs(y, e[0], om[0], field, k1);
        for j in 0..n {
            tmp[j] = y[j] + k1[j] * (0.5 * dt);
        }
        self.rhs(tmp, e[1], om[1], field, k2);
        for j in 0..n {
            tmp[j] = y[j] + k2[j] * (0.5 * dt);
        }
        self.rhs(tmp, e[1], om[1], field, k3);
        for j in 0..n {
            tmp[j] = y[j] + k3[j] * dt;
        }
        self.rhs(tmp, e[2], om[2], field, k4);
        let c = dt / 6.0;
        for j in 0..n {
            y[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * c;
        }
    }
}
