#![allow(dead_code)]

use eitmem_core::MediumParams;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

/// Best storage-plus-retrieval efficiency with a constant control of
/// one-transit Rabi frequency over a `20`-transit window, from the dense
/// input-to-output map of the decay-free adiabatic equations.
///
/// The map is discretized independently of the solver: plain trapezoid
/// quadrature in z, exact matrix exponential in t, Simpson in t for the
/// Gramians. Its largest singular value squared is the top eigenvalue of
/// `Wc^(1/2) Wo Wc^(1/2)`.
pub fn dense_eta_max(alpha_l: f64, nz: usize, nt: usize) -> f64 {
    assert!(nt.is_multiple_of(2));
    let m = MediumParams::rb_cell(alpha_l).unwrap();
    let gamma = m.gamma_us();
    let kappa = m.kappa_us();
    let omega = kappa;
    let t_end = 20.0;
    let a = 0.5 * alpha_l;
    let b = kappa * omega / gamma;
    let h = 1.0 / (nz - 1) as f64;

    let mut v = DMatrix::<f64>::zeros(nz, nz);
    for j in 1..nz {
        for k in 0..=j {
            let w = if k == 0 || k == j { 0.5 } else { 1.0 };
            v[(j, k)] = h * w * (-a * h * (j - k) as f64).exp();
        }
    }
    let mut sys = v.clone() * (b * b);
    for j in 0..nz {
        sys[(j, j)] -= omega * omega / gamma;
    }
    let input = DVector::from_fn(nz, |j, _| -b * (-a * h * j as f64).exp());
    let output = v.row(nz - 1).transpose() * (-b);

    let dt = t_end / nt as f64;
    let step = (sys * dt).exp();
    let step_t = step.transpose();
    let mut wc = DMatrix::<f64>::zeros(nz, nz);
    let mut wo = DMatrix::<f64>::zeros(nz, nz);
    let mut x = input;
    let mut y = output;
    for k in 0..=nt {
        let w = dt / 3.0
            * if k == 0 || k == nt {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
        wc.ger(w, &x, &x, 1.0);
        wo.ger(w, &y, &y, 1.0);
        x = &step * x;
        y = &step_t * y;
    }

    let eig = SymmetricEigen::new(wc);
    let root = eig.eigenvalues.map(|d| d.max(0.0).sqrt());
    let half = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
    let sym = &half * wo * &half;
    SymmetricEigen::new(sym).eigenvalues.max()
}

/// `dense_eta_max` on grids of step `h` and `h/2`, Richardson-extrapolated
/// to remove the second-order trapezoid error.
pub fn dense_eta_max_extrapolated(alpha_l: f64, intervals: usize, nt: usize) -> f64 {
    let coarse = dense_eta_max(alpha_l, intervals + 1, nt);
    let fine = dense_eta_max(alpha_l, 2 * intervals + 1, nt);
    fine + (fine - coarse) / 3.0
}

/// Dominant eigenvalue of the closed-form adiabatic cycle kernel
/// `(d/2) exp(-d(1+z-z')/2) I0(d sqrt(z(1-z')))`, `d = alpha_L/2`, squared.
/// Valid when retrieval is complete.
pub fn bessel_eta_max(alpha_l: f64, n: usize) -> f64 {
    let d = 0.5 * alpha_l;
    let h = 1.0 / (n - 1) as f64;
    let w = |j: usize| if j == 0 || j == n - 1 { 0.5 * h } else { h };
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        let (z, zp) = (i as f64 * h, j as f64 * h);
        let arg = d * (z * (1.0 - zp)).sqrt();
        0.5 * d * scaled_i0(arg) * (arg - 0.5 * d * (1.0 + z - zp)).exp()
    });
    // Symmetrize the quadrature weights so the spectrum is that of the kernel.
    let sw = DVector::from_fn(n, |j, _| w(j).sqrt());
    let k = DMatrix::from_fn(n, n, |i, j| sw[i] * kernel[(i, j)] * sw[j]);
    let mut vec = DVector::from_element(n, 1.0);
    let mut mu = 0.0;
    for _ in 0..500 {
        let next = &k * &vec;
        mu = next.norm() / vec.norm();
        vec = next.normalize();
    }
    mu * mu
}

/// `exp(-x) I0(x)` by series for small `x` and the asymptotic expansion above 15.
fn scaled_i0(x: f64) -> f64 {
    if x < 15.0 {
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..200 {
            term *= q / (k * k) as f64;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..12 {
            let c = (2 * k - 1) as f64;
            term *= c * c / (8.0 * x * k as f64);
            sum += term;
        }
        sum / (std::f64::consts::TAU * x).sqrt()
    }
}

/// Forward retrieval efficiency of a spin wave sampled at `zs`, from the
/// closed-form retrieval kernel with a trapezoid rule in z.
pub fn bessel_retrieval_efficiency(alpha_l: f64, zs: &[f64], s: &[C64]) -> f64 {
    let d = 0.5 * alpha_l;
    let n = zs.len();
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let lo = if j > 0 { zs[j] - zs[j - 1] } else { 0.0 };
            let hi = if j + 1 < n { zs[j + 1] - zs[j] } else { 0.0 };
            0.5 * (lo + hi)
        })
        .collect();
    let mut total = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let arg = d * ((1.0 - zs[i]) * (1.0 - zs[j])).sqrt();
            let k = 0.5 * d * scaled_i0(arg) * (arg - 0.5 * d * (2.0 - zs[i] - zs[j])).exp();
            total += w[i] * w[j] * k * s[i].conj() * s[j];
        }
    }
    let norm: f64 = (0..n).map(|j| w[j] * s[j].norm_sqr()).sum();
    total.re / norm
}
