use crate::error::{domain, Result};
use crate::numerics::{C64, I};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Fourier-mode solution of y_t + 4y_x + y_xxx − 3y_xx = f on the circle of length L.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicTrajectory {
    #[serde(rename = "L")]
    pub len: f64,
    pub modes: Vec<i64>,
    pub times: Vec<f64>,
    /// coeffs[t][m]: coefficient of e^{i k_m x}.
    pub coeffs: Vec<Vec<C64>>,
    /// forcing coefficients at the same nodes (needed for y_t).
    pub forcing: Vec<Vec<C64>>,
}

pub fn wavenumber(len: f64, n: i64) -> f64 {
    2.0 * PI * n as f64 / len
}

/// Decay rate a_n = i(4k − k³) + 3k².
pub fn rate(len: f64, n: i64) -> C64 {
    let k = wavenumber(len, n);
    C64::new(3.0 * k * k, 4.0 * k - k * k * k)
}

/// Weights (w₀, w₁) of ∫₀^dt e^{−a(dt−s)} [f₀(1−s/dt) + f₁ s/dt] ds.
fn product_weights(a: C64, dt: f64) -> (C64, C64) {
    let x = a * dt;
    if x.norm() < 0.5 {
        // w₀ = dt Σ(−x)^k/(k!(k+2)), w₁ = dt Σ(−x)^k/(k!(k+1)(k+2))
        let mut w0 = C64::new(0.0, 0.0);
        let mut w1 = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 0..30 {
            let kf = k as f64;
            w0 += term / (kf + 2.0);
            w1 += term / ((kf + 1.0) * (kf + 2.0));
            term *= -x / (kf + 1.0);
        }
        return (w0 * dt, w1 * dt);
    }
    let e = (-x).exp();
    let total = (1.0 - e) / a;
    let w1 = total - (1.0 - e * (1.0 + x)) / (a * a * dt);
    (total - w1, w1)
}

/// Exact per-mode exponential integrator with product-trapezoid quadrature
/// in τ (exact for forcing linear between nodes). `forcing(n, t)` is the
/// coefficient of e^{i k_n x}; mode 0 must vanish.
pub fn kdvb_periodic_solve<F: Fn(i64, f64) -> C64>(len: f64, n_modes: usize, forcing: F, t_final: f64, dt: f64) -> Result<PeriodicTrajectory> {
    if !(len > 0.0 && dt > 0.0 && t_final >= 0.0) {
        return domain("kdvb_periodic_solve: need L > 0, dt > 0, T ≥ 0");
    }
    let steps = (t_final / dt).round() as usize;
    let modes: Vec<i64> = (-(n_modes as i64)..=n_modes as i64).collect();
    for s in 0..=steps {
        if forcing(0, s as f64 * dt).norm() > 1e-14 {
            return domain("kdvb_periodic_solve: mode-0 forcing must vanish (mean-free f)");
        }
    }
    let weights: Vec<(C64, C64, C64)> = modes
        .iter()
        .map(|&n| {
            let a = rate(len, n);
            let (w0, w1) = product_weights(a, dt);
            ((-a * dt).exp(), w0, w1)
        })
        .collect();
    let mut times = vec![0.0];
    let mut f_prev: Vec<C64> = modes.iter().map(|&n| forcing(n, 0.0)).collect();
    let mut coeffs = vec![vec![C64::new(0.0, 0.0); modes.len()]];
    let mut forcings = vec![f_prev.clone()];
    for s in 1..=steps {
        let t = s as f64 * dt;
        let f_next: Vec<C64> = modes.iter().map(|&n| forcing(n, t)).collect();
        let prev = coeffs.last().unwrap();
        let next: Vec<C64> = (0..modes.len()).map(|m| {
            let (e, w0, w1) = weights[m];
            e * prev[m] + w0 * f_prev[m] + w1 * f_next[m]
        }).collect();
        coeffs.push(next);
        forcings.push(f_next.clone());
        f_prev = f_next;
        times.push(t);
    }
    Ok(PeriodicTrajectory { len, modes, times, coeffs, forcing: forcings })
}

impl PeriodicTrajectory {
    fn sum<G: Fn(i64, C64, C64) -> C64>(&self, s: usize, x: f64, g: G) -> f64 {
        self.modes
            .iter()
            .zip(self.coeffs[s].iter().zip(&self.forcing[s]))
            .map(|(&n, (c, f))| g(n, *c, *f) * (I * wavenumber(self.len, n) * x).exp())
            .sum::<C64>()
            .re
    }
    pub fn y(&self, s: usize, x: f64) -> f64 {
        self.sum(s, x, |_, c, _| c)
    }
    pub fn y_x(&self, s: usize, x: f64) -> f64 {
        let len = self.len;
        self.sum(s, x, |n, c, _| I * wavenumber(len, n) * c)
    }
    /// y_t = f − (4y_x + y_xxx − 3y_xx) mode by mode.
    pub fn y_t(&self, s: usize, x: f64) -> f64 {
        let len = self.len;
        self.sum(s, x, |n, c, f| f - rate(len, n) * c)
    }
}

/// C_δ = (1/L) Σ_{n≠0} (|k_n| + |a_n|) e^{−3k_n²δ}: bound on |y_t|+|y_x| per
/// unit ‖f‖_{L¹} at time δ after the forcing support ends.
pub fn smoothing_constant(len: f64, n_modes: usize, delta: f64) -> f64 {
    let mut s = 0.0;
    for n in 1..=n_modes as i64 {
        for m in [n, -n] {
            let k = wavenumber(len, m);
            s += (k.abs() + rate(len, m).norm()) * (-3.0 * k * k * delta).exp();
        }
    }
    s / len
}
