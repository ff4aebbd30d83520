use super::{trace_left, Grid, LinearStepper};
use crate::complex_cubic::solve_cubic;
use crate::error::{KdvError, Result};
use crate::numerics::{exp_sum, C64, I};
use crate::spectral::{det_q_scaled, find_real_zeros_h, p_scaled};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const RESONANCE_GUARD: f64 = 1e-3;

fn guard(z: f64, len: f64) -> Result<()> {
    let w = find_real_zeros_h(len, (z - 0.01, z + 0.01))?;
    if let Some(e) = w.zeros.iter().find(|e| (e.z - z).abs() < RESONANCE_GUARD) {
        return Err(KdvError::Resonance { z, zero: e.z, guard: RESONANCE_GUARD });
    }
    Ok(())
}

/// ŷ(z,x)/û = Σ (e^{λ_{j+2}L} − e^{λ_{j+1}L}) e^{λ_j x} / det Q.
pub fn frequency_response(z: f64, len: f64, x: f64) -> Result<C64> {
    guard(z, len)?;
    let lam = solve_cubic(C64::new(z, 0.0))?.lambda;
    let one = C64::new(1.0, 0.0);
    let mut t = Vec::with_capacity(6);
    for j in 0..3 {
        t.push((one, lam[(j + 2) % 3] * len + lam[j] * x));
        t.push((-one, lam[(j + 1) % 3] * len + lam[j] * x));
    }
    Ok(exp_sum(&t).div(&det_q_scaled(&lam, len)))
}

/// ∂ₓŷ(z,0)/û = P/det Q.
pub fn frequency_response_dx0(z: f64, len: f64) -> Result<C64> {
    guard(z, len)?;
    let lam = solve_cubic(C64::new(z, 0.0))?.lambda;
    Ok(p_scaled(&lam, len).div(&det_q_scaled(&lam, len)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalResponse {
    pub z: f64,
    pub x: f64,
    pub empirical: C64,
    pub closed_form: C64,
    pub empirical_dx0: C64,
    pub closed_form_dx0: C64,
}

impl EmpiricalResponse {
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.closed_form).norm() / self.closed_form.norm()
    }
    pub fn relative_error_dx0(&self) -> f64 {
        (self.empirical_dx0 - self.closed_form_dx0).norm() / self.closed_form_dx0.norm()
    }
}

/// Drive u = sin(zt) for 20 periods of transient plus 40 measured periods
/// and demodulate y(t,x) and y_x(t,0) at frequency z.
pub fn empirical_frequency_response(grid: &Grid, z: f64, x: f64) -> Result<EmpiricalResponse> {
    let closed_form = frequency_response(z, grid.len, x)?;
    let closed_form_dx0 = frequency_response_dx0(z, grid.len)?;
    let st = LinearStepper::for_grid(grid)?;
    let period = 2.0 * PI / z.abs();
    let per = (period / grid.dt).round() as usize;
    let dt = period / per as f64;
    let st = if (dt - grid.dt).abs() > 0.0 { LinearStepper::new(grid.n, grid.h, dt)? } else { st };
    let n_trans = 20 * per;
    let n_meas = 40 * per;
    let s = x / grid.h;
    let i0 = (s.floor() as usize).clamp(0, grid.n - 1);
    let w = s - i0 as f64;
    let sample = |y: &[f64], i: usize| if i == 0 || i >= grid.n { 0.0 } else { y[i - 1] };
    let mut y = vec![0.0; grid.interior()];
    let mut acc = C64::new(0.0, 0.0);
    let mut acc_dx = C64::new(0.0, 0.0);
    for n in 0..(n_trans + n_meas) {
        let (t0, t1) = (n as f64 * dt, (n + 1) as f64 * dt);
        y = st.step(&y, (z * t0).sin(), (z * t1).sin(), None);
        if n + 1 > n_trans {
            // rectangle rule over whole periods is exact for the harmonic
            let yx = sample(&y, i0) * (1.0 - w) + sample(&y, i0 + 1) * w;
            let ph = (-I * z * t1).exp();
            acc += yx * ph;
            acc_dx += trace_left(&y, grid.h) * ph;
        }
    }
    let scale = 2.0 * I / n_meas as f64;
    Ok(EmpiricalResponse { z, x, empirical: acc * scale, closed_form, empirical_dx0: acc_dx * scale, closed_form_dx0 })
}
