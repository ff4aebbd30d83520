use super::nfunc::h_prime_ratio;
use super::ControlSignal;
use crate::critical_lengths::CriticalPair;
use crate::error::{domain, Result};
use crate::kdv_solver::{solve_linear, Grid};
use crate::numerics::C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const LEAKAGE_LIMIT: f64 = 0.1;
/// Frequencies where |ŵ| falls below this fraction of its peak are dropped.
pub const SPECTRUM_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyNullControl {
    /// u truncated to [0, T].
    pub control: ControlSignal,
    /// û on z_j = j·dz, j = −J..=J (index J is z = 0).
    pub u_hat: Vec<C64>,
    pub dz: f64,
    /// ‖u outside [0, T]‖/‖u‖ before truncation.
    pub leakage: f64,
    /// ‖y(T)‖/max_t ‖y(t)‖ for the truncated control.
    pub residual: f64,
    pub cutoff: f64,
    pub flagged: bool,
}

/// u with û = ŵ·ℋ(z)/ℋ'(z+iγ), ℋ = H/Γ, on a padded FFT grid. The residual is checked
/// with `n` cells at w's dt and horizon.
pub fn null_control_frequency(w: &ControlSignal, pair: &CriticalPair, gamma: f64, n: usize) -> Result<FrequencyNullControl> {
    let k = w.samples.len();
    let t_final = w.t_final();
    if w.max_abs() == 0.0 {
        let zero = ControlSignal::zeros(t_final, w.dt);
        return Ok(FrequencyNullControl { control: zero, u_hat: vec![C64::new(0.0, 0.0)], dz: 0.0, leakage: 0.0, residual: 0.0, cutoff: 0.0, flagged: false });
    }
    if w.samples[0].abs().max(w.samples[k - 1].abs()) > 1e-6 * w.max_abs() {
        return domain("w must vanish at both ends of [0, T]");
    }
    if !(gamma > 0.0) {
        return domain("gamma must be positive");
    }
    let m = (8 * k).next_power_of_two();
    let dz = 2.0 * PI / (m as f64 * w.dt);
    let mut planner = FftPlanner::new();
    let mut buf: Vec<C64> = (0..m).map(|i| C64::new(if i < k { w.samples[i] } else { 0.0 }, 0.0)).collect();
    planner.plan_fft_forward(m).process(&mut buf);
    let peak = buf.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let half = m / 2;
    let mut jmax = 0;
    for (j, v) in buf.iter().enumerate().take(half) {
        if v.norm() > SPECTRUM_FLOOR * peak {
            jmax = j;
        }
    }
    let mut spec = vec![C64::new(0.0, 0.0); m];
    for j in 0..=jmax {
        let (ratio, _) = h_prime_ratio(j as f64 * dz, gamma, pair.len, pair.p)?;
        spec[j] = buf[j] / ratio;
    }
    spec[0].im = 0.0;
    for j in 1..=jmax {
        spec[m - j] = spec[j].conj();
    }
    let scale = w.dt / (2.0 * PI).sqrt();
    let mut u_hat: Vec<C64> = (1..=jmax).rev().map(|j| spec[m - j] * scale).collect();
    u_hat.extend((0..=jmax).map(|j| spec[j] * scale));

    planner.plan_fft_inverse(m).process(&mut spec);
    let full: Vec<f64> = spec.iter().map(|v| v.re / m as f64).collect();
    let total = full.iter().map(|v| v * v).sum::<f64>();
    let inside = full[..k].iter().map(|v| v * v).sum::<f64>();
    let leakage = if total > 0.0 { ((total - inside).max(0.0) / total).sqrt() } else { 0.0 };
    let control = ControlSignal::new(full[..k].to_vec(), w.dt)?;

    let grid = Grid::new(pair.len, n, w.dt, t_final)?;
    let traj = solve_linear(&grid, &vec![0.0; grid.interior()], &control, None)?;
    let peak_y = traj.max_norm();
    let residual = if peak_y > 0.0 { grid.norm(traj.final_state()) / peak_y } else { 0.0 };
    Ok(FrequencyNullControl { control, u_hat, dz, leakage, residual, cutoff: jmax as f64 * dz, flagged: leakage > LEAKAGE_LIMIT })
}
