use super::BTable;
use crate::control_tools::ControlSignal;
use crate::critical_lengths::{CriticalPair, PsiField};
use crate::error::{KdvError, Result};
use crate::kdv_solver::{solve_linear_with, Grid, LinearStepper, Trajectory};
use crate::numerics::C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadraticForm {
    /// ∫∫ y² φ_x e^{−ipt} dx dt.
    pub i_complex: C64,
    /// ∫∫ y² Ψ_x dx dt = Re(Ē I_complex).
    pub i_psi: f64,
    pub horizon: f64,
    /// ‖y(horizon)‖ / max_t ‖y(t)‖.
    pub final_ratio: f64,
}

/// Largest ‖y(horizon)‖/peak accepted as decayed.
pub const DECAY_TOL: f64 = 1e-4;

/// Trapezoid in t of Σ_i h y_i² φ_x(x_i) e^{−ipt}.
pub fn quadratic_from_trajectory(traj: &Trajectory, field: &PsiField) -> (C64, f64) {
    let g = &traj.grid;
    let xs = g.xs();
    let phx: Vec<C64> = xs.iter().map(|&x| field.phi_x(x)).collect();
    let nt = traj.times.len();
    let mut ic = C64::new(0.0, 0.0);
    let mut ip = 0.0;
    for (n, (t, y)) in traj.times.iter().zip(&traj.states).enumerate() {
        let w = if n == 0 || n + 1 == nt { 0.5 } else { 1.0 } * g.dt;
        let ph = C64::from_polar(1.0, -field.p * t);
        let s: C64 = y.iter().zip(&phx).map(|(v, f)| f * (v * v)).sum::<C64>() * g.h;
        let sc = s * ph;
        ic += sc * w;
        // Ψ_x = Re(Ē φ_x e^{−ipt})
        ip += (field.e.conj() * sc).re * w;
    }
    (ic, ip)
}

/// Time-domain quadratic form for a control on [0,T] (T = grid horizon),
/// integrated to 3T.
pub fn quadratic_form(u: &ControlSignal, pair: &CriticalPair, grid: &Grid) -> Result<QuadraticForm> {
    let st = LinearStepper::for_grid(grid)?;
    quadratic_form_with(&st, u, &pair.psi(), grid)
}

pub fn quadratic_form_with(st: &LinearStepper, u: &ControlSignal, field: &PsiField, grid: &Grid) -> Result<QuadraticForm> {
    let horizon = 3.0 * grid.t_final;
    let g3 = grid.with_horizon(horizon);
    let traj = solve_linear_with(st, &g3, &vec![0.0; g3.interior()], &u.padded(horizon), None)?;
    let peak = traj.max_norm();
    if peak == 0.0 {
        return Ok(QuadraticForm { i_complex: C64::new(0.0, 0.0), i_psi: 0.0, horizon, final_ratio: 0.0 });
    }
    let final_norm = g3.norm(traj.final_state());
    if final_norm > DECAY_TOL * peak {
        return Err(KdvError::NotDecayed { final_norm, peak });
    }
    let (i_complex, i_psi) = quadratic_from_trajectory(&traj, field);
    Ok(QuadraticForm { i_complex, i_psi, horizon, final_ratio: final_norm / peak })
}

/// Frequency grid matching a control: spacing 2π/(M dt) with M dt ≥ 8·max(T, 1),
/// covering |z| ≤ bands·π/dt.
pub struct FrequencyGrid {
    pub z0: f64,
    pub dz: f64,
    pub m: usize,
    pub count: usize,
}

impl FrequencyGrid {
    pub fn for_control(u: &ControlSignal, bands: usize) -> Self {
        let k = u.samples.len();
        let m = (k - 1).max(1) * 8.max((8.0 / u.t_final()).ceil() as usize) + 1;
        let dz = 2.0 * std::f64::consts::PI / (m as f64 * u.dt);
        let half = (bands * m) / 2;
        FrequencyGrid { z0: -(half as f64) * dz, dz, m, count: 2 * half + 1 }
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z0 + j as f64 * self.dz
    }
}

/// ∫ û(z) conj(û(z−p)) ∫B(z,x)dx dz on the control's frequency grid.
pub fn parseval_quadratic(u: &ControlSignal, table: &BTable) -> Result<C64> {
    let fg = FrequencyGrid::for_control(u, 3);
    let p = table.field.p;
    let (_, a) = u.fourier_grid(fg.z0, fg.m, fg.count)?;
    let (_, b) = u.fourier_grid(fg.z0 - p, fg.m, fg.count)?;
    Ok((0..fg.count).map(|j| a[j] * b[j].conj() * table.eval(fg.z(j))).sum::<C64>() * fg.dz)
}
