use super::hum::{cg_with, unreachable_basis, ControlMap, DenseGramian};
use super::ControlSignal;
use crate::critical_lengths::MBasis;
use crate::error::{domain, Result};
use crate::kdv_solver::{solve_linear_with, Grid, LinearStepper};
use serde::{Deserialize, Serialize};

pub const NULL_TOL: f64 = 1e-5;
pub const NULL_MAX_ITER: usize = 20_000;
pub const NULL_TIKHONOV: f64 = 1e-14;
const CG_RESTARTS: usize = 8;
const PEAK_PASSES: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullControl {
    pub control: ControlSignal,
    /// ‖y(T)‖ / max_t ‖y(t)‖ along the verified run.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// ‖P_M y(T)‖ / max_t ‖y(t)‖ (0 when L is not critical).
    pub m_residual: f64,
    pub peak_norm: f64,
}

/// Reusable closing machinery for one grid: the Gramian of the window
/// [T/2, T] is assembled once from adjoint runs.
pub struct NullControlPlan {
    pub grid: Grid,
    st: LinearStepper,
    gram: DenseGramian,
    alpha: f64,
    basis: Option<MBasis>,
    /// Free controls may overlap the correction window.
    overlap: bool,
    pub max_iter: usize,
    /// Target for ‖y(T)‖/max_t ‖y(t)‖.
    pub tol: f64,
}

impl NullControlPlan {
    pub fn new(grid: &Grid) -> Result<Self> {
        Self::with_tikhonov(grid, NULL_TIKHONOV)
    }

    pub fn with_tikhonov(grid: &Grid, tikhonov: f64) -> Result<Self> {
        // correction vanishes at both window ends: nodes K/2+1 ..= K−1
        let kk = grid.steps();
        let map = ControlMap::new(grid, kk / 2 + 1, kk - 1)?;
        let st = map.st.clone();
        let gram = DenseGramian::new(map);
        let alpha = tikhonov * gram.trace / gram.dim() as f64;
        Ok(NullControlPlan { grid: *grid, st, gram, alpha, basis: unreachable_basis(grid)?, overlap: false, max_iter: NULL_MAX_ITER, tol: NULL_TOL })
    }

    /// Orthogonal projection onto null controls: the correction lives on
    /// nodes 1 ..= K−1 and removes the component of u in the row space of the
    /// control-to-state map, so it never exceeds u in L².
    pub fn projection(grid: &Grid) -> Result<Self> {
        let kk = grid.steps();
        let map = ControlMap::new(grid, 1, kk - 1)?;
        let st = map.st.clone();
        let gram = DenseGramian::new(map);
        let alpha = NULL_TIKHONOV * gram.trace / gram.dim() as f64;
        Ok(NullControlPlan { grid: *grid, st, gram, alpha, basis: unreachable_basis(grid)?, overlap: true, max_iter: NULL_MAX_ITER, tol: NULL_TOL })
    }

    /// Adds to `u_free` the correction v on the plan's window minimizing
    /// ‖y(T)‖² + α‖v‖².
    pub fn close(&self, u_free: &ControlSignal) -> Result<NullControl> {
        let grid = &self.grid;
        if (u_free.dt - grid.dt).abs() > 1e-12 * grid.dt {
            return domain("free control and grid use different dt");
        }
        let k0 = self.gram.map.k0;
        if !self.overlap && u_free.samples.len() > k0 && u_free.samples[k0..].iter().any(|v| *v != 0.0) {
            return domain("free control must vanish after T/2");
        }
        let base = u_free.padded(grid.t_final);
        let zero = vec![0.0; grid.interior()];
        let free = solve_linear_with(&self.st, grid, &zero, &base, None)?;
        let peak = free.max_norm();
        if peak == 0.0 {
            return Ok(NullControl { control: base, residual: 0.0, converged: true, iterations: 0, m_residual: 0.0, peak_norm: 0.0 });
        }
        let b: Vec<f64> = free.final_state().iter().map(|v| -v).collect();
        let mut psi = vec![0.0; b.len()];
        let mut iterations = 0;
        // the closed trajectory peaks lower than the free one, so the target
        // is re-based on the verified peak until it holds
        let mut peak_ref = peak;
        let mut pass = 0;
        loop {
            // Euclidean tolerance equivalent to ‖·‖_h ≤ tol·peak
            let tol_abs = 0.25 * self.tol * peak_ref / grid.h.sqrt();
            // CG loses conjugacy on this ill-conditioned Gramian, so restart
            // from the current iterate on the true residual
            for _ in 0..CG_RESTARTS {
                let lp = self.gram.apply(&psi);
                let miss = lp.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                if miss <= tol_abs || iterations >= self.max_iter {
                    break;
                }
                let r: Vec<f64> = b.iter().zip(lp.iter().zip(&psi)).map(|(c, (a, x))| c - a - self.alpha * x).collect();
                let cg = cg_with(|p| self.gram.apply(p), &r, self.alpha, tol_abs, self.max_iter - iterations);
                psi.iter_mut().zip(&cg.psi).for_each(|(x, d)| *x += d);
                iterations += cg.iterations;
            }
            let v = self.gram.control_window(&psi);
            let mut samples = base.samples.clone();
            for (s, a) in samples[k0..].iter_mut().zip(&v) {
                *s += a;
            }
            let control = ControlSignal { samples, dt: grid.dt };
            let run = solve_linear_with(&self.st, grid, &zero, &control, None)?;
            let peak = run.max_norm();
            let residual = grid.norm(run.final_state()) / peak;
            pass += 1;
            if residual <= self.tol || pass >= PEAK_PASSES || iterations >= self.max_iter {
                let m_residual = match &self.basis {
                    Some(bm) => grid.norm(&bm.project(run.final_state(), grid.h)) / peak,
                    None => 0.0,
                };
                return Ok(NullControl { control, residual, converged: residual <= self.tol, iterations, m_residual, peak_norm: peak });
            }
            peak_ref = peak;
        }
    }
}

pub fn null_control(grid: &Grid, u_free: &ControlSignal) -> Result<NullControl> {
    NullControlPlan::new(grid)?.close(u_free)
}
