use super::ControlSignal;
use crate::critical_lengths::{m_basis_group, representations, CriticalPair, MBasis};
use crate::error::{domain, KdvError, Result};
use crate::kdv_solver::{control_weight, Grid, LinearStepper};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Discrete control-to-final-state map of the Crank–Nicolson scheme from the
/// zero state, with control nodes k0..=k1 active (all others zero).
pub struct ControlMap {
    pub grid: Grid,
    pub st: LinearStepper,
    pub k0: usize,
    pub k1: usize,
}

impl ControlMap {
    pub fn new(grid: &Grid, k0: usize, k1: usize) -> Result<Self> {
        if k0 > k1 || k1 > grid.steps() {
            return domain("control window is empty or exceeds the horizon");
        }
        Ok(ControlMap { grid: *grid, st: LinearStepper::for_grid(grid)?, k0, k1 })
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn active(&self) -> usize {
        self.k1 + 1 - self.k0
    }

    fn is_active(&self, k: usize) -> bool {
        k >= self.k0 && k <= self.k1
    }

    /// y(T) for the control with samples `u` on nodes k0..=k1.
    pub fn forward(&self, u: &[f64]) -> Vec<f64> {
        let kk = self.steps();
        let at = |k: usize| if self.is_active(k) { u[k - self.k0] } else { 0.0 };
        let mut y = vec![0.0; self.st.m];
        for n in self.k0.saturating_sub(1)..kk {
            y = self.st.step(&y, at(n), at(n + 1), None);
        }
        y
    }

    /// Transpose of `forward` (Euclidean inner products on both sides).
    pub fn adjoint(&self, psi: &[f64]) -> Vec<f64> {
        let kk = self.steps();
        let c = -0.5 * self.st.dt * control_weight(self.st.h);
        let mut g = vec![0.0; self.active()];
        let mut q = psi.to_vec();
        for j in 0..=(kk - self.k0).min(kk - 1) {
            let (next, r) = self.st.step_transpose(&q);
            let a = c * r[self.st.m - 1];
            if self.is_active(kk - 1 - j) {
                g[kk - 1 - j - self.k0] += a;
            }
            if self.is_active(kk - j) {
                g[kk - j - self.k0] += a;
            }
            q = next;
        }
        g
    }

    /// Λψ = S Sᵀψ / dt (controls weighted by dt).
    pub fn gramian_apply(&self, psi: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = self.adjoint(psi).iter().map(|v| v / self.st.dt).collect();
        self.forward(&g)
    }

    /// trace(Λ) = Σ_k ‖S e_k‖² / dt.
    pub fn gramian_trace(&self) -> f64 {
        let kk = self.steps();
        let m = self.st.m;
        let mut e = vec![0.0; m];
        e[m - 1] = -0.5 * self.st.dt * control_weight(self.st.h);
        self.st.implicit_solve(&mut e);
        // v_j = B^j c
        let mut v_prev: Vec<f64> = vec![0.0; m];
        let mut v = e;
        let mut total = 0.0;
        // column k = v_{j−1} [j ≥ 1] + v_j [k ≥ 1] with j = K − k
        for j in 0..=kk {
            let k = kk - j;
            if self.is_active(k) {
                total += (0..m)
                    .map(|i| {
                        let s = if j >= 1 { v_prev[i] } else { 0.0 } + if k >= 1 { v[i] } else { 0.0 };
                        s * s
                    })
                    .sum::<f64>();
            }
            v_prev = v.clone();
            v = self.st.step(&v, 0.0, 0.0, None);
        }
        total / self.st.dt
    }

    pub fn control(&self, psi: &[f64]) -> ControlSignal {
        let g = self.adjoint(psi);
        let mut samples = vec![0.0; self.steps() + 1];
        for (i, v) in g.iter().enumerate() {
            samples[self.k0 + i] = v / self.st.dt;
        }
        ControlSignal { samples, dt: self.grid.dt }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CgOutcome {
    pub psi: Vec<f64>,
    /// ‖Λψ − b‖/‖b‖ of the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// CG on (Λ + αI)ψ = b, stopping once ‖Λψ − b‖ ≤ tol·scale.
pub fn gramian_cg(map: &ControlMap, b: &[f64], alpha: f64, tol: f64, scale: f64, max_iter: usize) -> CgOutcome {
    cg_with(|p| map.gramian_apply(p), b, alpha, tol * scale, max_iter)
}

pub const HUM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumResult {
    pub control: ControlSignal,
    /// ‖y(T) − goal‖/‖goal‖, goal being the target (minus its M-part when projecting).
    pub residual: f64,
    pub converged: bool,
    /// ‖P_M target‖/‖target‖ when L is critical (0 otherwise).
    pub m_projection: f64,
    pub alpha: f64,
}

/// All critical pairs whose length equals `len` to 1e-9 relative.
pub fn pairs_at_length(len: f64) -> Vec<(u32, u32)> {
    let s = 3.0 * len * len / (4.0 * PI * PI);
    let r = s.round();
    if r < 1.0 || (s - r).abs() > 1e-9 * s {
        return Vec::new();
    }
    representations(r as u64)
}

/// Unreachable subspace on the grid's interior nodes (empty if L is not critical).
pub fn unreachable_basis(grid: &Grid) -> Result<Option<MBasis>> {
    match pairs_at_length(grid.len).first() {
        None => Ok(None),
        Some(&(k, l)) => Ok(Some(m_basis_group(&CriticalPair::new(k, l)?, &grid.xs(), grid.h)?)),
    }
}

/// Minimum-L² control driving 0 to `target` at the grid horizon. `tikhonov` is
/// relative to trace(Λ)/dim. With `project` the M-component is removed first.
pub fn hum_control(grid: &Grid, target: &[f64], tikhonov: f64, project: bool) -> Result<HumResult> {
    if target.len() != grid.interior() {
        return domain("target length does not match grid");
    }
    let basis = unreachable_basis(grid)?;
    let nt = grid.norm(target);
    let m_projection = match (&basis, nt > 0.0) {
        (Some(b), true) => grid.norm(&b.project(target, grid.h)) / nt,
        _ => 0.0,
    };
    let goal: Vec<f64> = match (&basis, project) {
        (Some(b), true) => b.project_out(target, grid.h),
        _ => target.to_vec(),
    };
    if !(tikhonov >= 0.0) {
        return domain("tikhonov must be nonnegative");
    }
    let gram = DenseGramian::new(ControlMap::new(grid, 1, grid.steps())?);
    let alpha = tikhonov * gram.trace / target.len() as f64;
    let psi = gram.solve(&goal, alpha)?;
    let mut samples = vec![0.0; grid.steps() + 1];
    samples[1..].copy_from_slice(&gram.control_window(&psi));
    let control = ControlSignal { samples, dt: grid.dt };
    let reached = gram.map.forward(&control.samples[1..]);
    let ng = grid.norm(&goal);
    let residual = if ng <= 1e-10 * nt { 0.0 } else { grid.norm(&reached.iter().zip(&goal).map(|(a, b)| a - b).collect::<Vec<_>>()) / ng };
    Ok(HumResult { control, residual, converged: residual <= HUM_TOL, m_projection, alpha })
}

/// ⟨Λa, b⟩ − ⟨a, Λb⟩ relative to ‖Λa‖‖b‖.
pub fn gramian_asymmetry(grid: &Grid, a: &[f64], b: &[f64]) -> Result<f64> {
    let map = ControlMap::new(grid, 1, grid.steps())?;
    let la = map.gramian_apply(a);
    let lb = map.gramian_apply(b);
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let n = |x: &[f64]| d(x, x).sqrt();
    Ok((d(&la, b) - d(a, &lb)).abs() / (n(&la) * n(b)).max(n(a) * n(&lb)))
}

/// Λ assembled column by column from adjoint runs: Λ_ij = ⟨Sᵀe_i, Sᵀe_j⟩/dt.
/// Also keeps Sᵀe_i so controls are formed without further solves.
pub struct DenseGramian {
    pub map: ControlMap,
    /// Sᵀe_i for every interior node i.
    pub rows: Vec<Vec<f64>>,
    /// Row-major m×m.
    pub lambda: Vec<f64>,
    pub trace: f64,
}

impl DenseGramian {
    pub fn new(map: ControlMap) -> Self {
        use rayon::prelude::*;
        let m = map.st.m;
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                map.adjoint(&e)
            })
            .collect();
        let dt = map.st.dt;
        let lambda: Vec<f64> = (0..m * m)
            .into_par_iter()
            .map(|ij| {
                let (i, j) = (ij / m, ij % m);
                rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>() / dt
            })
            .collect();
        let trace = (0..m).map(|i| lambda[i * m + i]).sum();
        DenseGramian { map, rows, lambda, trace }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m).map(|i| self.lambda[i * m..(i + 1) * m].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Solves (Λ + αI)ψ = b by Cholesky.
    pub fn solve(&self, b: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let m = self.dim();
        let mut a = nalgebra::DMatrix::from_row_slice(m, m, &self.lambda);
        for i in 0..m {
            a[(i, i)] += alpha;
        }
        let ch = a.cholesky().ok_or_else(|| KdvError::Domain("Gramian is not numerically positive definite; raise tikhonov".into()))?;
        Ok(ch.solve(&nalgebra::DVector::from_column_slice(b)).as_slice().to_vec())
    }

    /// Control Sᵀψ/dt on the active window.
    pub fn control_window(&self, psi: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.map.active()];
        for (r, c) in self.rows.iter().zip(psi) {
            for (gi, ri) in g.iter_mut().zip(r) {
                *gi += c * ri;
            }
        }
        g.iter().map(|v| v / self.map.st.dt).collect()
    }
}

/// CG with an arbitrary symmetric operator.
pub fn cg_with<F: Fn(&[f64]) -> Vec<f64>>(apply: F, b: &[f64], alpha: f64, tol_abs: f64, max_iter: usize) -> CgOutcome {
    let m = b.len();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb == 0.0 {
        return CgOutcome { psi: vec![0.0; m], residual: 0.0, iterations: 0, converged: true };
    }
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; m];
    let mut lx = vec![0.0; m];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut best = (x.clone(), 1.0);
    for it in 1..=max_iter {
        let lp = apply(&p);
        let ap: Vec<f64> = lp.iter().zip(&p).map(|(a, q)| a + alpha * q).collect();
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgOutcome { psi: best.0, residual: best.1, iterations: it, converged: false };
        }
        let a = rr / pap;
        for i in 0..m {
            x[i] += a * p[i];
            lx[i] += a * lp[i];
            r[i] -= a * ap[i];
        }
        let true_res = lx.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        if true_res / nb < best.1 {
            best = (x.clone(), true_res / nb);
        }
        if true_res <= tol_abs {
            return CgOutcome { psi: x, residual: true_res / nb, iterations: it, converged: true };
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
    }
    CgOutcome { psi: best.0, residual: best.1, iterations: max_iter, converged: false }
}
