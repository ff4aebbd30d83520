//! Linear and nonlinear KdV on [0,L] with y(0)=y(L)=0, y_x(L)=u, plus the
//! periodic KdV–Burgers integrator and frequency-response utilities.

mod export;
mod periodic;
mod response;

pub use export::{read_binary, trajectory_binary, trajectory_csv};
pub use periodic::{kdvb_periodic_solve, smoothing_constant, PeriodicTrajectory};
pub use response::{empirical_frequency_response, frequency_response, frequency_response_dx0, EmpiricalResponse};

use crate::control_tools::ControlSignal;
use crate::error::{domain, KdvError, Result};
use crate::numerics::BandedLu;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(rename = "L")]
    pub len: f64,
    /// Number of cells; unknowns are the N−1 interior nodes.
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl Grid {
    pub fn new(len: f64, n: usize, dt: f64, t_final: f64) -> Result<Self> {
        if n < 32 {
            return domain(format!("grid needs N ≥ 32, got {n}"));
        }
        if !(len > 0.0 && dt > 0.0 && t_final >= 0.0) {
            return domain("grid needs L > 0, dt > 0, T ≥ 0");
        }
        Ok(Grid { len, n, h: len / n as f64, dt, t_final })
    }

    pub fn with_horizon(&self, t_final: f64) -> Self {
        Grid { t_final, ..*self }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn interior(&self) -> usize {
        self.n - 1
    }

    /// Interior node coordinates x_1 … x_{N−1}.
    pub fn xs(&self) -> Vec<f64> {
        (1..self.n).map(|i| i as f64 * self.h).collect()
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }
}

/// f = f₁ + ∂ₓf₂ sampled at every time node on the interior points
/// (f₂ vanishes at both ends).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceTerm {
    pub f1: Vec<Vec<f64>>,
    pub f2: Vec<Vec<f64>>,
}

impl SourceTerm {
    /// Assembled f at time node `n` (central difference for ∂ₓf₂).
    pub fn at(&self, n: usize, h: f64) -> Vec<f64> {
        let m = self.f1.get(n).map(|v| v.len()).or_else(|| self.f2.get(n).map(|v| v.len())).unwrap_or(0);
        let mut out = vec![0.0; m];
        if let Some(f1) = self.f1.get(n) {
            out.iter_mut().zip(f1).for_each(|(o, v)| *o += v);
        }
        if let Some(f2) = self.f2.get(n) {
            for i in 0..m {
                let r = if i + 1 < m { f2[i + 1] } else { 0.0 };
                let l = if i > 0 { f2[i - 1] } else { 0.0 };
                out[i] += (r - l) / (2.0 * h);
            }
        }
        out
    }

    /// Source −y₁y₁ₓ = ∂ₓ(−½y₁²) of the second-order system.
    pub fn quadratic_from(traj: &Trajectory) -> Self {
        SourceTerm { f1: Vec::new(), f2: traj.states.iter().map(|y| y.iter().map(|v| -0.5 * v * v).collect()).collect() }
    }

    /// ∫ f₁ dx at node n (mean-free requirement).
    pub fn f1_integral(&self, n: usize, h: f64) -> f64 {
        self.f1.get(n).map(|v| h * v.iter().sum::<f64>()).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub trace_left: Vec<f64>,
    pub trace_right: Vec<f64>,
}

pub fn trace_left(y: &[f64], h: f64) -> f64 {
    (4.0 * y[0] - y[1]) / (2.0 * h)
}

pub fn trace_right(y: &[f64], h: f64) -> f64 {
    let m = y.len();
    (-4.0 * y[m - 1] + y[m - 2]) / (2.0 * h)
}

impl Trajectory {
    fn start(grid: Grid, y0: Vec<f64>) -> Self {
        let h = grid.h;
        Trajectory { grid, times: vec![0.0], trace_left: vec![trace_left(&y0, h)], trace_right: vec![trace_right(&y0, h)], states: vec![y0] }
    }

    fn push(&mut self, t: f64, y: Vec<f64>) {
        self.trace_left.push(trace_left(&y, self.grid.h));
        self.trace_right.push(trace_right(&y, self.grid.h));
        self.times.push(t);
        self.states.push(y);
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|y| self.grid.norm(y)).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.norms().into_iter().fold(0.0, f64::max)
    }
}

/// A = D₁ + D₃ on the interior nodes (bandwidth 2) and the boundary weight
/// of u in the last row.
pub fn spatial_operator(n: usize, h: f64) -> BandedLu {
    let m = n - 1;
    let mut a = BandedLu::zeros(m, 2, 2);
    let c1 = 1.0 / (2.0 * h);
    let c3 = 1.0 / (2.0 * h * h * h);
    for r in 0..m {
        let i = r + 1;
        if r + 1 < m {
            a.add(r, r + 1, c1);
        }
        if r > 0 {
            a.add(r, r - 1, -c1);
        }
        if i == 1 {
            // (y₃ − 3y₂ + 3y₁ − y₀)/h³, one-sided first order
            let d = 1.0 / (h * h * h);
            a.add(r, r, 3.0 * d);
            if m > 1 {
                a.add(r, r + 1, -3.0 * d);
            }
            if m > 2 {
                a.add(r, r + 2, d);
            }
            continue;
        }
        // (y_{i+2} − 2y_{i+1} + 2y_{i−1} − y_{i−2})/(2h³)
        if r + 2 < m {
            a.add(r, r + 2, c3);
        }
        if i + 2 == n + 1 {
            // ghost y_{N+1} = y_{N−1} + 2hu
            a.add(r, r, c3);
        }
        if r + 1 < m {
            a.add(r, r + 1, -2.0 * c3);
        }
        a.add(r, r - 1, 2.0 * c3);
        if r >= 2 {
            a.add(r, r - 2, -c3);
        }
    }
    a
}

/// Coefficient of u in the last interior row of A·y (from the ghost node).
pub fn control_weight(h: f64) -> f64 {
    1.0 / (h * h)
}

/// Crank–Nicolson stepper for y_t + A y + b u = f.
#[derive(Debug, Clone)]
pub struct LinearStepper {
    pub m: usize,
    pub h: f64,
    pub dt: f64,
    lhs: BandedLu,
    rhs: BandedLu,
    pub a: BandedLu,
}

impl LinearStepper {
    pub fn new(n: usize, h: f64, dt: f64) -> Result<Self> {
        let a = spatial_operator(n, h);
        let m = n - 1;
        let mut lhs = BandedLu::zeros(m, 2, 2);
        let mut rhs = BandedLu::zeros(m, 2, 2);
        for r in 0..m {
            for c in r.saturating_sub(2)..=(r + 2).min(m - 1) {
                let v = a.get(r, c) * dt / 2.0;
                let id = if r == c { 1.0 } else { 0.0 };
                lhs.set(r, c, id + v);
                rhs.set(r, c, id - v);
            }
        }
        Ok(LinearStepper { m, h, dt, lhs: lhs.factor()?, rhs, a })
    }

    pub fn for_grid(grid: &Grid) -> Result<Self> {
        Self::new(grid.n, grid.h, grid.dt)
    }

    /// Explicit part: (I − dt/2 A) y − dt/2 b (u₀+u₁) + dt/2 (f₀+f₁).
    pub fn explicit(&self, y: &[f64], u0: f64, u1: f64, f: Option<(&[f64], &[f64])>) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.rhs.matvec(y, &mut out);
        out[self.m - 1] -= 0.5 * self.dt * control_weight(self.h) * (u0 + u1);
        if let Some((f0, f1)) = f {
            for i in 0..self.m {
                out[i] += 0.5 * self.dt * (f0[i] + f1[i]);
            }
        }
        out
    }

    pub fn implicit_solve(&self, b: &mut [f64]) {
        self.lhs.solve(b);
    }

    pub fn step(&self, y: &[f64], u0: f64, u1: f64, f: Option<(&[f64], &[f64])>) -> Vec<f64> {
        let mut b = self.explicit(y, u0, u1, f);
        self.lhs.solve(&mut b);
        b
    }

    /// Transpose of the homogeneous update: B^T q with B = (I+dt/2 A)^{-1}(I−dt/2 A).
    /// Returns (B^T q, (I+dt/2A)^{-T} q) so callers can read the control weight.
    pub fn step_transpose(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut r = q.to_vec();
        self.lhs.solve_t(&mut r);
        let mut out = vec![0.0; self.m];
        self.rhs.matvec_t(&r, &mut out);
        (out, r)
    }
}

fn check_grid_vec(grid: &Grid, y0: &[f64]) -> Result<()> {
    if y0.len() != grid.interior() {
        return domain(format!("initial state has {} values, grid expects {}", y0.len(), grid.interior()));
    }
    Ok(())
}

/// Linear KdV: y_t + y_x + y_xxx = f, y(t,0)=y(t,L)=0, y_x(t,L)=u(t).
pub fn solve_linear(grid: &Grid, y0: &[f64], u: &ControlSignal, f: Option<&SourceTerm>) -> Result<Trajectory> {
    check_grid_vec(grid, y0)?;
    let st = LinearStepper::for_grid(grid)?;
    solve_linear_with(&st, grid, y0, u, f)
}

pub fn solve_linear_with(st: &LinearStepper, grid: &Grid, y0: &[f64], u: &ControlSignal, f: Option<&SourceTerm>) -> Result<Trajectory> {
    check_grid_vec(grid, y0)?;
    let mut traj = Trajectory::start(*grid, y0.to_vec());
    let mut y = y0.to_vec();
    let mut f_prev = f.map(|s| s.at(0, grid.h));
    for n in 0..grid.steps() {
        let (t0, t1) = (n as f64 * grid.dt, (n + 1) as f64 * grid.dt);
        let f_next = f.map(|s| s.at(n + 1, grid.h));
        let pair = match (&f_prev, &f_next) {
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => Some((a.as_slice(), b.as_slice())),
            _ => None,
        };
        y = st.step(&y, u.at(t0), u.at(t1), pair);
        traj.push(t1, y.clone());
        f_prev = f_next;
    }
    Ok(traj)
}

fn nonlinear_term(y: &[f64], h: f64) -> Vec<f64> {
    let m = y.len();
    (0..m)
        .map(|i| {
            let r = if i + 1 < m { y[i + 1] } else { 0.0 };
            let l = if i > 0 { y[i - 1] } else { 0.0 };
            (r * r - l * l) / (4.0 * h)
        })
        .collect()
}

pub const PICARD_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 5;

struct NonlinearSteppers {
    levels: Vec<LinearStepper>,
    n: usize,
    h: f64,
    dt: f64,
}

impl NonlinearSteppers {
    fn level(&mut self, k: usize) -> Result<&LinearStepper> {
        while self.levels.len() <= k {
            let d = self.dt / (1usize << self.levels.len()) as f64;
            self.levels.push(LinearStepper::new(self.n, self.h, d)?);
        }
        Ok(&self.levels[k])
    }
}

fn picard_step(st: &LinearStepper, y: &[f64], u0: f64, u1: f64) -> Option<Vec<f64>> {
    let n0 = nonlinear_term(y, st.h);
    let base = st.explicit(y, u0, u1, None);
    let mut cur = y.to_vec();
    for it in 0..8 {
        let n1 = nonlinear_term(&cur, st.h);
        let mut b: Vec<f64> = base.iter().zip(n0.iter().zip(&n1)).map(|(b, (a, c))| b - 0.5 * st.dt * (a + c)).collect();
        st.implicit_solve(&mut b);
        let diff = b.iter().zip(&cur).fold(0.0, |m: f64, (a, c)| m.max((a - c).abs()));
        let scale = b.iter().fold(0.0, |m: f64, a| m.max(a.abs())).max(1.0);
        cur = b;
        if it >= 1 && diff <= PICARD_TOL * scale {
            return Some(cur);
        }
        if !diff.is_finite() {
            return None;
        }
    }
    None
}

fn advance(sts: &mut NonlinearSteppers, level: usize, y: &[f64], t0: f64, u: &ControlSignal) -> Result<Vec<f64>> {
    let d = sts.dt / (1usize << level) as f64;
    let st = sts.level(level)?.clone();
    if let Some(next) = picard_step(&st, y, u.at(t0), u.at(t0 + d)) {
        return Ok(next);
    }
    if level >= MAX_HALVINGS {
        return Err(KdvError::Picard { halvings: level, t: t0 });
    }
    let mid = advance(sts, level + 1, y, t0, u)?;
    advance(sts, level + 1, &mid, t0 + d / 2.0, u)
}

/// y_t + y_x + y_xxx + y y_x = 0 with the same boundary conditions.
pub fn solve_nonlinear(grid: &Grid, y0: &[f64], u: &ControlSignal) -> Result<Trajectory> {
    check_grid_vec(grid, y0)?;
    let mut sts = NonlinearSteppers { levels: Vec::new(), n: grid.n, h: grid.h, dt: grid.dt };
    let mut traj = Trajectory::start(*grid, y0.to_vec());
    let mut y = y0.to_vec();
    for n in 0..grid.steps() {
        let t0 = n as f64 * grid.dt;
        y = advance(&mut sts, 0, &y, t0, u)?;
        traj.push(t0 + grid.dt, y.clone());
    }
    Ok(traj)
}

/// Residual of d/dt ∫yΨ − ½∫y²Ψ_x = 0 between consecutive nodes (trapezoid
/// in time); returns the largest |residual| / dt normalised by max ∫|yΨ|.
pub fn psi_bracket_residual(traj: &Trajectory, field: &crate::critical_lengths::PsiField) -> f64 {
    let g = &traj.grid;
    let xs = g.xs();
    let mut a = Vec::with_capacity(traj.times.len());
    let mut b = Vec::with_capacity(traj.times.len());
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let psi = field.sample_psi(*t, &xs);
        let psix = field.sample_psi_x(*t, &xs);
        a.push(g.dot(y, &psi));
        let y2: Vec<f64> = y.iter().map(|v| v * v).collect();
        b.push(0.5 * g.dot(&y2, &psix));
    }
    let scale = b.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(1e-300);
    let mut worst: f64 = 0.0;
    for n in 0..a.len() - 1 {
        let dt = traj.times[n + 1] - traj.times[n];
        let r = (a[n + 1] - a[n]) / dt - 0.5 * (b[n] + b[n + 1]);
        worst = worst.max(r.abs());
    }
    worst / scale
}
