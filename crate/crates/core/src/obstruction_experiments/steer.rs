use crate::control_tools::{bump_control, cg_with, unreachable_basis, ControlMap, ControlSignal, DenseGramian, NullControlPlan};
use crate::critical_lengths::{CriticalPair, MBasis};
use crate::error::{domain, KdvError, Result};
use crate::kdv_solver::{solve_linear_with, solve_nonlinear, Grid, LinearStepper, SourceTerm};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteerConfig {
    pub n: usize,
    /// Upper bound on dt; the actual step divides T.
    pub dt_max: f64,
    /// Support length of the elementary null control v₁.
    pub support: f64,
    /// Number of admissible shifts of v₁ in [0, T − support].
    pub shifts: usize,
    pub max_iter: usize,
}

impl Default for SteerConfig {
    fn default() -> Self {
        SteerConfig { n: 128, dt_max: 2e-3, support: 2.4, shifts: 13, max_iter: 8 }
    }
}

/// Precomputed pieces of the fixed-point map for one (pair, T).
pub struct SteerPlan {
    pub pair: CriticalPair,
    pub grid: Grid,
    st: LinearStepper,
    gram: DenseGramian,
    alpha: f64,
    pub basis: MBasis,
    /// v₁ on [0, support], a null control with a nonzero second-order M-part.
    pub v1: ControlSignal,
    pub shift_times: Vec<f64>,
    /// M-coordinates of y₂(T) for a unit copy of v₁ at each shift.
    pub m_coords: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteerOutcome {
    pub control: ControlSignal,
    /// ‖y(T) − y_T‖/‖y_T‖ after each evaluation of 𝔾 (index 0: φ = y_T).
    pub residuals: Vec<f64>,
    pub diverged: bool,
}

fn angle(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

impl SteerPlan {
    pub fn new(pair: &CriticalPair, t_final: f64, cfg: SteerConfig) -> Result<Self> {
        if pair.dim_m != 2 || !pair.obstruction_applies {
            return domain(format!("steering needs dim M = 2 and E ≠ 0 (pair ({}, {}))", pair.k, pair.l));
        }
        if t_final <= PI / pair.p {
            return domain(format!("steering needs T > π/p = {}", PI / pair.p));
        }
        if !(cfg.support > 0.0 && cfg.support < t_final / 3.0) || cfg.shifts < 3 {
            return domain("v₁ support must lie in (0, T/3) with at least three shifts");
        }
        let steps = (t_final / cfg.dt_max).ceil() as usize;
        let dt = t_final / steps as f64;
        let grid = Grid::new(pair.len, cfg.n, dt, t_final)?;
        let st = LinearStepper::for_grid(&grid)?;
        let basis = unreachable_basis(&grid)?.ok_or_else(|| KdvError::Domain("length is not critical".into()))?;
        if basis.dim() != 2 {
            return domain("discrete unreachable subspace is not two-dimensional");
        }
        let gram = DenseGramian::new(ControlMap::new(&grid, 1, grid.steps())?);
        let alpha = 1e-12 * gram.trace / gram.dim() as f64;

        let sk = (cfg.support / dt).round() as usize;
        let support = sk as f64 * dt;
        let sgrid = grid.with_horizon(support);
        let free = bump_control(support, 0.25 * support, 0.2 * support, 1.0, dt)?;
        let v1 = NullControlPlan::new(&sgrid)?.close(&free)?.control;

        let span = t_final - support;
        let shift_times: Vec<f64> = (0..cfg.shifts).map(|j| ((span * j as f64 / (cfg.shifts - 1) as f64) / dt).floor() * dt).collect();
        let mut plan = SteerPlan { pair: pair.clone(), grid, st, gram, alpha, basis, v1, shift_times, m_coords: Vec::new() };
        plan.m_coords = plan.shift_times.clone().iter().map(|&s| plan.second_order_m(&plan.copy(s, 1.0))).collect::<Result<_>>()?;
        Ok(plan)
    }

    fn copy(&self, shift: f64, amp: f64) -> ControlSignal {
        self.v1.shifted(shift, self.grid.t_final).scaled(amp)
    }

    fn zero(&self) -> Vec<f64> {
        vec![0.0; self.grid.interior()]
    }

    /// y₂(T) of the second-order system driven by u₁ (with u₂ = 0).
    pub fn second_order_state(&self, u1: &ControlSignal) -> Result<Vec<f64>> {
        let y1 = solve_linear_with(&self.st, &self.grid, &self.zero(), u1, None)?;
        let src = SourceTerm::quadratic_from(&y1);
        Ok(solve_linear_with(&self.st, &self.grid, &self.zero(), &ControlSignal::zeros(self.grid.t_final, self.grid.dt), Some(&src))?.final_state().to_vec())
    }

    fn second_order_m(&self, u1: &ControlSignal) -> Result<[f64; 2]> {
        let c = self.basis.coefficients(&self.second_order_state(u1)?, self.grid.h);
        Ok([c[0], c[1]])
    }

    /// Copies of v₁ whose second-order M-coordinates add up to `target`: one
    /// copy if a shift points along it, else the cheapest admissible pair.
    pub fn select_u1(&self, target: [f64; 2]) -> Result<ControlSignal> {
        let tn = target[0].hypot(target[1]);
        if tn == 0.0 {
            return Ok(ControlSignal::zeros(self.grid.t_final, self.grid.dt));
        }
        let sup = self.v1.t_final();
        let mut best: Option<(f64, usize, f64, usize, f64)> = None;
        let n = self.m_coords.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.shift_times[j] - self.shift_times[i] < sup {
                    continue;
                }
                let (a, b) = (self.m_coords[i], self.m_coords[j]);
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() < 1e-14 * (a[0].hypot(a[1]) * b[0].hypot(b[1])) {
                    continue;
                }
                let ca = (target[0] * b[1] - target[1] * b[0]) / det;
                let cb = (a[0] * target[1] - a[1] * target[0]) / det;
                if ca < 0.0 || cb < 0.0 {
                    continue;
                }
                if best.map_or(true, |x| ca + cb < x.0) {
                    best = Some((ca + cb, i, ca, j, cb));
                }
            }
        }
        let (_, i, ca, j, cb) = best.ok_or_else(|| KdvError::Domain(format!("no pair of shifts spans direction {:.3} rad", angle(target))))?;
        self.copy(self.shift_times[i], ca.sqrt()).add(&self.copy(self.shift_times[j], cb.sqrt()))
    }

    /// Control of the linear system from 0 reaching `target` (projected onto M^⊥).
    pub fn reach(&self, target: &[f64]) -> ControlSignal {
        let goal: Vec<f64> = self.basis.project_out(target, self.grid.h);
        let nb = goal.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cg = cg_with(|p| self.gram.apply(p), &goal, self.alpha, 1e-10 * nb, 20_000);
        let g = self.gram.control_window(&cg.psi);
        let mut samples = vec![0.0; self.grid.steps() + 1];
        samples[1..].copy_from_slice(&g);
        ControlSignal { samples, dt: self.grid.dt }
    }

    /// 𝔾(φ) for initial state y0: M^⊥ part by HUM, M part by the quadratic
    /// construction, M^⊥ drift of y₂ removed by HUM.
    pub fn g_map(&self, y0: &[f64], phi: &[f64]) -> Result<ControlSignal> {
        let zero_u = ControlSignal::zeros(self.grid.t_final, self.grid.dt);
        let free = solve_linear_with(&self.st, &self.grid, y0, &zero_u, None)?;
        let d: Vec<f64> = phi.iter().zip(free.final_state()).map(|(a, b)| a - b).collect();
        let c = self.basis.coefficients(&d, self.grid.h);
        let u1 = self.select_u1([c[0], c[1]])?;
        let y2 = self.second_order_state(&u1)?;
        let lin: Vec<f64> = d.iter().zip(&y2).map(|(a, b)| a - b).collect();
        u1.add(&self.reach(&lin))
    }

    /// Angle error (degrees) between target and the second-order M-state of
    /// the selected u₁, for `count` equally spaced directions.
    pub fn rotation_coverage(&self, count: usize, scale: f64) -> Result<Vec<f64>> {
        (0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                let m = self.second_order_m(&self.select_u1([scale * th.cos(), scale * th.sin()])?)?;
                let mut d = (angle(m) - th).rem_euclid(2.0 * PI);
                if d > PI {
                    d = 2.0 * PI - d;
                }
                Ok(d.to_degrees())
            })
            .collect()
    }
}

/// Picard iteration of Λ(φ) = φ − ℙ(𝔾(φ)) + y_T started at φ = y_T. Stops
/// when the terminal error stops decreasing; returns the best control.
pub fn nonlinear_steer(plan: &SteerPlan, y0: &[f64], y_t: &[f64], rho: f64, max_iter: usize) -> Result<SteerOutcome> {
    let grid = &plan.grid;
    if y0.len() != grid.interior() || y_t.len() != grid.interior() {
        return domain("state length does not match the steering grid");
    }
    let tol = rho * (1.0 + 1e-9);
    if grid.norm(y0) > tol || grid.norm(y_t) > tol {
        return domain(format!("‖y0‖, ‖yT‖ must not exceed ρ = {rho}"));
    }
    let zero_u = ControlSignal::zeros(grid.t_final, grid.dt);
    let nt = grid.norm(y_t);
    if nt == 0.0 && grid.norm(y0) == 0.0 {
        return Ok(SteerOutcome { control: zero_u, residuals: vec![0.0], diverged: false });
    }
    let scale = if nt > 0.0 { nt } else { grid.norm(y0) };
    let mut phi = y_t.to_vec();
    let mut residuals = Vec::new();
    let mut best: Option<(f64, ControlSignal)> = None;
    for _ in 0..=max_iter {
        let u = plan.g_map(y0, &phi)?;
        let reached = solve_nonlinear(grid, y0, &u)?;
        let err: Vec<f64> = y_t.iter().zip(reached.final_state()).map(|(a, b)| a - b).collect();
        let r = grid.norm(&err) / scale;
        residuals.push(r);
        let improved = best.as_ref().map_or(true, |b| r < b.0);
        if improved {
            best = Some((r, u));
        } else {
            break;
        }
        phi.iter_mut().zip(&err).for_each(|(p, e)| *p += e);
    }
    let (r_best, control) = best.unwrap();
    let diverged = !r_best.is_finite() || residuals.last().map_or(false, |r| *r > residuals[0]);
    Ok(SteerOutcome { control, residuals, diverged })
}
