use super::ControlSignal;
use crate::critical_lengths::CriticalPair;
use crate::error::{KdvError, Result};
use crate::numerics::{Scaled, C64, I};
use crate::obstruction_experiments::FrequencyGrid;
use crate::spectral::h_scaled;
use serde::{Deserialize, Serialize};

pub const GAMMA_SCAN: [f64; 20] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0];
pub const MIN_H_PRIME: f64 = 1e-8;

/// ℋ = H/Γ with Γ(z) = z² − p², relative to a reference value.
fn calh(z: C64, len: f64, p: f64) -> Result<Scaled> {
    let h = h_scaled(z, len)?;
    Ok(Scaled { mantissa: h.mantissa / (z * z - p * p), log_scale: h.log_scale })
}

/// ℋ at a real point, averaging over a small circle near the removable zeros ±p.
pub(crate) fn calh_real(z: f64, len: f64, p: f64) -> Result<Scaled> {
    if (z.abs() - p.abs()).abs() > 1e-3 {
        return calh(C64::new(z, 0.0), len, p);
    }
    let parts: Vec<Scaled> = (0..4)
        .map(|k| calh(C64::new(z, 0.0) + C64::from_polar(2e-3, 0.25 * std::f64::consts::PI * (2 * k + 1) as f64), len, p))
        .collect::<Result<_>>()?;
    let s = parts.iter().map(|q| q.log_scale).fold(f64::NEG_INFINITY, f64::max);
    let m = parts.iter().map(|q| q.mantissa * (q.log_scale - s).exp()).sum::<C64>() / 4.0;
    Ok(Scaled { mantissa: m, log_scale: s })
}

/// (ℋ'(z+iγ)/ℋ(z), ln|ℋ(z)|) with ℋ' from a four-point Cauchy formula.
pub fn h_prime_ratio(z: f64, gamma: f64, len: f64, p: f64) -> Result<(C64, f64)> {
    let reference = calh_real(z, len, p)?;
    let w = C64::new(z, gamma);
    let r = 1e-2 * z.abs().max(1.0).powf(2.0 / 3.0);
    let r = r.min(0.5 * gamma);
    let mut s = C64::new(0.0, 0.0);
    for d in [C64::new(1.0, 0.0), I, C64::new(-1.0, 0.0), -I] {
        s += calh(w + d * r, len, p)?.div(&reference) / d;
    }
    Ok((s / (4.0 * r), reference.ln_abs()))
}

/// ℋ'_γ/ℋ sampled on a frequency grid, reusable for every control on that grid.
#[derive(Debug, Clone)]
pub struct NPlan {
    pub gamma: f64,
    pub alpha_abs: f64,
    pub ratio: Vec<C64>,
    /// min over the grid of |ℋ'(z+iγ)|.
    pub min_h_prime: f64,
    /// min over the grid of |ℋ(z)|.
    pub min_h: f64,
    pub z0: f64,
    pub dz: f64,
    pub m: usize,
    pub dt: f64,
    pub samples: usize,
}

fn plan_for(pair: &CriticalPair, gamma: f64, fg: &FrequencyGrid, dt: f64, samples: usize) -> Result<NPlan> {
    use rayon::prelude::*;
    let vals: Vec<(C64, f64)> = (0..fg.count).into_par_iter().map(|j| h_prime_ratio(fg.z(j), gamma, pair.len, pair.p)).collect::<Result<_>>()?;
    let min_h_prime = vals.iter().map(|(r, lh)| (r.norm().ln() + lh).exp()).fold(f64::INFINITY, f64::min);
    let min_h = vals.iter().map(|(_, lh)| lh.exp()).fold(f64::INFINITY, f64::min);
    Ok(NPlan {
        gamma,
        alpha_abs: 3.0 / pair.len,
        ratio: vals.into_iter().map(|v| v.0).collect(),
        min_h_prime,
        min_h,
        z0: fg.z0,
        dz: fg.dz,
        m: fg.m,
        dt,
        samples,
    })
}

impl NPlan {
    /// Plan for controls shaped like `u` (same dt and length). `gamma = 0`
    /// scans 0.1..2.0 and keeps the first admissible value.
    pub fn new(pair: &CriticalPair, u: &ControlSignal, gamma: f64) -> Result<Self> {
        let fg = FrequencyGrid::for_control(u, 3);
        let n = u.samples.len();
        if gamma > 0.0 {
            let plan = plan_for(pair, gamma, &fg, u.dt, n)?;
            if plan.min_h_prime <= MIN_H_PRIME {
                return Err(KdvError::NoGamma(format!("gamma = {gamma}: min |H'| = {:e}", plan.min_h_prime)));
            }
            return Ok(plan);
        }
        let mut tried = Vec::new();
        for g in GAMMA_SCAN {
            let plan = plan_for(pair, g, &fg, u.dt, n)?;
            if plan.min_h_prime > MIN_H_PRIME {
                return Ok(plan);
            }
            tried.push(format!("{g}: {:e}", plan.min_h_prime));
        }
        Err(KdvError::NoGamma(tried.join(", ")))
    }

    pub fn fits(&self, u: &ControlSignal) -> bool {
        u.samples.len() == self.samples && (u.dt - self.dt).abs() <= 1e-12 * self.dt
    }

    /// ŵ = û ℋ'_γ/ℋ on the plan's grid.
    pub fn w_hat(&self, u: &ControlSignal) -> Result<Vec<C64>> {
        if !self.fits(u) {
            return Err(KdvError::Domain("control does not match the N-functional plan".into()));
        }
        let (_, uh) = u.fourier_grid(self.z0, self.m, self.ratio.len())?;
        Ok(uh.iter().zip(&self.ratio).map(|(a, b)| a * b).collect())
    }

    /// N(u) = |α| ‖ŵ‖_{L²}, |α| = 3/L.
    pub fn value(&self, u: &ControlSignal) -> Result<f64> {
        let w = self.w_hat(u)?;
        Ok(self.alpha_abs * (w.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dz).sqrt())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NValue {
    pub value: f64,
    pub gamma: f64,
    pub min_h_prime: f64,
    pub min_h: f64,
}

pub fn n_functional(u: &ControlSignal, pair: &CriticalPair, gamma: f64) -> Result<NValue> {
    let plan = NPlan::new(pair, u, gamma)?;
    Ok(NValue { value: plan.value(u)?, gamma: plan.gamma, min_h_prime: plan.min_h_prime, min_h: plan.min_h })
}
