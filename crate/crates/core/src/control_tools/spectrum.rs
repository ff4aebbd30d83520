use super::ControlSignal;
use crate::error::{KdvError, Result};
use crate::numerics::{C64, I};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// dt Σ x^n/(n+2)!, the transform weight of a half hat; `e` = e^{x}.
fn half_hat(x: C64, e: C64, dt: f64) -> C64 {
    if x.norm() < 0.5 {
        let mut s = C64::new(0.0, 0.0);
        let mut term = C64::new(0.5, 0.0);
        for n in 0..24 {
            s += term;
            term *= x / (n as f64 + 3.0);
        }
        return s * dt;
    }
    // dt [ −1/x − (1 − e^{x})/x² ]
    dt * (-1.0 / x - (1.0 - e) / (x * x))
}

/// sinc²(a) given cos(2a).
fn sinc2(a: f64, cos2a: f64) -> f64 {
    if a.abs() < 0.1 {
        let b = a * a;
        1.0 - b / 3.0 + 2.0 * b * b / 45.0 - b * b * b / 315.0 + 2.0 * b * b * b * b / 14175.0
    } else {
        0.5 * (1.0 - cos2a) / (a * a)
    }
}

impl ControlSignal {
    /// Unitary Fourier transform (1/√(2π))∫u e^{−izt}dt of the piecewise-linear
    /// interpolant extended by zero, given the node sum S(z) = Σ u_k e^{−izt_k}.
    /// `r1` = e^{iz dt}, `r2` = e^{−izT}.
    fn transform_from_sum(&self, z: f64, s: C64, r1: C64, r2: C64) -> C64 {
        let dt = self.dt;
        let n = self.samples.len() - 1;
        let mut acc = s * dt * sinc2(0.5 * z * dt, r1.re);
        // remove the outer halves of the first and last hats
        if self.samples[0] != 0.0 {
            acc -= self.samples[0] * half_hat(I * z * dt, r1, dt);
        }
        if self.samples[n] != 0.0 {
            acc -= self.samples[n] * r2 * half_hat(-I * z * dt, r1.conj(), dt);
        }
        acc * INV_SQRT_2PI
    }

    fn phasors(&self, z: f64) -> (C64, C64) {
        ((I * z * self.dt).exp(), (-I * z * self.t_final()).exp())
    }

    /// û(z), direct O(K) evaluation.
    pub fn fourier(&self, z: f64) -> C64 {
        let rot = (-I * z * self.dt).exp();
        let mut ph = C64::new(1.0, 0.0);
        let mut s = C64::new(0.0, 0.0);
        for (k, v) in self.samples.iter().enumerate() {
            if k % 256 == 0 {
                ph = (-I * z * self.dt * k as f64).exp();
            }
            s += *v * ph;
            ph *= rot;
        }
        let (r1, r2) = self.phasors(z);
        self.transform_from_sum(z, s, r1, r2)
    }

    /// û on the uniform grid z_j = z0 + j·dz (j = 0..count) with dz = 2π/(M dt)
    /// for an integer M ≥ K+1, via one FFT of length M and periodicity of the
    /// node sum in z with period 2π/dt.
    pub fn fourier_grid(&self, z0: f64, m: usize, count: usize) -> Result<(f64, Vec<C64>)> {
        let k = self.samples.len();
        if m < k {
            return Err(KdvError::Domain(format!("FFT length {m} shorter than signal ({k} samples)")));
        }
        let dz = 2.0 * PI / (m as f64 * self.dt);
        let mut buf: Vec<C64> = vec![C64::new(0.0, 0.0); m];
        for (i, v) in self.samples.iter().enumerate() {
            // modulation by e^{−i z0 t} shifts the grid origin to z0
            buf[i] = *v * (-I * z0 * self.dt * i as f64).exp();
        }
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let (step1, step2) = self.phasors(dz);
        let (mut r1, mut r2) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let vals = (0..count)
            .map(|j| {
                let z = z0 + j as f64 * dz;
                if j % 1024 == 0 {
                    (r1, r2) = self.phasors(z);
                } else {
                    r1 *= step1;
                    r2 *= step2;
                }
                self.transform_from_sum(z, buf[j % m], r1, r2)
            })
            .collect();
        Ok((dz, vals))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsNorm {
    pub s: f64,
    pub pad_factor: usize,
    pub value: f64,
}

/// Σ over j of |û(ξ_j)|²(1+ξ_j²)^s dξ on the FFT grid for horizon pad·T,
/// summing the aliased bands up to |ξ| ≤ bands·π/dt.
fn hs_sum(u: &ControlSignal, s: f64, pad: usize, bands: usize) -> Result<f64> {
    let k = u.samples.len();
    let m = pad * (k - 1) + 1;
    let half = m / 2;
    let count = bands * m;
    let z0 = -(half as f64) * 2.0 * PI / (m as f64 * u.dt) - ((bands - 1) / 2) as f64 * 2.0 * PI / u.dt;
    let (dz, vals) = u.fourier_grid(z0, m, count)?;
    Ok(vals
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let z = z0 + j as f64 * dz;
            let w = if s.fract() == 0.0 { (1.0 + z * z).powi(s as i32) } else { (1.0 + z * z).powf(s) };
            v.norm_sqr() * w
        })
        .sum::<f64>()
        * dz)
}

pub const MIN_PAD: usize = 4;

/// Padding factor so that the padded horizon exceeds T + 30.
pub fn default_pad(t_final: f64) -> usize {
    MIN_PAD.max(((t_final + 30.0) / t_final).ceil() as usize)
}

/// ‖u‖_{H^s(ℝ)} of the zero extension, s ∈ [−2, 1]. Computed at the default
/// padding and at twice the padding with twice the frequency range; the two
/// must agree to 1%.
pub fn sobolev_norm(u: &ControlSignal, s: f64) -> Result<HsNorm> {
    if !(-2.0..=1.0).contains(&s) {
        return Err(KdvError::Domain(format!("Sobolev index {s} outside [-2, 1]")));
    }
    if u.samples.iter().all(|v| *v == 0.0) {
        return Ok(HsNorm { s, pad_factor: default_pad(u.t_final()), value: 0.0 });
    }
    let pad = default_pad(u.t_final());
    // for s ≤ 0 the aliased tail beyond |ξ| = π/dt is negligible
    let (b0, b1) = if s <= 0.0 { (1, 3) } else { (3, 7) };
    let coarse = hs_sum(u, s, pad, b0)?.sqrt();
    let fine = hs_sum(u, s, 2 * pad, b1)?.sqrt();
    if (coarse - fine).abs() > 0.01 * fine {
        return Err(KdvError::SobolevConvergence { coarse, fine });
    }
    Ok(HsNorm { s, pad_factor: 2 * pad, value: fine })
}
