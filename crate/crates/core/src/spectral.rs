//! Boundary-value determinants and transfer functions Q, det Q, P, Ξ, G, H.

use crate::complex_cubic::{branch_points, solve_cubic, RootTriple};
use crate::error::{domain, Result};
use crate::numerics::{cauchy_derivative, exp_sum, gauss_legendre, Scaled, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// |Ξ| below which G and H are evaluated as removable singularities.
pub const XI_GUARD: f64 = 1e-8;
pub const REMOVABLE_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSample {
    pub z: C64,
    pub l: f64,
    pub lambda: [C64; 3],
    pub q: [[C64; 3]; 3],
    pub det_q: C64,
    pub p: C64,
    pub xi: C64,
    pub g: C64,
    pub h: C64,
}

fn det3(m: &[[C64; 3]; 3]) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn xi_of(l: &[C64; 3]) -> C64 {
    -(l[1] - l[0]) * (l[2] - l[1]) * (l[0] - l[2])
}

/// det Q = Σ (λ_{j+1} − λ_j) e^{−λ_{j+2} L}, in scaled form.
pub fn det_q_scaled(lam: &[C64; 3], len: f64) -> Scaled {
    let t: Vec<(C64, C64)> = (0..3).map(|j| (lam[(j + 1) % 3] - lam[j], -lam[(j + 2) % 3] * len)).collect();
    exp_sum(&t)
}

/// P = Σ λ_j (e^{λ_{j+2} L} − e^{λ_{j+1} L}), in scaled form.
pub fn p_scaled(lam: &[C64; 3], len: f64) -> Scaled {
    let mut t = Vec::with_capacity(6);
    for j in 0..3 {
        t.push((lam[j], lam[(j + 2) % 3] * len));
        t.push((-lam[j], lam[(j + 1) % 3] * len));
    }
    exp_sum(&t)
}

fn raw_gh(z: C64, len: f64) -> Result<(C64, C64, C64)> {
    let r = solve_cubic(z)?;
    let xi = xi_of(&r.lambda);
    Ok((p_scaled(&r.lambda, len).value(), det_q_scaled(&r.lambda, len).value(), xi))
}

fn near_branch(z: C64) -> bool {
    branch_points().iter().any(|b| (z - b).norm() < 2.0 * REMOVABLE_RADIUS)
}

/// (G, H) at z; removable-singularity averaging when Ξ is small.
pub fn gh(z: C64, len: f64) -> Result<(C64, C64)> {
    let (p, d, xi) = raw_gh(z, len)?;
    if xi.norm() > XI_GUARD && !near_branch(z) {
        return Ok((p / xi, d / xi));
    }
    let mut g = C64::new(0.0, 0.0);
    let mut h = C64::new(0.0, 0.0);
    for k in 0..4 {
        let w = z + C64::from_polar(REMOVABLE_RADIUS, PI / 4.0 + k as f64 * PI / 2.0);
        let (p, d, xi) = raw_gh(w, len)?;
        g += p / xi;
        h += d / xi;
    }
    let (g, h) = (g / 4.0, h / 4.0);
    Ok((g, h))
}

/// H = det Q / Ξ in scaled form, for arguments where det Q over- or underflows.
pub fn h_scaled(z: C64, len: f64) -> Result<Scaled> {
    let one = |w: C64| -> Result<Scaled> {
        let r = solve_cubic(w)?;
        let d = det_q_scaled(&r.lambda, len);
        Ok(Scaled { mantissa: d.mantissa / xi_of(&r.lambda), log_scale: d.log_scale })
    };
    let xi = xi_of(&solve_cubic(z)?.lambda);
    if xi.norm() > XI_GUARD && !near_branch(z) {
        return one(z);
    }
    let parts: Vec<Scaled> = (0..4)
        .map(|k| one(z + C64::from_polar(REMOVABLE_RADIUS, PI / 4.0 + k as f64 * PI / 2.0)))
        .collect::<Result<_>>()?;
    let s = parts.iter().map(|p| p.log_scale).fold(f64::NEG_INFINITY, f64::max);
    let m = parts.iter().map(|p| p.mantissa * (p.log_scale - s).exp()).sum::<C64>() / 4.0;
    Ok(Scaled { mantissa: m, log_scale: s })
}

pub fn h_value(z: C64, len: f64) -> Result<C64> {
    Ok(gh(z, len)?.1)
}

pub fn g_value(z: C64, len: f64) -> Result<C64> {
    Ok(gh(z, len)?.0)
}

pub fn spectral_sample(z: C64, len: f64) -> Result<SpectralSample> {
    if !(len > 0.0) || !len.is_finite() {
        return domain(format!("spectral_sample: length must be positive, got {len}"));
    }
    let r = solve_cubic(z)?;
    let lam = r.lambda;
    let e = lam.map(|l| (l * len).exp());
    let q = [[C64::new(1.0, 0.0); 3], e, [lam[0] * e[0], lam[1] * e[1], lam[2] * e[2]]];
    let det_q = det_q_scaled(&lam, len).value();
    let p = p_scaled(&lam, len).value();
    let xi = xi_of(&lam);
    let (g, h) = gh(z, len)?;
    Ok(SpectralSample { z, l: len, lambda: lam, q, det_q, p, xi, g, h })
}

impl SpectralSample {
    /// Determinant of the stored 3×3 matrix.
    pub fn det_of_q(&self) -> C64 {
        det3(&self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroSource {
    ClosedForm,
    RootSearch,
    Shooting,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenFrequency {
    pub z: f64,
    pub multiplicity: u32,
    pub lambda_at_root: [C64; 3],
    pub source: ZeroSource,
    pub h_abs: f64,
    pub dh_abs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroSearch {
    pub zeros: Vec<EigenFrequency>,
    /// Grid candidates whose Newton iteration did not settle.
    pub unresolved: Vec<f64>,
}

pub const ZERO_GRID_STEP: f64 = 1e-3;
pub const SIMPLE_THRESHOLD: f64 = 1e-6;

fn dh(z: C64, len: f64) -> C64 {
    cauchy_derivative(|w| h_value(w, len).unwrap_or_default(), z, 1e-4)
}

/// Newton on H from a real starting point; returns the converged point.
pub fn newton_h(z0: f64, len: f64) -> Option<C64> {
    let mut z = C64::new(z0, 0.0);
    for _ in 0..50 {
        let h = h_value(z, len).ok()?;
        if h.norm() <= 1e-12 * (1.0 + z.norm()) {
            return Some(z);
        }
        let d = dh(z, len);
        if d.norm() == 0.0 {
            return None;
        }
        z -= h / d;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
    }
    let h = h_value(z, len).ok()?;
    (h.norm() <= 1e-10 * (1.0 + z.norm())).then_some(z)
}

/// Real zeros of H in a window: grid bracketing + Newton.
pub fn find_real_zeros_h(len: f64, window: (f64, f64)) -> Result<ZeroSearch> {
    if !(len > 0.0) {
        return domain("find_real_zeros_h: length must be positive");
    }
    let (a, b) = window;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return domain("find_real_zeros_h: window must be a bounded interval");
    }
    let n = ((b - a) / ZERO_GRID_STEP).ceil() as usize;
    let zs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let hs: Vec<C64> = zs.iter().map(|&z| h_value(C64::new(z, 0.0), len)).collect::<Result<_>>()?;
    let step = (b - a) / n as f64;
    let mut zeros: Vec<EigenFrequency> = Vec::new();
    let mut unresolved = Vec::new();
    for i in 0..=n {
        let here = hs[i].norm();
        let left = if i > 0 { hs[i - 1].norm() } else { f64::INFINITY };
        let right = if i < n { hs[i + 1].norm() } else { f64::INFINITY };
        if !(here <= left && here <= right) {
            continue;
        }
        // slope from neighbours: candidate if the linear model reaches zero within a step
        let slope = if i > 0 && i < n {
            (hs[i + 1] - hs[i - 1]).norm() / (2.0 * step)
        } else if i > 0 {
            (hs[i] - hs[i - 1]).norm() / step
        } else {
            (hs[i + 1] - hs[i]).norm() / step
        };
        if here > 2.0 * slope * step && here > 1e-9 {
            continue;
        }
        match newton_h(zs[i], len) {
            Some(z) if z.im.abs() <= 1e-9 => {
                let zr = z.re;
                if zr < a - step || zr > b + step {
                    continue;
                }
                if zeros.iter().any(|e| (e.z - zr).abs() < 1e-6) {
                    continue;
                }
                let zc = C64::new(zr, 0.0);
                let h_abs = h_value(zc, len)?.norm();
                let dh_abs = dh(zc, len).norm();
                let lam = solve_cubic(zc)?.lambda;
                zeros.push(EigenFrequency {
                    z: zr,
                    multiplicity: if dh_abs > SIMPLE_THRESHOLD { 1 } else { 2 },
                    lambda_at_root: lam,
                    source: ZeroSource::RootSearch,
                    h_abs,
                    dh_abs,
                });
            }
            Some(_) => {}
            None => unresolved.push(zs[i]),
        }
    }
    zeros.sort_by(|x, y| x.z.partial_cmp(&y.z).unwrap());
    Ok(ZeroSearch { zeros, unresolved })
}

/// θ(z) = U(0) for U''' + U' + zU = 0, U(L) = U'(L) = 0, U''(L) = 1,
/// integrated backwards with fixed-step RK4.
pub fn shoot_theta_steps(z: C64, len: f64, steps: usize) -> C64 {
    let f = |u: [C64; 3]| [u[1], u[2], -u[1] - z * u[0]];
    let h = -len / steps as f64;
    let mut u = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    let add = |a: [C64; 3], b: [C64; 3], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s];
    for _ in 0..steps {
        let k1 = f(u);
        let k2 = f(add(u, k1, h / 2.0));
        let k3 = f(add(u, k2, h / 2.0));
        let k4 = f(add(u, k3, h));
        for i in 0..3 {
            u[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
    }
    u[0]
}

pub fn shoot_theta(z: C64, len: f64) -> Result<C64> {
    if !(len > 0.0) {
        return domain("shoot_theta: length must be positive");
    }
    Ok(shoot_theta_steps(z, len, 4096))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pre1Sum {
    pub value: f64,
    pub partial: f64,
    pub tail_estimate: f64,
    /// Upper bound on |true tail − tail_estimate|.
    pub tail_error_bound: f64,
}

fn pre1_term(z: f64, j: i32, n: f64) -> f64 {
    n.abs().powi(j) / ((z + 4.0 * n - n * n * n).abs() + n * n)
}

/// Σ_{0<|n|≤n_max} |n|^j / (|z + 4n − n³| + n²) plus the tail |n| > n_max.
pub fn pre1_sum(z: f64, j: i32, n_max: u64) -> Result<Pre1Sum> {
    if !(j == 0 || j == 1) {
        return domain("pre1_sum: j must be 0 or 1");
    }
    if n_max < 1000 {
        return domain("pre1_sum: n_max must be at least 1000");
    }
    let nm = n_max as f64;
    if nm * nm * nm < 8.0 * (z.abs() + 4.0 * nm) {
        return domain("pre1_sum: n_max too small for |z|; need n_max³ ≫ |z|");
    }
    let mut partial = 0.0;
    // sum small terms first for accuracy
    for n in (1..=n_max).rev() {
        let x = n as f64;
        partial += pre1_term(z, j, x) + pre1_term(z, j, -x);
    }
    // tail: Σ_{m>N} g(m) ≈ ∫_{N+1/2}^∞ g (midpoint rule), substituting x = 1/t
    let g = |x: f64| pre1_term(z, j, x) + pre1_term(z, j, -x);
    let t_max = 1.0 / (nm + 0.5);
    let (xs, ws) = gauss_legendre(30);
    let mut tail = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let t = 0.5 * t_max * (x + 1.0);
        if t > 0.0 {
            tail += w * 0.5 * t_max * g(1.0 / t) / (t * t);
        }
    }
    // midpoint-rule error: Σ g''/24 ≤ |g'(N)|/24 with g ~ 2x^{j−3}
    let err = 2.0 * (3 - j) as f64 * nm.powi(j - 4) / 24.0 + 1e-15 * tail.abs();
    Ok(Pre1Sum { value: partial + tail, partial, tail_estimate: tail, tail_error_bound: err })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineSample {
    pub z: C64,
    pub ln_abs_det_q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineBoundReport {
    pub l: f64,
    pub m: i64,
    pub im_z: f64,
    /// Sample with the smallest |det Q| on the line.
    pub worst: LineSample,
    pub samples: usize,
}

/// |det Q| along Im z = ((2m+1)π/(√3 L))³, |Re z| ≤ 10 |Im z|.
pub fn detq_line_samples(len: f64, m: i64, n_samples: usize) -> Result<LineBoundReport> {
    if m.abs() < 5 {
        return domain("detq_line_bound: |m| must be at least 5");
    }
    if n_samples < 2 {
        return domain("detq_line_bound: need at least two samples");
    }
    let im = ((2 * m + 1) as f64 * PI / (3f64.sqrt() * len)).powi(3);
    let mut worst: Option<LineSample> = None;
    for k in 0..n_samples {
        let re = -10.0 * im.abs() + 20.0 * im.abs() * k as f64 / (n_samples - 1) as f64;
        let z = C64::new(re, im);
        let r: RootTriple = solve_cubic(z)?;
        let ln = det_q_scaled(&r.lambda, len).ln_abs();
        if worst.as_ref().map_or(true, |w| ln < w.ln_abs_det_q) {
            worst = Some(LineSample { z, ln_abs_det_q: ln });
        }
    }
    Ok(LineBoundReport { l: len, m, im_z: im, worst: worst.unwrap(), samples: n_samples })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineFloorFit {
    pub c: f64,
    /// ln(min |det Q| e^{c|z|^{1/3}}) per line.
    pub ln_floors: Vec<(i64, f64)>,
    pub lines: Vec<LineBoundReport>,
}

impl LineFloorFit {
    /// Floors strictly positive and none more than 6 decades below the
    /// first line's (growth along m is allowed, collapse is not).
    pub fn bounded_away_from_zero(&self) -> bool {
        let Some(first) = self.ln_floors.first().map(|f| f.1) else {
            return false;
        };
        first.is_finite() && self.ln_floors.iter().all(|f| f.1.is_finite() && f.1 >= first - (1e6f64).ln())
    }
}

/// Fit c by least squares of −ln|det Q| on |z|^{1/3} over the worst points
/// of each line (clamped at 0), then report the floors.
pub fn detq_line_bound(len: f64, ms: &[i64], n_samples: usize) -> Result<LineFloorFit> {
    let lines: Vec<LineBoundReport> = ms.iter().map(|&m| detq_line_samples(len, m, n_samples)).collect::<Result<_>>()?;
    let xs: Vec<f64> = lines.iter().map(|r| r.worst.z.norm().cbrt()).collect();
    let ys: Vec<f64> = lines.iter().map(|r| -r.worst.ln_abs_det_q).collect();
    let n = xs.len() as f64;
    let c = if xs.len() >= 2 {
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx > 0.0 {
            (sxy / sxx).max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let ln_floors = lines.iter().zip(&xs).map(|(r, x)| (r.m, r.worst.ln_abs_det_q + c * x)).collect();
    Ok(LineFloorFit { c, ln_floors, lines })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopCheck {
    pub center: f64,
    pub radius: f64,
    pub g_center: C64,
    pub h_center: C64,
    pub g_mean: C64,
    pub h_mean: C64,
    /// |mean − centre value| / |mean|: zero for single-valued analytic functions.
    pub g_variation: f64,
    pub h_variation: f64,
    /// Largest adjacent-sample jump over the median jump (a branch cut shows as a spike).
    pub g_jump_ratio: f64,
    pub h_jump_ratio: f64,
}

fn jump_ratio(v: &[C64]) -> f64 {
    let n = v.len();
    let mut d: Vec<f64> = (0..n).map(|k| (v[(k + 1) % n] - v[k]).norm()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = d[n / 2];
    if med == 0.0 {
        if max == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        max / med
    }
}

/// Walk G and H around a circle centred at a branch point.
pub fn branch_loop_check(center: f64, radius: f64, n: usize, len: f64) -> Result<LoopCheck> {
    let c = C64::new(center, 0.0);
    let mut gs = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    for k in 0..n {
        let w = c + C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64);
        let (g, h) = gh(w, len)?;
        gs.push(g);
        hs.push(h);
    }
    let g_mean = gs.iter().sum::<C64>() / n as f64;
    let h_mean = hs.iter().sum::<C64>() / n as f64;
    let (g_center, h_center) = gh(c, len)?;
    Ok(LoopCheck {
        center,
        radius,
        g_center,
        h_center,
        g_mean,
        h_mean,
        g_variation: (g_mean - g_center).norm() / g_mean.norm(),
        h_variation: (h_mean - h_center).norm() / h_mean.norm(),
        g_jump_ratio: jump_ratio(&gs),
        h_jump_ratio: jump_ratio(&hs),
    })
}

/// Points in the box [−a,a]×[−a,a]i where G and H vanish together:
/// local minima of max(|G|,|H|) on an n×n grid refined by Newton on H,
/// kept when |G| is also negligible there.
pub fn common_root_scan(len: f64, half_width: f64, n: usize) -> Result<Vec<C64>> {
    let pt = |i: usize, k: usize| {
        C64::new(-half_width + 2.0 * half_width * i as f64 / (n - 1) as f64, -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64)
    };
    let mut val = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let (g, h) = gh(pt(i, k), len)?;
            val[i][k] = g.norm().max(h.norm());
        }
    }
    let mut found: Vec<C64> = Vec::new();
    for i in 0..n {
        for k in 0..n {
            let v = val[i][k];
            let mut is_min = true;
            for di in -1i64..=1 {
                for dk in -1i64..=1 {
                    let (a, b) = (i as i64 + di, k as i64 + dk);
                    if (di, dk) != (0, 0) && a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n && val[a as usize][b as usize] < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let mut z = pt(i, k);
            let mut ok = false;
            for _ in 0..60 {
                let h = h_value(z, len)?;
                if h.norm() <= 1e-12 * (1.0 + z.norm()) {
                    ok = true;
                    break;
                }
                let d = dh(z, len);
                if d.norm() == 0.0 {
                    break;
                }
                z -= h / d;
                if z.norm() > 10.0 * half_width {
                    break;
                }
            }
            if !ok || z.re.abs() > half_width || z.im.abs() > half_width {
                continue;
            }
            let g = g_value(z, len)?;
            if g.norm() <= 1e-8 && !found.iter().any(|f| (f - z).norm() < 1e-6) {
                found.push(z);
            }
        }
    }
    found.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    Ok(found)
}
