//! The three-state model ẏ₁ = u, ẏ₂ = y₃, ẏ₃ = −y₂ + 2y₁u.

use crate::control_tools::{bump_control, sobolev_norm, ControlSignal};
use crate::error::{domain, KdvError, Result};
use crate::numerics::gauss_legendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyState {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub t: f64,
}

fn rhs(y: [f64; 3], u: f64) -> [f64; 3] {
    [u, y[2], -y[1] + 2.0 * y[0] * u]
}

/// RK4 from the origin to time T; sub-steps never straddle a sample node of u.
pub fn toy_simulate(u: &ControlSignal, t_final: f64, dt: f64) -> Result<ToyState> {
    if !(dt > 0.0 && t_final > 0.0) || dt > 1e-3 * t_final * (1.0 + 1e-12) {
        return domain(format!("toy_simulate needs 0 < dt ≤ 1e-3·T (dt = {dt}, T = {t_final})"));
    }
    let sub = (u.dt / dt).ceil().max(1.0) as usize;
    let h = u.dt / sub as f64;
    let mut y = [0.0; 3];
    let mut t = 0.0;
    let intervals = (t_final / u.dt).ceil() as usize;
    'outer: for k in 0..intervals {
        let t_start = k as f64 * u.dt;
        for j in 0..sub {
            let t0 = t_start + j as f64 * h;
            if t0 >= t_final - 1e-12 * t_final {
                break 'outer;
            }
            let step = h.min(t_final - t0);
            let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
            let k1 = rhs(y, u.at(t0));
            let k2 = rhs(add(y, k1, 0.5 * step), u.at(t0 + 0.5 * step));
            let k3 = rhs(add(y, k2, 0.5 * step), u.at(t0 + 0.5 * step));
            let k4 = rhs(add(y, k3, step), u.at(t0 + step));
            for i in 0..3 {
                y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t = t0 + step;
        }
    }
    Ok(ToyState { y1: y[0], y2: y[1], y3: y[2], t })
}

/// (y₂(T), y₃(T)) from y₂ = ∫cos(T−t)y₁², y₃ = y₁(T)² − ∫sin(T−t)y₁², with y₁
/// the exact integral of the piecewise-linear u (u = 0 beyond its horizon).
pub fn toy_exact(u: &ControlSignal, t_final: f64) -> (f64, f64) {
    let (xg, wg) = gauss_legendre(8);
    let mut y1 = 0.0;
    let (mut c, mut s) = (0.0, 0.0);
    let n = u.samples.len() - 1;
    for k in 0..n {
        let a = k as f64 * u.dt;
        if a >= t_final {
            break;
        }
        let b = ((k + 1) as f64 * u.dt).min(t_final);
        let (ua, ub) = (u.samples[k], u.samples[k + 1]);
        let slope = (ub - ua) / u.dt;
        let half = 0.5 * (b - a);
        for (x, w) in xg.iter().zip(&wg) {
            let t = a + half * (1.0 + x);
            let tau = t - a;
            let v = y1 + ua * tau + 0.5 * slope * tau * tau;
            c += half * w * (t_final - t).cos() * v * v;
            s += half * w * (t_final - t).sin() * v * v;
        }
        let tau = b - a;
        y1 += ua * tau + 0.5 * slope * tau * tau;
    }
    // u = 0 after its horizon: y₁ constant there
    let tu = u.t_final();
    if t_final > tu {
        let y2c = y1 * y1;
        c += y2c * (t_final - tu).sin();
        s += y2c * (1.0 - (t_final - tu).cos());
    }
    (c, y1 * y1 - s)
}

/// y₁(T) = ∫u; subtracting the trapezoid mean makes it vanish exactly.
pub fn mean_free(u: &ControlSignal) -> ControlSignal {
    let t = u.t_final();
    let total = crate::numerics::trapezoid(&u.samples, u.dt);
    ControlSignal { samples: u.samples.iter().map(|v| v - total / t).collect(), dt: u.dt }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToySample {
    pub sample: usize,
    pub mean_free: bool,
    pub y2: f64,
    pub y3: f64,
    /// ‖u‖_{H^{−1}} for free samples, ‖u‖_{H^{−2}} for mean-free ones.
    pub weak_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerOutcome {
    pub iterations: usize,
    pub best_y3: f64,
    pub found_positive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyReport {
    #[serde(rename = "T")]
    pub t: f64,
    pub seed: u64,
    pub samples: Vec<ToySample>,
    /// y₂ < 0 among free samples (claimed impossible for T ≤ π/2).
    pub y2_violations: usize,
    /// y₃ > 0 among mean-free samples (claimed impossible for T ≤ π).
    pub y3_violations: usize,
    pub y2_claim_applies: bool,
    pub y3_claim_applies: bool,
    /// min y₂/‖u‖²_{H^{−1}} over free samples.
    pub delta2: f64,
    /// min (−y₃)/‖u‖²_{H^{−2}} over mean-free samples.
    pub delta3: f64,
    pub optimizer: Option<OptimizerOutcome>,
}

const TOY_DT: f64 = 1e-3;

/// Random smooth control on [0, T]: 3–6 bumps. The step divides T exactly.
pub fn random_toy_control<R: Rng>(rng: &mut R, t_final: f64) -> Result<ControlSignal> {
    let dt = t_final / (t_final / TOY_DT).ceil().max(1000.0);
    let mut u = ControlSignal::zeros(t_final, dt);
    let (lo, hi) = ((t_final / 40.0).ln(), (t_final / 5.0).ln());
    for _ in 0..rng.gen_range(3..=6) {
        let w = rng.gen_range(lo..hi).exp();
        let m = w + 2.0 * dt;
        let c = rng.gen_range(m..t_final - m);
        u = u.add(&bump_control(t_final, c, w, rng.gen_range(-1.0..1.0), dt)?)?;
    }
    Ok(u)
}

/// Sign checks of y₂ (free controls) and y₃ (mean-free controls), coercivity
/// estimates, and for T > π a search for y₃(T) > 0.
pub fn toy_obstruction_check(t_final: f64, n_samples: usize, seed: u64) -> Result<ToyReport> {
    if !(t_final > 0.0) {
        return domain("toy_obstruction_check needs T > 0");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(2 * n_samples);
    for s in 0..n_samples {
        let u = random_toy_control(&mut rng, t_final)?;
        for (mf, v) in [(false, u.clone()), (true, mean_free(&u))] {
            let (y2, y3) = toy_exact(&v, t_final);
            let weak_norm = sobolev_norm(&v, if mf { -2.0 } else { -1.0 })?.value;
            samples.push(ToySample { sample: s, mean_free: mf, y2, y3, weak_norm });
        }
    }
    let free = samples.iter().filter(|s| !s.mean_free);
    let mfree = samples.iter().filter(|s| s.mean_free);
    let y2_violations = free.clone().filter(|s| s.y2 < 0.0).count();
    let y3_violations = mfree.clone().filter(|s| s.y3 > 0.0).count();
    let delta2 = free.map(|s| s.y2 / (s.weak_norm * s.weak_norm)).fold(f64::INFINITY, f64::min);
    let delta3 = mfree.map(|s| -s.y3 / (s.weak_norm * s.weak_norm)).fold(f64::INFINITY, f64::min);
    let optimizer = if t_final > PI { Some(maximize_y3(t_final, 64, 200)?) } else { None };
    Ok(ToyReport {
        t: t_final,
        seed,
        samples,
        y2_violations,
        y3_violations,
        y2_claim_applies: t_final <= PI / 2.0,
        y3_claim_applies: t_final <= PI,
        delta2,
        delta3,
        optimizer,
    })
}

/// Piecewise-linear control with the given values at interior nodes of a
/// uniform n+1-interval grid, refined for quadrature.
fn hat_control(c: &[f64], t_final: f64) -> ControlSignal {
    let n = c.len() + 1;
    let refine = 16;
    let dt = t_final / (n * refine) as f64;
    let node = |i: usize| if i == 0 || i == n { 0.0 } else { c[i - 1] };
    let samples = (0..=n * refine)
        .map(|j| {
            let (i, r) = (j / refine, (j % refine) as f64 / refine as f64);
            if i == n {
                0.0
            } else {
                node(i) * (1.0 - r) + node(i + 1) * r
            }
        })
        .collect();
    ControlSignal { samples, dt }
}

/// Projected gradient ascent of y₃(T) over hat coefficients on the unit
/// sphere with ∫u = 0 (finite-difference gradients, backtracking steps).
pub fn maximize_y3(t_final: f64, n_coef: usize, iterations: usize) -> Result<OptimizerOutcome> {
    if n_coef < 2 {
        return Err(KdvError::Domain("optimizer needs at least two coefficients".into()));
    }
    // ∫ of each hat is the same, so the constraint is Σc = 0
    let project = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };
    let f = |c: &[f64]| toy_exact(&hat_control(c, t_final), t_final).1;
    let mut c: Vec<f64> = (0..n_coef).map(|i| ((i as f64 + 0.5) * PI / n_coef as f64 * 2.0).cos()).collect();
    project(&mut c);
    let mut val = f(&c);
    let mut eta = 1.0 / val.abs().max(1e-3);
    let step = 1e-6;
    for it in 0..iterations {
        let grad: Vec<f64> = (0..n_coef)
            .map(|i| {
                let mut a = c.clone();
                let mut b = c.clone();
                a[i] += step;
                b[i] -= step;
                (f(&a) - f(&b)) / (2.0 * step)
            })
            .collect();
        loop {
            let mut trial: Vec<f64> = c.iter().zip(&grad).map(|(x, g)| x + eta * g).collect();
            project(&mut trial);
            let v = f(&trial);
            if v > val {
                c = trial;
                val = v;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
            if eta < 1e-12 {
                return Ok(OptimizerOutcome { iterations: it, best_y3: val, found_positive: val > 0.0 });
            }
        }
    }
    Ok(OptimizerOutcome { iterations, best_y3: val, found_positive: val > 0.0 })
}

impl ToyReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| KdvError::Parse(e.to_string());
        w.write_record(["sample", "mean_free", "y2", "y3", "weak_norm"]).map_err(err)?;
        for s in &self.samples {
            w.write_record([s.sample.to_string(), s.mean_free.to_string(), format!("{:.12e}", s.y2), format!("{:.12e}", s.y3), format!("{:.12e}", s.weak_norm)])
                .map_err(err)?;
        }
        let b = w.into_inner().map_err(|e| KdvError::Parse(e.to_string()))?;
        String::from_utf8(b).map_err(|e| KdvError::Parse(e.to_string()))
    }
}
