//! Critical lengths, the (k,l) pair data and the obstruction constant E.

use crate::complex_cubic::solve_cubic;
use crate::error::{domain, KdvError, Result};
use crate::numerics::{exp_sum, integrate_gk, Scaled, C64, I};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPair {
    pub k: u32,
    pub l: u32,
    #[serde(rename = "L")]
    pub len: f64,
    pub p: f64,
    pub eta: [C64; 3],
    #[serde(rename = "E")]
    pub e: C64,
    pub e1: f64,
    pub e2: f64,
    pub obstruction_applies: bool,
    pub dim_m: u32,
}

/// Pairs (k', l'), k' ≥ l' ≥ 1, with k'² + k'l' + l'² = s.
pub fn representations(s: u64) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut l = 1u64;
    while 3 * l * l <= s {
        let mut k = l;
        while k * k + k * l + l * l <= s {
            if k * k + k * l + l * l == s {
                out.push((k as u32, l as u32));
            }
            k += 1;
        }
        l += 1;
    }
    out
}

fn dim_m_for(s: u64) -> u32 {
    representations(s).iter().map(|&(k, l)| if k == l { 1 } else { 2 }).sum()
}

pub fn critical_length(k: u32, l: u32) -> f64 {
    let s = (k * k + k * l + l * l) as f64;
    2.0 * PI * (s / 3.0).sqrt()
}

pub fn eigen_frequency(k: u32, l: u32) -> f64 {
    let (k, l) = (k as f64, l as f64);
    let s = k * k + k * l + l * l;
    (2.0 * k + l) * (k - l) * (2.0 * l + k) / (3.0 * 3f64.sqrt() * s.powf(1.5))
}

/// e^{η₁L} = e^{−2πi(2k+l)/3}, with the exponent reduced mod 2πi so that
/// the value is exactly 1 when 2k+l ∈ 3ℕ.
fn exp_eta1_l(k: u32, l: u32) -> C64 {
    match (2 * k + l) % 3 {
        0 => C64::new(1.0, 0.0),
        r => C64::from_polar(1.0, -2.0 * PI * r as f64 / 3.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EMethod {
    Direct,
    ClosedForm,
}

impl CriticalPair {
    pub fn new(k: u32, l: u32) -> Result<Self> {
        if l < 1 || k < l {
            return domain(format!("pair ({k},{l}) must satisfy k ≥ l ≥ 1"));
        }
        let len = critical_length(k, l);
        let p = eigen_frequency(k, l);
        let c = 2.0 * PI / (3.0 * len);
        let (kf, lf) = (k as f64, l as f64);
        let eta1 = -I * c * (2.0 * kf + lf);
        let eta2 = eta1 + I * 2.0 * PI * kf / len;
        let eta3 = eta2 + I * 2.0 * PI * lf / len;
        let s = (k * k + k * l + l * l) as u64;
        let mut pair = CriticalPair {
            k,
            l,
            len,
            p,
            eta: [eta1, eta2, eta3],
            e: C64::new(0.0, 0.0),
            e1: 0.0,
            e2: 0.0,
            obstruction_applies: (2 * k + l) % 3 != 0,
            dim_m: dim_m_for(s),
        };
        let e = compute_e(&pair, EMethod::ClosedForm)?;
        pair.e = e;
        pair.e1 = e.re;
        pair.e2 = e.im;
        Ok(pair)
    }

    pub fn psi(&self) -> PsiField {
        PsiField { eta: self.eta, p: self.p, len: self.len, e: self.e }
    }

    /// Largest |η_j³ + η_j − ip|.
    pub fn eta_residual(&self) -> f64 {
        self.eta.iter().map(|h| (h * h * h + h - I * self.p).norm()).fold(0.0, f64::max)
    }
}

/// All pairs with k² + kl + l² ≤ s_max, grouped by common L (ascending).
pub fn enumerate_pairs(s_max: u64) -> Result<Vec<CriticalPair>> {
    if s_max < 3 {
        return domain("enumerate_pairs: s_max must be at least 3");
    }
    let mut keyed = Vec::new();
    for s in 3..=s_max {
        for (k, l) in representations(s) {
            keyed.push((s, CriticalPair::new(k, l)?));
        }
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.k.cmp(&a.1.k)));
    Ok(keyed.into_iter().map(|(_, p)| p).collect())
}

pub fn compute_e(pair: &CriticalPair, method: EMethod) -> Result<C64> {
    let pref = exp_eta1_l(pair.k, pair.l) - 1.0;
    match method {
        EMethod::ClosedForm => {
            let (k, l) = (pair.k as f64, pair.l as f64);
            let c = 40.0 * PI.powi(3) / (3.0 * pair.len.powi(3));
            Ok(pref * I * (c * k * l * (k + l)))
        }
        EMethod::Direct => {
            let h = pair.eta;
            if let Some(j) = h.iter().position(|x| x.norm() == 0.0) {
                return Err(KdvError::Domain(format!("compute_e: eta_{} vanishes for ({},{})", j + 1, pair.k, pair.l)));
            }
            let mut s1 = C64::new(0.0, 0.0);
            let mut s2 = C64::new(0.0, 0.0);
            for j in 0..3 {
                let d = h[(j + 1) % 3] - h[j];
                let e = h[(j + 2) % 3];
                s1 += e * e * d;
                s2 += d / e;
            }
            Ok(pref / 3.0 * (-2.0 / 3.0 * s1 - I * pair.p * s2))
        }
    }
}

/// Direct-form E with arbitrary (η, p) and a given e^{η₁L} − 1 prefactor.
pub fn compute_e_direct_raw(eta: &[C64; 3], p: f64, pref: C64) -> C64 {
    let mut s1 = C64::new(0.0, 0.0);
    let mut s2 = C64::new(0.0, 0.0);
    for j in 0..3 {
        let d = eta[(j + 1) % 3] - eta[j];
        let e = eta[(j + 2) % 3];
        s1 += e * e * d;
        s2 += d / e;
    }
    pref / 3.0 * (-2.0 / 3.0 * s1 - I * p * s2)
}

/// φ(x) = Σ (η_{j+1} − η_j) e^{η_{j+2} x} and the field Ψ = Re(Ē φ e^{−ipt}).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsiField {
    pub eta: [C64; 3],
    pub p: f64,
    pub len: f64,
    pub e: C64,
}

impl PsiField {
    fn dphi(&self, x: f64, order: i32) -> C64 {
        let h = self.eta;
        (0..3).map(|j| (h[(j + 1) % 3] - h[j]) * h[(j + 2) % 3].powi(order) * (h[(j + 2) % 3] * x).exp()).sum()
    }
    pub fn phi(&self, x: f64) -> C64 {
        self.dphi(x, 0)
    }
    pub fn phi_x(&self, x: f64) -> C64 {
        self.dphi(x, 1)
    }
    pub fn phi_xxx(&self, x: f64) -> C64 {
        self.dphi(x, 3)
    }
    /// ξ₁ + iξ₂ = φ(x) e^{−ipt}.
    pub fn xi(&self, t: f64, x: f64) -> (f64, f64) {
        let w = self.phi(x) * C64::from_polar(1.0, -self.p * t);
        (w.re, w.im)
    }
    pub fn psi(&self, t: f64, x: f64) -> f64 {
        let (a, b) = self.xi(t, x);
        self.e.re * a + self.e.im * b
    }
    pub fn psi_x(&self, t: f64, x: f64) -> f64 {
        let w = self.phi_x(x) * C64::from_polar(1.0, -self.p * t);
        self.e.re * w.re + self.e.im * w.im
    }
    pub fn psi_t(&self, t: f64, x: f64) -> f64 {
        let w = self.phi(x) * C64::from_polar(1.0, -self.p * t) * (-I * self.p);
        self.e.re * w.re + self.e.im * w.im
    }
    pub fn psi_xxx(&self, t: f64, x: f64) -> f64 {
        let w = self.phi_xxx(x) * C64::from_polar(1.0, -self.p * t);
        self.e.re * w.re + self.e.im * w.im
    }
    /// Ψ(t, ·) at the given points.
    pub fn sample_psi(&self, t: f64, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.psi(t, x)).collect()
    }
    pub fn sample_psi_x(&self, t: f64, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.psi_x(t, x)).collect()
    }
    /// The same field with (η, p) negated and E conjugated (x ↦ mirrored frequencies).
    pub fn negated(&self) -> PsiField {
        PsiField { eta: self.eta.map(|h| -h), p: -self.p, len: self.len, e: self.e.conj() }
    }
}

/// M(z,x) = Σ(e^{λ_{j+1}L} − e^{λ_jL}) e^{λ_{j+2}x} / Σ(λ_{j+1}−λ_j) e^{−λ_{j+2}L}.
struct MEval {
    lam: [C64; 3],
    len: f64,
    den: Scaled,
}

impl MEval {
    fn new(lam: [C64; 3], len: f64) -> Self {
        let t: Vec<(C64, C64)> = (0..3).map(|j| (lam[(j + 1) % 3] - lam[j], -lam[(j + 2) % 3] * len)).collect();
        MEval { lam, len, den: exp_sum(&t) }
    }
    fn eval(&self, x: f64) -> C64 {
        let l = self.lam;
        let one = C64::new(1.0, 0.0);
        let mut t = [(one, one); 6];
        for j in 0..3 {
            t[2 * j] = (one, l[(j + 1) % 3] * self.len + l[(j + 2) % 3] * x);
            t[2 * j + 1] = (-one, l[j] * self.len + l[(j + 2) % 3] * x);
        }
        exp_sum(&t).div(&self.den)
    }
}

/// Integrand B(z,x) = M(z,x) conj(M(z−p,x)) φ_x(x) as a closure.
pub fn b_integrand(z: f64, field: &PsiField) -> Result<impl Fn(f64) -> C64> {
    let m1 = MEval::new(solve_cubic(C64::new(z, 0.0))?.lambda, field.len);
    let m2 = MEval::new(solve_cubic(C64::new(z - field.p, 0.0))?.lambda, field.len);
    let f = *field;
    Ok(move |x: f64| m1.eval(x) * m2.eval(x).conj() * f.phi_x(x))
}

pub fn default_b_tolerance(z: f64) -> f64 {
    1e-10 * z.abs().powf(-4.0 / 3.0)
}

/// ∫₀^L B(z,x) dx by adaptive Gauss–Kronrod to absolute tolerance `quad_tol`.
pub fn integral_b_field(z: f64, field: &PsiField, quad_tol: f64) -> Result<C64> {
    if z.abs() < 1.0 {
        return domain("integral_b: |z| must be at least 1");
    }
    integral_b_unchecked(z, field, quad_tol)
}

/// Observed large-|z| limit of |z|^{4/3}∫B(z,x)dx: E/5.
pub fn b_asymptotic_constant(pair: &CriticalPair) -> C64 {
    pair.e / 5.0
}

/// ∫₀^L B(z,x)dx for any real z away from the zeros ±p (used for tables).
pub fn integral_b_unchecked(z: f64, field: &PsiField, quad_tol: f64) -> Result<C64> {
    for zero in [field.p, -field.p] {
        if (z - zero).abs() < 1e-6 {
            return domain(format!("integral_b: z = {z} is within 1e-6 of a real zero of H"));
        }
    }
    let f = b_integrand(z, field)?;
    let (v, _) = integrate_gk(f, 0.0, field.len, quad_tol, 200_000)?;
    Ok(v)
}

pub fn integral_b(z: f64, pair: &CriticalPair, quad_tol: f64) -> Result<C64> {
    integral_b_field(z, &pair.psi(), quad_tol)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MBasis {
    /// Orthonormal functions sampled at the given points (discrete L², weight h).
    pub functions: Vec<Vec<f64>>,
    /// Number of candidate functions dropped as linearly dependent.
    pub dropped: usize,
}

impl MBasis {
    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    /// Coefficients of v in the basis (weight h).
    pub fn coefficients(&self, v: &[f64], h: f64) -> Vec<f64> {
        self.functions.iter().map(|b| h * b.iter().zip(v).map(|(a, c)| a * c).sum::<f64>()).collect()
    }

    pub fn project(&self, v: &[f64], h: f64) -> Vec<f64> {
        let c = self.coefficients(v, h);
        let mut out = vec![0.0; v.len()];
        for (b, ci) in self.functions.iter().zip(&c) {
            for (o, bi) in out.iter_mut().zip(b) {
                *o += ci * bi;
            }
        }
        out
    }

    /// v minus its projection.
    pub fn project_out(&self, v: &[f64], h: f64) -> Vec<f64> {
        let pm = self.project(v, h);
        v.iter().zip(&pm).map(|(a, b)| a - b).collect()
    }
}

/// Gram–Schmidt (twice) with discrete weight h; candidates whose remaining
/// norm falls below 1e-8 of the original are dropped.
pub fn orthonormalize(cands: Vec<Vec<f64>>, h: f64) -> MBasis {
    let dot = |a: &[f64], b: &[f64]| h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut functions: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0;
    for mut v in cands {
        let n0 = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for b in &functions {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n0 == 0.0 || n <= 1e-8 * n0 {
            dropped += 1;
            continue;
        }
        let peak = v.iter().cloned().fold(0.0, |a: f64, x| if x.abs() > a.abs() { x } else { a });
        let s = peak.signum() / n;
        v.iter_mut().for_each(|x| *x *= s);
        functions.push(v);
    }
    MBasis { functions, dropped }
}

/// Re φ and Im φ at `xs`, orthonormalized.
pub fn m_basis(pair: &CriticalPair, xs: &[f64], h: f64) -> MBasis {
    let f = pair.psi();
    let re: Vec<f64> = xs.iter().map(|&x| f.phi(x).re).collect();
    let im: Vec<f64> = xs.iter().map(|&x| f.phi(x).im).collect();
    orthonormalize(vec![re, im], h)
}

/// Basis from every pair sharing the critical length of `pair`.
pub fn m_basis_group(pair: &CriticalPair, xs: &[f64], h: f64) -> Result<MBasis> {
    let s = (pair.k * pair.k + pair.k * pair.l + pair.l * pair.l) as u64;
    let mut cands = Vec::new();
    for (k, l) in representations(s) {
        let f = CriticalPair::new(k, l)?.psi();
        cands.push(xs.iter().map(|&x| f.phi(x).re).collect());
        cands.push(xs.iter().map(|&x| f.phi(x).im).collect());
    }
    Ok(orthonormalize(cands, h))
}

/// CSV table: k,l,L,p,Re E,Im E,dimM,obstruction_applies.
pub fn pair_table_csv(pairs: &[CriticalPair]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| KdvError::Parse(e.to_string());
    w.write_record(["k", "l", "L", "p", "Re E", "Im E", "dimM", "obstruction_applies"]).map_err(io)?;
    for p in pairs {
        w.write_record([
            p.k.to_string(),
            p.l.to_string(),
            format!("{:.15e}", p.len),
            format!("{:.15e}", p.p),
            format!("{:.15e}", p.e.re),
            format!("{:.15e}", p.e.im),
            p.dim_m.to_string(),
            p.obstruction_applies.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| KdvError::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| KdvError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_11() {
        let p = CriticalPair::new(1, 1).unwrap();
        assert!((p.len - 2.0 * PI).abs() < 1e-14);
        assert_eq!(p.p, 0.0);
        assert!(!p.obstruction_applies);
        assert_eq!(p.e, C64::new(0.0, 0.0));
        assert_eq!(p.dim_m, 1);
    }

    #[test]
    fn pair_21_e_value() {
        let p = CriticalPair::new(2, 1).unwrap();
        let expect = -5.0 * (3.0f64 / 7.0).powf(1.5) * C64::new(3f64.sqrt(), 3.0);
        assert!((p.e - expect).norm() < 1e-13);
        assert!((p.p - 20.0 / (3.0 * 3f64.sqrt() * 7f64.powf(1.5))).abs() < 1e-15);
        assert_eq!(p.dim_m, 2);
    }

    #[test]
    fn direct_fails_on_zero_eta() {
        let p = CriticalPair::new(2, 2).unwrap();
        let err = compute_e(&p, EMethod::Direct).unwrap_err().to_string();
        assert!(err.contains("eta_2"), "{err}");
    }

    #[test]
    fn phi_boundary_values() {
        for (k, l) in [(2, 1), (3, 1), (4, 3)] {
            let f = CriticalPair::new(k, l).unwrap().psi();
            for x in [0.0, f.len] {
                assert!(f.phi(x).norm() < 1e-12);
                assert!(f.phi_x(x).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn psi_solves_linear_kdv() {
        let f = CriticalPair::new(2, 1).unwrap().psi();
        for i in 0..20 {
            let x = f.len * i as f64 / 19.0;
            let t = 0.37 * i as f64;
            let r = f.psi_t(t, x) + f.psi_x(t, x) + f.psi_xxx(t, x);
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn basis_for_11_is_one_minus_cos() {
        let n = 200;
        let h = 2.0 * PI / n as f64;
        let xs: Vec<f64> = (1..n).map(|i| i as f64 * h).collect();
        let b = m_basis(&CriticalPair::new(1, 1).unwrap(), &xs, h);
        assert_eq!(b.dim(), 1);
        assert_eq!(b.dropped, 1);
        let c: Vec<f64> = xs.iter().map(|x| 1.0 - x.cos()).collect();
        let ratio = b.functions[0][50] / c[50];
        for (a, cc) in b.functions[0].iter().zip(&c) {
            assert!((a - ratio * cc).abs() < 1e-12);
        }
        assert!(ratio > 0.0);
    }

    #[test]
    fn csv_header() {
        let s = pair_table_csv(&enumerate_pairs(7).unwrap()).unwrap();
        assert!(s.starts_with("k,l,L,p,Re E,Im E,dimM,obstruction_applies\n"));
        assert_eq!(s.lines().count(), 3);
    }
}
