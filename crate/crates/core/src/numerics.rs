//! Small numerical kernels shared by the modules: banded LU, adaptive
//! Gauss-Kronrod quadrature, scaled exponential sums, Cauchy derivatives.

use crate::error::{KdvError, Result};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Banded matrix with `kl` sub- and `ku` super-diagonals, factored in place
/// with partial pivoting (fill-in widens the upper band to `ku + kl`).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    // row i holds columns i - kl .. i - kl + width
    data: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedLu { n, kl, ku, width, data: vec![0.0; n * width], mult: vec![0.0; n * kl], piv: (0..n).collect() }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j + self.kl < i + self.width);
        i * self.width + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j >= i + self.width - self.kl {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// y = A x for the unfactored matrix.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[self.idx(i, j)] * x[j];
            }
            y[i] = s;
        }
    }

    /// y = A^T x for the unfactored matrix.
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                y[j] += self.data[self.idx(i, j)] * x[i];
            }
        }
    }

    pub fn factor(mut self) -> Result<Self> {
        let n = self.n;
        let kl = self.kl;
        let umax = self.ku + self.kl;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(KdvError::Singular { row: k });
            }
            self.piv[k] = p;
            let jmax = (k + umax).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let m = self.data[ik] / pivot;
                self.data[ik] = 0.0;
                self.mult[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= m * kj;
                    }
                }
            }
        }
        Ok(self)
    }

    /// Solve A x = b in place (after `factor`).
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let kl = self.kl;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.mult[k * kl + (i - k - 1)] * bk;
            }
        }
        let umax = self.ku + self.kl;
        for k in (0..n).rev() {
            let jmax = (k + umax).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=jmax {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
    }

    /// Solve A^T x = b in place (after `factor`).
    pub fn solve_t(&self, b: &mut [f64]) {
        let n = self.n;
        let kl = self.kl;
        let umax = self.ku + self.kl;
        for k in 0..n {
            let lo = k.saturating_sub(umax);
            let mut s = b[k];
            for j in lo..k {
                s -= self.data[self.idx(j, k)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
        for k in (0..n).rev() {
            let last = (k + kl).min(n - 1);
            let mut s = b[k];
            for i in k + 1..=last {
                s -= self.mult[k * kl + (i - k - 1)] * b[i];
            }
            b[k] = s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}

/// A complex number stored as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    pub mantissa: C64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn value(&self) -> C64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    pub fn div(&self, other: &Scaled) -> C64 {
        (self.mantissa / other.mantissa) * (self.log_scale - other.log_scale).exp()
    }
}

/// Σ c_k e^{a_k}, factoring out the largest real exponent.
pub fn exp_sum(terms: &[(C64, C64)]) -> Scaled {
    let s = terms
        .iter()
        .filter(|(c, _)| *c != C64::new(0.0, 0.0))
        .map(|(_, a)| a.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !s.is_finite() {
        return Scaled { mantissa: C64::new(0.0, 0.0), log_scale: 0.0 };
    }
    let m = terms.iter().map(|(c, a)| c * (a - s).exp()).sum();
    Scaled { mantissa: m, log_scale: s }
}

/// f'(w) from four samples on a circle of radius h (error O(h^4)).
pub fn cauchy_derivative<F: Fn(C64) -> C64>(f: F, w: C64, h: f64) -> C64 {
    let dirs = [C64::new(1.0, 0.0), I, C64::new(-1.0, 0.0), -I];
    let mut s = C64::new(0.0, 0.0);
    for d in dirs {
        s += f(w + d * h) / d;
    }
    s / (4.0 * h)
}

/// Average of f over four points on a circle of radius r around w: equals
/// f(w) + O(r^4) for analytic f, usable at removable singularities.
pub fn circle_average<F: Fn(C64) -> C64>(f: F, w: C64, r: f64) -> C64 {
    let dirs = [
        C64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
        C64::from_polar(1.0, 3.0 * std::f64::consts::FRAC_PI_4),
        C64::from_polar(1.0, 5.0 * std::f64::consts::FRAC_PI_4),
        C64::from_polar(1.0, 7.0 * std::f64::consts::FRAC_PI_4),
    ];
    dirs.iter().map(|d| f(w + d * r)).sum::<C64>() / 4.0
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod value, |K − G| error estimate and the Kronrod ∫|f|.
fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = hw * XGK[j];
        let (fl, fr) = (f(c - dx), f(c + dx));
        let s = fl + fr;
        k += s * WGK[j];
        abs += (fl.norm() + fr.norm()) * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * hw;
    let g = g * hw;
    (k, (k - g).norm(), abs * hw.abs())
}

/// Globally adaptive 7/15 Gauss-Kronrod quadrature of a complex integrand.
///
/// Converged once the summed error estimate is below `abs_tol` or below the
/// roundoff floor 50·ε·∫|f|, whichever is larger.
pub fn integrate_gk<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, abs_tol: f64, max_intervals: usize) -> Result<(C64, f64)> {
    let mut pieces: Vec<(f64, f64, C64, f64, f64)> = Vec::new();
    let (v, e, r) = gk15(&f, a, b);
    pieces.push((a, b, v, e, r));
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        let total: C64 = pieces.iter().map(|p| p.2).sum();
        let floor = 50.0 * f64::EPSILON * pieces.iter().map(|p| p.4).sum::<f64>();
        if total_err <= abs_tol.max(floor) {
            return Ok((total, total_err));
        }
        if pieces.len() >= max_intervals {
            return Err(KdvError::Quadrature { achieved: total_err, requested: abs_tol });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1, r1) = gk15(&f, lo, mid);
        let (v2, e2, r2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1, r1));
        pieces.push((mid, hi, v2, e2, r2));
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

/// Trapezoid weights for `n` equally spaced samples with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}
