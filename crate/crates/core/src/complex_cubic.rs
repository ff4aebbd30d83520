//! Roots of λ³ + λ + iz = 0 with a deterministic ordering.

use crate::error::{domain, Result};
use crate::numerics::{C64, I};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Radius around ±2/(3√3) where the local square-root expansion is used.
pub const BRANCH_RADIUS: f64 = 1e-6;

/// z-values where two roots collide.
pub fn branch_points() -> [f64; 2] {
    let z0 = 2.0 / (3.0 * 3f64.sqrt());
    [z0, -z0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ordering {
    /// Re ascending, ties by Im ascending.
    ByRealPart,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RootTriple {
    pub z: C64,
    pub lambda: [C64; 3],
    pub near_branch: bool,
    pub ordering: Ordering,
}

impl RootTriple {
    pub fn residual(&self) -> f64 {
        self.lambda
            .iter()
            .map(|l| (l * l * l + l + I * self.z).norm())
            .fold(0.0, f64::max)
    }

    /// Residuals of the three Vieta relations.
    pub fn vieta_residuals(&self) -> [f64; 3] {
        let [a, b, c] = self.lambda;
        [(a + b + c).norm(), (a * b + a * c + b * c - 1.0).norm(), (a * b * c + I * self.z).norm()]
    }
}

fn poly(l: C64, z: C64) -> C64 {
    l * l * l + l + I * z
}

fn newton(mut l: C64, z: C64, steps: usize) -> C64 {
    for _ in 0..steps {
        let d = 3.0 * l * l + 1.0;
        if d.norm() == 0.0 {
            break;
        }
        let next = l - poly(l, z) / d;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        if poly(next, z).norm() <= poly(l, z).norm() {
            l = next;
        } else {
            break;
        }
    }
    l
}

/// Ordering used everywhere: Re ascending, ties (within rounding) by Im.
pub fn sort_roots(r: &mut [C64; 3]) {
    let scale = 1.0 + r.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let tol = 64.0 * f64::EPSILON * scale;
    r.sort_by(|a, b| {
        if (a.re - b.re).abs() <= tol {
            a.im.partial_cmp(&b.im).unwrap()
        } else {
            a.re.partial_cmp(&b.re).unwrap()
        }
    });
}

fn cardano(z: C64) -> [C64; 3] {
    // depressed cubic t³ + pt + q, p = 1, q = iz
    let q = I * z;
    let disc = (q * q / 4.0 + 1.0 / 27.0).sqrt();
    let a1 = -q / 2.0 + disc;
    let a2 = -q / 2.0 - disc;
    let a = if a1.norm() >= a2.norm() { a1 } else { a2 };
    let u = a.powf(1.0 / 3.0);
    let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let mut out = [C64::new(0.0, 0.0); 3];
    let mut uk = u;
    for o in out.iter_mut() {
        *o = uk - 1.0 / (3.0 * uk);
        uk *= w;
    }
    out
}

/// Local expansion at the double root: λ = λ₀ ± δ with δ² = ∓(z ∓ z₀)/√3
/// (upper signs at z₀ = 2/(3√3)), simple root λ₃ = ±2i/√3 + i(z − z₀)/3.
fn branch_expansion(z: C64, upper: bool) -> [C64; 3] {
    let s3 = 3f64.sqrt();
    let (z0, l0, l3) = if upper {
        (2.0 / (3.0 * s3), -I / s3, 2.0 * I / s3)
    } else {
        (-2.0 / (3.0 * s3), I / s3, -2.0 * I / s3)
    };
    let eps = z - z0;
    let d2 = if upper { eps / s3 } else { -eps / s3 };
    let d = d2.sqrt();
    [l0 + d, l0 - d, l3 + I * eps / 3.0]
}

pub fn solve_cubic(z: C64) -> Result<RootTriple> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return domain(format!("solve_cubic: non-finite z = {z}"));
    }
    let [zp, zm] = branch_points();
    let near_up = (z - zp).norm() < BRANCH_RADIUS;
    let near_dn = (z - zm).norm() < BRANCH_RADIUS;
    let near_branch = near_up || near_dn;
    let mut lambda = if near_branch {
        let r = branch_expansion(z, near_up);
        // separate roots still polished individually; guarded Newton cannot
        // jump to the partner root because it requires residual decrease
        [newton(r[0], z, 2), newton(r[1], z, 2), newton(r[2], z, 2)]
    } else {
        let r = cardano(z);
        [newton(r[0], z, 2), newton(r[1], z, 2), newton(r[2], z, 2)]
    };
    if z.im == 0.0 {
        // for real z the root set is invariant under λ ↦ −conj(λ)
        for l in lambda.iter_mut() {
            if l.re.abs() <= 64.0 * f64::EPSILON * (1.0 + l.norm()) {
                l.re = 0.0;
            }
        }
    }
    sort_roots(&mut lambda);
    Ok(RootTriple { z, lambda, near_branch, ordering: Ordering::ByRealPart })
}

/// Conjugates of the roots at z − p.
pub fn tilde_roots(z: f64, p: f64) -> Result<RootTriple> {
    let base = solve_cubic(C64::new(z - p, 0.0))?;
    let mut lambda = base.lambda.map(|l| l.conj());
    sort_roots(&mut lambda);
    Ok(RootTriple { z: C64::new(z, 0.0), lambda, near_branch: base.near_branch, ordering: base.ordering })
}

/// μ_j = e^{−iπ/6 − 2jiπ/3}, j = 1,2,3, ordered by real part.
pub fn mu() -> [C64; 3] {
    let mut m = [1, 2, 3].map(|j| C64::from_polar(1.0, -PI / 6.0 - 2.0 * j as f64 * PI / 3.0));
    sort_roots(&mut m);
    m
}

/// μ̃_j = e^{iπ/6 + 2ijπ/3}, ordered by real part.
pub fn mu_tilde() -> [C64; 3] {
    let mut m = [1, 2, 3].map(|j| C64::from_polar(1.0, PI / 6.0 + 2.0 * j as f64 * PI / 3.0));
    sort_roots(&mut m);
    m
}

/// Two-term large-|z| expansion μ_j z^{1/3} − z^{−1/3}/(3μ_j) for z > 0.
pub fn asymptotic_roots(z: f64) -> [C64; 3] {
    let s = z.cbrt();
    mu().map(|m| m * s - 1.0 / (3.0 * m * s))
}

/// Largest deviation of the computed roots from the two-term expansion.
pub fn asymptotic_error(z: f64) -> Result<f64> {
    let r = solve_cubic(C64::new(z, 0.0))?;
    let a = asymptotic_roots(z);
    Ok(r.lambda.iter().zip(a.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

/// Distance between two unordered root sets (best matching).
pub fn set_distance(a: &[C64; 3], b: &[C64; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| (0..3).map(|i| (a[i] - b[p[i]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gives_minus_i_zero_i() {
        let r = solve_cubic(C64::new(0.0, 0.0)).unwrap();
        assert!((r.lambda[0] + I).norm() < 1e-15);
        assert!(r.lambda[1].norm() < 1e-15);
        assert!((r.lambda[2] - I).norm() < 1e-15);
    }

    #[test]
    fn branch_point_double_root() {
        let s3 = 3f64.sqrt();
        let r = solve_cubic(C64::new(2.0 / (3.0 * s3), 0.0)).unwrap();
        assert!(r.near_branch);
        let expect = [-I / s3, -I / s3, 2.0 * I / s3];
        assert!(set_distance(&r.lambda, &expect) < 1e-12);
        assert!(r.residual() < 1e-14);
    }

    #[test]
    fn expansion_near_branch_is_accurate() {
        let s3 = 3f64.sqrt();
        for sign in [1.0, -1.0] {
            for eps in [C64::new(5e-7, 0.0), C64::new(0.0, 7e-7), C64::new(-3e-7, 4e-7)] {
                let z = C64::new(sign * 2.0 / (3.0 * s3), 0.0) + eps;
                let r = solve_cubic(z).unwrap();
                assert!(r.near_branch);
                assert!(r.residual() <= 1e-12 * (1.0 + z.norm()), "{}", r.residual());
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(solve_cubic(C64::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn large_z_matches_asymptotics() {
        let z = 1e6;
        let r = solve_cubic(C64::new(z, 0.0)).unwrap();
        let m3 = C64::from_polar(1.0, -PI / 6.0);
        let s = z.cbrt();
        let approx = m3 * s - 1.0 / (3.0 * m3 * s);
        assert!((r.lambda[2] - approx).norm() <= 1.0 * z.powf(-2.0 / 3.0));
    }

    #[test]
    fn tilde_roots_definition() {
        let t = tilde_roots(0.5, 0.2).unwrap();
        let b = solve_cubic(C64::new(0.3, 0.0)).unwrap();
        assert!(set_distance(&t.lambda, &b.lambda.map(|l| l.conj())) < 1e-12);
        let t0 = tilde_roots(0.7, 0.0).unwrap();
        let b0 = solve_cubic(C64::new(0.7, 0.0)).unwrap();
        assert!(set_distance(&t0.lambda, &b0.lambda.map(|l| l.conj())) < 1e-15);
    }

    #[test]
    fn tilde_asymptotics() {
        let t = tilde_roots(1e6, 1.0).unwrap();
        let m = C64::from_polar(1.0, PI / 6.0);
        assert!((t.lambda[2] - m * 1e6f64.cbrt()).norm() < 0.05);
        assert!((mu_tilde()[2] - m).norm() < 1e-15);
    }
}
