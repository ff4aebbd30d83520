use crate::critical_lengths::{default_b_tolerance, integral_b_unchecked, PsiField};
use crate::error::Result;
use crate::numerics::C64;
use rayon::prelude::*;

/// ∫₀^L B(z,x)dx tabulated on a graded grid of [−Z, Z] (spacing 0.01·max(1,|z|)),
/// interpolated by local cubics and continued by the |z|^{−4/3} law beyond Z.
#[derive(Debug, Clone)]
pub struct BTable {
    pub field: PsiField,
    pub zs: Vec<f64>,
    pub vals: Vec<C64>,
}

const REL_STEP: f64 = 0.01;

fn nudge(z: f64, avoid: &[f64]) -> f64 {
    let mut z = z;
    for a in avoid {
        if (z - a).abs() < 1e-4 {
            z = a + if z >= *a { 1e-4 } else { -1e-4 };
        }
    }
    z
}

impl BTable {
    pub fn new(field: &PsiField, z_max: f64) -> Result<Self> {
        let mut pos = vec![0.0];
        let mut z = 0.0;
        while z < z_max {
            z += REL_STEP * z.abs().max(1.0);
            pos.push(z);
        }
        let mut zs: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
        zs.extend(pos.iter().skip(1));
        let p = field.p;
        // B's factors are 0/0 at z = ±p and z − p = ±p
        let avoid = [p, -p, 0.0, 2.0 * p];
        let vals: Result<Vec<C64>> = zs
            .par_iter()
            .map(|&z| {
                let zz = nudge(z, &avoid);
                integral_b_unchecked(zz, field, default_b_tolerance(zz.abs().max(1.0)).max(1e-15))
            })
            .collect();
        Ok(BTable { field: *field, zs, vals: vals? })
    }

    pub fn z_max(&self) -> f64 {
        *self.zs.last().unwrap()
    }

    pub fn eval(&self, z: f64) -> C64 {
        let n = self.zs.len();
        let zm = self.z_max();
        if z >= zm {
            return self.vals[n - 1] * (zm / z).powf(4.0 / 3.0);
        }
        if z <= -zm {
            return self.vals[0] * (zm / -z).powf(4.0 / 3.0);
        }
        let i = self.zs.partition_point(|v| *v <= z).clamp(2, n - 2);
        let idx = [i - 2, i - 1, i, i + 1];
        let mut s = C64::new(0.0, 0.0);
        for &a in &idx {
            let mut w = 1.0;
            for &b in &idx {
                if a != b {
                    w *= (z - self.zs[b]) / (self.zs[a] - self.zs[b]);
                }
            }
            s += self.vals[a] * w;
        }
        s
    }
}
