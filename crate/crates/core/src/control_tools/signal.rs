use crate::error::{domain, KdvError, Result};
use serde::{Deserialize, Serialize};

/// Uniformly sampled boundary control on [0, T], zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub samples: Vec<f64>,
    pub dt: f64,
}

impl ControlSignal {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || samples.len() < 2 {
            return domain("control signal needs dt > 0 and at least two samples");
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return domain("control signal has non-finite samples");
        }
        Ok(ControlSignal { samples, dt })
    }

    pub fn zeros(t_final: f64, dt: f64) -> Self {
        let n = (t_final / dt).round() as usize;
        ControlSignal { samples: vec![0.0; n + 1], dt }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(t_final: f64, dt: f64, f: F) -> Self {
        let n = (t_final / dt).round() as usize;
        ControlSignal { samples: (0..=n).map(|i| f(i as f64 * dt)).collect(), dt }
    }

    pub fn t_final(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn u0(&self) -> f64 {
        self.samples[0]
    }

    /// Piecewise-linear value; zero outside [0, T].
    pub fn at(&self, t: f64) -> f64 {
        let tf = self.t_final();
        if t < -1e-12 * self.dt || t > tf + 1e-9 * self.dt {
            return 0.0;
        }
        let s = (t / self.dt).clamp(0.0, (self.samples.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.samples.len() - 2);
        let w = s - i as f64;
        self.samples[i] * (1.0 - w) + self.samples[i + 1] * w
    }

    pub fn scaled(&self, c: f64) -> Self {
        ControlSignal { samples: self.samples.iter().map(|v| c * v).collect(), dt: self.dt }
    }

    pub fn add(&self, other: &ControlSignal) -> Result<Self> {
        if (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return domain("adding control signals with different dt");
        }
        let n = self.samples.len().max(other.samples.len());
        let get = |s: &ControlSignal, i: usize| s.samples.get(i).copied().unwrap_or(0.0);
        Ok(ControlSignal { samples: (0..n).map(|i| get(self, i) + get(other, i)).collect(), dt: self.dt })
    }

    /// Delay by `shift` (a multiple of dt), extending the horizon to `t_final`.
    pub fn shifted(&self, shift: f64, t_final: f64) -> Self {
        let k = (shift / self.dt).round() as usize;
        let n = (t_final / self.dt).round() as usize;
        let samples = (0..=n).map(|i| if i >= k { self.samples.get(i - k).copied().unwrap_or(0.0) } else { 0.0 }).collect();
        ControlSignal { samples, dt: self.dt }
    }

    /// Extend with zeros (or truncate) to horizon `t_final`.
    pub fn padded(&self, t_final: f64) -> Self {
        let n = (t_final / self.dt).round() as usize;
        let samples = (0..=n).map(|i| self.samples.get(i).copied().unwrap_or(0.0)).collect();
        ControlSignal { samples, dt: self.dt }
    }

    /// Discrete L²(0,T) norm by the trapezoid rule.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.samples.iter().map(|v| v * v).collect();
        crate::numerics::trapezoid(&sq, self.dt).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| KdvError::Parse(e.to_string());
        w.write_record(["t", "u"]).map_err(err)?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([format!("{:.17e}", i as f64 * self.dt), format!("{:.17e}", v)]).map_err(err)?;
        }
        let b = w.into_inner().map_err(|e| KdvError::Parse(e.to_string()))?;
        String::from_utf8(b).map_err(|e| KdvError::Parse(e.to_string()))
    }

    /// Parse a (t,u) CSV with header; dt is inferred and must be uniform.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut ts = Vec::new();
        let mut us = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| KdvError::Parse(e.to_string()))?;
            if rec.len() != 2 {
                return Err(KdvError::Parse(format!("expected 2 columns, found {}", rec.len())));
            }
            let t: f64 = rec[0].trim().parse().map_err(|_| KdvError::Parse(format!("bad t value {:?}", &rec[0])))?;
            let u: f64 = rec[1].trim().parse().map_err(|_| KdvError::Parse(format!("bad u value {:?}", &rec[1])))?;
            ts.push(t);
            us.push(u);
        }
        if ts.len() < 2 {
            return Err(KdvError::Parse("need at least two samples".into()));
        }
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        for (i, t) in ts.iter().enumerate() {
            if (t - ts[0] - i as f64 * dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(KdvError::Parse(format!("non-uniform sampling at row {}", i + 1)));
            }
        }
        if ts[0].abs() > 1e-12 {
            return Err(KdvError::Parse("samples must start at t = 0".into()));
        }
        ControlSignal::new(us, dt)
    }
}
