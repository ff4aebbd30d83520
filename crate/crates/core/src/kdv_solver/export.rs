use super::Trajectory;
use crate::error::{KdvError, Result};

pub const MAGIC: &[u8; 8] = b"KDVTRAJ1";

/// Header `t,x_1,…,x_{N−1}`; one row per time node.
pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| KdvError::Parse(e.to_string());
    let mut head = vec!["t".to_string()];
    head.extend(traj.grid.xs().iter().map(|x| format!("{x:.17e}")));
    w.write_record(&head).map_err(err)?;
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![format!("{t:.17e}")];
        row.extend(y.iter().map(|v| format!("{v:.17e}")));
        w.write_record(&row).map_err(err)?;
    }
    let b = w.into_inner().map_err(|e| KdvError::Parse(e.to_string()))?;
    String::from_utf8(b).map_err(|e| KdvError::Parse(e.to_string()))
}

/// magic, u64 n_times, u64 n_x, then x grid, times and row-major states
/// (all little-endian f64).
pub fn trajectory_binary(traj: &Trajectory) -> Vec<u8> {
    let xs = traj.grid.xs();
    let mut out = Vec::with_capacity(24 + 8 * (xs.len() + traj.times.len() * (1 + xs.len())));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(traj.times.len() as u64).to_le_bytes());
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for v in xs.iter().chain(traj.times.iter()).chain(traj.states.iter().flatten()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of `trajectory_binary`: (x grid, times, states).
pub fn read_binary(bytes: &[u8]) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(KdvError::Parse("missing KDVTRAJ1 header".into()));
    }
    let rd = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (nt, nx) = (rd(8) as usize, rd(16) as usize);
    let need = 24 + 8 * (nx + nt + nt * nx);
    if bytes.len() != need {
        return Err(KdvError::Parse(format!("expected {need} bytes, found {}", bytes.len())));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[24 + 8 * k..32 + 8 * k].try_into().unwrap());
    let xs = (0..nx).map(f).collect();
    let ts = (0..nt).map(|k| f(nx + k)).collect();
    let states = (0..nt).map(|r| (0..nx).map(|c| f(nx + nt + r * nx + c)).collect()).collect();
    Ok((xs, ts, states))
}
