use super::ControlSignal;
use crate::error::{domain, Result};

/// Standard bump e^{−1/(1−r²)} on |r| < 1, scaled so its peak equals 1.
pub fn bump_profile(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// amplitude · bump((t − center)/width) on [0, T].
pub fn bump_control(t_final: f64, center: f64, width: f64, amplitude: f64, dt: f64) -> Result<ControlSignal> {
    if !(width > 0.0 && center - width > 0.0 && center + width < t_final) {
        return domain(format!("bump support [{}, {}] not inside (0, {t_final})", center - width, center + width));
    }
    Ok(ControlSignal::from_fn(t_final, dt, |t| amplitude * bump_profile((t - center) / width)))
}

/// Analytic derivative of `bump_control`'s profile.
pub fn bump_derivative(t: f64, center: f64, width: f64, amplitude: f64) -> f64 {
    let r = (t - center) / width;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - r * r;
    amplitude * bump_profile(r) * (-2.0 * r / (q * q)) / width
}
