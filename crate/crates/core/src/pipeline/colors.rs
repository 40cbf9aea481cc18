//! Blue-white-red diverging ramp for per-vertex scalar fields.

use crate::error::{Error, Result};

pub const RAMP_LOW: [u8; 3] = [33, 102, 172];
pub const RAMP_MID: [u8; 3] = [247, 247, 247];
pub const RAMP_HIGH: [u8; 3] = [178, 24, 43];

/// Color at `t` in `[0, 1]`: low end at 0, white at 0.5, high end at 1.
pub fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let (a, b, s) = if t <= 0.5 {
        (RAMP_LOW, RAMP_MID, 2.0 * t)
    } else {
        (RAMP_MID, RAMP_HIGH, 2.0 * t - 1.0)
    };
    std::array::from_fn(|k| (f64::from(a[k]) + s * (f64::from(b[k]) - f64::from(a[k]))).round() as u8)
}

/// Min-max maps the field onto the ramp; a constant field is all white.
pub fn field_colors(values: &[f64]) -> Result<Vec<[u8; 3]>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("field has non-finite values"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(values
        .iter()
        .map(|&v| ramp(if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }))
        .collect())
}
