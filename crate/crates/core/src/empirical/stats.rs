use crate::error::{Error, Result};

/// One-sided Wilson score lower endpoint for `successes` out of `trials`,
/// clamped to `[0, 1]`.
pub fn wilson_lower_bound(successes: usize, trials: usize, z: f64) -> Result<f64> {
    if trials == 0 || successes > trials || !(z > 0.0 && z.is_finite()) {
        return Err(Error::Parameter(format!(
            "invalid Wilson inputs {successes}/{trials}, z={z}"
        )));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(((centre - spread) / (1.0 + z2 / n)).clamp(0.0, 1.0))
}
