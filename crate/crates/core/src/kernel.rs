//! Arc-cosine kernel of degree one: `g(u, v) = E[relu(u.x) relu(v.x)]` for
//! standard Gaussian `x`, and its gradient in the first argument.

use std::f64::consts::PI;

use crate::error::{ensure_same_len, Error, Result};

pub type KernelGradFn = fn(&[f64], &[f64]) -> Result<Vec<f64>>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `sin t + (pi - t) cos t`, decreasing from `pi` at 0 to 0 at `pi`.
pub fn s_of(theta: f64) -> f64 {
    theta.sin() + (PI - theta) * theta.cos()
}

/// `g` expressed through the two norms and the angle.
pub fn g_polar(a: f64, b: f64, theta: f64) -> f64 {
    a * b * s_of(theta) / (2.0 * PI)
}

/// Angle from norms and inner product, cosine clamped into [-1, 1].
pub fn angle_from_inner(a: f64, b: f64, c: f64) -> f64 {
    (c / (a * b)).clamp(-1.0, 1.0).acos()
}

/// Angle between nonzero vectors of known norms. Uses the half-angle form
/// `2 atan2(|u/a - v/b|, |u/a + v/b|)`, which keeps full relative accuracy
/// near 0 and pi where `acos` of the cosine bottoms out around 1e-8.
pub(crate) fn angle_with_norms(u: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in u.iter().zip(v) {
        let (p, q) = (x / a, y / b);
        diff += (p - q) * (p - q);
        sum += (p + q) * (p + q);
    }
    (2.0 * diff.sqrt().atan2(sum.sqrt())).clamp(0.0, PI)
}

pub fn angle(u: &[f64], v: &[f64]) -> Result<f64> {
    ensure_same_len(u, v)?;
    let (a, b) = (norm(u), norm(v));
    if a == 0.0 || b == 0.0 {
        return Err(Error::Domain("angle with a zero vector".into()));
    }
    Ok(angle_with_norms(u, v, a, b))
}

/// Zero when either argument is the zero vector (continuous extension).
pub fn kernel_g(u: &[f64], v: &[f64]) -> Result<f64> {
    ensure_same_len(u, v)?;
    let (a, b) = (norm(u), norm(v));
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    Ok(g_polar(a, b, angle_with_norms(u, v, a, b)))
}

/// `dg/du = (|v| sin t / 2pi) u/|u| + ((pi - t)/2pi) v`. At `t = 0` this is
/// `v/2`, at `t = pi` it is zero, matching the one-sided limits. A zero `v`
/// gives a zero gradient since `g(., 0)` vanishes identically.
pub fn kernel_grad_u(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    ensure_same_len(u, v)?;
    let (a, b) = (norm(u), norm(v));
    if a == 0.0 {
        return Err(Error::NonDifferentiable("kernel gradient at u = 0".into()));
    }
    if b == 0.0 {
        return Ok(vec![0.0; u.len()]);
    }
    let t = angle_with_norms(u, v, a, b);
    let cu = b * t.sin() / (2.0 * PI * a);
    let cv = (PI - t) / (2.0 * PI);
    Ok(u.iter().zip(v).map(|(x, y)| cu * x + cv * y).collect())
}
