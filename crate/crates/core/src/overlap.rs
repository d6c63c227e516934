//! Two-tap, stride-one convolutional filter with `k = d - 1` hidden units and
//! teacher `(-w*, w*)`. Contains the fourth-quadrant trap and its tight loss
//! lower bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{angle_with_norms, g_polar, kernel_g, kernel_grad_u, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapLoss2D {
    w_star_scale: f64,
    k: usize,
}

/// The open fourth quadrant `{w1 > 0, w2 < 0}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuadrantRegion;

impl QuadrantRegion {
    pub fn contains(&self, w: [f64; 2]) -> bool {
        in_trap(w)
    }
}

pub fn in_trap(w: [f64; 2]) -> bool {
    w[0] > 0.0 && w[1] < 0.0
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    Ok(())
}

/// `(k^2 - 3k + 2)/pi + sqrt(3)(k - 1)/pi + 2(k - 1)/3`.
pub fn h_of_k(k: usize) -> Result<f64> {
    check_k(k)?;
    let kf = k as f64;
    Ok((kf * kf - 3.0 * kf + 2.0) / PI + 3f64.sqrt() * (kf - 1.0) / PI + 2.0 * (kf - 1.0) / 3.0)
}

/// Lower bound on the loss over the fourth quadrant,
/// `(2h + 1) / (k^2 (2h + 2)) |w*|^2` with `|w*|^2 = 2 w*^2`.
pub fn suboptimality_bound(k: usize, w_star_scale: f64) -> Result<f64> {
    let h = h_of_k(k)?;
    if !(w_star_scale > 0.0 && w_star_scale.is_finite()) {
        return Err(Error::Parameter(format!(
            "w* scale must be positive, got {w_star_scale}"
        )));
    }
    let kf = k as f64;
    Ok((2.0 * h + 1.0) / (kf * kf * (2.0 * h + 2.0)) * 2.0 * w_star_scale * w_star_scale)
}

/// Lower bound `(1/2pi)(sqrt(3)/2 - pi/6)|w|^2` on `g(w_l, w_r)` in the trap.
pub fn shifted_kernel_floor(w: [f64; 2]) -> f64 {
    (3f64.sqrt() / 2.0 - PI / 6.0) * (w[0] * w[0] + w[1] * w[1]) / (2.0 * PI)
}

/// Angular profile of the teacher cross terms for `w` at angle `-t` in the
/// trap, `t` in `[0, pi/4]`; maximised at `t = pi/4`.
pub fn trap_angular_profile(theta: f64, k: usize) -> f64 {
    let kf = k as f64;
    let a = 0.75 * PI + theta;
    let f1 = a.sin() + (0.25 * PI - theta) * a.cos();
    let side = |c: f64| {
        let c = c / 2f64.sqrt();
        (1.0 - c * c).sqrt() + (PI - c.acos()) * c
    };
    2.0 * kf * f1 + (2.0 * kf - 2.0) * (side(theta.cos()) + side(theta.sin()))
}

fn pad_r(w: [f64; 2]) -> [f64; 3] {
    [w[0], w[1], 0.0]
}

fn pad_l(w: [f64; 2]) -> [f64; 3] {
    [0.0, w[0], w[1]]
}

impl OverlapLoss2D {
    pub fn new(w_star_scale: f64, k: usize) -> Result<Self> {
        check_k(k)?;
        if !(w_star_scale > 0.0 && w_star_scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "w* scale must be positive, got {w_star_scale}"
            )));
        }
        Ok(Self { w_star_scale, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn w_star_scale(&self) -> f64 {
        self.w_star_scale
    }

    pub fn w_star(&self) -> [f64; 2] {
        [-self.w_star_scale, self.w_star_scale]
    }

    pub fn h(&self) -> f64 {
        h_of_k(self.k).expect("k validated at construction")
    }

    pub fn suboptimality_bound(&self) -> f64 {
        suboptimality_bound(self.k, self.w_star_scale).expect("validated at construction")
    }

    /// Minimiser of the loss along the ray through `-(-w*, w*)`, where the
    /// trap bound is attained: `-(h/(h+1)) (-w*, w*)`.
    pub fn trap_minimizer(&self) -> [f64; 2] {
        let h = self.h();
        let c = h / (h + 1.0) * self.w_star_scale;
        [c, -c]
    }

    fn pair_counts(&self) -> (f64, f64, f64) {
        let kf = self.k as f64;
        (kf, kf - 1.0, kf * kf - 3.0 * kf + 2.0)
    }

    /// `sum_{i,j} g(u_i, v_j)` for banded rows built from 2-vectors.
    fn banded_sum(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let (same, adjacent, far) = self.pair_counts();
        let g = |x: &[f64], y: &[f64]| kernel_g(x, y).expect("equal lengths");
        same * g(&u, &v)
            + adjacent * (g(&pad_r(u), &pad_l(v)) + g(&pad_l(u), &pad_r(v)))
            + far * norm(&u) * norm(&v) / (2.0 * PI)
    }

    /// Population risk, from the pairwise kernel sum over the `k` banded rows
    /// with identical terms grouped by row offset.
    pub fn loss(&self, w: [f64; 2]) -> f64 {
        let s = self.w_star();
        let k2 = (self.k * self.k) as f64;
        let total = self.banded_sum(w, w) - 2.0 * self.banded_sum(w, s) + self.banded_sum(s, s);
        (total / k2).max(0.0)
    }

    pub fn grad(&self, w: [f64; 2]) -> Result<[f64; 2]> {
        let a = norm(&w);
        if a == 0.0 {
            return Err(Error::NonDifferentiable(
                "overlap loss gradient at w = 0".into(),
            ));
        }
        let (same, adjacent, far) = self.pair_counts();
        let s = self.w_star();
        let b = norm(&s);
        let (wr, wl) = (pad_r(w), pad_l(w));
        let t_rl = angle_with_norms(&wr, &wl, a, a);
        let wp = [w[1], w[0]];
        let gu = |u: &[f64], v: &[f64]| kernel_grad_u(u, v).expect("nonzero, equal lengths");
        let d0 = gu(&w, &s);
        let d_rl = gu(&wr, &pad_l(s));
        let d_lr = gu(&wl, &pad_r(s));
        let mut out = [0.0; 2];
        for i in 0..2 {
            let self_part = same * w[i]
                + 2.0 * adjacent * (t_rl.sin() / PI * w[i] + (PI - t_rl) / (2.0 * PI) * wp[i])
                + far / PI * w[i];
            let cross =
                same * d0[i] + adjacent * (d_rl[i] + d_lr[i + 1]) + far * b / (2.0 * PI * a) * w[i];
            out[i] = (self_part - 2.0 * cross) / (self.k * self.k) as f64;
        }
        Ok(out)
    }

    /// `g(w_l, w_r)` for the filter `w`.
    pub fn shifted_kernel(&self, w: [f64; 2]) -> f64 {
        let a = norm(&w);
        if a == 0.0 {
            return 0.0;
        }
        g_polar(a, a, angle_with_norms(&pad_l(w), &pad_r(w), a, a))
    }
}
