//! Population risk of the no-overlap network `f(x; w) = (1/k) sum_i relu(w . x_i)`
//! over `k` disjoint windows of width `m`, with Gaussian inputs and a planted
//! teacher filter `w*`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_same_len, Error, Result};
use crate::kernel::{angle_with_norms, kernel_g, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoOverlapLoss {
    w_star: Vec<f64>,
    k: usize,
    beta: f64,
    gamma: f64,
    w_star_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSet {
    pub origin: Vec<f64>,
    pub global_min: Vec<f64>,
    pub saddle: Option<Vec<f64>>,
}

/// `pi - s(t)` without cancellation: `2 pi sin^2(t/2) - (sin t - t cos t)`.
fn pi_minus_s(theta: f64) -> f64 {
    let q = if theta < 1e-2 {
        let t2 = theta * theta;
        theta * t2 * (1.0 / 3.0 - t2 * (1.0 / 30.0 - t2 / 840.0))
    } else {
        theta.sin() - theta * theta.cos()
    };
    let h = (0.5 * theta).sin();
    (2.0 * PI * h * h - q).max(0.0)
}

impl NoOverlapLoss {
    pub fn new(w_star: Vec<f64>, k: usize) -> Result<Self> {
        ensure_finite("w*", &w_star)?;
        if k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        let w_star_norm = norm(&w_star);
        if w_star_norm == 0.0 {
            return Err(Error::Parameter("w* must be nonzero".into()));
        }
        let kf = k as f64;
        let beta = (kf * kf - kf) / (2.0 * PI);
        Ok(Self {
            w_star,
            k,
            beta,
            gamma: beta + kf / 2.0,
            w_star_norm,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn w_star_norm(&self) -> f64 {
        self.w_star_norm
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Filter width `m`.
    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    /// Input dimension `k m`.
    pub fn input_dim(&self) -> usize {
        self.k * self.dim()
    }

    pub fn angle_to_target(&self, w: &[f64]) -> Option<f64> {
        let a = norm(w);
        (a > 0.0 && w.len() == self.dim())
            .then(|| angle_with_norms(w, &self.w_star, a, self.w_star_norm))
    }

    /// `(1/k^2)[gamma |w|^2 - 2k g(w, w*) - 2 beta |w||w*| + gamma |w*|^2]`,
    /// evaluated as `gamma (a - b)^2 + (k/pi) a b (pi - s(t))` so the value
    /// stays accurate close to `w*`.
    pub fn loss(&self, w: &[f64]) -> Result<f64> {
        ensure_same_len(w, &self.w_star)?;
        let kf = self.k as f64;
        let (a, b) = (norm(w), self.w_star_norm);
        let k2 = kf * kf;
        if a == 0.0 {
            return Ok(self.gamma * b * b / k2);
        }
        let t = angle_with_norms(w, &self.w_star, a, b);
        Ok((self.gamma * (a - b) * (a - b) + kf / PI * a * b * pi_minus_s(t)) / k2)
    }

    /// Coefficients `(c1, c2)` with `-grad(w) = c1 w + c2 w*`.
    pub fn descent_coefficients(&self, w: &[f64]) -> Result<(f64, f64)> {
        ensure_same_len(w, &self.w_star)?;
        let a = norm(w);
        if a == 0.0 {
            return Err(Error::NonDifferentiable("loss gradient at w = 0".into()));
        }
        let kf = self.k as f64;
        let b = self.w_star_norm;
        let t = angle_with_norms(w, &self.w_star, a, b);
        let kk = (kf * kf - kf) / PI;
        let cw = kf + kk - kf * b / (PI * a) * t.sin() - kk * b / a;
        let cs = kf / PI * (PI - t);
        let k2 = kf * kf;
        Ok((-cw / k2, cs / k2))
    }

    pub fn grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        let (c1, c2) = self.descent_coefficients(w)?;
        Ok(w.iter()
            .zip(&self.w_star)
            .map(|(x, s)| -(c1 * x + c2 * s))
            .collect())
    }

    /// Scale `c` of the saddle `-c w*`, or `None` for `k = 1`.
    pub fn saddle_scale(k: usize) -> Option<f64> {
        (k > 1).then(|| {
            let kf = k as f64;
            (kf * kf - kf) / (kf * kf + (PI - 1.0) * kf)
        })
    }

    /// Nonzero Hessian eigenvalue at the saddle, `(k + (k^2 - k)/pi) / k^2`.
    pub fn saddle_curvature(k: usize) -> f64 {
        let kf = k as f64;
        (kf + (kf * kf - kf) / PI) / (kf * kf)
    }

    pub fn critical_points(&self) -> CriticalPointSet {
        CriticalPointSet {
            origin: vec![0.0; self.dim()],
            global_min: self.w_star.clone(),
            saddle: Self::saddle_scale(self.k)
                .map(|c| self.w_star.iter().map(|x| -c * x).collect()),
        }
    }

    /// Central-difference Hessian of `loss`: three-point stencil on the
    /// diagonal, four-point stencil off it.
    pub fn fd_hessian(&self, w: &[f64], step: f64) -> Result<DMatrix<f64>> {
        if !(step > 0.0) {
            return Err(Error::Parameter(format!(
                "step must be positive, got {step}"
            )));
        }
        ensure_same_len(w, &self.w_star)?;
        if norm(w) < 2.0 * step {
            return Err(Error::Domain(
                "Hessian point within 2 steps of the origin".into(),
            ));
        }
        let n = w.len();
        let f = |di: usize, si: f64, dj: usize, sj: f64| {
            let mut p = w.to_vec();
            p[di] += si * step;
            p[dj] += sj * step;
            self.loss(&p)
        };
        let f0 = self.loss(w)?;
        let h2 = step * step;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut p = w.to_vec();
            p[i] = w[i] + step;
            let fp = self.loss(&p)?;
            p[i] = w[i] - step;
            let fm = self.loss(&p)?;
            h[(i, i)] = (fp - 2.0 * f0 + fm) / h2;
            for j in 0..i {
                let v = (f(i, 1.0, j, 1.0)? - f(i, 1.0, j, -1.0)? - f(i, -1.0, j, 1.0)?
                    + f(i, -1.0, j, -1.0)?)
                    / (4.0 * h2);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    /// `d |w - w*|^2` with `d = k m`.
    pub fn upper_bound_by_distance(&self, w: &[f64]) -> Result<f64> {
        ensure_same_len(w, &self.w_star)?;
        let d2: f64 = w
            .iter()
            .zip(&self.w_star)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(self.input_dim() as f64 * d2)
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Rows `w_i = (0_{(i-1)m}, w, 0_{(k-i)m})` of the block-diagonal weight matrix.
pub fn embed_rows(w: &[f64], k: usize) -> Vec<Vec<f64>> {
    let m = w.len();
    (0..k)
        .map(|i| {
            let mut row = vec![0.0; k * m];
            row[i * m..(i + 1) * m].copy_from_slice(w);
            row
        })
        .collect()
}

/// Population risk of a general average-pooled one-hidden-layer network,
/// `(1/k^2) sum_{i,j} [g(w_i, w_j) - 2 g(w_i, w*_j) + g(w*_i, w*_j)]`.
pub fn pairwise_sum_loss(rows: &[Vec<f64>], star_rows: &[Vec<f64>]) -> Result<f64> {
    let k = rows.len();
    if k == 0 || star_rows.len() != k {
        return Err(Error::Shape(format!(
            "{} rows vs {} teacher rows",
            k,
            star_rows.len()
        )));
    }
    let d = rows[0].len();
    if rows.iter().chain(star_rows).any(|r| r.len() != d) {
        return Err(Error::Shape("rows of unequal dimension".into()));
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            total += kernel_g(&rows[i], &rows[j])? - 2.0 * kernel_g(&rows[i], &star_rows[j])?
                + kernel_g(&star_rows[i], &star_rows[j])?;
        }
    }
    Ok((total / (k * k) as f64).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let l = NoOverlapLoss::new(vec![1.0, 0.0], 3).unwrap();
        assert!((l.beta() - 6.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((l.gamma() - l.beta() - 1.5).abs() < 1e-15);
        assert!(NoOverlapLoss::new(vec![0.0], 2).is_err());
        assert!(NoOverlapLoss::new(vec![1.0], 0).is_err());
        assert!(NoOverlapLoss::new(vec![f64::NAN], 1).is_err());
    }

    #[test]
    fn loss_special_points() {
        let l = NoOverlapLoss::new(vec![0.6, -0.8, 0.0], 4).unwrap();
        assert_eq!(l.loss(&[0.6, -0.8, 0.0]).unwrap(), 0.0);
        assert!((l.loss(&[0.0; 3]).unwrap() - l.gamma() / 16.0).abs() < 1e-15);
        let one = NoOverlapLoss::new(vec![1.0], 1).unwrap();
        assert!((one.loss(&[-1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((one.loss(&[0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(one.loss(&[0.0]).unwrap() <= one.upper_bound_by_distance(&[0.0]).unwrap());
        assert!(matches!(l.loss(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn stable_form_matches_definition() {
        let l = NoOverlapLoss::new(vec![0.3, 1.1, -0.4], 5).unwrap();
        for w in [[1.0, 2.0, 3.0], [-0.2, 0.1, 0.5], [0.31, 1.09, -0.41]] {
            let (a, b, kf) = (norm(&w), l.w_star_norm(), 5.0);
            let g = kernel_g(&w, l.w_star()).unwrap();
            let direct = (l.gamma() * a * a - 2.0 * kf * g - 2.0 * l.beta() * a * b
                + l.gamma() * b * b)
                / 25.0;
            assert!((l.loss(&w).unwrap() - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        let t: f64 = 1e-2;
        let q_series = {
            let t2 = t * t;
            t * t2 * (1.0 / 3.0 - t2 * (1.0 / 30.0 - t2 / 840.0))
        };
        let q_direct = t.sin() - t * t.cos();
        assert!((q_series - q_direct).abs() < 1e-17);
    }

    #[test]
    fn critical_points_for_k2() {
        let l = NoOverlapLoss::new(vec![1.0, 0.0], 2).unwrap();
        let cps = l.critical_points();
        let s = cps.saddle.unwrap();
        assert!((s[0] + 1.0 / (1.0 + PI)).abs() < 1e-15);
        assert!(norm(&l.grad(&s).unwrap()) < 1e-12);
        assert!(norm(&l.grad(&cps.global_min).unwrap()) < 1e-15);
        assert!(matches!(
            l.grad(&cps.origin),
            Err(Error::NonDifferentiable(_))
        ));
        let one = NoOverlapLoss::new(vec![1.0, 0.0], 1).unwrap();
        assert!(one.critical_points().saddle.is_none());
    }

    #[test]
    fn hessian_validation() {
        let l = NoOverlapLoss::new(vec![1.0, 0.0], 2).unwrap();
        assert!(matches!(
            l.fd_hessian(&[1.0, 0.0], 0.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            l.fd_hessian(&[1e-5, 0.0], 1e-4),
            Err(Error::Domain(_))
        ));
        let ev = symmetric_eigenvalues(&l.fd_hessian(&[1.0, 0.0], 1e-4).unwrap());
        assert!(ev[0] > 0.0);
    }

    #[test]
    fn embedding_layout() {
        let rows = embed_rows(&[1.0, 2.0], 3);
        assert_eq!(rows[1], vec![0.0, 0.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(pairwise_sum_loss(&rows, &rows[..2]).is_err());
        assert_eq!(pairwise_sum_loss(&rows, &rows).unwrap(), 0.0);
    }
}
