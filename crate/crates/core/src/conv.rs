//! Exact Gaussian population risk for an arbitrary filter width and stride.
//!
//! Row pairs `(i, j)` with the same offset `j - i` contribute identical kernel
//! terms, so the pairwise sum collapses to one term per offset and the cost
//! does not grow with the number of hidden units.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_same_len, Error, Result};
use crate::kernel::{angle_from_inner, g_polar, norm};
use crate::shape::NetworkShape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvPopulationLoss {
    shape: NetworkShape,
    w_star: Vec<f64>,
    w_star_norm: f64,
    /// `(delta, count)` for offsets whose windows overlap.
    near: Vec<(isize, f64)>,
    /// Number of ordered row pairs whose windows are disjoint.
    far: f64,
    teacher_sum: f64,
}

/// `sum_p u_p v_{p - delta}`.
fn shifted_dot(u: &[f64], v: &[f64], delta: isize) -> f64 {
    let m = u.len() as isize;
    let lo = delta.max(0);
    let hi = (m + delta).min(m);
    (lo..hi)
        .map(|p| u[p as usize] * v[(p - delta) as usize])
        .sum()
}

impl ConvPopulationLoss {
    pub fn new(shape: NetworkShape, w_star: Vec<f64>) -> Result<Self> {
        ensure_finite("w*", &w_star)?;
        if w_star.len() != shape.m {
            return Err(Error::Shape(format!(
                "w* has {} entries, filter width is {}",
                w_star.len(),
                shape.m
            )));
        }
        let w_star_norm = norm(&w_star);
        if w_star_norm == 0.0 {
            return Err(Error::Parameter("w* must be nonzero".into()));
        }
        let k = shape.k as isize;
        let (mut near, mut far) = (Vec::new(), 0.0);
        for t in -(k - 1)..k {
            let delta = t * shape.stride as isize;
            let count = (k - t.abs()) as f64;
            if delta.unsigned_abs() < shape.m {
                near.push((delta, count));
            } else {
                far += count;
            }
        }
        let mut loss = Self {
            shape,
            w_star,
            w_star_norm,
            near,
            far,
            teacher_sum: 0.0,
        };
        loss.teacher_sum = loss.pair_sum(&loss.w_star, &loss.w_star, w_star_norm, w_star_norm);
        Ok(loss)
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    /// `sum_{i,j} g(u_i, v_j)` over the banded rows of `u` and `v`.
    fn pair_sum(&self, u: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        let near: f64 = self
            .near
            .iter()
            .map(|&(delta, n)| n * g_polar(a, b, angle_from_inner(a, b, shifted_dot(u, v, delta))))
            .sum();
        near + self.far * a * b / (2.0 * PI)
    }

    pub fn loss(&self, w: &[f64]) -> Result<f64> {
        ensure_same_len(w, &self.w_star)?;
        let a = norm(w);
        let b = self.w_star_norm;
        let total = self.pair_sum(w, w, a, a) - 2.0 * self.pair_sum(w, &self.w_star, a, b)
            + self.teacher_sum;
        Ok((total / (self.shape.k * self.shape.k) as f64).max(0.0))
    }

    pub fn grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        ensure_same_len(w, &self.w_star)?;
        let a = norm(w);
        if a == 0.0 {
            return Err(Error::NonDifferentiable(
                "population gradient at w = 0".into(),
            ));
        }
        let b = self.w_star_norm;
        let m = w.len() as isize;
        let mut out: Vec<f64> = w
            .iter()
            .map(|x| self.far * (1.0 - b / a) / PI * x)
            .collect();
        for &(delta, n) in &self.near {
            let ts = angle_from_inner(a, a, shifted_dot(w, w, delta));
            let tc = angle_from_inner(a, b, shifted_dot(w, &self.w_star, delta));
            let cw = n * (ts.sin() - b * tc.sin() / a) / PI;
            let cs = n * (PI - ts) / (2.0 * PI);
            let cc = -n * (PI - tc) / PI;
            for p in 0..m {
                let mut v = cw * w[p as usize];
                let q = p - delta;
                if (0..m).contains(&q) {
                    v += cs * w[q as usize] + cc * self.w_star[q as usize];
                }
                let r = p + delta;
                if (0..m).contains(&r) {
                    v += cs * w[r as usize];
                }
                out[p as usize] += v;
            }
        }
        let k2 = (self.shape.k * self.shape.k) as f64;
        out.iter_mut().for_each(|x| *x /= k2);
        Ok(out)
    }

    pub fn distance_to_target(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.w_star)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Rows of the `k x d` weight matrix induced by a shared filter.
pub fn banded_rows(shape: NetworkShape, w: &[f64]) -> Vec<Vec<f64>> {
    (0..shape.k)
        .map(|j| {
            let mut row = vec![0.0; shape.input_dim()];
            row[j * shape.stride..j * shape.stride + shape.m].copy_from_slice(w);
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::no_overlap::{pairwise_sum_loss, NoOverlapLoss};
    use crate::overlap::OverlapLoss2D;

    #[test]
    fn shifted_dot_offsets() {
        let (u, v) = ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]);
        assert_eq!(shifted_dot(&u, &v, 0), 32.0);
        assert_eq!(shifted_dot(&u, &v, 1), 2.0 * 4.0 + 3.0 * 5.0);
        assert_eq!(shifted_dot(&u, &v, -2), 1.0 * 6.0);
        assert_eq!(shifted_dot(&u, &v, 3), 0.0);
    }

    #[test]
    fn matches_explicit_rows() {
        let w = [0.4, -1.3, 0.7, 0.2];
        let s = [1.0, 0.5, -0.5, 0.9];
        for (k, stride) in [(1, 1), (3, 1), (4, 2), (5, 3), (3, 4), (2, 6)] {
            let shape = NetworkShape::new(k, 4, stride).unwrap();
            let l = ConvPopulationLoss::new(shape, s.to_vec()).unwrap();
            let oracle =
                pairwise_sum_loss(&banded_rows(shape, &w), &banded_rows(shape, &s)).unwrap();
            assert!(
                (l.loss(&w).unwrap() - oracle).abs() < 1e-12,
                "k={k} stride={stride}"
            );
        }
    }

    #[test]
    fn agrees_with_special_cases() {
        let no = NoOverlapLoss::new(vec![0.3, -0.2, 1.0], 4).unwrap();
        let conv = ConvPopulationLoss::new(
            NetworkShape::no_overlap(4, 3).unwrap(),
            vec![0.3, -0.2, 1.0],
        )
        .unwrap();
        let w = [1.0, 0.5, -0.7];
        assert!((no.loss(&w).unwrap() - conv.loss(&w).unwrap()).abs() < 1e-13);
        let two = OverlapLoss2D::new(1.0, 5).unwrap();
        let conv2 =
            ConvPopulationLoss::new(NetworkShape::new(5, 2, 1).unwrap(), vec![-1.0, 1.0]).unwrap();
        assert!((two.loss([0.3, -0.9]) - conv2.loss(&[0.3, -0.9]).unwrap()).abs() < 1e-13);
        let (g1, g2) = (
            two.grad([0.3, -0.9]).unwrap(),
            conv2.grad(&[0.3, -0.9]).unwrap(),
        );
        assert!((g1[0] - g2[0]).abs() < 1e-13 && (g1[1] - g2[1]).abs() < 1e-13);
    }

    #[test]
    fn zero_at_target() {
        let shape = NetworkShape::new(6, 3, 1).unwrap();
        let l = ConvPopulationLoss::new(shape, vec![1.0, -2.0, 0.5]).unwrap();
        assert!(l.loss(&[1.0, -2.0, 0.5]).unwrap() < 1e-14);
        assert!(norm(&l.grad(&[1.0, -2.0, 0.5]).unwrap()) < 1e-14);
        assert!(l.grad(&[0.0; 3]).is_err());
    }
}
