use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::relu;

/// One-hidden-layer convolutional network with a shared filter of width `m`
/// slid over `k` windows at the given stride, followed by average pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkShape {
    pub k: usize,
    pub m: usize,
    pub stride: usize,
}

impl NetworkShape {
    pub fn new(k: usize, m: usize, stride: usize) -> Result<Self> {
        if k == 0 || m == 0 || stride == 0 {
            return Err(Error::Parameter(format!(
                "invalid shape k={k} m={m} stride={stride}"
            )));
        }
        Ok(Self { k, m, stride })
    }

    pub fn no_overlap(k: usize, m: usize) -> Result<Self> {
        Self::new(k, m, m)
    }

    pub fn is_no_overlap(&self) -> bool {
        self.stride >= self.m
    }

    pub fn input_dim(&self) -> usize {
        self.m + (self.k - 1) * self.stride
    }

    pub fn check(&self, w: &[f64], x: &[f64]) -> Result<()> {
        if w.len() != self.m || x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "filter {} / input {} for shape k={} m={} stride={}",
                w.len(),
                x.len(),
                self.k,
                self.m,
                self.stride
            )));
        }
        Ok(())
    }

    /// Pre-activation of window `j`.
    pub(crate) fn preact(&self, w: &[f64], x: &[f64], j: usize) -> f64 {
        let start = j * self.stride;
        w.iter()
            .zip(&x[start..start + self.m])
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `(1/k) sum_j relu(w . x[j s .. j s + m])`, without shape checks.
    pub(crate) fn forward_unchecked(&self, w: &[f64], x: &[f64]) -> f64 {
        (0..self.k).map(|j| relu(self.preact(w, x, j))).sum::<f64>() / self.k as f64
    }

    pub fn forward(&self, w: &[f64], x: &[f64]) -> Result<f64> {
        self.check(w, x)?;
        Ok(self.forward_unchecked(w, x))
    }
}
