//! Finite-sample experiments: Gaussian training sets, empirical risk and its
//! subgradient, restart studies, the tractability gap between Gaussian and
//! worst-case training sets, and the basis-probe uniqueness witness.

pub mod restarts;
pub mod stats;
pub mod tractability;
pub mod uniqueness;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{stream_rng, Execution};
use crate::optimizer::Objective;
use crate::shape::NetworkShape;

pub use restarts::{
    restart_experiment, run_grid, ExperimentGrid, GroundTruth, RestartConfig, RestartReport,
};
pub use stats::wilson_lower_bound;
pub use tractability::{tractability_gap_experiment, TractabilityConfig, TractabilityReport};
pub use uniqueness::{uniqueness_probe, ProbeOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<f64>,
    shape: NetworkShape,
}

impl LabeledDataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<f64>, shape: NetworkShape) -> Result<Self> {
        if points.len() != labels.len() || points.is_empty() {
            return Err(Error::Shape(format!(
                "{} points and {} labels",
                points.len(),
                labels.len()
            )));
        }
        let d = shape.input_dim();
        if let Some(i) = points.iter().position(|p| p.len() != d) {
            return Err(Error::Shape(format!(
                "point {i} has {} entries, expected {d}",
                points[i].len()
            )));
        }
        if labels.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
            return Err(Error::Domain(
                "labels must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            points,
            labels,
            shape,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

const CHUNK: usize = 1024;

/// `n` standard Gaussian inputs labelled by the teacher filter. Chunk `c`
/// draws from RNG stream `c`, so the sample does not depend on threading.
pub fn sample_gaussian_dataset(
    n: usize,
    shape: NetworkShape,
    w_star: &[f64],
    seed: u64,
) -> Result<LabeledDataset> {
    if w_star.len() != shape.m {
        return Err(Error::Shape(format!(
            "w* has {} entries, filter width is {}",
            w_star.len(),
            shape.m
        )));
    }
    if n == 0 {
        return Err(Error::Parameter("dataset size must be positive".into()));
    }
    let d = shape.input_dim();
    let chunks = Execution::available().map(n.div_ceil(CHUNK), |c| {
        let mut rng = stream_rng(seed, c as u64);
        let len = CHUNK.min(n - c * CHUNK);
        (0..len)
            .map(|_| {
                (0..d)
                    .map(|_| rng.sample(StandardNormal))
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    });
    let points: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    let labels = points
        .iter()
        .map(|x| shape.forward_unchecked(w_star, x))
        .collect();
    LabeledDataset::new(points, labels, shape)
}

fn check_filter(w: &[f64], data: &LabeledDataset) -> Result<()> {
    if w.len() != data.shape.m {
        return Err(Error::Shape(format!(
            "filter has {} entries, expected {}",
            w.len(),
            data.shape.m
        )));
    }
    Ok(())
}

/// Per-point squared errors.
pub fn squared_errors(w: &[f64], data: &LabeledDataset) -> Result<Vec<f64>> {
    check_filter(w, data)?;
    Ok(data
        .points
        .iter()
        .zip(&data.labels)
        .map(|(x, y)| {
            let r = data.shape.forward_unchecked(w, x) - y;
            r * r
        })
        .collect())
}

/// `(1/n) sum_i (f(x_i; w) - y_i)^2`.
pub fn empirical_risk(w: &[f64], data: &LabeledDataset) -> Result<f64> {
    Ok(squared_errors(w, data)?.iter().sum::<f64>() / data.len() as f64)
}

/// Mean squared error and its standard error over the points.
pub fn risk_with_stderr(w: &[f64], data: &LabeledDataset) -> Result<(f64, f64)> {
    let e = squared_errors(w, data)?;
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let var = e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Subgradient of the empirical risk, taking the ReLU derivative as 0 at 0.
pub fn empirical_grad(w: &[f64], data: &LabeledDataset) -> Result<Vec<f64>> {
    check_filter(w, data)?;
    let s = data.shape;
    let mut g = vec![0.0; s.m];
    let scale = 2.0 / (data.len() as f64 * s.k as f64);
    for (x, y) in data.points.iter().zip(&data.labels) {
        let mut out = 0.0;
        let mut active = Vec::with_capacity(s.k);
        for j in 0..s.k {
            let p = s.preact(w, x, j);
            if p > 0.0 {
                out += p;
                active.push(j);
            }
        }
        let r = out / s.k as f64 - y;
        if r == 0.0 {
            continue;
        }
        for j in active {
            let win = &x[j * s.stride..j * s.stride + s.m];
            g.iter_mut()
                .zip(win)
                .for_each(|(gi, xi)| *gi += scale * r * xi);
        }
    }
    Ok(g)
}

/// Empirical risk as an optimisation objective.
#[derive(Debug, Clone)]
pub struct EmpiricalObjective<'a> {
    pub data: &'a LabeledDataset,
    pub target: Option<Vec<f64>>,
}

impl Objective for EmpiricalObjective<'_> {
    fn dim(&self) -> usize {
        self.data.shape.m
    }
    fn value(&self, w: &[f64]) -> Result<f64> {
        empirical_risk(w, self.data)
    }
    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        empirical_grad(w, self.data)
    }
    fn target(&self) -> Option<Vec<f64>> {
        self.target.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realizable_labels() {
        let shape = NetworkShape::new(3, 2, 1).unwrap();
        let w = [0.5, -1.0];
        let data = sample_gaussian_dataset(500, shape, &w, 1).unwrap();
        assert!(data.labels().iter().all(|y| *y >= 0.0));
        assert_eq!(empirical_risk(&w, &data).unwrap(), 0.0);
        assert!(empirical_grad(&w, &data).unwrap().iter().all(|g| *g == 0.0));
        assert!(sample_gaussian_dataset(10, shape, &[1.0], 1).is_err());
    }

    #[test]
    fn chunked_sampling_is_deterministic() {
        let shape = NetworkShape::no_overlap(2, 3).unwrap();
        let a = sample_gaussian_dataset(2500, shape, &[1.0, 0.0, 0.0], 9).unwrap();
        let b = sample_gaussian_dataset(2500, shape, &[1.0, 0.0, 0.0], 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points()[0], a.points()[CHUNK]);
    }

    #[test]
    fn linear_regression_case() {
        // k = 1, one point with a positive pre-activation: gradient 2 (w.x - y) x.
        let shape = NetworkShape::no_overlap(1, 2).unwrap();
        let data = LabeledDataset::new(vec![vec![1.0, 2.0]], vec![1.0], shape).unwrap();
        let g = empirical_grad(&[1.0, 1.0], &data).unwrap();
        assert_eq!(g, vec![4.0, 8.0]);
    }

    #[test]
    fn dataset_validation() {
        let shape = NetworkShape::no_overlap(1, 2).unwrap();
        assert!(LabeledDataset::new(vec![vec![1.0]], vec![1.0], shape).is_err());
        assert!(LabeledDataset::new(vec![vec![1.0, 0.0]], vec![-1.0], shape).is_err());
        assert!(LabeledDataset::new(vec![], vec![], shape).is_err());
    }
}
