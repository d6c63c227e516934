//! AdaGrad on a worst-case training set versus a Gaussian training set of
//! the same size labelled by the same planted filter.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{empirical_risk, sample_gaussian_dataset, EmpiricalObjective, LabeledDataset};
use crate::error::Result;
use crate::exec::{stream_rng, Execution};
use crate::hardness::{build_dataset, planted_instance, splitting_to_filter};
use crate::optimizer::{run_adagrad, AdagradConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractabilityConfig {
    pub d: usize,
    pub num_subsets: usize,
    pub subset_size: usize,
    pub epochs: usize,
    pub learning_rates: Vec<f64>,
    pub seed: u64,
}

impl Default for TractabilityConfig {
    fn default() -> Self {
        Self {
            d: 40,
            num_subsets: 760,
            subset_size: 20,
            epochs: 1000,
            learning_rates: vec![10.0, 1.0, 0.1, 0.05, 0.01],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub dataset: String,
    pub lr: f64,
    /// Training loss before each epoch and after the last one.
    pub losses: Vec<f64>,
}

impl Curve {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("curves are nonempty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractabilityReport {
    pub curves: Vec<Curve>,
    pub best_gaussian: usize,
    pub best_hardness: usize,
    pub zero_filter_hardness: f64,
    pub planted_filter_hardness: f64,
    pub planted_filter: Vec<f64>,
}

impl TractabilityReport {
    pub fn gaussian(&self) -> &Curve {
        &self.curves[self.best_gaussian]
    }

    pub fn hardness(&self) -> &Curve {
        &self.curves[self.best_hardness]
    }
}

/// Full-batch AdaGrad, one step per epoch.
pub fn train_curve(data: &LabeledDataset, w0: &[f64], lr: f64, epochs: usize) -> Result<Vec<f64>> {
    if epochs == 0 {
        return Ok(vec![empirical_risk(w0, data)?]);
    }
    let obj = EmpiricalObjective { data, target: None };
    let cfg = AdagradConfig {
        lr,
        max_iters: epochs,
        grad_tol: 0.0,
        eps: 1e-8,
        record_every: 1,
    };
    let traj = run_adagrad(&obj, w0, &cfg)?;
    let mut losses: Vec<f64> = traj.points.iter().map(|p| p.loss).collect();
    // A run that lands on an exact zero-gradient point stops early; pad flat.
    let last = *losses.last().expect("nonempty");
    losses.resize(epochs + 1, last);
    Ok(losses)
}

pub fn tractability_gap_experiment(
    config: &TractabilityConfig,
    exec: Execution,
) -> Result<TractabilityReport> {
    let (instance, planted) = planted_instance(
        config.d,
        config.num_subsets,
        config.subset_size,
        config.seed,
    )?;
    let w_star = splitting_to_filter(&instance, &planted)?;
    let hard = build_dataset(&instance).to_labeled();
    let gauss = sample_gaussian_dataset(
        hard.len(),
        hard.shape(),
        &w_star,
        config.seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;
    let mut rng = stream_rng(config.seed, 1);
    let w0: Vec<f64> = (0..w_star.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();

    let jobs: Vec<(&str, &LabeledDataset, f64)> = config
        .learning_rates
        .iter()
        .flat_map(|&lr| [("gaussian", &gauss, lr), ("hardness", &hard, lr)])
        .collect();
    let curves: Vec<Curve> = exec
        .map(jobs.len(), |i| {
            let (name, data, lr) = jobs[i];
            train_curve(data, &w0, lr, config.epochs).map(|losses| Curve {
                dataset: name.into(),
                lr,
                losses,
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let best = |name: &str| {
        (0..curves.len())
            .filter(|&i| curves[i].dataset == name)
            .min_by(|&a, &b| curves[a].final_loss().total_cmp(&curves[b].final_loss()))
            .expect("at least one learning rate")
    };
    Ok(TractabilityReport {
        best_gaussian: best("gaussian"),
        best_hardness: best("hardness"),
        zero_filter_hardness: empirical_risk(&vec![0.0; w_star.len()], &hard)?,
        planted_filter_hardness: empirical_risk(&w_star, &hard)?,
        planted_filter: w_star,
        curves,
    })
}
