//! Random-restart studies of gradient descent on the exact population risk
//! of convolutional networks with overlapping filters.

use std::ops::ControlFlow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::wilson_lower_bound;
use crate::conv::ConvPopulationLoss;
use crate::error::{Error, Result};
use crate::exec::{stream_rng, Execution};
use crate::kernel::norm;
use crate::optimizer::{run_gd_observed, GdConfig, Termination};
use crate::overlap::{in_trap, OverlapLoss2D};
use crate::shape::NetworkShape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartConfig {
    pub step_size: f64,
    pub max_iters: usize,
    /// A run is global when it ends within this distance of the teacher.
    pub global_tol: f64,
    /// Runs stop early once this close to the teacher.
    pub converged_tol: f64,
    pub stuck_grad_tol: f64,
    pub stuck_window: usize,
    pub stuck_distance: f64,
    /// Half-width of the initialisation cube; `4 max(1, |w*|)` when absent.
    pub init_half_width: Option<f64>,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            max_iters: 200_000,
            global_tol: 1e-3,
            converged_tol: 1e-5,
            stuck_grad_tol: 1e-7,
            stuck_window: 5000,
            stuck_distance: 1e-2,
            init_half_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub global: bool,
    pub stalled: bool,
    pub iterations: usize,
    pub final_distance: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub num_runs: usize,
    pub num_global: usize,
    pub num_stuck: usize,
    pub p_hat: f64,
    pub wilson_lower: f64,
}

impl RestartReport {
    pub fn from_outcomes(outcomes: &[RunOutcome], z: f64) -> Result<Self> {
        let num_runs = outcomes.len();
        let num_global = outcomes.iter().filter(|o| o.global).count();
        Ok(Self {
            num_runs,
            num_global,
            num_stuck: num_runs - num_global,
            p_hat: num_global as f64 / num_runs.max(1) as f64,
            wilson_lower: wilson_lower_bound(num_global, num_runs, z)?,
        })
    }
}

fn init_point<R: Rng>(m: usize, half: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-half..half)).collect();
        if norm(&w) > 0.0 {
            return w;
        }
    }
}

/// One gradient-descent run from `w0`, classified against the teacher.
pub fn single_run(
    loss: &ConvPopulationLoss,
    w0: &[f64],
    config: &RestartConfig,
) -> Result<RunOutcome> {
    let gd = GdConfig {
        step_size: config.step_size,
        max_iters: config.max_iters,
        grad_tol: 0.0,
        seed: 0,
        record_every: usize::MAX,
    };
    let mut low = 0usize;
    let mut stalled = false;
    let traj = run_gd_observed(loss, w0, &gd, &mut |p| {
        let dist = loss.distance_to_target(&p.w);
        if dist <= config.converged_tol {
            return ControlFlow::Break(());
        }
        if p.grad_norm < config.stuck_grad_tol && dist > config.stuck_distance {
            low += 1;
            if low >= config.stuck_window {
                stalled = true;
                return ControlFlow::Break(());
            }
        } else {
            low = 0;
        }
        ControlFlow::Continue(())
    })?;
    let last = traj.last();
    let final_distance = loss.distance_to_target(&last.w);
    Ok(RunOutcome {
        global: traj.terminated != Termination::NondifferentiablePoint
            && final_distance <= config.global_tol,
        stalled,
        iterations: traj.iterations,
        final_distance,
        final_loss: last.loss,
    })
}

/// Independent runs from uniform points in the initialisation cube; run `r`
/// draws from RNG stream `r` of `seed`.
pub fn restart_runs(
    shape: NetworkShape,
    w_star: &[f64],
    runs: usize,
    config: &RestartConfig,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RunOutcome>> {
    if runs == 0 {
        return Err(Error::Parameter("need at least one run".into()));
    }
    let loss = ConvPopulationLoss::new(shape, w_star.to_vec())?;
    let half = config
        .init_half_width
        .unwrap_or(4.0 * norm(w_star).max(1.0));
    exec.map(runs, |r| {
        let mut rng = stream_rng(seed, r as u64);
        single_run(&loss, &init_point(shape.m, half, &mut rng), config)
    })
    .into_iter()
    .collect()
}

pub fn restart_experiment(
    shape: NetworkShape,
    w_star: &[f64],
    runs: usize,
    config: &RestartConfig,
    z: f64,
    seed: u64,
    exec: Execution,
) -> Result<RestartReport> {
    RestartReport::from_outcomes(&restart_runs(shape, w_star, runs, config, seed, exec)?, z)
}

/// Ground-truth filter families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
    Ramp { from: f64, to: f64 },
}

impl GroundTruth {
    pub fn sample<R: Rng>(&self, m: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            GroundTruth::Uniform { lo, hi } => (0..m).map(|_| rng.random_range(lo..hi)).collect(),
            GroundTruth::Constant { value } => vec![value; m],
            GroundTruth::Ramp { from, to } => (0..m)
                .map(|i| {
                    if m == 1 {
                        from
                    } else {
                        from + (to - from) * i as f64 / (m - 1) as f64
                    }
                })
                .collect(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GroundTruth::Uniform { lo, hi } => format!("U[{lo},{hi}]"),
            GroundTruth::Constant { value } => format!("const({value})"),
            GroundTruth::Ramp { from, to } => format!("ramp({from}->{to})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub hidden_neurons: Vec<usize>,
    pub filter_sizes: Vec<usize>,
    pub ground_truths: Vec<GroundTruth>,
    pub truths_per_cell: usize,
    pub runs: usize,
}

/// Strides `1, f/4, f/2`, deduplicated and at least 1.
pub fn strides_for(filter_size: usize) -> Vec<usize> {
    let mut s: Vec<usize> = [1, filter_size / 4, filter_size / 2]
        .into_iter()
        .filter(|&x| x >= 1)
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

impl ExperimentGrid {
    /// Reduced version of the published sweep: 5 teachers per cell, 20 runs each.
    pub fn reduced_table1() -> Self {
        Self {
            hidden_neurons: vec![50, 100],
            filter_sizes: vec![2, 8, 16],
            ground_truths: vec![
                GroundTruth::Uniform { lo: -1.0, hi: 1.0 },
                GroundTruth::Uniform { lo: -2.0, hi: 0.0 },
                GroundTruth::Uniform { lo: 0.0, hi: 2.0 },
            ],
            truths_per_cell: 5,
            runs: 20,
        }
    }

    /// `(shape, ground truth)` cells in a fixed order.
    pub fn cells(&self) -> Vec<(NetworkShape, GroundTruth)> {
        let mut out = Vec::new();
        for &k in &self.hidden_neurons {
            for &m in &self.filter_sizes {
                for s in strides_for(m) {
                    for gt in &self.ground_truths {
                        out.push((NetworkShape { k, m, stride: s }, *gt));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub k: usize,
    pub m: usize,
    pub stride: usize,
    pub distribution: String,
    pub truth_index: usize,
    pub w_star: Vec<f64>,
    pub report: RestartReport,
    pub max_iterations: usize,
}

/// Every `(cell, teacher, run)` triple is one work item so the load spreads
/// evenly; rows come back in cell order.
pub fn run_grid(
    grid: &ExperimentGrid,
    config: &RestartConfig,
    z: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<GridRow>> {
    let cells = grid.cells();
    let mut teachers = Vec::new();
    for (c, (shape, gt)) in cells.iter().enumerate() {
        for t in 0..grid.truths_per_cell {
            let id = (c * grid.truths_per_cell + t) as u64;
            let mut rng = stream_rng(seed, id << 32 | 0xffff_ffff);
            teachers.push((*shape, *gt, t, gt.sample(shape.m, &mut rng), id));
        }
    }
    let losses: Vec<ConvPopulationLoss> = teachers
        .iter()
        .map(|(shape, _, _, w, _)| ConvPopulationLoss::new(*shape, w.clone()))
        .collect::<Result<_>>()?;
    let runs = grid.runs;
    let outcomes = exec.map(teachers.len() * runs, |job| {
        let (ti, r) = (job / runs, job % runs);
        let (shape, _, _, w_star, id) = &teachers[ti];
        let half = config
            .init_half_width
            .unwrap_or(4.0 * norm(w_star).max(1.0));
        let mut rng = stream_rng(seed, id << 32 | r as u64);
        single_run(&losses[ti], &init_point(shape.m, half, &mut rng), config)
    });
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    teachers
        .iter()
        .zip(outcomes.chunks(runs))
        .map(|((shape, gt, t, w_star, _), chunk)| {
            Ok(GridRow {
                k: shape.k,
                m: shape.m,
                stride: shape.stride,
                distribution: gt.label(),
                truth_index: *t,
                w_star: w_star.clone(),
                report: RestartReport::from_outcomes(chunk, z)?,
                max_iterations: chunk.iter().map(|o| o.iterations).max().unwrap_or(0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub samples: usize,
    pub started_in_trap: usize,
    pub stayed_in_trap: usize,
    pub stuck_fraction: f64,
}

/// Gradient descent on the two-tap loss from uniformly random unit
/// directions; counts runs that start in the open fourth quadrant and never
/// leave it.
pub fn trap_stuck_fraction(
    loss: &OverlapLoss2D,
    samples: usize,
    step: f64,
    iters: usize,
    seed: u64,
    exec: Execution,
) -> Result<TrapReport> {
    if samples == 0 || !(step > 0.0) {
        return Err(Error::Parameter(
            "need samples > 0 and a positive step".into(),
        ));
    }
    let flags = exec.map(samples, |i| -> Result<(bool, bool)> {
        let mut rng = stream_rng(seed, i as u64);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut w = [phi.cos(), phi.sin()];
        let start = in_trap(w);
        if !start {
            return Ok((false, false));
        }
        for _ in 0..iters {
            let g = loss.grad(w)?;
            w = [w[0] - step * g[0], w[1] - step * g[1]];
            if !in_trap(w) {
                return Ok((true, false));
            }
        }
        Ok((true, true))
    });
    let flags: Vec<(bool, bool)> = flags.into_iter().collect::<Result<_>>()?;
    let started_in_trap = flags.iter().filter(|f| f.0).count();
    let stayed_in_trap = flags.iter().filter(|f| f.1).count();
    Ok(TrapReport {
        samples,
        started_in_trap,
        stayed_in_trap,
        stuck_fraction: stayed_in_trap as f64 / samples as f64,
    })
}
