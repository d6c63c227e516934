//! Self-check suite run by `relu-lab verify`. Each check reports a measured
//! value next to its verdict so failures are diagnosable from the log.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conv::ConvPopulationLoss;
use crate::empirical::{
    risk_with_stderr, sample_gaussian_dataset, uniqueness_probe, wilson_lower_bound, ProbeOutcome,
};
use crate::error::Result;
use crate::exec::{stream_rng, Execution};
use crate::hardness::{
    build_dataset, filter_to_splitting, risk_threshold, splitting_to_filter, SetSplitInstance,
};
use crate::kernel::{angle, kernel_g, kernel_grad_u, norm, relu, KernelGradFn};
use crate::no_overlap::{symmetric_eigenvalues, NoOverlapLoss};
use crate::optimizer::{
    run_gd_observed, theorem_step_size, unit_sphere_init, GdConfig, InvariantMonitor,
};
use crate::overlap::{in_trap, shifted_kernel_floor, OverlapLoss2D};
use crate::shape::NetworkShape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl CheckResult {
    fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
        }
    }

    fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured >= threshold,
            measured,
            threshold,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub quick: bool,
    pub seed: u64,
    pub exec: Execution,
    /// Gradient under test in the kernel finite-difference check.
    pub kernel_grad: KernelGradFn,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            quick: false,
            seed: 0,
            exec: Execution::default(),
            kernel_grad: kernel_grad_u,
        }
    }
}

impl VerifyConfig {
    fn pick(&self, quick: usize, full: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }
}

pub fn run_suite(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    Ok(vec![
        kernel_monte_carlo(cfg),
        kernel_gradient(cfg)?,
        no_overlap_gradient(cfg)?,
        overlap_gradient(cfg)?,
        conv_gradient(cfg)?,
        critical_points()?,
        convergence(cfg)?,
        trap_bound(cfg)?,
        trap_invariance(cfg)?,
        shifted_kernel_bound(cfg),
        reduction_round_trip(cfg)?,
        empirical_consistency(cfg)?,
        uniqueness(cfg)?,
        wilson_sanity()?,
    ])
}

fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / norm(b).max(1e-8)
}

/// Largest number of standard errors between the Monte Carlo mean of
/// `relu(u.x) relu(v.x)` and the closed form.
fn kernel_monte_carlo(cfg: &VerifyConfig) -> CheckResult {
    let pairs = cfg.pick(5, 20);
    let samples = cfg.pick(100_000, 1_000_000);
    let z = cfg.exec.map(pairs, |p| {
        let mut rng = stream_rng(cfg.seed, 1000 + p as u64);
        let d = rng.random_range(1..=10);
        let u = gaussian_vec(&mut rng, d);
        let v = gaussian_vec(&mut rng, d);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..samples {
            let x = gaussian_vec(&mut rng, d);
            let y = relu(u.iter().zip(&x).map(|(a, b)| a * b).sum())
                * relu(v.iter().zip(&x).map(|(a, b)| a * b).sum());
            sum += y;
            sq += y * y;
        }
        let n = samples as f64;
        let mean = sum / n;
        let se = ((sq / n - mean * mean) / (n - 1.0)).sqrt();
        let diff = (mean - kernel_g(&u, &v).expect("equal lengths")).abs();
        if diff <= 1e-12 {
            0.0
        } else {
            diff / se
        }
    });
    CheckResult::at_most(
        "kernel matches Monte Carlo (max z-score)",
        z.into_iter().fold(0.0, f64::max),
        3.0,
    )
}

fn kernel_gradient(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.pick(100, 1000) {
        let u = gaussian_vec(&mut rng, 5);
        let v = gaussian_vec(&mut rng, 5);
        if angle(&u, &v)?.min(PI - angle(&u, &v)?) < 1e-2 {
            continue;
        }
        let fd = central_diff(&|x| kernel_g(x, &v).expect("equal lengths"), &u, 1e-6);
        worst = worst.max(rel_err(&(cfg.kernel_grad)(&u, &v)?, &fd));
    }
    Ok(CheckResult::at_most(
        "kernel gradient vs finite differences",
        worst,
        1e-6,
    ))
}

fn no_overlap_gradient(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.pick(100, 1000) {
        let m = rng.random_range(1..=6);
        let k = rng.random_range(1..=8);
        let loss = NoOverlapLoss::new(gaussian_vec(&mut rng, m), k)?;
        let w = gaussian_vec(&mut rng, m);
        let t = loss.angle_to_target(&w).unwrap_or(0.0);
        if norm(&w) < 0.1 || t.min(PI - t) < 1e-2 {
            continue;
        }
        let fd = central_diff(&|x| loss.loss(x).expect("nonzero"), &w, 1e-6);
        worst = worst.max(rel_err(&loss.grad(&w)?, &fd));
    }
    Ok(CheckResult::at_most(
        "no-overlap gradient vs finite differences",
        worst,
        1e-6,
    ))
}

fn overlap_gradient(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.pick(100, 1000) {
        let loss = OverlapLoss2D::new(rng.random_range(0.2..3.0), rng.random_range(2..=10))?;
        let w = [
            rng.sample::<f64, _>(StandardNormal),
            rng.sample(StandardNormal),
        ];
        if norm(&w) < 0.1 || angle(&w, &loss.w_star())?.min(PI - angle(&w, &loss.w_star())?) < 1e-2
        {
            continue;
        }
        let fd = central_diff(&|x| loss.loss([x[0], x[1]]), &w, 1e-6);
        worst = worst.max(rel_err(&loss.grad(w)?, &fd));
    }
    Ok(CheckResult::at_most(
        "overlap gradient vs finite differences",
        worst,
        1e-6,
    ))
}

fn conv_gradient(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.pick(50, 300) {
        let m = rng.random_range(2..=6);
        let shape = NetworkShape::new(rng.random_range(1..=6), m, rng.random_range(1..=m))?;
        let loss = ConvPopulationLoss::new(shape, gaussian_vec(&mut rng, m))?;
        let w = gaussian_vec(&mut rng, m);
        if norm(&w) < 0.1 {
            continue;
        }
        let fd = central_diff(&|x| loss.loss(x).expect("nonzero"), &w, 1e-6);
        worst = worst.max(rel_err(&loss.grad(&w)?, &fd));
    }
    Ok(CheckResult::at_most(
        "convolutional gradient vs finite differences",
        worst,
        1e-6,
    ))
}

/// Worst violation among: gradient norms at `w*` and the saddle, the
/// saddle's smallest Hessian eigenvalue, its degenerate direction and the
/// top eigenvalue against the closed-form curvature.
fn critical_points() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for k in [2usize, 3, 8] {
        let loss = NoOverlapLoss::new(vec![0.6, -0.8, 0.0], k)?;
        let cp = loss.critical_points();
        let saddle = cp.saddle.expect("saddle exists for k > 1");
        worst = worst.max(norm(&loss.grad(&cp.global_min)?) / 1e-10);
        worst = worst.max(norm(&loss.grad(&saddle)?) / 1e-10);
        let eig = symmetric_eigenvalues(&loss.fd_hessian(&saddle, 1e-5)?);
        worst = worst.max(-eig[0] / 1e-4);
        worst = worst.max(eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min) / 1e-4);
        let top = eig[eig.len() - 1];
        worst = worst.max((top - NoOverlapLoss::saddle_curvature(k)).abs() / 1e-3);
    }
    Ok(CheckResult::at_most(
        "critical points (worst ratio to tolerance)",
        worst,
        1.0,
    ))
}

/// Fraction of theorem-step runs that converge with every trajectory
/// invariant intact.
fn convergence(cfg: &VerifyConfig) -> Result<CheckResult> {
    let (k, m, delta) = (8, 4, 0.1);
    let step = theorem_step_size(k, delta, 1.0)?;
    let runs = cfg.pick(10, 100);
    let mut ok = 0usize;
    let mut accepted = 0usize;
    let mut stream = 0u64;
    while accepted < runs {
        let mut rng = stream_rng(cfg.seed.wrapping_add(stream), 5);
        stream += 1;
        let w_star = unit_sphere_init(m, &mut rng);
        let w0 = unit_sphere_init(m, &mut rng);
        let loss = NoOverlapLoss::new(w_star.clone(), k)?;
        if loss.angle_to_target(&w0).unwrap_or(PI) > (1.0 - delta) * PI {
            continue;
        }
        accepted += 1;
        let mut monitor = InvariantMonitor::new(&loss, &w0, step, 1.0 / step)?;
        let gd = GdConfig {
            step_size: step,
            max_iters: 500_000,
            grad_tol: 1e-10,
            seed: 0,
            record_every: 1000,
        };
        let traj = run_gd_observed(&loss, &w0, &gd, &mut |p| {
            monitor.observe(p);
            ControlFlow::Continue(())
        })?;
        let dist = norm(
            &traj
                .last()
                .w
                .iter()
                .zip(&w_star)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        if dist <= 1e-3 && monitor.all_ok() {
            ok += 1;
        }
    }
    Ok(CheckResult::at_least(
        "theorem-step descent converges with invariants",
        ok as f64 / runs as f64,
        1.0,
    ))
}

fn trap_bound(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 6);
    let mut worst = f64::INFINITY;
    for k in [2usize, 4, 8] {
        let loss = OverlapLoss2D::new(1.0, k)?;
        let bound = loss.suboptimality_bound();
        worst = worst.min(-(loss.loss(loss.trap_minimizer()) - bound).abs());
        for _ in 0..cfg.pick(1000, 10_000) {
            let w = [rng.random_range(1e-6..5.0), -rng.random_range(1e-6..5.0)];
            worst = worst.min(loss.loss(w) - bound);
        }
    }
    Ok(CheckResult::at_least(
        "trap losses minus suboptimality bound",
        worst,
        -1e-10,
    ))
}

fn trap_invariance(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 7);
    let mut escaped = 0usize;
    for k in [2usize, 4, 8] {
        let loss = OverlapLoss2D::new(1.0, k)?;
        for _ in 0..cfg.pick(1000, 10_000) {
            let phi = rng.random_range(-PI / 2.0..0.0);
            let r = rng.random_range(0.01..10.0);
            let w = [r * phi.cos(), r * phi.sin()];
            if !in_trap(w) {
                continue;
            }
            let lambda = rng.random_range(0.0..1.0 / 3.0);
            let g = loss.grad(w)?;
            if !in_trap([w[0] - lambda * g[0], w[1] - lambda * g[1]]) {
                escaped += 1;
            }
        }
    }
    Ok(CheckResult::at_most(
        "one-step trap escapes",
        escaped as f64,
        0.0,
    ))
}

fn shifted_kernel_bound(cfg: &VerifyConfig) -> CheckResult {
    let mut rng = stream_rng(cfg.seed, 8);
    let loss = OverlapLoss2D::new(1.0, 2).expect("valid");
    let mut worst = f64::INFINITY;
    for _ in 0..cfg.pick(1000, 10_000) {
        let w = [rng.random_range(1e-3..5.0), -rng.random_range(1e-3..5.0)];
        worst = worst.min(loss.shifted_kernel(w) - shifted_kernel_floor(w));
    }
    CheckResult::at_least("shifted kernel above its trap floor", worst, -1e-12)
}

/// Solvable instances must round-trip through the planted filter; an
/// instance is counted as a failure when the two sides disagree.
fn reduction_round_trip(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 9);
    let mut failures = 0usize;
    for _ in 0..cfg.pick(50, 300) {
        let d = rng.random_range(2..=6);
        let k = rng.random_range(2..=3);
        let count = rng.random_range(1..=(k - 1) * d);
        let subsets = (0..count)
            .map(|_| {
                let size = rng.random_range(2..=d);
                rand::seq::index::sample(&mut rng, d, size)
                    .into_iter()
                    .map(|i| i + 1)
                    .collect()
            })
            .collect();
        let inst = SetSplitInstance::new(d, k, subsets)?;
        match inst.brute_force_split(cfg.exec)? {
            Some(sol) => {
                let w = splitting_to_filter(&inst, &sol)?;
                let risk = build_dataset(&inst).risk(&w)?;
                let ok = risk < risk_threshold(k, d)? && filter_to_splitting(&w, &inst).is_ok();
                failures += usize::from(!ok);
            }
            None => {
                let w = vec![0.0; k * d];
                failures += usize::from(filter_to_splitting(&w, &inst).is_ok());
            }
        }
    }
    Ok(CheckResult::at_most(
        "reduction round trip failures",
        failures as f64,
        0.0,
    ))
}

fn empirical_consistency(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 10);
    let n = cfg.pick(20_000, 100_000);
    let mut worst: f64 = 0.0;
    for t in 0..cfg.pick(3, 10) {
        let (k, m) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let w_star = gaussian_vec(&mut rng, m);
        let w = gaussian_vec(&mut rng, m);
        let shape = NetworkShape::no_overlap(k, m)?;
        let data =
            sample_gaussian_dataset(n, shape, &w_star, cfg.seed.wrapping_add(100 + t as u64))?;
        let (risk, se) = risk_with_stderr(&w, &data)?;
        let exact = NoOverlapLoss::new(w_star, k)?.loss(&w)?;
        worst = worst.max((risk - exact).abs() / se.max(1e-300));
    }
    Ok(CheckResult::at_most(
        "empirical vs population risk (max z-score)",
        worst,
        3.0,
    ))
}

fn uniqueness(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut rng = stream_rng(cfg.seed, 11);
    let mut misses = 0usize;
    for _ in 0..cfg.pick(100, 1000) {
        let (k, m) = (rng.random_range(1..=4), rng.random_range(1..=5));
        let w_star = gaussian_vec(&mut rng, m);
        let w = gaussian_vec(&mut rng, m);
        let shape = NetworkShape::no_overlap(k, m)?;
        let witnessed = matches!(
            uniqueness_probe(shape, &w, &w_star)?,
            ProbeOutcome::Witness { .. }
        );
        let positive = NoOverlapLoss::new(w_star, k)?.loss(&w)? > 0.0;
        misses += usize::from(!(witnessed && positive));
    }
    Ok(CheckResult::at_most(
        "uniqueness probe misses",
        misses as f64,
        0.0,
    ))
}

fn wilson_sanity() -> Result<CheckResult> {
    let lb = wilson_lower_bound(3, 20, 1.645)?;
    Ok(CheckResult::at_most(
        "Wilson bound for 3/20 vs reference",
        (lb - 0.061_58).abs(),
        5e-5,
    ))
}
