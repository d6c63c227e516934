//! Gradient descent and AdaGrad with per-iterate instrumentation, the step
//! size prescribed by the convergence theorem for no-overlap networks, and an
//! online monitor for the trajectory invariants that theorem relies on.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conv::ConvPopulationLoss;
use crate::error::{Error, Result};
use crate::kernel::{angle_with_norms, dot, norm};
use crate::no_overlap::NoOverlapLoss;
use crate::overlap::OverlapLoss2D;

/// A loss that can be minimised by first-order methods.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64]) -> Result<f64>;
    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>>;
    /// Known minimiser, used for the recorded angle.
    fn target(&self) -> Option<Vec<f64>> {
        None
    }
}

impl Objective for NoOverlapLoss {
    fn dim(&self) -> usize {
        NoOverlapLoss::dim(self)
    }
    fn value(&self, w: &[f64]) -> Result<f64> {
        self.loss(w)
    }
    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.grad(w)
    }
    fn target(&self) -> Option<Vec<f64>> {
        Some(self.w_star().to_vec())
    }
}

fn pair(w: &[f64]) -> Result<[f64; 2]> {
    w.try_into()
        .map_err(|_| Error::Shape(format!("expected 2 entries, got {}", w.len())))
}

impl Objective for OverlapLoss2D {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, w: &[f64]) -> Result<f64> {
        Ok(self.loss(pair(w)?))
    }
    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.grad(pair(w)?)?.to_vec())
    }
    fn target(&self) -> Option<Vec<f64>> {
        Some(self.w_star().to_vec())
    }
}

impl Objective for ConvPopulationLoss {
    fn dim(&self) -> usize {
        self.shape().m
    }
    fn value(&self, w: &[f64]) -> Result<f64> {
        self.loss(w)
    }
    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.grad(w)
    }
    fn target(&self) -> Option<Vec<f64>> {
        Some(self.w_star().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Record every n-th iterate; the first and last are always kept.
    pub record_every: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            max_iters: 100_000,
            grad_tol: 1e-9,
            seed: 0,
            record_every: 1,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size < 1.0) {
            return Err(Error::Parameter(format!(
                "step size must lie in (0, 1), got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be positive".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::Parameter(format!(
                "grad_tol must be nonnegative, got {}",
                self.grad_tol
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Parameter("record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdagradConfig {
    pub lr: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub eps: f64,
    pub record_every: usize,
}

impl Default for AdagradConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            max_iters: 1000,
            grad_tol: 0.0,
            eps: 1e-8,
            record_every: 1,
        }
    }
}

impl AdagradConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.eps > 0.0) || !(self.grad_tol >= 0.0) || self.record_every == 0 {
            return Err(Error::Parameter("invalid AdaGrad configuration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub w: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub w_norm: f64,
    pub angle_to_target: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTolReached,
    MaxIters,
    NondifferentiablePoint,
    /// The per-iterate observer asked to stop.
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub terminated: Termination,
    /// Iterate index of the final point.
    pub iterations: usize,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points
            .last()
            .expect("trajectories hold at least the initial point")
    }
}

/// `w - step * grad(w)`.
pub fn gd_step(obj: &dyn Objective, w: &[f64], step: f64) -> Result<Vec<f64>> {
    let g = obj.gradient(w)?;
    Ok(w.iter().zip(&g).map(|(x, d)| x - step * d).collect())
}

fn make_point(
    iter: usize,
    w: &[f64],
    loss: f64,
    g: &[f64],
    target: Option<&[f64]>,
) -> TrajectoryPoint {
    let w_norm = norm(w);
    let angle_to_target = target.and_then(|t| {
        let tn = norm(t);
        (w_norm > 0.0 && tn > 0.0).then(|| angle_with_norms(w, t, w_norm, tn))
    });
    TrajectoryPoint {
        iter,
        w: w.to_vec(),
        loss,
        grad_norm: norm(g),
        w_norm,
        angle_to_target,
    }
}

struct Recorder {
    every: usize,
    points: Vec<TrajectoryPoint>,
}

impl Recorder {
    fn push(&mut self, p: &TrajectoryPoint, force: bool) {
        let fresh = self.points.last().is_none_or(|q| q.iter != p.iter);
        if fresh && (force || p.iter.is_multiple_of(self.every)) {
            self.points.push(p.clone());
        }
    }
}

/// Shared driver: `update` turns the gradient into the additive step.
fn run_descent(
    obj: &dyn Objective,
    w0: &[f64],
    max_iters: usize,
    grad_tol: f64,
    record_every: usize,
    mut update: impl FnMut(&[f64]) -> Vec<f64>,
    observer: &mut dyn FnMut(&TrajectoryPoint) -> ControlFlow<()>,
) -> Result<Trajectory> {
    if w0.len() != obj.dim() {
        return Err(Error::Shape(format!(
            "initial point has {} entries, expected {}",
            w0.len(),
            obj.dim()
        )));
    }
    let target = obj.target();
    let mut rec = Recorder {
        every: record_every,
        points: Vec::new(),
    };
    let mut w = w0.to_vec();
    let mut last: Option<TrajectoryPoint> = None;
    let mut iter = 0;
    let terminated = loop {
        let loss = obj.value(&w)?;
        let g = match obj.gradient(&w) {
            Ok(g) => g,
            Err(Error::NonDifferentiable(_)) => break Termination::NondifferentiablePoint,
            Err(e) => return Err(e),
        };
        let p = make_point(iter, &w, loss, &g, target.as_deref());
        rec.push(&p, iter == 0);
        let flow = observer(&p);
        let stop = if flow.is_break() {
            Some(Termination::Stopped)
        } else if p.grad_norm <= grad_tol {
            Some(Termination::GradTolReached)
        } else if iter >= max_iters {
            Some(Termination::MaxIters)
        } else {
            None
        };
        last = Some(p);
        if let Some(t) = stop {
            break t;
        }
        let step = update(&g);
        w.iter_mut().zip(&step).for_each(|(x, s)| *x += s);
        iter += 1;
    };
    if let Some(p) = &last {
        rec.push(p, true);
    }
    if rec.points.is_empty() {
        return Err(Error::NonDifferentiable(
            "initial point is not differentiable".into(),
        ));
    }
    let iterations = rec.points.last().map(|p| p.iter).unwrap_or(0);
    Ok(Trajectory {
        points: rec.points,
        terminated,
        iterations,
    })
}

pub fn run_gd(obj: &dyn Objective, w0: &[f64], config: &GdConfig) -> Result<Trajectory> {
    run_gd_observed(obj, w0, config, &mut |_| ControlFlow::Continue(()))
}

/// Gradient descent calling `observer` on every iterate, recorded or not.
pub fn run_gd_observed(
    obj: &dyn Objective,
    w0: &[f64],
    config: &GdConfig,
    observer: &mut dyn FnMut(&TrajectoryPoint) -> ControlFlow<()>,
) -> Result<Trajectory> {
    config.validate()?;
    let lr = config.step_size;
    run_descent(
        obj,
        w0,
        config.max_iters,
        config.grad_tol,
        config.record_every,
        |g| g.iter().map(|d| -lr * d).collect(),
        observer,
    )
}

/// Per-coordinate AdaGrad accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub accum: Vec<f64>,
    pub lr: f64,
    pub eps: f64,
}

impl AdagradState {
    pub fn new(dim: usize, lr: f64, eps: f64) -> Self {
        Self {
            accum: vec![0.0; dim],
            lr,
            eps,
        }
    }

    /// Additive update `-lr g / sqrt(G + eps)` after `G += g^2`.
    pub fn step(&mut self, g: &[f64]) -> Vec<f64> {
        self.accum.iter_mut().zip(g).for_each(|(a, d)| *a += d * d);
        g.iter()
            .zip(&self.accum)
            .map(|(d, a)| -self.lr * d / (a + self.eps).sqrt())
            .collect()
    }
}

pub fn run_adagrad(obj: &dyn Objective, w0: &[f64], config: &AdagradConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut state = AdagradState::new(w0.len(), config.lr, config.eps);
    run_descent(
        obj,
        w0,
        config.max_iters,
        config.grad_tol,
        config.record_every,
        |g| state.step(g),
        &mut |_| ControlFlow::Continue(()),
    )
}

/// `alpha(k) = 1/k + (k^2 - k)/(pi k^2)`.
pub fn alpha_k(k: usize) -> f64 {
    let kf = k as f64;
    1.0 / kf + (kf * kf - kf) / (PI * kf * kf)
}

/// `M = min{sin(pi(1-delta)), sin^2(pi(1-delta))/(alpha pi), 1/8} cos(pi(1-delta)/2)`.
pub fn theorem_m(k: usize, delta: f64) -> f64 {
    let phi = PI * (1.0 - delta);
    let s = phi.sin();
    s.min(s * s / (alpha_k(k) * PI)).min(0.125) * (0.5 * phi).cos()
}

/// Smoothness constant `L = 1 + 3|w*|/M`.
pub fn theorem_smoothness(k: usize, delta: f64, w_star_norm: f64) -> f64 {
    1.0 + 3.0 * w_star_norm / theorem_m(k, delta)
}

/// Learning rate `1/L` from the convergence theorem.
pub fn theorem_step_size(k: usize, delta: f64, w_star_norm: f64) -> Result<f64> {
    if k == 0 || !(delta > 0.0 && delta < 1.0) || !(w_star_norm > 0.0 && w_star_norm.is_finite()) {
        return Err(Error::Parameter(format!(
            "need k >= 1, 0 < delta < 1, |w*| > 0; got k={k}, delta={delta}, |w*|={w_star_norm}"
        )));
    }
    Ok(1.0 / theorem_smoothness(k, delta, w_star_norm))
}

/// Whether `eps < delta sin(pi delta) / k`, the precondition tying the
/// gradient tolerance to the failure probability.
pub fn epsilon_compatible(eps: f64, delta: f64, k: usize) -> bool {
    eps < delta * (PI * delta).sin() / k as f64
}

/// `min{|w0| sin t0, |w*| sin^2 t0 / (alpha pi), |w*|/8}`.
pub fn norm_floor(k: usize, w0_norm: f64, theta0: f64, w_star_norm: f64) -> f64 {
    let s = theta0.sin();
    (w0_norm * s)
        .min(w_star_norm * s * s / (alpha_k(k) * PI))
        .min(w_star_norm / 8.0)
}

/// Isotropic point on the unit sphere.
pub fn unit_sphere_init<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    assert!(dim >= 1, "dimension must be positive");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Online checks of the no-overlap trajectory invariants: nonincreasing
/// angle, the norm floor, the summed squared gradient bound, monotone loss
/// and planarity in `span{w0, w*}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantMonitor {
    pub norm_floor: f64,
    pub grad_sq_bound: f64,
    pub grad_sq_sum: f64,
    pub angle_increases: usize,
    pub norm_violations: usize,
    pub loss_increases: usize,
    pub max_plane_residual: f64,
    pub min_norm: f64,
    prev_angle: Option<f64>,
    prev_loss: Option<f64>,
    basis: Vec<Vec<f64>>,
}

pub const ANGLE_FLOOR: f64 = 1e-12;

impl InvariantMonitor {
    pub fn new(loss: &NoOverlapLoss, w0: &[f64], step: f64, smoothness: f64) -> Result<Self> {
        let theta0 = loss
            .angle_to_target(w0)
            .ok_or_else(|| Error::Domain("initial point must be nonzero".into()))?;
        let b = loss.w_star_norm();
        let e1: Vec<f64> = loss.w_star().iter().map(|x| x / b).collect();
        let c = dot(w0, &e1);
        let r: Vec<f64> = w0.iter().zip(&e1).map(|(x, e)| x - c * e).collect();
        let rn = norm(&r);
        let mut basis = vec![e1];
        if rn > 1e-14 * norm(w0) {
            basis.push(r.into_iter().map(|x| x / rn).collect());
        }
        let l0 = loss.loss(w0)?;
        Ok(Self {
            norm_floor: norm_floor(loss.k(), norm(w0), theta0, b),
            grad_sq_bound: l0 / (step * (1.0 - step * smoothness / 2.0)),
            grad_sq_sum: 0.0,
            angle_increases: 0,
            norm_violations: 0,
            loss_increases: 0,
            max_plane_residual: 0.0,
            min_norm: f64::INFINITY,
            prev_angle: None,
            prev_loss: None,
            basis,
        })
    }

    pub fn observe(&mut self, p: &TrajectoryPoint) {
        self.grad_sq_sum += p.grad_norm * p.grad_norm;
        if p.w_norm < self.norm_floor - 1e-10 {
            self.norm_violations += 1;
        }
        self.min_norm = self.min_norm.min(p.w_norm);
        if let (Some(prev), Some(t)) = (self.prev_angle, p.angle_to_target) {
            if prev > ANGLE_FLOOR && t > prev {
                self.angle_increases += 1;
            }
        }
        if let Some(prev) = self.prev_loss {
            if p.loss > prev {
                self.loss_increases += 1;
            }
        }
        let mut r = p.w.clone();
        for e in &self.basis {
            let c = dot(&r, e);
            r.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
        }
        self.max_plane_residual = self.max_plane_residual.max(norm(&r));
        self.prev_angle = p.angle_to_target;
        self.prev_loss = Some(p.loss);
    }

    pub fn grad_sum_ok(&self) -> bool {
        self.grad_sq_sum <= self.grad_sq_bound + 1e-8
    }

    pub fn all_ok(&self) -> bool {
        self.angle_increases == 0
            && self.norm_violations == 0
            && self.loss_increases == 0
            && self.grad_sum_ok()
            && self.max_plane_residual <= 1e-10
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream_rng;

    #[test]
    fn config_validation() {
        assert!(GdConfig {
            step_size: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GdConfig {
            step_size: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GdConfig::default().validate().is_ok());
        assert!(AdagradConfig {
            lr: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn fixed_points() {
        let l = NoOverlapLoss::new(vec![1.0, 2.0], 3).unwrap();
        assert_eq!(gd_step(&l, &[1.0, 2.0], 0.5).unwrap(), vec![1.0, 2.0]);
        let s = l.critical_points().saddle.unwrap();
        let next = gd_step(&l, &s, 0.5).unwrap();
        assert!(next.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-14));
        let t = run_gd(&l, &[1.0, 2.0], &GdConfig::default()).unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.terminated, Termination::GradTolReached);
    }

    #[test]
    fn step_decomposes_in_plane() {
        let l = NoOverlapLoss::new(vec![0.2, -0.4, 1.0], 4).unwrap();
        let w0 = [0.5, 0.1, -0.3];
        let lam = 0.3;
        let (c1, c2) = l.descent_coefficients(&w0).unwrap();
        assert!(c2 >= 0.0);
        let next = gd_step(&l, &w0, lam).unwrap();
        for i in 0..3 {
            let expect = (1.0 + lam * c1) * w0[i] + lam * c2 * l.w_star()[i];
            assert!((next[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn nondifferentiable_start() {
        let l = NoOverlapLoss::new(vec![1.0], 2).unwrap();
        assert!(run_gd(&l, &[0.0], &GdConfig::default()).is_err());
    }

    #[test]
    fn recording_keeps_first_and_last() {
        let l = NoOverlapLoss::new(vec![1.0, 0.0], 2).unwrap();
        let cfg = GdConfig {
            step_size: 0.5,
            max_iters: 103,
            grad_tol: 0.0,
            seed: 0,
            record_every: 10,
        };
        let t = run_gd(&l, &[0.0, 1.0], &cfg).unwrap();
        let iters: Vec<usize> = t.points.iter().map(|p| p.iter).collect();
        assert_eq!(iters.first(), Some(&0));
        assert_eq!(iters.last(), Some(&103));
        assert_eq!(iters.len(), 12);
        assert_eq!(t.terminated, Termination::MaxIters);
    }

    #[test]
    fn theorem_constants() {
        let m = theorem_m(1, 0.5);
        assert!((m - 0.125 * (PI / 4.0).cos()).abs() < 1e-15);
        let lam = theorem_step_size(1, 0.5, 1.0).unwrap();
        assert!((lam - 1.0 / (1.0 + 3.0 / m)).abs() < 1e-15);
        assert!(theorem_step_size(2, 1.0, 1.0).is_err());
        assert!(theorem_step_size(0, 0.5, 1.0).is_err());
        for k in 1..=64 {
            let mut prev = 0.0;
            for delta in [0.1, 0.25, 0.5] {
                let l = theorem_step_size(k, delta, 1.0).unwrap();
                assert!(l < 0.5 && l > prev);
                prev = l;
            }
        }
        assert!(epsilon_compatible(1e-9, 0.1, 8));
        assert!(!epsilon_compatible(0.1, 0.1, 8));
    }

    #[test]
    fn sphere_samples() {
        let mut rng = stream_rng(3, 0);
        let n = 100_000;
        let mut mean = [0.0; 8];
        for _ in 0..n {
            let v = unit_sphere_init(8, &mut rng);
            assert!((norm(&v) - 1.0).abs() < 1e-12);
            mean.iter_mut()
                .zip(&v)
                .for_each(|(m, x)| *m += x / n as f64);
        }
        assert!(norm(&mean) <= 0.02);
        // On the circle the cap {angle > 0.9 pi} around a fixed direction has mass 0.1.
        let n2 = 100_000;
        let hits = (0..n2)
            .filter(|_| {
                let v = unit_sphere_init(2, &mut rng);
                v[0].clamp(-1.0, 1.0).acos() > 0.9 * PI
            })
            .count() as f64
            / n2 as f64;
        assert!((hits - 0.1).abs() < 3.0 * (0.09f64 / n2 as f64).sqrt());
    }

    #[test]
    fn adagrad_steps_shrink_on_constant_gradient() {
        let mut st = AdagradState::new(2, 0.1, 1e-8);
        let g = [3.0, -4.0];
        let s1 = norm(&st.step(&g));
        let s2 = norm(&st.step(&g));
        let s3 = norm(&st.step(&g));
        assert!(s1 > s2 && s2 > s3);
        // G = n g^2, so each coordinate moves by lr / sqrt(n).
        assert!((s2 - 0.1 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn adagrad_is_stationary_at_minimum() {
        let l = NoOverlapLoss::new(vec![1.0, -1.0], 2).unwrap();
        let cfg = AdagradConfig {
            max_iters: 5,
            ..Default::default()
        };
        let t = run_adagrad(&l, &[1.0, -1.0], &cfg).unwrap();
        assert!(t.points.iter().all(|p| p.w == vec![1.0, -1.0]));
    }

    #[test]
    fn monitor_flags_nothing_on_short_run() {
        let l = NoOverlapLoss::new(vec![0.0, 1.0, 0.0], 2).unwrap();
        let lam = theorem_step_size(2, 0.25, 1.0).unwrap();
        let w0 = [0.6, -0.8, 0.0];
        let mut mon = InvariantMonitor::new(&l, &w0, lam, 1.0 / lam).unwrap();
        let cfg = GdConfig {
            step_size: lam,
            max_iters: 2000,
            grad_tol: 1e-9,
            seed: 0,
            record_every: 100,
        };
        run_gd_observed(&l, &w0, &cfg, &mut |p| {
            mon.observe(p);
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!(mon.all_ok(), "{mon:?}");
    }
}
