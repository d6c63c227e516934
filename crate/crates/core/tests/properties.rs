use std::f64::consts::PI;
use std::ops::ControlFlow;

use proptest::prelude::*;
use relu_lab::conv::ConvPopulationLoss;
use relu_lab::empirical::restarts::restart_runs;
use relu_lab::empirical::RestartConfig;
use relu_lab::kernel::{dot, kernel_g, norm};
use relu_lab::no_overlap::{embed_rows, pairwise_sum_loss, NoOverlapLoss};
use relu_lab::optimizer::{
    run_gd_observed, theorem_smoothness, theorem_step_size, GdConfig, InvariantMonitor,
};
use relu_lab::overlap::{in_trap, shifted_kernel_floor, OverlapLoss2D};
use relu_lab::shape::NetworkShape;
use relu_lab::Execution;

fn vec_in(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, dim)
}

fn pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_dim).prop_flat_map(|d| (vec_in(d), vec_in(d)))
}

/// Householder reflection `I - 2 n n^T / |n|^2`.
fn reflect(n: &[f64], x: &[f64]) -> Vec<f64> {
    let c = 2.0 * dot(n, x) / dot(n, n);
    x.iter().zip(n).map(|(a, b)| a - c * b).collect()
}

fn g2(u: &[f64], v: &[f64]) -> f64 {
    let (a, b) = (norm(u), norm(v));
    let t = (dot(u, v) / (a * b)).clamp(-1.0, 1.0).acos();
    a * b / (2.0 * PI) * (t.sin() + (PI - t) * t.cos())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_is_nonnegative((u, v) in pair(8)) {
        prop_assert!(kernel_g(&u, &v).unwrap() >= 0.0);
    }

    #[test]
    fn loss_positive_away_from_target((ws, w) in pair(6), k in 1usize..8) {
        let loss = NoOverlapLoss::new(ws.clone(), k).unwrap();
        let dist = norm(&w.iter().zip(&ws).map(|(a, b)| a - b).collect::<Vec<_>>());
        let l = loss.loss(&w).unwrap();
        prop_assert!(l >= 0.0);
        if dist >= 1e-3 && norm(&ws) > 1e-3 {
            prop_assert!(l > 1e-12, "loss {l} at distance {dist}");
        }
    }

    #[test]
    fn loss_invariant_under_reflection((ws, w) in pair(6), n in vec_in(6), k in 1usize..8) {
        let n = &n[..ws.len()];
        prop_assume!(norm(n) > 1e-3 && norm(&ws) > 1e-3);
        let a = NoOverlapLoss::new(ws.clone(), k).unwrap().loss(&w).unwrap();
        let b = NoOverlapLoss::new(reflect(n, &ws), k).unwrap().loss(&reflect(n, &w)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn gradient_lies_in_plane_and_c2_nonnegative((ws, w) in pair(6), k in 1usize..8) {
        prop_assume!(norm(&w) > 1e-3 && norm(&ws) > 1e-3);
        let loss = NoOverlapLoss::new(ws.clone(), k).unwrap();
        let (_, c2) = loss.descent_coefficients(&w).unwrap();
        prop_assert!(c2 >= 0.0);
        // Project out span{w, w*} by Gram-Schmidt.
        let mut g = loss.grad(&w).unwrap();
        let e1: Vec<f64> = w.iter().map(|x| x / norm(&w)).collect();
        let c = dot(&ws, &e1);
        let r: Vec<f64> = ws.iter().zip(&e1).map(|(s, e)| s - c * e).collect();
        let mut basis = vec![e1];
        if norm(&r) > 1e-9 {
            basis.push(r.iter().map(|x| x / norm(&r)).collect());
        }
        for e in &basis {
            let p = dot(&g, e);
            g.iter_mut().zip(e).for_each(|(x, y)| *x -= p * y);
        }
        prop_assert!(norm(&g) <= 1e-12 * (1.0 + norm(&loss.grad(&w).unwrap())));
    }

    #[test]
    fn pairwise_form_matches_closed_form((ws, w) in pair(5), k in 1usize..6) {
        let loss = NoOverlapLoss::new(ws.clone(), k).unwrap();
        let direct = pairwise_sum_loss(&embed_rows(&w, k), &embed_rows(&ws, k)).unwrap();
        let l = loss.loss(&w).unwrap();
        prop_assert!((direct - l).abs() <= 1e-12 * (1.0 + norm(&w).powi(2) + norm(&ws).powi(2)));
    }

    #[test]
    fn trap_is_invariant(r in 0.01..10.0f64, phi in -PI / 2.0..0.0, lambda in 1e-6..(1.0 / 3.0), k in prop::sample::select(vec![2usize, 4, 8])) {
        let w = [r * phi.cos(), r * phi.sin()];
        prop_assume!(in_trap(w));
        let g = OverlapLoss2D::new(1.0, k).unwrap().grad(w).unwrap();
        let next = [w[0] - lambda * g[0], w[1] - lambda * g[1]];
        prop_assert!(in_trap(next) && norm(&next) > 0.0);
    }

    #[test]
    fn shifted_kernel_floor_holds(x in 1e-3..5.0f64, y in 1e-3..5.0f64) {
        let w = [x, -y];
        prop_assert!(OverlapLoss2D::new(1.0, 2).unwrap().shifted_kernel(w) >= shifted_kernel_floor(w) - 1e-12);
    }

    /// Trap-quadrant expansion with `w = a (cos t, -sin t)`, `t` in `[0, pi/4]`,
    /// and teacher `s (-1, 1)`.
    #[test]
    fn overlap_loss_matches_quadrant_expansion(a in 0.05..4.0f64, t in 0.0..(PI / 4.0), s in 0.2..3.0f64, k in 2usize..10) {
        let kf = k as f64;
        let w = [a * t.cos(), -a * t.sin()];
        let b = s * 2f64.sqrt();
        let side = |c: f64| {
            let c = c / 2f64.sqrt();
            (1.0 - c * c).sqrt() + (PI - c.acos()) * c
        };
        let a3 = 0.75 * PI + t;
        let cross = 2.0 * kf * (a3.sin() + (0.25 * PI - t) * a3.cos()) + (2.0 * kf - 2.0) * (side(t.cos()) + side(t.sin()));
        let gw = g2(&[0.0, w[0], w[1]], &[w[0], w[1], 0.0]);
        let gs = g2(&[0.0, -s, s], &[-s, s, 0.0]);
        let expansion = ((kf * kf - 3.0 * kf + 2.0) / (2.0 * PI) * (a - b).powi(2) + kf / 2.0 * a * a + 2.0 * (kf - 1.0) * gw
            - a * b / (2.0 * PI) * cross
            + kf / 2.0 * b * b + 2.0 * (kf - 1.0) * gs) / (kf * kf);
        let l = OverlapLoss2D::new(s, k).unwrap().loss(w);
        prop_assert!((l - expansion).abs() <= 1e-12 * (1.0 + expansion.abs()), "{l} vs {expansion}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn theorem_step_trajectory_invariants(ws in vec_in(4), w0 in vec_in(4), k in 1usize..10) {
        prop_assume!(norm(&ws) > 0.1 && norm(&w0) > 0.1);
        let loss = NoOverlapLoss::new(ws.clone(), k).unwrap();
        let theta0 = loss.angle_to_target(&w0).unwrap();
        prop_assume!(theta0 > 1e-6 && theta0 < 0.9 * PI);
        let delta = 0.1;
        let step = theorem_step_size(k, delta, norm(&ws)).unwrap();
        let mut mon = InvariantMonitor::new(&loss, &w0, step, theorem_smoothness(k, delta, norm(&ws))).unwrap();
        let cfg = GdConfig { step_size: step, max_iters: 20_000, grad_tol: 1e-9, seed: 0, record_every: 1000 };
        run_gd_observed(&loss, &w0, &cfg, &mut |p| {
            mon.observe(p);
            ControlFlow::Continue(())
        })
        .unwrap();
        prop_assert!(mon.all_ok(), "{mon:?}");
    }

    #[test]
    fn conv_loss_agrees_with_row_expansion(m in 1usize..5, k in 1usize..5, stride_pick in 0usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let stride = 1 + stride_pick % m;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..m).map(|_| r.random_range(-2.0..2.0)).collect();
        let ws: Vec<f64> = (0..m).map(|_| r.random_range(-2.0..2.0)).collect();
        prop_assume!(norm(&w) > 1e-3 && norm(&ws) > 1e-3);
        let shape = NetworkShape::new(k, m, stride).unwrap();
        let rows = relu_lab::conv::banded_rows(shape, &w);
        let star = relu_lab::conv::banded_rows(shape, &ws);
        let direct = pairwise_sum_loss(&rows, &star).unwrap();
        let l = ConvPopulationLoss::new(shape, ws).unwrap().loss(&w).unwrap();
        prop_assert!((direct - l).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}

#[test]
fn restarts_are_deterministic_and_execution_independent() {
    let shape = NetworkShape::new(6, 4, 2).unwrap();
    let ws = vec![0.5, -0.3, 0.9, 0.1];
    let cfg = RestartConfig {
        max_iters: 20_000,
        ..RestartConfig::default()
    };
    let a = restart_runs(shape, &ws, 8, &cfg, 11, Execution::Parallel).unwrap();
    let b = restart_runs(shape, &ws, 8, &cfg, 11, Execution::Parallel).unwrap();
    let c = restart_runs(shape, &ws, 8, &cfg, 11, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}
