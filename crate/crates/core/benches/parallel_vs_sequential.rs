use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relu_lab::empirical::restarts::{restart_runs, trap_stuck_fraction};
use relu_lab::empirical::RestartConfig;
use relu_lab::hardness::{cnf_to_instance, CnfFormula};
use relu_lab::kernel::kernel_g;
use relu_lab::overlap::OverlapLoss2D;
use relu_lab::shape::NetworkShape;
use relu_lab::Execution;
use std::hint::black_box;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn kernel_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_map");
    let v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
    for exec in MODES {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| {
                exec.map(20_000, |i| {
                    let u: Vec<f64> = v.iter().map(|x| x + i as f64 * 1e-4).collect();
                    kernel_g(&u, &v).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn restarts(c: &mut Criterion) {
    let mut group = c.benchmark_group("restarts");
    group.sample_size(10);
    let shape = NetworkShape::new(8, 4, 2).unwrap();
    let ws = [0.7, -0.2, 0.5, 0.9];
    let cfg = RestartConfig {
        max_iters: 5_000,
        ..RestartConfig::default()
    };
    for exec in MODES {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| restart_runs(shape, black_box(&ws), 32, &cfg, 0, exec).unwrap())
        });
    }
    group.finish();
}

fn trap_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("trap_sampling");
    group.sample_size(10);
    let loss = OverlapLoss2D::new(1.0, 4).unwrap();
    for exec in MODES {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| trap_stuck_fraction(&loss, 2_000, 0.1, 200, 0, exec).unwrap())
        });
    }
    group.finish();
}

fn brute_force_split(c: &mut Criterion) {
    let mut group = c.benchmark_group("brute_force_split");
    group.sample_size(10);
    // Unsatisfiable, so the search visits every assignment.
    let phi = CnfFormula::new(
        3,
        vec![
            vec![1, 2],
            vec![-1, 2],
            vec![1, -2],
            vec![-1, -2, 3],
            vec![-3],
        ],
    )
    .unwrap();
    let inst = cnf_to_instance(&phi, 2).unwrap();
    for exec in MODES {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| inst.brute_force_split(exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    kernel_map,
    restarts,
    trap_sampling,
    brute_force_split
);
criterion_main!(benches);
