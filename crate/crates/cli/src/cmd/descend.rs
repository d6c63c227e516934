use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::path::PathBuf;

use clap::Args;
use relu_lab::exec::stream_rng;
use relu_lab::kernel::norm;
use relu_lab::no_overlap::NoOverlapLoss;
use relu_lab::optimizer::{
    run_gd_observed, theorem_smoothness, theorem_step_size, unit_sphere_init, GdConfig,
    InvariantMonitor, Termination,
};
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, read_filter, OutDir};
use crate::{CliError, Status};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DescendArgs {
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// JSON array file, or `random` for a uniform unit vector.
    #[arg(long, default_value = "random")]
    pub w_star: String,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: usize,
    /// Step size override; the theorem step is used when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Converged when the final distance to `w*` is at most this.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    k: usize,
    m: usize,
    w_star: Vec<f64>,
    w0: Vec<f64>,
    step_size: f64,
    theorem_step_size: f64,
    theta0: f64,
    theta0_within_theorem: bool,
    converged: bool,
    final_distance: f64,
    final_loss: f64,
    iterations: usize,
    termination: Termination,
    invariants: InvariantMonitor,
    invariants_ok: bool,
}

pub fn run(args: &DescendArgs, out: &mut OutDir) -> Result<Status, CliError> {
    if args.k == 0 || args.m == 0 {
        return Err(CliError::Usage("--k and --m must be positive".into()));
    }
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(CliError::Usage(format!(
            "--delta must lie in (0, 1), got {}",
            args.delta
        )));
    }
    if let Some(l) = args.lambda {
        if !(l > 0.0 && l < 1.0) {
            return Err(CliError::Usage(format!(
                "--lambda must lie in (0, 1), got {l}"
            )));
        }
    }
    if args.record_every == 0 {
        return Err(CliError::Usage("--record-every must be positive".into()));
    }
    let mut rng = stream_rng(args.seed, 0);
    let w_star = match args.w_star.as_str() {
        "random" => unit_sphere_init(args.m, &mut rng),
        path => read_filter(path.as_ref())?,
    };
    if w_star.len() != args.m {
        return Err(CliError::Usage(format!(
            "w* has {} entries but --m is {}",
            w_star.len(),
            args.m
        )));
    }
    let w0 = unit_sphere_init(args.m, &mut stream_rng(args.seed, 1));
    let loss = NoOverlapLoss::new(w_star.clone(), args.k)?;
    let b = loss.w_star_norm();
    let theorem_step = theorem_step_size(args.k, args.delta, b)?;
    let step = args.lambda.unwrap_or(theorem_step);
    let theta0 = loss.angle_to_target(&w0).expect("unit-norm start");

    let mut monitor =
        InvariantMonitor::new(&loss, &w0, step, theorem_smoothness(args.k, args.delta, b))?;
    let cfg = GdConfig {
        step_size: step,
        max_iters: args.steps,
        grad_tol: args.grad_tol,
        seed: args.seed,
        record_every: args.record_every,
    };
    let traj = run_gd_observed(&loss, &w0, &cfg, &mut |p| {
        monitor.observe(p);
        ControlFlow::Continue(())
    })?;

    let header: Vec<String> = ["iter", "loss", "grad_norm", "w_norm", "angle"]
        .into_iter()
        .map(String::from)
        .chain((0..args.m).map(|i| format!("w{i}")))
        .collect();
    let rows = traj.points.iter().map(|p| {
        [
            p.iter.to_string(),
            fmt_f64(p.loss),
            fmt_f64(p.grad_norm),
            fmt_f64(p.w_norm),
        ]
        .into_iter()
        .chain([p.angle_to_target.map_or(String::new(), fmt_f64)])
        .chain(p.w.iter().map(|x| fmt_f64(*x)))
        .collect()
    });
    out.write_csv("trajectory.csv", &header, rows)?;

    let last = traj.last();
    let final_distance = norm(
        &last
            .w
            .iter()
            .zip(&w_star)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let invariants_ok = monitor.all_ok();
    let summary = Summary {
        k: args.k,
        m: args.m,
        w_star,
        w0,
        step_size: step,
        theorem_step_size: theorem_step,
        theta0,
        theta0_within_theorem: theta0 <= (1.0 - args.delta) * PI,
        converged: final_distance <= args.tol,
        final_distance,
        final_loss: last.loss,
        iterations: traj.iterations,
        termination: traj.terminated,
        invariants: monitor,
        invariants_ok,
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "descend: {} after {} iterations, distance {:.3e}, invariants {}",
        if summary.converged {
            "converged"
        } else {
            "not converged"
        },
        summary.iterations,
        final_distance,
        if invariants_ok { "ok" } else { "VIOLATED" }
    );
    Ok(if invariants_ok {
        Status::Ok
    } else {
        Status::Failed("trajectory invariant violated".into())
    })
}
