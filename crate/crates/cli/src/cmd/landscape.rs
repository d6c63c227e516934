use std::path::PathBuf;

use clap::Args;
use relu_lab::overlap::{in_trap, OverlapLoss2D};
use relu_lab::Execution;
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, OutDir};
use crate::{CliError, Status};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeArgs {
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Teacher is `(-s, s)`.
    #[arg(long, default_value_t = 1.0)]
    pub w_star_scale: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub grid_max: f64,
    /// Points per axis, endpoints included.
    #[arg(long, default_value_t = 201)]
    pub grid_steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    k: usize,
    w_star: [f64; 2],
    grid_points: usize,
    min_loss: f64,
    argmin: [f64; 2],
    trap_min_loss: Option<f64>,
    suboptimality_bound: f64,
    trap_minimizer: [f64; 2],
    trap_minimizer_loss: f64,
}

pub fn run(args: &LandscapeArgs, exec: Execution, out: &mut OutDir) -> Result<Status, CliError> {
    if args.grid_steps < 2 || !(args.grid_max > args.grid_min) {
        return Err(CliError::Usage(
            "need --grid-steps >= 2 and --grid-max > --grid-min".into(),
        ));
    }
    let loss = OverlapLoss2D::new(args.w_star_scale, args.k)?;
    let n = args.grid_steps;
    let coord =
        |i: usize| args.grid_min + (args.grid_max - args.grid_min) * i as f64 / (n - 1) as f64;
    let rows: Vec<Vec<(f64, f64, f64)>> = exec.map(n, |i| {
        (0..n)
            .map(|j| {
                let w = [coord(i), coord(j)];
                (w[0], w[1], loss.loss(w))
            })
            .collect()
    });
    let cells: Vec<(f64, f64, f64)> = rows.into_iter().flatten().collect();
    let header = ["w1", "w2", "loss"].map(String::from);
    out.write_csv(
        "landscape.csv",
        &header,
        cells
            .iter()
            .map(|(a, b, l)| vec![fmt_f64(*a), fmt_f64(*b), fmt_f64(*l)]),
    )?;

    let best = cells
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("nonempty grid");
    let trap_min = cells
        .iter()
        .filter(|c| in_trap([c.0, c.1]))
        .map(|c| c.2)
        .min_by(f64::total_cmp);
    let tm = loss.trap_minimizer();
    let summary = Summary {
        k: args.k,
        w_star: loss.w_star(),
        grid_points: cells.len(),
        min_loss: best.2,
        argmin: [best.0, best.1],
        trap_min_loss: trap_min,
        suboptimality_bound: loss.suboptimality_bound(),
        trap_minimizer: tm,
        trap_minimizer_loss: loss.loss(tm),
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "landscape: {} cells, min {:.3e} at ({:.3}, {:.3}); fourth-quadrant min {} vs bound {:.6}",
        summary.grid_points,
        best.2,
        best.0,
        best.1,
        trap_min.map_or("n/a".into(), |v| format!("{v:.6}")),
        summary.suboptimality_bound
    );
    Ok(Status::Ok)
}
