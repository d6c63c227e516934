use std::path::PathBuf;

use clap::Args;
use relu_lab::empirical::restarts::{restart_runs, GridRow};
use relu_lab::empirical::{run_grid, ExperimentGrid, GroundTruth, RestartConfig, RestartReport};
use relu_lab::exec::stream_rng;
use relu_lab::shape::NetworkShape;
use relu_lab::Execution;
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, read_filter, OutDir};
use crate::{CliError, Status};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RestartsArgs {
    /// Reduced sweep: 50 and 100 neurons, filter sizes 2, 8, 16, three
    /// uniform teacher families.
    #[arg(long)]
    pub grid: bool,
    /// Two-tap filter with teacher `(-s, s)` and `--k` hidden units.
    #[arg(long)]
    pub overlap2d: bool,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// JSON array file, or `random` for U[-1, 1] entries.
    #[arg(long, default_value = "random")]
    pub w_star: String,
    #[arg(long, default_value_t = 1.0)]
    pub w_star_scale: f64,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Teachers per grid cell.
    #[arg(long, default_value_t = 5)]
    pub truths: usize,
    #[arg(long, default_value_t = 1.645)]
    pub z_alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    rows: usize,
    min_p_hat: f64,
    min_wilson_lower: f64,
    all_wilson_above_one_seventeenth: bool,
    /// `0.75 + 3 sigma` at the run count; only filled for the two-tap preset.
    overlap2d_p_hat_ceiling: Option<f64>,
}

fn row_fields(r: &GridRow) -> Vec<String> {
    let rep = &r.report;
    vec![
        r.k.to_string(),
        r.m.to_string(),
        r.stride.to_string(),
        r.distribution.clone(),
        r.truth_index.to_string(),
        rep.num_runs.to_string(),
        rep.num_global.to_string(),
        rep.num_stuck.to_string(),
        fmt_f64(rep.p_hat),
        fmt_f64(rep.wilson_lower),
        r.max_iterations.to_string(),
    ]
}

fn single(
    shape: NetworkShape,
    w_star: Vec<f64>,
    label: &str,
    cfg: &RestartConfig,
    args: &RestartsArgs,
    exec: Execution,
) -> Result<GridRow, CliError> {
    let outcomes = restart_runs(shape, &w_star, args.runs, cfg, args.seed, exec)?;
    Ok(GridRow {
        k: shape.k,
        m: shape.m,
        stride: shape.stride,
        distribution: label.into(),
        truth_index: 0,
        report: RestartReport::from_outcomes(&outcomes, args.z_alpha)?,
        max_iterations: outcomes.iter().map(|o| o.iterations).max().unwrap_or(0),
        w_star,
    })
}

pub fn run(args: &RestartsArgs, exec: Execution, out: &mut OutDir) -> Result<Status, CliError> {
    if usize::from(args.grid) + usize::from(args.overlap2d) > 1 {
        return Err(CliError::Usage(
            "--grid and --overlap2d are exclusive".into(),
        ));
    }
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be positive".into()));
    }
    let cfg = RestartConfig {
        step_size: args.step,
        max_iters: args.max_iters,
        ..RestartConfig::default()
    };
    let rows: Vec<GridRow> = if args.grid {
        let grid = ExperimentGrid {
            runs: args.runs,
            truths_per_cell: args.truths,
            ..ExperimentGrid::reduced_table1()
        };
        run_grid(&grid, &cfg, args.z_alpha, args.seed, exec)?
    } else if args.overlap2d {
        let k = args
            .k
            .ok_or_else(|| CliError::Usage("--overlap2d needs --k".into()))?;
        let shape = NetworkShape::new(k, 2, 1)?;
        vec![single(
            shape,
            vec![-args.w_star_scale, args.w_star_scale],
            "overlap2d",
            &cfg,
            args,
            exec,
        )?]
    } else {
        let (Some(k), Some(m)) = (args.k, args.m) else {
            return Err(CliError::Usage(
                "give --grid, --overlap2d, or --k and --m".into(),
            ));
        };
        let shape = NetworkShape::new(k, m, args.stride.unwrap_or(1))?;
        let w_star = match args.w_star.as_str() {
            "random" => GroundTruth::Uniform { lo: -1.0, hi: 1.0 }
                .sample(m, &mut stream_rng(args.seed, u64::MAX)),
            path => read_filter(path.as_ref())?,
        };
        vec![single(shape, w_star, "explicit", &cfg, args, exec)?]
    };

    let header = [
        "k",
        "m",
        "stride",
        "distribution",
        "truth_index",
        "num_runs",
        "num_global",
        "num_stuck",
        "p_hat",
        "wilson_lower",
        "max_iterations",
    ]
    .map(String::from);
    out.write_csv("restarts.csv", &header, rows.iter().map(row_fields))?;
    let teachers: Vec<&Vec<f64>> = rows.iter().map(|r| &r.w_star).collect();
    out.write_json("teachers.json", &teachers)?;

    let min_p = rows
        .iter()
        .map(|r| r.report.p_hat)
        .fold(f64::INFINITY, f64::min);
    let min_lb = rows
        .iter()
        .map(|r| r.report.wilson_lower)
        .fold(f64::INFINITY, f64::min);
    let n = args.runs as f64;
    let summary = Summary {
        rows: rows.len(),
        min_p_hat: min_p,
        min_wilson_lower: min_lb,
        all_wilson_above_one_seventeenth: min_lb > 1.0 / 17.0,
        overlap2d_p_hat_ceiling: args
            .overlap2d
            .then(|| 0.75 + 3.0 * (0.75 * 0.25 / n).sqrt()),
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "restarts: {} rows, min p_hat {min_p:.3}, min Wilson lower bound {min_lb:.4}",
        rows.len()
    );
    Ok(Status::Ok)
}
