use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;
use relu_lab::empirical::{sample_gaussian_dataset, EmpiricalObjective, LabeledDataset};
use relu_lab::exec::stream_rng;
use relu_lab::optimizer::{run_adagrad, run_gd, AdagradConfig, GdConfig, Trajectory};
use relu_lab::shape::NetworkShape;
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, read_dataset, read_filter, OutDir};
use crate::{CliError, Status};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Gd,
    Adagrad,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset CSV with columns `label, x0, x1, ...`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Sample this many Gaussian points labelled by `--w-star` instead.
    #[arg(long)]
    pub gaussian: Option<usize>,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub m: usize,
    /// Defaults to `m` (no overlap).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Teacher for `--gaussian`: JSON array file, or `random` for N(0, I).
    #[arg(long, default_value = "random")]
    pub w_star: String,
    #[arg(long, value_enum, default_value_t = Optimizer::Adagrad)]
    pub optimizer: Optimizer,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// One full-batch step per epoch.
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    k: usize,
    m: usize,
    stride: usize,
    points: usize,
    optimizer: Optimizer,
    lr: f64,
    epochs: usize,
    initial_loss: f64,
    final_loss: f64,
    final_w: Vec<f64>,
    teacher: Option<Vec<f64>>,
    distance_to_teacher: Option<f64>,
}

fn load(
    args: &TrainArgs,
    shape: NetworkShape,
) -> Result<(LabeledDataset, Option<Vec<f64>>), CliError> {
    match (&args.dataset, args.gaussian) {
        (Some(path), None) => {
            let (points, labels) = read_dataset(path)?;
            Ok((LabeledDataset::new(points, labels, shape)?, None))
        }
        (None, Some(n)) => {
            let w_star = match args.w_star.as_str() {
                "random" => {
                    let mut rng = stream_rng(args.seed, 0);
                    (0..shape.m).map(|_| rng.sample(StandardNormal)).collect()
                }
                path => read_filter(path.as_ref())?,
            };
            let data = sample_gaussian_dataset(n, shape, &w_star, args.seed)?;
            Ok((data, Some(w_star)))
        }
        _ => Err(CliError::Usage(
            "give exactly one of --dataset, --gaussian".into(),
        )),
    }
}

pub fn run(args: &TrainArgs, out: &mut OutDir) -> Result<Status, CliError> {
    let shape = NetworkShape::new(args.k, args.m, args.stride.unwrap_or(args.m))?;
    let (data, teacher) = load(args, shape)?;
    let mut rng = stream_rng(args.seed, 1);
    let w0: Vec<f64> = (0..shape.m).map(|_| rng.sample(StandardNormal)).collect();
    let obj = EmpiricalObjective {
        data: &data,
        target: teacher.clone(),
    };
    let traj: Trajectory = match args.optimizer {
        Optimizer::Gd => run_gd(
            &obj,
            &w0,
            &GdConfig {
                step_size: args.lr,
                max_iters: args.epochs,
                grad_tol: 0.0,
                seed: args.seed,
                record_every: 1,
            },
        )?,
        Optimizer::Adagrad => run_adagrad(
            &obj,
            &w0,
            &AdagradConfig {
                lr: args.lr,
                max_iters: args.epochs,
                grad_tol: 0.0,
                eps: 1e-8,
                record_every: 1,
            },
        )?,
    };
    let header = ["epoch", "loss"].map(String::from);
    out.write_csv(
        "losses.csv",
        &header,
        traj.points
            .iter()
            .map(|p| vec![p.iter.to_string(), fmt_f64(p.loss)]),
    )?;

    let last = traj.last();
    let distance = teacher.as_ref().map(|t| {
        t.iter()
            .zip(&last.w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    });
    let summary = Summary {
        k: shape.k,
        m: shape.m,
        stride: shape.stride,
        points: data.len(),
        optimizer: args.optimizer,
        lr: args.lr,
        epochs: args.epochs,
        initial_loss: traj.points[0].loss,
        final_loss: last.loss,
        final_w: last.w.clone(),
        teacher,
        distance_to_teacher: distance,
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "train: {} points, loss {:.4e} -> {:.4e} after {} epochs",
        summary.points, summary.initial_loss, summary.final_loss, last.iter
    );
    Ok(Status::Ok)
}
