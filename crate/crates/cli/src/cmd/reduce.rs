use std::path::PathBuf;

use clap::Args;
use relu_lab::hardness::{
    build_dataset, cnf_to_instance, filter_to_splitting, parse_dimacs, planted_instance,
    risk_threshold, splitting_to_filter, to_equal_3sat, SetSplitInstance, SplittingSolution,
    BRUTE_FORCE_LIMIT,
};
use relu_lab::Execution;
use serde::{Deserialize, Serialize};

use crate::io::{dataset_rows, read_input, OutDir};
use crate::{CliError, Status};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReduceArgs {
    /// DIMACS CNF input (at most 3 literals per clause).
    #[arg(long)]
    pub cnf: Option<PathBuf>,
    /// Set-splitting instance JSON.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Generate a planted instance instead of reading one.
    #[arg(long)]
    pub generate: bool,
    #[arg(long, default_value_t = 40)]
    pub generate_d: usize,
    #[arg(long, default_value_t = 760)]
    pub generate_subsets: usize,
    #[arg(long, default_value_t = 20)]
    pub generate_size: usize,
    /// Number of parts for CNF input; instances are lifted up to it.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Solve by brute force (or use the planted split) and write the filter
    /// certificate with its round-trip check.
    #[arg(long)]
    pub emit_certificate: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Certificate {
    /// Satisfiability of the CNF input, when there was one.
    satisfiable: Option<bool>,
    splittable: bool,
    equivalence_holds: bool,
    splitting: Option<SplittingSolution>,
    filter: Option<Vec<f64>>,
    risk: Option<f64>,
    risk_threshold: f64,
    extracted: Option<SplittingSolution>,
    round_trip_ok: bool,
}

fn source_count(args: &ReduceArgs) -> usize {
    usize::from(args.cnf.is_some())
        + usize::from(args.instance.is_some())
        + usize::from(args.generate)
}

pub fn run(args: &ReduceArgs, exec: Execution, out: &mut OutDir) -> Result<Status, CliError> {
    if source_count(args) != 1 {
        return Err(CliError::Usage(
            "give exactly one of --cnf, --instance, --generate".into(),
        ));
    }
    let mut satisfiable = None;
    let mut planted = None;
    let mut padded = None;
    let instance = if let Some(path) = &args.cnf {
        let phi = parse_dimacs(&read_input(path)?)?;
        padded = Some(to_equal_3sat(&phi).to_dimacs());
        if args.emit_certificate {
            satisfiable = Some(phi.brute_force_sat()?.is_some());
        }
        cnf_to_instance(&phi, args.k)?
    } else if let Some(path) = &args.instance {
        let mut inst = SetSplitInstance::from_json(&read_input(path)?)?;
        while inst.k() < args.k {
            inst = inst.lift()?;
        }
        inst
    } else {
        let (inst, split) = planted_instance(
            args.generate_d,
            args.generate_subsets,
            args.generate_size,
            args.seed,
        )?;
        planted = Some(split);
        inst
    };
    if args.emit_certificate && planted.is_none() {
        let size = (instance.k() as f64).powi(instance.d() as i32);
        if size > BRUTE_FORCE_LIMIT as f64 {
            return Err(relu_lab::Error::TooLarge {
                size,
                limit: BRUTE_FORCE_LIMIT,
            }
            .into());
        }
    }
    if let Some(text) = padded {
        out.write_text("equal3sat.cnf", &text)?;
    }
    out.write_text("instance.json", &instance.to_json())?;
    let data = build_dataset(&instance);
    let (header, rows) = dataset_rows(&data.points, &data.labels);
    out.write_csv("dataset.csv", &header, rows)?;
    println!(
        "reduce: d = {}, k = {}, {} subsets -> {} points in R^{}",
        instance.d(),
        instance.k(),
        instance.subsets().len(),
        data.points.len(),
        data.points.first().map_or(0, Vec::len)
    );
    if !args.emit_certificate {
        return Ok(Status::Ok);
    }

    let splitting = match planted {
        Some(s) => Some(s),
        None => instance.brute_force_split(exec)?,
    };
    let threshold = risk_threshold(instance.k(), instance.d())?;
    let (filter, risk, extracted) = match &splitting {
        Some(sol) => {
            let w = splitting_to_filter(&instance, sol)?;
            let risk = data.risk(&w)?;
            let back = filter_to_splitting(&w, &instance).ok();
            (Some(w), Some(risk), back)
        }
        None => (None, None, None),
    };
    let splittable = splitting.is_some();
    let equivalence_holds = satisfiable.is_none_or(|s| s == splittable);
    let round_trip_ok = !splittable || (risk.is_some_and(|r| r < threshold) && extracted.is_some());
    let cert = Certificate {
        satisfiable,
        splittable,
        equivalence_holds,
        splitting,
        filter,
        risk,
        risk_threshold: threshold,
        extracted,
        round_trip_ok,
    };
    out.write_json("certificate.json", &cert)?;
    println!(
        "reduce: splittable = {splittable}{}, round trip {}",
        satisfiable.map_or(String::new(), |s| format!(", satisfiable = {s}")),
        if round_trip_ok { "ok" } else { "FAILED" }
    );
    if equivalence_holds && round_trip_ok {
        Ok(Status::Ok)
    } else {
        Ok(Status::Failed("certificate check failed".into()))
    }
}
