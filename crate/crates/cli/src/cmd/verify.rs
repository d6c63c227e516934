use std::path::PathBuf;

use clap::Args;
use relu_lab::kernel::kernel_grad_u;
use relu_lab::verify::{run_suite, VerifyConfig};
use relu_lab::Execution;
use serde::{Deserialize, Serialize};

use crate::io::OutDir;
use crate::{CliError, Status};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Reduced sample counts.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write `verify.json` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Mutation smoke test: negate the kernel gradient under test.
    #[arg(long, hide = true)]
    #[serde(default)]
    pub inject_sign_flip: bool,
}

fn flipped_kernel_grad(u: &[f64], v: &[f64]) -> relu_lab::Result<Vec<f64>> {
    Ok(kernel_grad_u(u, v)?.into_iter().map(|x| -x).collect())
}

pub fn run(
    args: &VerifyArgs,
    exec: Execution,
    out: Option<&mut OutDir>,
) -> Result<Status, CliError> {
    let cfg = VerifyConfig {
        quick: args.quick,
        seed: args.seed,
        exec,
        kernel_grad: if args.inject_sign_flip {
            flipped_kernel_grad
        } else {
            kernel_grad_u
        },
    };
    let results = run_suite(&cfg)?;
    for r in &results {
        println!(
            "{} {:<48} measured {:>12.4e}  limit {:.1e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.measured,
            r.threshold
        );
    }
    if let Some(dir) = out {
        dir.write_json("verify.json", &results)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("verify: all {} checks pass", results.len());
        Ok(Status::Ok)
    } else {
        Ok(Status::Failed(format!(
            "{failed} of {} checks failed",
            results.len()
        )))
    }
}
