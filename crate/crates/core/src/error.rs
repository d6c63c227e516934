use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not differentiable: {0}")]
    NonDifferentiable(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid certificate: {0}")]
    Certificate(String),
    #[error("extraction refused: risk {risk:e} is not below threshold {threshold:e}")]
    RiskNotBelowThreshold { risk: f64, threshold: f64 },
    #[error("reduction soundness violated: {0}")]
    Soundness(String),
    #[error("search space of {size:e} assignments exceeds the limit of {limit}")]
    TooLarge { size: f64, limit: u64 },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub(crate) fn ensure_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("length {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

pub(crate) fn ensure_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Shape(format!("{name} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{name} has non-finite entries")));
    }
    Ok(())
}
