use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::NetworkShape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProbeOutcome {
    /// `w` equals the teacher.
    Identical,
    /// Basis input on which the two networks disagree.
    Witness {
        coordinate: usize,
        input: Vec<f64>,
        student: f64,
        teacher: f64,
    },
}

/// Eliminates filter coordinates in order: on `t e_i` only filter entries
/// `0..=i` are seen, and the earlier ones already agree, so the first
/// differing entry `i` separates the networks at `t = 1` when either entry is
/// positive and at `t = -1` otherwise.
pub fn uniqueness_probe(shape: NetworkShape, w: &[f64], w_star: &[f64]) -> Result<ProbeOutcome> {
    if w.len() != shape.m || w_star.len() != shape.m {
        return Err(Error::Shape(format!(
            "filters of width {} and {} for m = {}",
            w.len(),
            w_star.len(),
            shape.m
        )));
    }
    let Some(i) = (0..shape.m).find(|&i| w[i] != w_star[i]) else {
        return Ok(ProbeOutcome::Identical);
    };
    let t = if w[i].max(w_star[i]) > 0.0 { 1.0 } else { -1.0 };
    let mut input = vec![0.0; shape.input_dim()];
    input[i] = t;
    let student = shape.forward_unchecked(w, &input);
    let teacher = shape.forward_unchecked(w_star, &input);
    if student == teacher {
        return Err(Error::Soundness(format!(
            "basis probe on coordinate {i} failed to separate"
        )));
    }
    Ok(ProbeOutcome::Witness {
        coordinate: i,
        input,
        student,
        teacher,
    })
}
