use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::splitting::{SetSplitInstance, SplittingSolution};
use crate::empirical::{empirical_risk, LabeledDataset};
use crate::error::{Error, Result};
use crate::exec::stream_rng;
use crate::shape::NetworkShape;

/// Training set whose exact fit encodes a splitting of the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardDataset {
    pub k: usize,
    pub d: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

/// `1 / (4 k^5 d)`.
pub fn risk_threshold(k: usize, d: usize) -> Result<f64> {
    if k < 2 || d == 0 {
        return Err(Error::Parameter(format!(
            "need k >= 2 and d >= 1, got k={k}, d={d}"
        )));
    }
    Ok(1.0 / (4.0 * (k as f64).powi(5) * d as f64))
}

/// `(1/k) sum_i relu(w . x^(i))` over `k` consecutive windows of width `|w|`.
pub fn no_overlap_forward(w: &[f64], x: &[f64], k: usize) -> Result<f64> {
    NetworkShape::no_overlap(k, w.len())?.forward(w, x)
}

/// Block map: `k` blocks of length `k d`, block `l` holding `v` at offset `l d`.
pub fn block_embed(v: &[f64], k: usize) -> Vec<f64> {
    let d = v.len();
    let mut out = vec![0.0; k * k * d];
    for l in 0..k {
        let start = l * k * d + l * d;
        out[start..start + d].copy_from_slice(v);
    }
    out
}

fn indicator(d: usize, elems: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; d];
    for &i in elems {
        v[i - 1] = 1.0;
    }
    v
}

pub fn build_dataset(instance: &SetSplitInstance) -> HardDataset {
    let (d, k) = (instance.d(), instance.k());
    let mut points: Vec<Vec<f64>> = (1..=d)
        .map(|i| block_embed(&indicator(d, &[i]), k))
        .collect();
    let mut labels = vec![1.0 / k as f64; d];
    for c in instance.subsets() {
        points.push(block_embed(&indicator(d, c), k));
        labels.push(0.0);
    }
    HardDataset {
        k,
        d,
        points,
        labels,
    }
}

impl HardDataset {
    pub fn shape(&self) -> NetworkShape {
        NetworkShape::no_overlap(self.k, self.k * self.d).expect("k, d positive")
    }

    pub fn to_labeled(&self) -> LabeledDataset {
        LabeledDataset::new(self.points.clone(), self.labels.clone(), self.shape())
            .expect("consistent by construction")
    }

    pub fn risk(&self, w: &[f64]) -> Result<f64> {
        empirical_risk(w, &self.to_labeled())
    }
}

/// Filter `(a^{S_1}, ..., a^{S_k})` with `a^{S}_i = 1` on `S` and `-d` elsewhere.
pub fn splitting_to_filter(
    instance: &SetSplitInstance,
    sol: &SplittingSolution,
) -> Result<Vec<f64>> {
    instance.verify(sol)?;
    let d = instance.d();
    let mut w = vec![-(d as f64); instance.k() * d];
    for (l, part) in sol.parts.iter().enumerate() {
        for &i in part {
            w[l * d + i - 1] = 1.0;
        }
    }
    Ok(w)
}

/// Reads the parts `S_l = {i : w_l . e_i > 1/(2k)}` off a filter whose risk is
/// below the threshold; an element qualifying for several parts goes to the
/// lowest index.
pub fn filter_to_splitting(w: &[f64], instance: &SetSplitInstance) -> Result<SplittingSolution> {
    let (d, k) = (instance.d(), instance.k());
    if w.len() != k * d {
        return Err(Error::Shape(format!(
            "filter has {} entries, expected {}",
            w.len(),
            k * d
        )));
    }
    let threshold = risk_threshold(k, d)?;
    let risk = build_dataset(instance).risk(w)?;
    if !(risk < threshold) {
        return Err(Error::RiskNotBelowThreshold { risk, threshold });
    }
    let cut = 1.0 / (2.0 * k as f64);
    let mut parts = vec![Vec::new(); k];
    for i in 1..=d {
        if let Some(l) = (0..k).find(|l| w[l * d + i - 1] > cut) {
            parts[l].push(i);
        }
    }
    let sol = SplittingSolution { parts };
    instance
        .verify(&sol)
        .map_err(|e| Error::Soundness(format!("extracted parts fail verification: {e}")))?;
    Ok(sol)
}

/// Instance with `num_subsets` random `subset_size`-subsets of `{1..d}`, none
/// inside either half of a planted random balanced split. Exceeds the
/// `(k - 1) d` cap for the experiment sizes, hence built unbounded.
pub fn planted_instance(
    d: usize,
    num_subsets: usize,
    subset_size: usize,
    seed: u64,
) -> Result<(SetSplitInstance, SplittingSolution)> {
    if d < 2 || subset_size < 2 || subset_size > d {
        return Err(Error::Parameter(format!(
            "need 2 <= subset size {subset_size} <= d = {d}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let mut perm: Vec<usize> = (1..=d).collect();
    perm.shuffle(&mut rng);
    let half = d / 2;
    let mut s1 = perm[..half].to_vec();
    let mut s2 = perm[half..].to_vec();
    s1.sort_unstable();
    s2.sort_unstable();
    let mut side = vec![0usize; d];
    for &i in &s2 {
        side[i - 1] = 1;
    }
    let mut subsets = Vec::with_capacity(num_subsets);
    let pool: Vec<usize> = (1..=d).collect();
    while subsets.len() < num_subsets {
        let mut c: Vec<usize> = pool
            .choose_multiple(&mut rng, subset_size)
            .copied()
            .collect();
        if c.iter().all(|&i| side[i - 1] == side[c[0] - 1]) {
            continue;
        }
        c.sort_unstable();
        subsets.push(c);
    }
    let inst = SetSplitInstance::new_unbounded(d, 2, subsets)?;
    Ok((
        inst,
        SplittingSolution {
            parts: vec![s1, s2],
        },
    ))
}
