use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Set-Splitting-by-k-Sets instance over the ground set `{1..d}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SetSplitInstance {
    d: usize,
    k: usize,
    subsets: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawInstance {
    d: usize,
    k: usize,
    subsets: Vec<Vec<usize>>,
}

/// `k` disjoint parts covering `{1..d}`, none containing a whole subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplittingSolution {
    pub parts: Vec<Vec<usize>>,
}

pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

impl SetSplitInstance {
    /// Validated instance, including `|subsets| <= (k - 1) d`.
    pub fn new(d: usize, k: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.len() > (k.max(1) - 1) * d {
            return Err(Error::Parameter(format!(
                "{} subsets exceed the bound (k - 1) d = {}",
                subsets.len(),
                (k.max(1) - 1) * d
            )));
        }
        Self::new_unbounded(d, k, subsets)
    }

    /// Same checks as `new` except the cap on the number of subsets.
    pub fn new_unbounded(d: usize, k: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if d == 0 || k < 2 {
            return Err(Error::Parameter(format!(
                "need d >= 1 and k >= 2, got d={d}, k={k}"
            )));
        }
        let mut clean = Vec::with_capacity(subsets.len());
        for (j, mut c) in subsets.into_iter().enumerate() {
            c.sort_unstable();
            c.dedup();
            if c.is_empty() || c[0] == 0 || *c.last().unwrap() > d {
                return Err(Error::Parameter(format!(
                    "subset {j} is empty or leaves 1..={d}"
                )));
            }
            clean.push(c);
        }
        Ok(Self {
            d,
            k,
            subsets: clean,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawInstance = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        Self::new(raw.d, raw.k, raw.subsets)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Whether assigning element `i` to part `assign[i - 1]` splits every subset.
    pub fn is_split_by(&self, assign: &[usize]) -> bool {
        self.subsets.iter().all(|c| {
            let p = assign[c[0] - 1];
            c.iter().any(|&i| assign[i - 1] != p)
        })
    }

    /// Checks disjointness, coverage and that no subset lies inside a part.
    pub fn verify(&self, sol: &SplittingSolution) -> Result<()> {
        if sol.parts.len() != self.k {
            return Err(Error::Certificate(format!(
                "{} parts, expected {}",
                sol.parts.len(),
                self.k
            )));
        }
        let mut owner = vec![usize::MAX; self.d];
        for (p, part) in sol.parts.iter().enumerate() {
            for &i in part {
                if i == 0 || i > self.d {
                    return Err(Error::Certificate(format!(
                        "element {i} outside 1..={}",
                        self.d
                    )));
                }
                if owner[i - 1] != usize::MAX {
                    return Err(Error::Certificate(format!("element {i} lies in two parts")));
                }
                owner[i - 1] = p;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::Certificate(format!(
                "element {} is not covered",
                i + 1
            )));
        }
        if let Some(c) = self
            .subsets
            .iter()
            .find(|c| c.iter().all(|&i| owner[i - 1] == owner[c[0] - 1]))
        {
            return Err(Error::Certificate(format!(
                "subset {c:?} is contained in one part"
            )));
        }
        Ok(())
    }

    /// `(k-1)`-to-`k` lifting: add element `d + 1` and the pairs `{j, d + 1}`.
    pub fn lift(&self) -> Result<Self> {
        let d = self.d + 1;
        let mut subsets = self.subsets.clone();
        subsets.extend((1..=self.d).map(|j| vec![j, d]));
        Self::new(d, self.k + 1, subsets)
    }

    /// Lowest-lexicographic splitting (element 1 varies slowest), or `None`.
    pub fn brute_force_split(&self, exec: Execution) -> Result<Option<SplittingSolution>> {
        let size = (self.k as f64).powi(self.d as i32);
        if size > BRUTE_FORCE_LIMIT as f64 {
            return Err(Error::TooLarge {
                size,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        let (d, k) = (self.d, self.k as u64);
        let found = exec.find_first(size as u64, |mut idx| {
            let mut assign = vec![0usize; d];
            for slot in assign.iter_mut().rev() {
                *slot = (idx % k) as usize;
                idx /= k;
            }
            self.is_split_by(&assign).then_some(assign)
        });
        Ok(found.map(|a| SplittingSolution::from_assignment(&a, self.k)))
    }
}

impl SplittingSolution {
    /// Parts from `assign[i - 1]`, the part index of element `i`.
    pub fn from_assignment(assign: &[usize], k: usize) -> Self {
        let mut parts = vec![Vec::new(); k];
        for (i, &p) in assign.iter().enumerate() {
            parts[p].push(i + 1);
        }
        Self { parts }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SetSplitInstance::new(2, 2, vec![vec![1, 2], vec![1], vec![2]]).is_err());
        assert!(SetSplitInstance::new_unbounded(2, 2, vec![vec![1, 2], vec![1], vec![2]]).is_ok());
        assert!(SetSplitInstance::new(2, 2, vec![vec![3]]).is_err());
        assert!(SetSplitInstance::new(2, 2, vec![vec![]]).is_err());
        assert!(SetSplitInstance::new(2, 1, vec![]).is_err());
    }

    #[test]
    fn small_brute_force() {
        let inst = SetSplitInstance::new(2, 2, vec![vec![1, 2]]).unwrap();
        let sol = inst
            .brute_force_split(Execution::Sequential)
            .unwrap()
            .unwrap();
        assert_eq!(sol.parts, vec![vec![1], vec![2]]);
        let single = SetSplitInstance::new(2, 2, vec![vec![1], vec![2]]).unwrap();
        assert_eq!(single.brute_force_split(Execution::Parallel).unwrap(), None);
    }

    #[test]
    fn guard() {
        let inst = SetSplitInstance::new(24, 2, vec![]).unwrap();
        assert!(matches!(
            inst.brute_force_split(Execution::Sequential),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn lifting() {
        let inst = SetSplitInstance::new(2, 2, vec![vec![1, 2]]).unwrap();
        let l = inst.lift().unwrap();
        assert_eq!((l.d(), l.k()), (3, 3));
        assert_eq!(l.subsets(), &[vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn verification_errors() {
        let inst = SetSplitInstance::new(3, 2, vec![vec![1, 2]]).unwrap();
        let ok = SplittingSolution {
            parts: vec![vec![1, 3], vec![2]],
        };
        assert!(inst.verify(&ok).is_ok());
        for bad in [
            vec![vec![1, 2, 3], vec![]],
            vec![vec![1], vec![2]],
            vec![vec![1, 2], vec![2, 3]],
            vec![vec![1], vec![2], vec![3]],
        ] {
            assert!(inst.verify(&SplittingSolution { parts: bad }).is_err());
        }
    }

    #[test]
    fn json_round_trip() {
        let inst = SetSplitInstance::new(3, 2, vec![vec![2, 1], vec![3, 1]]).unwrap();
        let back = SetSplitInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        assert!(
            SetSplitInstance::from_json(r#"{"d": 1, "k": 2, "subsets": [[1], [1], [1]]}"#).is_err()
        );
        assert!(matches!(
            SetSplitInstance::from_json("{"),
            Err(Error::Parse { .. })
        ));
    }
}
