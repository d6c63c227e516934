use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CNF formula over variables `1..=num_vars`; literal `-v` is the negation of `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i64>>,
}

/// Largest variable count the exhaustive satisfiability check accepts.
pub const MAX_BRUTE_FORCE_VARS: usize = 24;

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self> {
        for (i, c) in clauses.iter().enumerate() {
            if c.is_empty() || c.len() > 3 {
                return Err(Error::Parameter(format!(
                    "clause {i} has {} literals, expected 1 to 3",
                    c.len()
                )));
            }
            if let Some(l) = c
                .iter()
                .find(|l| **l == 0 || l.unsigned_abs() as usize > num_vars)
            {
                return Err(Error::Parameter(format!(
                    "clause {i} has literal {l} outside 1..={num_vars}"
                )));
            }
        }
        Ok(Self { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i64>] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// `assignment[v - 1]` is the value of variable `v`.
    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }

    /// First satisfying assignment in binary counting order, variable 1 as
    /// the most significant bit.
    pub fn brute_force_sat(&self) -> Result<Option<Vec<bool>>> {
        if self.num_vars > MAX_BRUTE_FORCE_VARS {
            return Err(Error::TooLarge {
                size: 2f64.powi(self.num_vars as i32),
                limit: 1 << MAX_BRUTE_FORCE_VARS,
            });
        }
        let n = self.num_vars;
        Ok((0u64..1 << n).find_map(|mask| {
            let a: Vec<bool> = (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect();
            self.evaluate(&a).then_some(a)
        }))
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{l} ");
            }
            s.push_str("0\n");
        }
        s
    }
}

/// Parses DIMACS CNF. Comment lines start with `c`; clauses end with `0` and
/// may span lines; a `%` line ends the clause section.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err("duplicate problem line".into()));
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 || f[0] != "p" || f[1] != "cnf" {
                return Err(err(format!("malformed problem line `{line}`")));
            }
            let n = f[2]
                .parse()
                .map_err(|_| err(format!("bad variable count `{}`", f[2])))?;
            let m = f[3]
                .parse()
                .map_err(|_| err(format!("bad clause count `{}`", f[3])))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| err("clause before problem line".into()))?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| err(format!("bad literal `{tok}`")))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(err("empty clause".into()));
                }
                if current.len() > 3 {
                    return Err(err(format!(
                        "clause with {} literals, at most 3 supported",
                        current.len()
                    )));
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                if lit.unsigned_abs() as usize > n {
                    return Err(err(format!("literal {lit} exceeds declared {n} variables")));
                }
                current.push(lit);
            }
        }
    }
    let (n, m) = header.ok_or(Error::Parse {
        line: last_line,
        msg: "missing problem line".into(),
    })?;
    if !current.is_empty() {
        return Err(Error::Parse {
            line: last_line,
            msg: "unterminated final clause".into(),
        });
    }
    if clauses.len() != m {
        return Err(Error::Parse {
            line: last_line,
            msg: format!("problem line declares {m} clauses, found {}", clauses.len()),
        });
    }
    CnfFormula::new(n, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let text = "c example\np cnf 3 2\n1 -2 0\n2 3\n-1 0\n";
        let f = parse_dimacs(text).unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(f.clauses(), &[vec![1, -2], vec![2, 3, -1]]);
        assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "1 2 0\n",
            "p cnf 2 1\n1 3 0\n",
            "p cnf 2 1\n1 x 0\n",
            "p cnf 2 2\n1 0\n",
            "p cnf 2 1\n1 2\n",
            "p cnf 2 1\n0\n",
            "p cnf 4 1\n1 2 3 4 0\n",
            "p dnf 2 1\n1 0\n",
        ] {
            assert!(
                matches!(parse_dimacs(bad), Err(Error::Parse { .. })),
                "{bad:?}"
            );
        }
        assert!(parse_dimacs("p cnf 1 1\n1 0\n%\n0\n").is_ok());
    }

    #[test]
    fn sat_oracle() {
        let sat = CnfFormula::new(2, vec![vec![1, 2], vec![-1]]).unwrap();
        assert_eq!(sat.brute_force_sat().unwrap(), Some(vec![false, true]));
        let unsat = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
        assert_eq!(unsat.brute_force_sat().unwrap(), None);
        assert!(CnfFormula::new(1, vec![vec![]]).is_err());
        assert!(CnfFormula::new(1, vec![vec![2]]).is_err());
    }
}
