use super::cnf::CnfFormula;
use super::splitting::SetSplitInstance;
use crate::error::{Error, Result};

/// Pads a formula until it has as many clauses as variables. While variables
/// are short, add `(x or y)` over two fresh variables; while clauses are
/// short, add two copies of `(z)` over one fresh variable. Neither move
/// changes satisfiability.
pub fn to_equal_3sat(phi: &CnfFormula) -> CnfFormula {
    let mut n = phi.num_vars();
    let mut clauses = phi.clauses().to_vec();
    while n < clauses.len() {
        clauses.push(vec![n as i64 + 1, n as i64 + 2]);
        n += 2;
    }
    while n > clauses.len() {
        n += 1;
        clauses.push(vec![n as i64]);
        clauses.push(vec![n as i64]);
    }
    CnfFormula::new(n, clauses).expect("padding keeps literals in range")
}

/// Ground-set label of a literal: `x_i -> i`, `not x_i -> N + i`.
pub fn literal_element(lit: i64, num_vars: usize) -> usize {
    let v = lit.unsigned_abs() as usize;
    if lit > 0 {
        v
    } else {
        num_vars + v
    }
}

/// Set-Splitting-by-2-Sets instance on `{x_i} u {not x_i} u {n}`, with one
/// subset `V_c u {n}` per clause and one pair `{x_i, not x_i}` per variable.
/// Element `n` is labelled `2N + 1`.
pub fn equal3sat_to_split2(psi: &CnfFormula) -> Result<SetSplitInstance> {
    let n = psi.num_vars();
    if n != psi.num_clauses() {
        return Err(Error::Parameter(format!(
            "{n} variables but {} clauses",
            psi.num_clauses()
        )));
    }
    let anchor = 2 * n + 1;
    let mut subsets: Vec<Vec<usize>> = psi
        .clauses()
        .iter()
        .map(|c| {
            c.iter()
                .map(|&l| literal_element(l, n))
                .chain([anchor])
                .collect()
        })
        .collect();
    subsets.extend((1..=n).map(|i| vec![i, n + i]));
    SetSplitInstance::new(anchor, 2, subsets)
}

/// Full chain: pad, split by two sets, then lift to `k` parts.
pub fn cnf_to_instance(phi: &CnfFormula, k: usize) -> Result<SetSplitInstance> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    let mut inst = equal3sat_to_split2(&to_equal_3sat(phi))?;
    while inst.k() < k {
        inst = inst.lift()?;
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_balances() {
        let phi = CnfFormula::new(3, vec![vec![1, 2], vec![-3]]).unwrap();
        let psi = to_equal_3sat(&phi);
        assert_eq!(psi.num_vars(), psi.num_clauses());
        let phi2 = CnfFormula::new(1, vec![vec![1], vec![-1], vec![1]]).unwrap();
        let psi2 = to_equal_3sat(&phi2);
        assert_eq!(psi2.num_vars(), psi2.num_clauses());
        let eq = CnfFormula::new(1, vec![vec![1]]).unwrap();
        assert_eq!(to_equal_3sat(&eq), eq);
    }

    #[test]
    fn single_clause_instance() {
        let psi = CnfFormula::new(1, vec![vec![1]]).unwrap();
        let inst = equal3sat_to_split2(&psi).unwrap();
        assert_eq!(inst.d(), 3);
        assert_eq!(inst.subsets(), &[vec![1, 3], vec![1, 2]]);
        let bad = CnfFormula::new(2, vec![vec![1]]).unwrap();
        assert!(equal3sat_to_split2(&bad).is_err());
    }
}
