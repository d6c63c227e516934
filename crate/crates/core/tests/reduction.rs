use proptest::prelude::*;
use relu_lab::hardness::{
    build_dataset, cnf_to_instance, filter_to_splitting, planted_instance, risk_threshold,
    splitting_to_filter, CnfFormula, SetSplitInstance,
};
use relu_lab::{Error, Execution};

fn formula() -> impl Strategy<Value = CnfFormula> {
    (1usize..=3).prop_flat_map(|n| {
        let lit = (1..=n as i64, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v });
        prop::collection::vec(prop::collection::vec(lit, 1..=3), 1..=4)
            .prop_map(move |clauses| CnfFormula::new(n, clauses).unwrap())
    })
}

fn family() -> impl Strategy<Value = SetSplitInstance> {
    (2usize..=5, 2usize..=3).prop_flat_map(|(d, k)| {
        let subset = prop::collection::btree_set(1..=d, 2..=d)
            .prop_map(|s| s.into_iter().collect::<Vec<_>>());
        prop::collection::vec(subset, 1..=(k - 1) * d)
            .prop_map(move |subsets| SetSplitInstance::new(d, k, subsets).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Satisfiable exactly when the reduced instance has a zero-risk filter.
    #[test]
    fn sat_iff_zero_risk_filter(phi in formula()) {
        let sat = phi.brute_force_sat().unwrap().is_some();
        let inst = cnf_to_instance(&phi, 2).unwrap();
        let split = inst.brute_force_split(Execution::default()).unwrap();
        prop_assert_eq!(sat, split.is_some());
        if let Some(sol) = split {
            let w = splitting_to_filter(&inst, &sol).unwrap();
            prop_assert_eq!(build_dataset(&inst).risk(&w).unwrap(), 0.0);
        }
    }

    #[test]
    fn lifting_keeps_cardinality_bound(inst in family()) {
        let lifted = inst.lift().unwrap();
        prop_assert_eq!(lifted.k(), inst.k() + 1);
        prop_assert!(lifted.subsets().len() <= (lifted.k() - 1) * lifted.d());
    }

    /// Perturbed certificates below the risk threshold still extract a valid
    /// splitting, and every point is fit to within `1/(2k^2)`.
    #[test]
    fn low_risk_filters_extract(inst in family(), noise in prop::collection::vec(-1.0..1.0f64, 15), scale in 0.0..1.0f64) {
        let Some(sol) = inst.brute_force_split(Execution::default()).unwrap() else {
            return Ok(());
        };
        let (k, d) = (inst.k(), inst.d());
        let mut w = splitting_to_filter(&inst, &sol).unwrap();
        let threshold = risk_threshold(k, d).unwrap();
        let amp = scale * threshold.sqrt() / (k * d) as f64;
        w.iter_mut().zip(noise.iter().cycle()).for_each(|(x, n)| *x += amp * n);
        let data = build_dataset(&inst);
        let risk = data.risk(&w).unwrap();
        prop_assume!(risk < threshold);
        let back = filter_to_splitting(&w, &inst).unwrap();
        prop_assert!(inst.verify(&back).is_ok());
        let shape = data.shape();
        let bound = 1.0 / (2.0 * (k * k) as f64);
        for (x, y) in data.points.iter().zip(&data.labels) {
            prop_assert!((shape.forward(&w, x).unwrap() - y).abs() < bound);
        }
    }
}

#[test]
fn unsplittable_instance_refuses_extraction() {
    // Triangle of pairs: no 2-colouring.
    let inst = SetSplitInstance::new(3, 2, vec![vec![1, 2], vec![2, 3], vec![1, 3]]).unwrap();
    assert!(inst
        .brute_force_split(Execution::Sequential)
        .unwrap()
        .is_none());
    match filter_to_splitting(&[0.0; 6], &inst) {
        Err(Error::RiskNotBelowThreshold { risk, threshold }) => assert!(risk >= threshold),
        other => panic!("{other:?}"),
    }
}

#[test]
fn planted_instance_matches_experiment_scale() {
    let (inst, sol) = planted_instance(40, 760, 20, 0).unwrap();
    assert_eq!(inst.subsets().len(), 760);
    assert!(inst.subsets().iter().all(|c| c.len() == 20));
    inst.verify(&sol).unwrap();
    let data = build_dataset(&inst);
    assert_eq!(data.points.len(), 800);
    assert!(data.points.iter().all(|p| p.len() == 160));
    let w = splitting_to_filter(&inst, &sol).unwrap();
    assert_eq!(data.risk(&w).unwrap(), 0.0);
}

#[test]
fn brute_force_is_execution_independent() {
    let inst = cnf_to_instance(
        &CnfFormula::new(3, vec![vec![1, 2, -3], vec![-1, 3], vec![2]]).unwrap(),
        3,
    )
    .unwrap();
    let a = inst.brute_force_split(Execution::Parallel).unwrap();
    let b = inst.brute_force_split(Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert!(a.is_some());
}
