//! Worst-case training sets: CNF to Equal-3SAT to Set-Splitting-by-2-Sets,
//! lifting to `k` parts, and the training set whose low-risk filters are
//! exactly the splittings.

pub mod cnf;
pub mod dataset;
pub mod reduction;
pub mod splitting;

pub use cnf::{parse_dimacs, CnfFormula};
pub use dataset::{
    block_embed, build_dataset, filter_to_splitting, no_overlap_forward, planted_instance,
    risk_threshold, splitting_to_filter, HardDataset,
};
pub use reduction::{cnf_to_instance, equal3sat_to_split2, to_equal_3sat};
pub use splitting::{SetSplitInstance, SplittingSolution, BRUTE_FORCE_LIMIT};
