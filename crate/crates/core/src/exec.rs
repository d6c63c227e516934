//! Execution strategy for the data-parallel loops (Monte Carlo, restarts,
//! grids, brute force). Results never depend on the strategy: every work item
//! gets its own RNG stream and outputs are collected in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` when the crate is built with the `parallel` feature.
    pub fn available() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Smallest index in `0..n` for which `f` returns `Some`.
    pub fn find_first<T, F>(self, n: u64, f: F) -> Option<T>
    where
        T: Send,
        F: Fn(u64) -> Option<T> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().find_map_first(f)
            }
            _ => (0..n).find_map(f),
        }
    }
}

/// Independent ChaCha8 stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn strategies_agree() {
        let f = |i: usize| {
            let mut r = stream_rng(7, i as u64);
            r.random::<u64>()
        };
        assert_eq!(
            Execution::Sequential.map(64, f),
            Execution::Parallel.map(64, f)
        );
    }

    #[test]
    fn find_first_is_lowest_index() {
        let hit = |i: u64| (i % 7 == 3 && i > 10).then_some(i);
        assert_eq!(Execution::Parallel.find_first(10_000, hit), Some(17));
        assert_eq!(Execution::Sequential.find_first(10_000, hit), Some(17));
        assert_eq!(Execution::Parallel.find_first(5, hit), None);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, 0).random();
        let b: u64 = stream_rng(1, 1).random();
        assert_ne!(a, b);
    }
}
