//! Deterministic trial execution.
//!
//! Experiments fan out over trials (or grid cells) with one independent
//! random stream per index, derived from the base seed. Results come back
//! ordered by index, so the merged output is identical whether the map ran
//! on a thread pool or inline — parallelism can never change a CSV.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream for work item `index` under `base_seed`.
///
/// Every stochastic quantity in a trial must flow from this stream and
/// nothing else; that makes `(base_seed, index)` a complete replay key.
pub fn stream_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(index))
}

/// Map `f` over `0..n`, collecting results in index order.
///
/// Runs on the rayon pool when the `parallel` feature is enabled (the
/// default) and inline otherwise; outputs are bitwise identical either way.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Always-sequential map with the same contract as [`map_indexed`]; exists
/// so benchmarks can compare the two execution modes within one build.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
