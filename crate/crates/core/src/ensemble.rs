//! Replica ensembles.
//!
//! Replicas are indexed `0..n` and each one draws only from its own
//! substreams, so the output vector is identical for every worker count.
//! With the `parallel` feature the map runs on a rayon pool; without it, or
//! with [`Execution::Sequential`], it is a plain loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Number of worker threads; 0 uses rayon's default.
    Parallel(usize),
}

impl Execution {
    pub fn from_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel(workers)
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel(0)
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over replica indices `0..n`, preserving index order.
pub fn map_replicas<T, F>(n: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel(workers) => {
            let run = || (0..n).into_par_iter().map(&f).collect();
            if workers == 0 {
                run()
            } else {
                match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                    Ok(pool) => pool.install(run),
                    Err(_) => run(),
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel(_) => (0..n).map(f).collect(),
    }
}

/// Folds replicas in fixed-size chunks: `map` each chunk, then combine the
/// chunk results in index order. The chunking depends only on `chunk`, never
/// on the worker count.
pub fn fold_chunks<A, M, C>(n: u64, chunk: u64, exec: Execution, map: M, mut combine: C) -> Option<A>
where
    A: Send,
    M: Fn(std::ops::Range<u64>) -> A + Sync + Send,
    C: FnMut(A, A) -> A,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let parts = map_replicas(chunks, exec, |c| map(c * chunk..((c + 1) * chunk).min(n)));
    let mut iter = parts.into_iter();
    let first = iter.next()?;
    Some(iter.fold(first, &mut combine))
}
