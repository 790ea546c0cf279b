//! Chunked map over index ranges, parallel with the `parallel` feature.

use std::ops::Range;

/// How data-parallel loops are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon global pool. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

const MAX_CHUNKS: usize = 64;

/// Splits `0..len` into contiguous chunks of at least `min_chunk` items and
/// maps each one. Results come back in chunk order regardless of execution.
pub(crate) fn map_chunks<T, F>(exec: Execution, len: usize, min_chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk_len(len, min_chunk.max(1));
    let ranges: Vec<Range<usize>> = (0..len)
        .step_by(chunk.max(1))
        .map(|start| start..(start + chunk).min(len))
        .collect();
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            ranges.into_par_iter().map(f).collect()
        }
        _ => ranges.into_iter().map(f).collect(),
    }
}

/// Maps every index in `0..len`, preserving order.
pub(crate) fn map_each<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Chunk boundaries depend only on `len`, so order-sensitive reductions
/// (such as merged covariance shards) give identical bits in either mode.
fn chunk_len(len: usize, min_chunk: usize) -> usize {
    len.div_ceil(MAX_CHUNKS).max(min_chunk)
}
