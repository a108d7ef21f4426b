//! Deterministic parallel helpers.
//!
//! Work is split into fixed-size chunks independent of the thread count, and
//! per-chunk results are merged in chunk order, so results are bit-identical
//! for any worker count.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per chunk for reductions and chunked random streams.
pub const CHUNK: usize = 4096;

pub fn chunk_ranges(n: usize, chunk: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk)).map(move |c| c * chunk..((c + 1) * chunk).min(n))
}

/// `map` every chunk of `0..n` and merge the results in chunk order.
pub fn chunked_reduce<T, M, R>(n: usize, chunk: usize, map: M, merge: R) -> Option<T>
where
    T: Send,
    M: Fn(Range<usize>) -> T + Sync + Send,
    R: Fn(T, T) -> T,
{
    let parts = map_chunks(n, chunk, map);
    parts.into_iter().reduce(merge)
}

/// `map` every chunk of `0..n`, returning results in chunk order.
pub fn map_chunks<T, M>(n: usize, chunk: usize, map: M) -> Vec<T>
where
    T: Send,
    M: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges: Vec<Range<usize>> = chunk_ranges(n, chunk).collect();
    #[cfg(feature = "parallel")]
    {
        ranges.into_par_iter().map(map).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.into_iter().map(map).collect()
    }
}

/// Ordered parallel map over `0..n`.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Run `f` on a pool with `workers` threads (0 = machine default).
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T: Send>(_workers: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}
