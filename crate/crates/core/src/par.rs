//! Data-parallel loop helpers.
//!
//! With the `parallel` feature these dispatch to rayon, otherwise they run
//! sequentially. Reductions are split into fixed-size chunks whose partial
//! results are combined in index order, so both builds produce bitwise
//! identical results regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Reduction chunk length. Must not depend on the thread count.
const CHUNK: usize = 4096;

/// Whether the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
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

/// Calls `f(i, &mut items[i])` for every element.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Calls `f(chunk_index, chunk)` over consecutive chunks of length `len`.
pub fn for_each_chunk_mut<T, F>(items: &mut [T], len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_chunks_mut(len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Like [`for_each_chunk_mut`] with a per-task scratch value built by `init`.
pub fn for_each_chunk_mut_init<T, S, I, F>(items: &mut [T], len: usize, init: I, f: F)
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_chunks_mut(len)
            .enumerate()
            .for_each_init(&init, |s, (i, c)| f(s, i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        items
            .chunks_mut(len)
            .enumerate()
            .for_each(|(i, c)| f(&mut s, i, c));
    }
}

/// Deterministic chunked reduction over `0..n`.
///
/// `fold` accumulates one index into a chunk-local accumulator created by
/// `init`; chunk accumulators are merged left to right with `merge`.
pub fn reduce<T, I, F, M>(n: usize, init: I, fold: F, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(&mut T, usize) + Sync + Send,
    M: Fn(&mut T, T),
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_collect(chunks, |c| {
        let mut acc = init();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            fold(&mut acc, i);
        }
        acc
    });
    let mut total = init();
    for p in partial {
        merge(&mut total, p);
    }
    total
}

/// Deterministic `sum_i f(i)`.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    reduce(n, || 0.0, |acc, i| *acc += f(i), |a, b| *a += b)
}
