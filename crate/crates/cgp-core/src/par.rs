//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) the helpers fan work out over the
//! rayon pool; without it they run the same closures sequentially. Both paths
//! visit items in index order and return results in index order, so outputs
//! are bit-identical whichever path runs and however many workers the pool
//! has.

/// True when this build dispatches through rayon.
pub const PARALLEL: bool = cfg!(feature = "parallel");

#[cfg(feature = "parallel")]
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Fixed partition of `0..rows` into half-open ranges of at most `chunk` rows.
/// The partition depends only on `chunk`, never on worker count.
pub fn chunk_ranges(rows: usize, chunk: usize) -> Vec<(usize, usize)> {
    let chunk = chunk.max(1);
    (0..rows)
        .step_by(chunk)
        .map(|lo| (lo, (lo + chunk).min(rows)))
        .collect()
}
