//! Row- and item-level data parallelism with a sequential fallback.
//!
//! With the `parallel` feature enabled, work is spread over the rayon
//! global pool (or whichever pool the caller `install`s). Without it
//! every helper degrades to a plain iterator. Results are identical in
//! both modes: each row or item is computed independently and written
//! to its own slot, so no reduction order depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many output values the helpers stay sequential.
pub const MIN_PARALLEL_LEN: usize = 2048;

/// Calls `f(row_index, row)` for every `width`-sized row of `data`.
pub fn for_each_row<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Send + Sync,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        if data.len() >= MIN_PARALLEL_LEN {
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(y, row)| f(y, row));
            return;
        }
    }
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if items.len() > 1 {
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Whether this build was compiled with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
