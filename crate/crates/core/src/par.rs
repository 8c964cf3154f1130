//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split per row (or per item) and results are written to fixed
//! positions, so the output never depends on scheduling.

use ndarray::{Array2, ArrayViewMut1, Axis};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(i, row_i)` for every row of `out`.
pub fn for_each_row_mut<F>(out: &mut Array2<f64>, f: F)
where
    F: Fn(usize, ArrayViewMut1<'_, f64>) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.axis_iter_mut(Axis(0))
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Evaluates `f` on `0..len` and returns the results in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Runs two closures, possibly concurrently.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

/// Whether this build was compiled with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
