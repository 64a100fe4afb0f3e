//! Dispatch between rayon and plain iteration.
//!
//! Every hot loop in this crate is a map over independent items (trees,
//! instances, dictionary columns) collected in index order, so a single
//! indexed-map primitive covers all call sites. With the `parallel` feature
//! disabled the same call sites compile to sequential loops. Results are
//! collected in index order either way, which keeps downstream folds
//! deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Maps `f` over a slice, collecting results in input order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Like `map_indexed` but for fallible maps; the first error (by index) wins.
pub fn try_map_indexed<R, F>(n: usize, f: F) -> crate::Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> crate::Result<R> + Sync + Send,
{
    let out = map_indexed(n, f);
    out.into_iter().collect()
}
