//! Data-parallel helpers. With the `parallel` feature (default) these fan out
//! over rayon; without it they fall back to plain iteration. Callers must not
//! depend on evaluation order: results are always collected in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_collect<I, T, F>(range: I, f: F) -> Vec<T>
where
    I: IntoParallelIterator,
    I::Iter: IndexedParallelIterator,
    T: Send,
    F: Fn(I::Item) -> T + Sync + Send,
{
    range.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<I, T, F>(range: I, f: F) -> Vec<T>
where
    I: IntoIterator,
    F: Fn(I::Item) -> T,
{
    range.into_iter().map(f).collect()
}
