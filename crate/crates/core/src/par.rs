//! Deterministic execution of the data-parallel kernels.
//!
//! Work is split into fixed-size chunks and per-chunk partial results are
//! merged in chunk order, so floating-point results do not depend on the
//! number of worker threads or on scheduling. The sequential path walks the
//! same chunks in the same order, which keeps both builds bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for the data-parallel kernels.
///
/// Kernels with a `_exec` variant accept this explicitly; the plain entry
/// points use [`Exec::preferred`]. The benchmark suite compares both.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    /// Single-threaded fallback.
    Sequential,
    /// Rayon thread-pool execution with ordered chunk merging.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Exec {
    /// The strategy this build was compiled to prefer.
    pub fn preferred() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Default for Exec {
    fn default() -> Self {
        Self::preferred()
    }
}

/// Items per chunk for event-indexed kernels.
pub(crate) const CHUNK: usize = 2048;

/// Rows per band for pixel-indexed kernels.
pub(crate) const ROW_BAND: usize = 16;

/// Maps fixed-size chunks of `items` to partials, returned in chunk order.
/// The closure receives the global index of the chunk's first item.
pub(crate) fn chunk_map<T, A, F>(exec: Exec, items: &[T], f: F) -> Vec<A>
where
    T: Sync,
    A: Send,
    F: Fn(usize, &[T]) -> A + Sync,
{
    match exec {
        Exec::Sequential => items
            .chunks(CHUNK)
            .enumerate()
            .map(|(i, c)| f(i * CHUNK, c))
            .collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => items
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(i, c)| f(i * CHUNK, c))
            .collect(),
    }
}

/// Maps row bands `start..end` of an `h`-row image to partials, in band order.
pub(crate) fn band_map<A, F>(exec: Exec, h: usize, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync,
{
    let bands = h.div_ceil(ROW_BAND);
    let range = |b: usize| b * ROW_BAND..((b + 1) * ROW_BAND).min(h);
    match exec {
        Exec::Sequential => (0..bands).map(|b| f(range(b))).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..bands).into_par_iter().map(|b| f(range(b))).collect(),
    }
}

/// Like [`band_map`], but additionally hands each band a mutable view of its
/// rows in `out` (flat row-major storage, `w` values per row).
pub(crate) fn band_map_mut<T, A, F>(exec: Exec, h: usize, w: usize, out: &mut [T], f: F) -> Vec<A>
where
    T: Send,
    A: Send,
    F: Fn(std::ops::Range<usize>, &mut [T]) -> A + Sync,
{
    assert_eq!(out.len(), h * w);
    let band_rows = |i: usize| i * ROW_BAND..((i + 1) * ROW_BAND).min(h);
    match exec {
        Exec::Sequential => out
            .chunks_mut(ROW_BAND * w)
            .enumerate()
            .map(|(i, c)| f(band_rows(i), c))
            .collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => out
            .par_chunks_mut(ROW_BAND * w)
            .enumerate()
            .map(|(i, c)| f(band_rows(i), c))
            .collect(),
    }
}

/// Folds sparse `(index, value)` contributions into a dense accumulator,
/// walking the partial lists in order.
pub(crate) fn merge_sparse(acc: &mut [f64], partials: &[Vec<(u32, f64)>]) {
    for part in partials {
        for &(idx, v) in part {
            acc[idx as usize] += v;
        }
    }
}
