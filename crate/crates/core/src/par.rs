//! Thin switch between rayon and plain iteration.
//!
//! The iteration helpers produce bitwise-identical output with or without the
//! `parallel` feature: work items are independent and results are written to
//! fixed positions, so no reduction order depends on scheduling. faer kernels
//! may block differently under `Par::rayon` and round differently.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Parallelism handed to faer kernels.
pub(crate) fn faer_par() -> faer::Par {
    #[cfg(feature = "parallel")]
    {
        faer::Par::rayon(0)
    }
    #[cfg(not(feature = "parallel"))]
    {
        faer::Par::Seq
    }
}

/// Evaluates `f` on `0..n`, collecting in index order.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

/// Runs `f(chunk_index, chunk)` over consecutive `chunk_len`-sized chunks.
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Walks three equally sized buffers in lock-step chunks of `chunk_len`,
/// returning one value per chunk in chunk order.
pub(crate) fn map_zip3_chunks<R, F>(
    a: &[f64],
    b: &mut [f64],
    c: &mut [f64],
    chunk_len: usize,
    f: F,
) -> Vec<R>
where
    R: Send,
    F: Fn(&[f64], &mut [f64], &mut [f64]) -> R + Sync + Send,
{
    debug_assert!(a.len() == b.len() && b.len() == c.len());
    if chunk_len == 0 {
        return Vec::new();
    }
    #[cfg(feature = "parallel")]
    {
        a.par_chunks(chunk_len)
            .zip(b.par_chunks_mut(chunk_len))
            .zip(c.par_chunks_mut(chunk_len))
            .map(|((x, y), z)| f(x, y, z))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks(chunk_len)
            .zip(b.chunks_mut(chunk_len))
            .zip(c.chunks_mut(chunk_len))
            .map(|((x, y), z)| f(x, y, z))
            .collect()
    }
}
