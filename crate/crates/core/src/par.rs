//! Thin data-parallel helpers. Fall back to sequential loops without the
//! `parallel` feature so the crate also builds for single-threaded targets.

/// Calls `f(offset, chunk)` for consecutive chunks of `out`.
pub(crate) fn for_each_chunk_mut<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k * chunk, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k * chunk, c));
    }
}

/// Maps `f` over `0..n` and collects in order.
pub(crate) fn map_collect<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `out[c][r] = src[r][c]` for a `rows × cols` row-major `src`.
pub(crate) fn transpose<T: Copy + Send + Sync>(src: &[T], rows: usize, cols: usize, out: &mut [T]) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(out.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return;
    }
    let per = (4096 / rows).max(1);
    for_each_chunk_mut(out, per * rows, |off, chunk| {
        let c0 = off / rows;
        for (k, o) in chunk.iter_mut().enumerate() {
            *o = src[(k % rows) * cols + c0 + k / rows];
        }
    });
}
