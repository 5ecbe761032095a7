//! Row-parallel helpers. With the `parallel` feature these dispatch to rayon;
//! without it they run the same closures sequentially, so both builds produce
//! bitwise-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fills `out` row by row; `f(y, row)` writes one row of `width` values.
pub fn fill_rows<T, F>(out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

/// Evaluates `f` for every index in `0..n` and returns results in index order.
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

/// Sums per-row partial sums in row order, so the result does not depend on
/// how rows were scheduled.
pub fn sum_rows<F>(height: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(height, f).into_iter().sum()
}

/// Runs `f` inside a pool of `jobs` workers (or inline when the `parallel`
/// feature is off). `jobs == 0` uses the global pool.
pub fn with_jobs<T, F>(jobs: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        if jobs == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}
