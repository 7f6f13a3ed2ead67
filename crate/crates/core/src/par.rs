//! Data-parallel helpers with a sequential fallback.
//!
//! All reductions go through [`tree_sum`] over per-chunk partials collected
//! in index order, so results are bit-identical whatever the worker count.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Route every helper through the sequential path, even when the
/// `parallel` feature is compiled in. Used by the benches.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Map `0..n` through `f`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Fill `out[i] = f(i)`.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
            return;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Pairwise sum with a fixed tree shape.
pub fn tree_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
        }
    }
}

/// Component-wise pairwise sum of fixed-width partials.
pub fn tree_sum_arrays<const M: usize>(xs: &[[f64; M]]) -> [f64; M] {
    match xs.len() {
        0 => [0.0; M],
        1 => xs[0],
        n => {
            let mid = n / 2;
            let a = tree_sum_arrays(&xs[..mid]);
            let b = tree_sum_arrays(&xs[mid..]);
            let mut out = [0.0; M];
            for k in 0..M {
                out[k] = a[k] + b[k];
            }
            out
        }
    }
}

const DOT_CHUNK: usize = 2048;

/// Deterministic dot product: fixed chunking, ordered partials, tree reduction.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len().div_ceil(DOT_CHUNK);
    let partials = map_indexed(chunks, |c| {
        let lo = c * DOT_CHUNK;
        let hi = (lo + DOT_CHUNK).min(a.len());
        a[lo..hi].iter().zip(&b[lo..hi]).map(|(x, y)| x * y).sum::<f64>()
    });
    tree_sum(&partials)
}

/// Workers available to the helpers right now.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            return rayon::current_num_threads();
        }
    }
    1
}

/// Install a global pool capped at `threads` workers (no-op without the
/// `parallel` feature). Fails silently if a pool already exists.
pub fn init_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Run `f` inside a dedicated pool of `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("thread pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
