//! Worker pool for per-observation parallelism.
//!
//! The pool size is capped by the `RPMIXL_THREADS` environment variable
//! (read once). Work is always split per observation, collected in index
//! order, and reduced sequentially by the caller, so results are bit
//! identical for any worker count.

use std::sync::OnceLock;

use rayon::prelude::*;

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

fn pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("RPMIXL_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build worker pool")
    })
}

/// Applies `f` to every index in `0..n` on the worker pool and returns the
/// results in index order.
pub fn map_ordered<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    pool().install(|| (0..n).into_par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_matches_serial_bitwise() {
        let f = |i: usize| {
            let x = i as f64 + 0.1;
            (x.sin() * x.exp()).ln_1p()
        };
        let parallel = map_ordered(10_000, f);
        let serial: Vec<f64> = (0..10_000).map(f).collect();
        assert_eq!(parallel.len(), serial.len());
        for (a, b) in parallel.iter().zip(serial.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
