//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps below run on the current rayon pool;
//! without it they are plain iterators. Every helper collects results in index
//! order, so outputs do not depend on the number of worker threads. Reductions
//! are always done sequentially by the caller on the collected vector.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Environment variable that caps internal parallelism for the CLI.
pub const THREADS_ENV: &str = "ABREU_BVP_THREADS";

pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().with_min_len(64).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().with_min_len(16).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Thread count requested through [`THREADS_ENV`], defaulting to one.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Runs `op` with internal parallelism capped at `threads`.
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
        {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}
