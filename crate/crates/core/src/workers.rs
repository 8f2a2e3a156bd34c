//! Worker pool sizing. Every parallel operation runs on the rayon pool it is
//! invoked from, so callers pick the worker count with [`with_workers`].

pub const WORKERS_ENV: &str = "GEOSEG_WORKERS";

/// Worker count from `GEOSEG_WORKERS`, defaulting to the number of logical cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("failed to build worker pool")
        .install(f)
}

/// Run `f` on a pool sized by [`worker_count`].
pub fn with_env_workers<R, F>(f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    with_workers(worker_count(), f)
}
