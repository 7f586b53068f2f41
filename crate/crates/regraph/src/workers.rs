//! Worker-count resolution for parallel stages.

/// Environment variable that overrides any configured worker count.
pub const WORKERS_ENV: &str = "REGRAPH_WORKERS";

/// `REGRAPH_WORKERS` if set to a positive integer, else `configured`, else
/// the machine's available parallelism.
pub fn worker_count(configured: Option<usize>) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .or(configured.filter(|n| *n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` inside a rayon pool of `workers` threads.
pub fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("cannot start {workers} worker threads ({e}), using the global pool");
            f()
        }
    }
}
