//! Execution strategy for embarrassingly parallel loops.
//!
//! Work items are always evaluated by a pure closure and collected in input
//! order, so `Sequential` and `Parallel` produce bit-identical results. Without
//! the `parallel` feature, `Parallel` silently runs sequentially.

/// Environment variable read by [`init_thread_pool_from_env`].
pub const THREADS_ENV: &str = "NONLOCAL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => par_map(items, f),
        }
    }

    pub fn map_range<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let idx: Vec<usize> = (0..len).collect();
        self.map(&idx, |&i| f(i))
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sizes the global worker pool from `NONLOCAL_THREADS`. When the variable is
/// unset, empty or zero the pool uses one thread per logical CPU.
///
/// Returns the number of worker threads in effect.
pub fn init_thread_pool_from_env() -> usize {
    let requested = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    init_thread_pool(requested)
}

#[cfg(feature = "parallel")]
pub fn init_thread_pool(threads: Option<usize>) -> usize {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    // A pool that already exists keeps its size.
    let _ = builder.build_global();
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
pub fn init_thread_pool(_threads: Option<usize>) -> usize {
    1
}
