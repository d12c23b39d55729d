//! Execution mode for grid sweeps.
//!
//! Sweeps map a pure function over an indexed grid and reduce sequentially in
//! index order, so results do not depend on the mode or the thread count.

use std::sync::OnceLock;

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

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CONTACTFORGE_THREADS";

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(k) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&k| k > 0)
        {
            b = b.num_threads(k);
        }
        b.build().expect("thread pool")
    })
}

#[cfg(not(feature = "parallel"))]
#[allow(dead_code)]
fn pool() -> &'static () {
    static UNIT: OnceLock<()> = OnceLock::new();
    UNIT.get_or_init(|| ())
}

/// Maps `f` over `0..len`, preserving index order in the output.
pub fn map_indexed<T, F>(mode: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            pool().install(|| (0..len).into_par_iter().map(&f).collect())
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(mode: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_indexed(mode, items.len(), |i| f(&items[i]))
}

/// Number of workers a parallel sweep would use.
pub fn worker_count(mode: Execution) -> usize {
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => pool().current_num_threads(),
        _ => 1,
    }
}
