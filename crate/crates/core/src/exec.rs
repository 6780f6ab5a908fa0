//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) work is spread over a rayon
//! thread pool. Without it, or with [`Workers::Sequential`], the same closures
//! run in a plain loop. Results are always returned in input order, so the
//! degree of parallelism never changes an output.

use serde::{Deserialize, Serialize};

/// How many threads a batch operation may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Workers {
    /// Single-threaded loop on the calling thread.
    Sequential,
    /// rayon's global pool (one thread per core).
    #[default]
    Auto,
    /// A dedicated pool with exactly this many threads.
    Threads(usize),
}

impl Workers {
    /// `0` means [`Workers::Auto`], `1` means [`Workers::Sequential`].
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => Workers::Auto,
            1 => Workers::Sequential,
            n => Workers::Threads(n),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self != Workers::Sequential
    }
}

/// Map `f` over `items`, preserving order.
pub fn map<T, R, F>(workers: Workers, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match workers {
            Workers::Sequential => {}
            Workers::Auto => return items.par_iter().map(f).collect(),
            Workers::Threads(n) => {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    return pool.install(|| items.par_iter().map(f).collect());
                }
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    items.iter().map(f).collect()
}

/// Fallible [`map`]; the first error in input order is returned.
pub fn try_map<T, R, E, F>(workers: Workers, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(workers, items, f).into_iter().collect()
}

/// Map over `0..n`, preserving order.
pub fn map_range<R, F>(workers: Workers, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(workers, &idx, |&i| f(i))
}
