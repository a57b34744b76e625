//! Index-ordered map over independent work items.
//!
//! With the `parallel` feature (default) work is spread over the rayon
//! pool; without it everything runs on the calling thread. Results come
//! back in index order either way, so output never depends on the number
//! of threads.

/// How a batch of independent items is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon pool when compiled with `parallel`, otherwise sequential.
    #[default]
    Auto,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Auto
    }
}

/// `f(0), f(1), …, f(n − 1)` in order.
pub fn map_indexed<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// `f` over a slice, results in slice order.
pub fn map_slice<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indexed(exec, items.len(), |i| f(&items[i]))
}

/// Runs `body` inside a pool with `threads` workers (0 keeps the global
/// pool). A no-op wrapper without the `parallel` feature.
pub fn with_threads<R: Send>(threads: usize, body: impl FnOnce() -> R + Send) -> crate::Result<R> {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::InvalidInput(format!("thread pool: {e}")))?;
        return Ok(pool.install(body));
    }
    let _ = threads;
    Ok(body())
}
