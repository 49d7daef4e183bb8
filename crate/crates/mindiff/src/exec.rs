//! Execution strategy for embarrassingly parallel work.
//!
//! Repeated training runs and sweep cells are independent of each other, so
//! they can be mapped over a worker pool. Results are collected by input
//! index, which keeps output ordering (and therefore every downstream
//! artifact) identical between sequential and parallel execution.
//!
//! The `parallel` cargo feature gates the rayon dependency. Without it every
//! mode degrades to sequential execution but the API stays the same.

/// How to schedule independent tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    /// Run tasks one after another on the calling thread.
    Sequential,
    /// Run tasks on the global rayon pool.
    Parallel,
    /// Run tasks on a dedicated pool with the given number of threads.
    ParallelWith(usize),
}

impl Execution {
    /// Map `--jobs N` style input onto an execution mode. `1` means
    /// sequential; anything larger is a bounded pool.
    pub fn with_jobs(jobs: usize) -> Execution {
        if jobs <= 1 {
            Execution::Sequential
        } else {
            Execution::ParallelWith(jobs)
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Sequential
    }
}

/// Apply `f` to every item, honoring the execution mode. Output order always
/// matches input order.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(exec: Execution, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Sequential => items.into_iter().map(f).collect(),
        Execution::Parallel => items.into_par_iter().map(f).collect(),
        Execution::ParallelWith(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("failed to build worker pool");
            pool.install(|| items.into_par_iter().map(f).collect())
        }
    }
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(_exec: Execution, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}
