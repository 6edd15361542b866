//! Index-addressed work distribution.
//!
//! Every parallel stage in the engine is written as "compute item `i` from
//! `i` alone", and results are always gathered in index order. An executor
//! only decides *where* items run, so swapping [`Sequential`] for a thread
//! pool never changes a single bit of output.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(0), …, f(n-1)` and return the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Number of workers, for reporting.
    fn workers(&self) -> usize {
        1
    }
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Collect a vector of results, keeping the lowest-index error.
pub(crate) fn collect_results<T>(items: Vec<crate::Result<T>>) -> crate::Result<Vec<T>> {
    items.into_iter().collect()
}
