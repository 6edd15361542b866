use ntci_core::Executor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Thread-pool executor; results are gathered in index order, so output does
/// not depend on the number of threads.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `threads = None` uses the available cores.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let n = match threads {
            Some(0) => return Err(CliError::invalid("threads", "must be >= 1")),
            Some(n) => n,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Output {
                stage: "threads",
                detail: e.to_string(),
            })?;
        Ok(RayonExecutor { pool })
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}
