//! Bounded worker pool for data-parallel loops.
//!
//! With the `parallel` feature (default) a [`Workers`] with more than one
//! job runs on a dedicated rayon pool. Without the feature, or with
//! `jobs == 1`, every map runs sequentially on the calling thread. Results
//! always come back in input order, so reductions over them are
//! deterministic regardless of the pool width.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone)]
pub struct Workers {
    jobs: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers").field("jobs", &self.jobs).finish()
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::new(default_jobs())
    }
}

/// Logical CPU count, falling back to 1.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl Workers {
    pub fn new(jobs: usize) -> Self {
        let jobs = jobs.max(1);
        #[cfg(feature = "parallel")]
        {
            let pool = (jobs > 1)
                .then(|| {
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(jobs)
                        .thread_name(|i| format!("minrepair-worker-{i}"))
                        .build()
                        .ok()
                })
                .flatten()
                .map(Arc::new);
            Self { jobs, pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self { jobs }
        }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }
}
