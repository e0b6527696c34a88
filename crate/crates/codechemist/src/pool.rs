//! Bounded worker pool for fanning out independent work items.
//!
//! Sandbox executions and sampling batches are embarrassingly parallel:
//! every (program, input) pair is independent and results are folded in a
//! fixed order afterwards, so scheduling never changes an outcome. With the
//! `parallel` feature (on by default) `map` runs on a dedicated rayon pool
//! sized to the job limit; without it, or with `jobs = 1`, it degrades to a
//! plain sequential loop.

/// A bounded map-over-items executor.
#[derive(Debug)]
pub struct WorkerPool {
    jobs: usize,
    #[cfg(feature = "parallel")]
    inner: Option<rayon::ThreadPool>,
}

impl WorkerPool {
    /// `jobs = 0` means one worker per available CPU.
    pub fn new(jobs: usize) -> Self {
        let jobs = if jobs == 0 { default_jobs() } else { jobs };
        #[cfg(feature = "parallel")]
        {
            let inner = if jobs > 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .thread_name(|i| format!("codechemist-worker-{i}"))
                    .build()
                    .ok()
            } else {
                None
            };
            WorkerPool { jobs, inner }
        }
        #[cfg(not(feature = "parallel"))]
        {
            WorkerPool { jobs }
        }
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    /// Maps `op` over `items`, preserving input order in the output.
    pub fn map<T, R, F>(&self, items: Vec<T>, op: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.inner {
            use rayon::prelude::*;
            return pool.install(|| items.into_par_iter().map(op).collect());
        }
        Self::map_sequential(items, op)
    }

    /// The sequential baseline, always available regardless of features.
    pub fn map_sequential<T, R, F>(items: Vec<T>, op: F) -> Vec<R>
    where
        F: Fn(T) -> R,
    {
        items.into_iter().map(op).collect()
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        WorkerPool::new(0)
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let pool = WorkerPool::new(4);
        let out = pool.map((0..100).collect(), |i| i * 2);
        assert_eq!(out, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let pool = WorkerPool::new(3);
        let items: Vec<u64> = (0..50).collect();
        let par = pool.map(items.clone(), |i| i * i + 1);
        let seq = WorkerPool::map_sequential(items, |i| i * i + 1);
        assert_eq!(par, seq);
    }

    #[test]
    fn zero_jobs_falls_back_to_cpu_count() {
        let pool = WorkerPool::new(0);
        assert!(pool.jobs() >= 1);
    }
}
