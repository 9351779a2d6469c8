//! Data-parallel execution of independent work items.
//!
//! Work items are indexed `0..count`; results come back in index order, so
//! every reduction downstream is performed in a fixed order and output does
//! not depend on the number of threads. With the `parallel` feature disabled
//! both strategies run sequentially.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
    /// Evaluates `f(i)` for every `i` in `0..count` and returns the results in
    /// index order.
    pub fn map<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..count).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => (0..count).map(f).collect(),
        }
    }

    /// Same as [`Execution::map`] over `start..end`.
    pub fn map_range<T, F>(self, start: usize, end: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.map(end.saturating_sub(start), |i| f(start + i))
    }
}

/// Runs `f` on a pool of `workers` threads (or the global pool when `None`).
/// Without the `parallel` feature this just calls `f`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = workers {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("failed to build thread pool");
            return pool.install(f);
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = Execution::Sequential.map(1000, |i| i * i);
        let par = Execution::Parallel.map(1000, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(Execution::Parallel.map_range(5, 8, |i| i), vec![5, 6, 7]);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let a = with_workers(Some(1), || Execution::Parallel.map(100, |i| i as u64 * 3));
        let b = with_workers(Some(4), || Execution::Parallel.map(100, |i| i as u64 * 3));
        assert_eq!(a, b);
    }
}
