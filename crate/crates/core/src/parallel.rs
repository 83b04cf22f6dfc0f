//! Execution strategy for the embarrassingly parallel loops (Monte Carlo
//! trials, threshold probes, ISD grid search).
//!
//! Every parallel map preserves input order, so results are identical for any
//! worker count. With the `parallel` feature disabled all strategies run on
//! the calling thread.

/// How to run an indexed map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    /// Plain iterator on the calling thread.
    Sequential,
    /// rayon global pool.
    #[default]
    Parallel,
    /// Dedicated pool with this many worker threads (1 behaves as `Sequential`).
    Workers(usize),
}

impl Exec {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Exec::Parallel,
            Some(0 | 1) => Exec::Sequential,
            Some(n) => Exec::Workers(n),
        }
    }

    /// Number of tasks worth launching at once.
    pub fn width(self) -> usize {
        match self {
            Exec::Sequential => 1,
            Exec::Workers(w) => w.max(1),
            #[cfg(feature = "parallel")]
            Exec::Parallel => rayon::current_num_threads().max(1),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => 1,
        }
    }

    /// `f(0), f(1), ..., f(n-1)` collected in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential | Exec::Workers(0 | 1) => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Exec::Workers(w) => {
                use rayon::prelude::*;
                match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                    Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
                    Err(_) => (0..n).map(f).collect(),
                }
            }
            #[cfg(not(feature = "parallel"))]
            _ => (0..n).map(f).collect(),
        }
    }

    /// Maps over a slice, preserving order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        self.map_indexed(items.len(), |i| f(&items[i]))
    }
}
