/// Execution strategy for the data-parallel kernels.
///
/// `Parallel` runs on the global rayon pool when the crate is built with the
/// `parallel` feature and degrades to `Sequential` otherwise. Both strategies
/// produce identical results: work items are evaluated independently and
/// reduced in index order.
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

impl Execution {
    /// Evaluates `f(0..n)` and returns the results in index order.
    pub(crate) fn map_indices<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Runs two closures, concurrently when parallel.
    pub(crate) fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => rayon::join(a, b),
            _ => (a(), b()),
        }
    }
}
